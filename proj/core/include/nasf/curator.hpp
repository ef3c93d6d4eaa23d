#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nasf/tensor.hpp"

namespace nasf {

/// An immutable labelled image set, pixels scaled to [0,1].
struct Dataset {
    Tensor images;                         // [N,C,H,W]
    std::vector<int> labels;               // values in [0, classes)
    std::vector<std::string> class_names;

    int size() const { return images.dim(0); }
    int classes() const { return static_cast<int>(class_names.size()); }
    std::vector<int> image_shape() const {
        return {images.dim(1), images.dim(2), images.dim(3)};
    }
};

/// The slice of a dataset owned by one rank: strided assignment
/// {i : i mod world_size == rank}. Shards are disjoint, cover the dataset,
/// and differ in size by at most one.
struct Shard {
    int rank = 0;
    int world_size = 1;
    std::vector<int> indices;
};

Shard shard(const Dataset& dataset, int rank, int world_size);

/// Expected size in rank/world terms, without building the index list.
int shard_size(int dataset_size, int rank, int world_size);

/// Loads the CIFAR-10 binary batches (data_batch_1..5.bin + test_batch.bin)
/// from `directory`. Each record is 1 label byte followed by 3072 pixel
/// bytes, channel-major R,G,B, each channel 32x32 row-major. Pixels are
/// divided by 255.
std::pair<Dataset, Dataset> load_cifar10(const std::string& directory);

/// Writes `dataset` as one CIFAR-style binary batch file; pixels are rounded
/// to the nearest 1/255 step. Used for fixtures and format round-trips.
void save_cifar10_batch(const Dataset& dataset, const std::string& path);

/// Deterministic desk-scale stand-in for CIFAR-10: every class gets a random
/// Gaussian-bump mean pattern, samples add N(0, 0.1) noise, pixels clamped to
/// [0,1]. Class counts differ by at most one and label order is shuffled.
std::pair<Dataset, Dataset> synthetic_dataset(std::uint64_t seed, int n_train,
                                              int n_test, int classes,
                                              const std::vector<int>& shape);

/// One minibatch: images gathered from the parent dataset plus labels.
struct Batch {
    Tensor images;
    std::vector<int> labels;
};

/// Epoch iterator over a shard: shuffles the shard indices with a generator
/// seeded by (epoch_seed, rank), then yields full batches and one final
/// partial batch if the shard size is not divisible.
class BatchStream {
public:
    BatchStream(const Dataset& dataset, const Shard& shard, int batch_size,
                std::uint64_t epoch_seed);

    std::optional<Batch> next();

    int batch_count() const;

private:
    const Dataset& dataset_;
    std::vector<int> order_;
    int batch_size_;
    std::size_t cursor_ = 0;
};

/// Dataset restricted to its first `n` examples (0 keeps everything).
/// Subsetting is how desk-scale runs stay small; the choice is recorded in
/// run logs.
Dataset subset(const Dataset& dataset, int n);

} // namespace nasf
