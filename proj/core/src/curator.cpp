#include "nasf/curator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nasf/errors.hpp"
#include "nasf/rng.hpp"

namespace nasf {

namespace {

constexpr int kCifarDim = 32;
constexpr int kCifarChannels = 3;
constexpr int kCifarPixels = kCifarChannels * kCifarDim * kCifarDim;  // 3072
constexpr int kCifarRecord = 1 + kCifarPixels;                        // 3073
constexpr int kCifarPerFile = 10000;

const char* kCifarClassNames[10] = {
    "airplane", "automobile", "bird", "cat",   "deer",
    "dog",      "frog",       "horse", "ship", "truck",
};

void load_cifar_file(const std::string& path, Tensor& images,
                     std::vector<int>& labels, int offset) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open \"" + path + "\"");
    }
    in.seekg(0, std::ios::end);
    const auto file_size = static_cast<long long>(in.tellg());
    const long long expected =
        static_cast<long long>(kCifarRecord) * kCifarPerFile;
    if (file_size != expected) {
        throw LoadError("\"" + path + "\" has " + std::to_string(file_size) +
                        " bytes, expected " + std::to_string(expected));
    }
    in.seekg(0, std::ios::beg);

    std::vector<unsigned char> record(kCifarRecord);
    for (int i = 0; i < kCifarPerFile; ++i) {
        in.read(reinterpret_cast<char*>(record.data()), kCifarRecord);
        if (!in) {
            throw LoadError("short read in \"" + path + "\"");
        }
        const int label = record[0];
        if (label > 9) {
            throw LoadError("\"" + path + "\" record " + std::to_string(i) +
                            " has label byte " + std::to_string(label));
        }
        labels[offset + i] = label;
        double* dst = images.data() +
                      static_cast<std::size_t>(offset + i) * kCifarPixels;
        for (int p = 0; p < kCifarPixels; ++p) {
            dst[p] = record[1 + p] / 255.0;
        }
    }
}

} // namespace

std::pair<Dataset, Dataset> load_cifar10(const std::string& directory) {
    const std::filesystem::path dir(directory);

    Dataset train;
    train.images = Tensor({5 * kCifarPerFile, kCifarChannels, kCifarDim, kCifarDim});
    train.labels.assign(5 * kCifarPerFile, 0);
    for (int b = 1; b <= 5; ++b) {
        const auto path = dir / ("data_batch_" + std::to_string(b) + ".bin");
        load_cifar_file(path.string(), train.images, train.labels,
                        (b - 1) * kCifarPerFile);
    }

    Dataset test;
    test.images = Tensor({kCifarPerFile, kCifarChannels, kCifarDim, kCifarDim});
    test.labels.assign(kCifarPerFile, 0);
    load_cifar_file((dir / "test_batch.bin").string(), test.images, test.labels, 0);

    for (const char* name : kCifarClassNames) {
        train.class_names.emplace_back(name);
        test.class_names.emplace_back(name);
    }
    return {std::move(train), std::move(test)};
}

void save_cifar10_batch(const Dataset& dataset, const std::string& path) {
    const auto shape = dataset.image_shape();
    if (shape != std::vector<int>{kCifarChannels, kCifarDim, kCifarDim}) {
        throw UsageError("CIFAR batch files hold 3x32x32 images");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw LoadError("cannot write \"" + path + "\"");
    }
    const int n = dataset.size();
    std::vector<unsigned char> record(kCifarRecord);
    for (int i = 0; i < n; ++i) {
        record[0] = static_cast<unsigned char>(dataset.labels[i]);
        const double* src =
            dataset.images.data() + static_cast<std::size_t>(i) * kCifarPixels;
        for (int p = 0; p < kCifarPixels; ++p) {
            const double clamped = std::clamp(src[p], 0.0, 1.0);
            record[1 + p] = static_cast<unsigned char>(
                std::lround(clamped * 255.0));
        }
        out.write(reinterpret_cast<const char*>(record.data()), kCifarRecord);
    }
    if (!out) {
        throw LoadError("write failed for \"" + path + "\"");
    }
}

std::pair<Dataset, Dataset> synthetic_dataset(std::uint64_t seed, int n_train,
                                              int n_test, int classes,
                                              const std::vector<int>& shape) {
    if (classes < 2) {
        throw ConfigError("synthetic dataset needs at least 2 classes");
    }
    if (shape.size() != 3) {
        throw ConfigError("synthetic dataset shape must be [C,H,W]");
    }
    if (n_train < 1 || n_test < 1) {
        throw ConfigError("synthetic dataset sizes must be >= 1");
    }
    const int channels = shape[0], height = shape[1], width = shape[2];

    Rng pattern_rng(Rng::mix(seed, 0x70617474));
    // Per-class mean pattern: a Gaussian bump at a class-specific center plus
    // a weak dense per-pixel offset, over a flat base level. The bump gives
    // spatial structure for convolutions; the dense offset keeps any two
    // classes linearly separable regardless of how close their centers land.
    const std::size_t image_size =
        static_cast<std::size_t>(channels) * height * width;
    struct ClassPattern {
        std::vector<double> mean;  // full image, before noise
    };
    std::vector<ClassPattern> patterns;
    patterns.reserve(classes);
    for (int k = 0; k < classes; ++k) {
        const double cy = pattern_rng.uniform_real(0.15, 0.85) * (height - 1);
        const double cx = pattern_rng.uniform_real(0.15, 0.85) * (width - 1);
        const double sigma = pattern_rng.uniform_real(0.12, 0.30) *
                             std::max(height, width);
        std::vector<double> amplitude(channels);
        for (int c = 0; c < channels; ++c) {
            amplitude[c] = pattern_rng.uniform_real(0.30, 0.60);
        }
        ClassPattern p;
        p.mean.resize(image_size);
        std::size_t idx = 0;
        for (int c = 0; c < channels; ++c) {
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x, ++idx) {
                    const double dy = y - cy;
                    const double dx = x - cx;
                    const double bump =
                        amplitude[c] * std::exp(-(dy * dy + dx * dx) /
                                                (2.0 * sigma * sigma));
                    const double offset = pattern_rng.uniform_real(-0.15, 0.15);
                    p.mean[idx] = 0.25 + bump + offset;
                }
            }
        }
        patterns.push_back(std::move(p));
    }

    auto make_split = [&](int n, std::uint64_t split_tag) {
        Dataset data;
        data.images = Tensor({n, channels, height, width});
        data.labels.resize(n);
        for (int k = 0; k < classes; ++k) {
            data.class_names.push_back("class_" + std::to_string(k));
        }

        // Balanced label list, then shuffled so label order does not alias
        // with sharding strides.
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) {
            labels[i] = i % classes;
        }
        Rng sample_rng(Rng::mix(seed, split_tag));
        sample_rng.shuffle(labels);
        data.labels = labels;

        for (int i = 0; i < n; ++i) {
            const ClassPattern& p = patterns[labels[i]];
            double* img = data.images.data() + i * image_size;
            for (std::size_t idx = 0; idx < image_size; ++idx) {
                img[idx] = std::clamp(p.mean[idx] + 0.1 * sample_rng.normal(),
                                      0.0, 1.0);
            }
        }
        return data;
    };

    return {make_split(n_train, 0x7472), make_split(n_test, 0x7465)};
}

Shard shard(const Dataset& dataset, int rank, int world_size) {
    const int n = dataset.size();
    if (world_size < 1 || rank < 0 || rank >= world_size) {
        throw ConfigError("invalid shard rank " + std::to_string(rank) +
                          " for world size " + std::to_string(world_size));
    }
    if (world_size > n) {
        throw ConfigError("world size " + std::to_string(world_size) +
                          " exceeds dataset size " + std::to_string(n));
    }
    Shard s;
    s.rank = rank;
    s.world_size = world_size;
    for (int i = rank; i < n; i += world_size) {
        s.indices.push_back(i);
    }
    return s;
}

int shard_size(int dataset_size, int rank, int world_size) {
    return dataset_size / world_size + (rank < dataset_size % world_size ? 1 : 0);
}

BatchStream::BatchStream(const Dataset& dataset, const Shard& shard,
                         int batch_size, std::uint64_t epoch_seed)
    : dataset_(dataset), order_(shard.indices), batch_size_(batch_size) {
    if (batch_size < 1) {
        throw ConfigError("batch size must be >= 1");
    }
    Rng rng(Rng::mix(epoch_seed, static_cast<std::uint64_t>(shard.rank)));
    rng.shuffle(order_);
}

int BatchStream::batch_count() const {
    return static_cast<int>((order_.size() + batch_size_ - 1) / batch_size_);
}

std::optional<Batch> BatchStream::next() {
    if (cursor_ >= order_.size()) {
        return std::nullopt;
    }
    const std::size_t take =
        std::min<std::size_t>(batch_size_, order_.size() - cursor_);
    const auto shape = dataset_.image_shape();
    const std::size_t image_size = Tensor::shape_product(shape);

    Batch batch;
    batch.images = Tensor({static_cast<int>(take), shape[0], shape[1], shape[2]});
    batch.labels.resize(take);
    for (std::size_t i = 0; i < take; ++i) {
        const int src_idx = order_[cursor_ + i];
        std::copy_n(dataset_.images.data() + src_idx * image_size, image_size,
                    batch.images.data() + i * image_size);
        batch.labels[i] = dataset_.labels[src_idx];
    }
    cursor_ += take;
    return batch;
}

Dataset subset(const Dataset& dataset, int n) {
    if (n <= 0 || n >= dataset.size()) {
        return dataset;
    }
    const auto shape = dataset.image_shape();
    const std::size_t image_size = Tensor::shape_product(shape);
    Dataset out;
    out.images = Tensor({n, shape[0], shape[1], shape[2]});
    std::copy_n(dataset.images.data(), static_cast<std::size_t>(n) * image_size,
                out.images.data());
    out.labels.assign(dataset.labels.begin(), dataset.labels.begin() + n);
    out.class_names = dataset.class_names;
    return out;
}

} // namespace nasf
