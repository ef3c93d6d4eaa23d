#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nasf/curator.hpp"
#include "nasf/evaluator.hpp"
#include "nasf/search.hpp"

namespace nasf {

struct DataConfig {
    std::string source = "synthetic";   // synthetic | cifar10
    std::string data_dir;               // cifar10 batch directory
    int classes = 4;                    // synthetic
    std::vector<int> image_shape{1, 8, 8};
    int n_train = 1024;
    int n_test = 256;
    std::uint64_t seed = 1;
};

struct CommsConfig {
    int world_size = 1;
    std::string listen = "127.0.0.1:29950";
    double timeout_secs = 30.0;
};

/// The experiment configuration file: sections ga, eval, data, an optional
/// comms section for the distributed modes, and the top-level mode. Parsing
/// is strict: unknown keys anywhere are rejected by name.
struct RunConfig {
    GAConfig ga;
    EvaluationConfig eval;
    DataConfig data;
    CommsConfig comms;

    /// Canonical snapshot embedded in run logs and broadcast to workers.
    std::string to_json() const;

    static RunConfig from_json_text(const std::string& text);
    static RunConfig load(const std::string& path);

    /// Materializes (train, test) according to the data section.
    std::pair<Dataset, Dataset> load_data() const;

    void validate() const;
};

} // namespace nasf
