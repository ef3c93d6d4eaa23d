#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nasf/curator.hpp"
#include "nasf/descriptor.hpp"
#include "nasf/environment.hpp"
#include "nasf/network.hpp"

namespace nasf {

struct EvaluationConfig {
    int epochs = 1;           // 0 is allowed for untrained baselines
    int batch_size = 32;
    double learning_rate = 0.05;
    int train_subset = 0;     // first n examples; 0 keeps everything
    int test_subset = 0;
    std::uint64_t seed = 0;

    std::string to_json() const;
    static EvaluationConfig from_json(const std::string& text);
};

struct EvaluationResult {
    double test_accuracy = 0.0;   // in [0,1]; exactly 0 on failure (penalty)
    std::int64_t trainable_parameters = 0;
    double train_seconds = 0.0;   // wall time of the training loop only
    int epochs_run = 0;
    std::string status = "ok";    // "ok" or "failed"
    std::string reason;           // failure detail, empty when ok

    bool ok() const { return status == "ok"; }

    std::string to_json() const;
    static EvaluationResult from_json(const std::string& text);
};

/// Compiles the descriptor with cfg.seed, trains it with plain SGD on the
/// train subset and reports accuracy on the test subset. Deterministic given
/// (descriptor, data, cfg). Compile failures and divergence degrade to
/// status "failed" with accuracy 0 so a search over broken architectures
/// stays total.
/// `trained_out`, when given, receives the trained network (equivalence
/// tests and inspection).
EvaluationResult descriptor_evaluate(const Descriptor& desc,
                                     const Dataset& train, const Dataset& test,
                                     const EvaluationConfig& cfg,
                                     Network* trained_out = nullptr);

/// Data-parallel variant: every rank calls it collectively with an identical
/// descriptor and config. All ranks walk the same global batch stream the
/// local evaluator would see; each takes a strided slice of every batch,
/// and after each backward pass the flattened gradients are allreduce'd in
/// a fixed layer order, so every rank holds bitwise-identical parameters
/// after every step and the trained network matches local training on the
/// full batches up to floating-point reassociation. An 8-byte FNV-1a
/// descriptor hash is exchanged before training; disagreement is a protocol
/// error. Every rank returns the same result.
EvaluationResult distributed_descriptor_evaluate(const Descriptor& desc,
                                                 const Dataset& train,
                                                 const Dataset& test,
                                                 const EvaluationConfig& cfg,
                                                 Environment& env,
                                                 Network* trained_out = nullptr);

/// Gradients of all layers concatenated in topological order, weights before
/// biases, row-major inside each tensor. Length equals the trainable
/// parameter count.
std::vector<double> flatten_gradients(Network& network);

/// Inverse of flatten_gradients; a length mismatch is a protocol error.
void unflatten_gradients(Network& network, const std::vector<double>& values);

/// Parameter values in the same fixed order (equivalence checks, tests).
std::vector<double> flatten_parameters(Network& network);

} // namespace nasf
