#include "nasf/evaluator.hpp"

#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "nasf/envelope.hpp"
#include "nasf/errors.hpp"
#include "nasf/layers.hpp"
#include "nasf/rng.hpp"

namespace nasf {

using nlohmann::json;

std::string EvaluationConfig::to_json() const {
    json doc;
    doc["epochs"] = epochs;
    doc["batch_size"] = batch_size;
    doc["learning_rate"] = learning_rate;
    doc["train_subset"] = train_subset;
    doc["test_subset"] = test_subset;
    doc["seed"] = seed;
    return doc.dump();
}

EvaluationConfig EvaluationConfig::from_json(const std::string& text) {
    EvaluationConfig cfg;
    try {
        const json doc = json::parse(text);
        cfg.epochs = doc.at("epochs").get<int>();
        cfg.batch_size = doc.at("batch_size").get<int>();
        cfg.learning_rate = doc.at("learning_rate").get<double>();
        cfg.train_subset = doc.at("train_subset").get<int>();
        cfg.test_subset = doc.at("test_subset").get<int>();
        cfg.seed = doc.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("evaluation config parse error: ") +
                          e.what());
    }
    if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.learning_rate <= 0) {
        throw ConfigError("evaluation config out of range");
    }
    return cfg;
}

std::string EvaluationResult::to_json() const {
    json doc;
    doc["test_accuracy"] = test_accuracy;
    doc["trainable_parameters"] = trainable_parameters;
    doc["train_seconds"] = train_seconds;
    doc["epochs_run"] = epochs_run;
    doc["status"] = status;
    doc["reason"] = reason;
    return doc.dump();
}

EvaluationResult EvaluationResult::from_json(const std::string& text) {
    EvaluationResult result;
    try {
        const json doc = json::parse(text);
        result.test_accuracy = doc.at("test_accuracy").get<double>();
        result.trainable_parameters = doc.at("trainable_parameters").get<std::int64_t>();
        result.train_seconds = doc.at("train_seconds").get<double>();
        result.epochs_run = doc.at("epochs_run").get<int>();
        result.status = doc.at("status").get<std::string>();
        result.reason = doc.at("reason").get<std::string>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("evaluation result parse error: ") +
                            e.what());
    }
    return result;
}

namespace {

using Clock = std::chrono::steady_clock;

EvaluationResult failure(const std::string& reason, std::int64_t parameters) {
    EvaluationResult result;
    result.status = "failed";
    result.reason = reason;
    result.test_accuracy = 0.0;  // penalty fitness keeps the search total
    result.trainable_parameters = parameters;
    return result;
}

int argmax_row(const Tensor& logits, int row) {
    int best = 0;
    for (int c = 1; c < logits.dim(1); ++c) {
        if (logits.at(row, c) > logits.at(row, best)) {
            best = c;
        }
    }
    return best;
}

/// Examples of `batch` at positions congruent to rank modulo world. An empty
/// slice leaves the image tensor in its default (unused) state.
Batch strided_slice(const Batch& batch, int rank, int world) {
    const int n = static_cast<int>(batch.labels.size());
    const int count = shard_size(n, rank, world);
    Batch micro;
    if (count == 0) {
        return micro;
    }
    const auto& shape = batch.images.shape();
    micro.images = Tensor({count, shape[1], shape[2], shape[3]});
    micro.labels.reserve(count);
    const std::size_t example_size = batch.images.size() / n;
    int written = 0;
    for (int j = rank; j < n; j += world) {
        std::copy_n(batch.images.data() + j * example_size, example_size,
                    micro.images.data() + written * example_size);
        micro.labels.push_back(batch.labels[j]);
        ++written;
    }
    return micro;
}

/// Correct-prediction count over a dataset slice, batched to bound memory.
long long count_correct(Network& net, const Dataset& data, const Shard& shard,
                        int batch_size) {
    long long correct = 0;
    BatchStream stream(data, shard, batch_size, /*epoch_seed=*/0);
    while (auto batch = stream.next()) {
        Tensor logits = net.forward(batch->images, /*cache=*/false);
        for (std::size_t i = 0; i < batch->labels.size(); ++i) {
            if (argmax_row(logits, static_cast<int>(i)) == batch->labels[i]) {
                ++correct;
            }
        }
    }
    return correct;
}

} // namespace

std::vector<double> flatten_gradients(Network& network) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(network.parameter_count()));
    for (LayerState* state : network.states()) {
        const Tensor& wg = state->weight_gradients;
        out.insert(out.end(), wg.data(), wg.data() + wg.size());
        const Tensor& bg = state->bias_gradients;
        out.insert(out.end(), bg.data(), bg.data() + bg.size());
    }
    return out;
}

void unflatten_gradients(Network& network, const std::vector<double>& values) {
    if (values.size() != static_cast<std::size_t>(network.parameter_count())) {
        throw ProtocolError("gradient vector has " +
                            std::to_string(values.size()) +
                            " entries, network expects " +
                            std::to_string(network.parameter_count()));
    }
    std::size_t offset = 0;
    for (LayerState* state : network.states()) {
        Tensor& wg = state->weight_gradients;
        std::copy_n(values.begin() + offset, wg.size(), wg.data());
        offset += wg.size();
        Tensor& bg = state->bias_gradients;
        std::copy_n(values.begin() + offset, bg.size(), bg.data());
        offset += bg.size();
    }
}

std::vector<double> flatten_parameters(Network& network) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(network.parameter_count()));
    for (LayerState* state : network.states()) {
        const Tensor& w = state->weights;
        out.insert(out.end(), w.data(), w.data() + w.size());
        const Tensor& b = state->biases;
        out.insert(out.end(), b.data(), b.data() + b.size());
    }
    return out;
}

EvaluationResult descriptor_evaluate(const Descriptor& desc,
                                     const Dataset& train, const Dataset& test,
                                     const EvaluationConfig& cfg,
                                     Network* trained_out) {
    std::int64_t parameters = 0;
    Network net;
    try {
        parameters = count_parameters(desc, train.image_shape());
        net = compile(desc, train.image_shape(), cfg.seed);
    } catch (const CompileError& e) {
        return failure(std::string("compile: ") + e.what(), 0);
    }

    const Dataset train_data = subset(train, cfg.train_subset);
    const Dataset test_data = subset(test, cfg.test_subset);
    const Shard full_train = shard(train_data, 0, 1);

    std::vector<LayerState*> states = net.states();

    const auto start = Clock::now();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        BatchStream stream(train_data, full_train, cfg.batch_size,
                           Rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch)));
        while (auto batch = stream.next()) {
            Tensor logits = net.forward(batch->images);
            const auto loss = softmax_cross_entropy(logits, batch->labels);
            if (!std::isfinite(loss.loss)) {
                return failure("diverged", parameters);
            }
            net.backward(loss.logit_gradient);
            sgd_step(states, cfg.learning_rate);
        }
    }
    const std::chrono::duration<double> elapsed = Clock::now() - start;

    const Shard full_test = shard(test_data, 0, 1);
    const long long correct =
        count_correct(net, test_data, full_test, cfg.batch_size);

    EvaluationResult result;
    result.test_accuracy =
        static_cast<double>(correct) / static_cast<double>(test_data.size());
    result.trainable_parameters = parameters;
    result.train_seconds = elapsed.count();
    result.epochs_run = cfg.epochs;
    if (trained_out) {
        *trained_out = std::move(net);
    }
    return result;
}

EvaluationResult distributed_descriptor_evaluate(const Descriptor& desc,
                                                 const Dataset& train,
                                                 const Dataset& test,
                                                 const EvaluationConfig& cfg,
                                                 Environment& env,
                                                 Network* trained_out) {
    const int world = env.world_size();
    const int rank = env.rank();

    // Agreement guard: the run aborts before any training work if ranks
    // disagree on what they are evaluating.
    {
        const std::uint64_t h = desc.hash();
        std::vector<std::uint8_t> hash_bytes(8);
        for (int i = 0; i < 8; ++i) {
            hash_bytes[i] = static_cast<std::uint8_t>(h >> (8 * (7 - i)));
        }
        const auto all = env.gather_bytes(hash_bytes, 0);
        double verdict = 1.0;
        int bad_rank = -1;
        if (rank == 0) {
            for (int r = 1; r < world; ++r) {
                if (all[r] != all[0]) {
                    verdict = 0.0;
                    bad_rank = r;
                    break;
                }
            }
        }
        const auto agreed = env.broadcast({verdict}, 0);
        if (agreed[0] != 1.0) {
            throw ProtocolError(
                "descriptor hash disagreement between ranks" +
                (bad_rank >= 0 ? " (rank " + std::to_string(bad_rank) + ")"
                               : std::string()));
        }
    }

    std::int64_t parameters = 0;
    Network net;
    try {
        parameters = count_parameters(desc, train.image_shape());
        net = compile(desc, train.image_shape(), cfg.seed);
    } catch (const CompileError& e) {
        // identical on every rank: same descriptor, same shapes
        return failure(std::string("compile: ") + e.what(), 0);
    }

    const Dataset train_data = subset(train, cfg.train_subset);
    const Dataset test_data = subset(test, cfg.test_subset);

    // Every rank walks the same global batch stream that the local evaluator
    // would see and trains on a strided slice of each global batch. With the
    // local pre-scale below, the reduced gradient equals the global-batch
    // gradient, so the distributed run reproduces the local trajectory (and
    // all modes agree on what one "step" means).
    const Shard full_train = shard(train_data, 0, 1);
    std::vector<LayerState*> states = net.states();
    const std::size_t param_count =
        static_cast<std::size_t>(net.parameter_count());

    const auto start = Clock::now();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        BatchStream stream(train_data, full_train, cfg.batch_size,
                           Rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch)));
        while (auto batch = stream.next()) {
            const int global_count = static_cast<int>(batch->labels.size());
            const Batch micro = strided_slice(*batch, rank, world);
            const int micro_count = static_cast<int>(micro.labels.size());
            // micro gradients are means over micro_count examples; this
            // factor turns the unweighted rank mean into the exact
            // global-batch mean, ragged tails included (it is exactly 1 for
            // even splits)
            const double scale =
                static_cast<double>(micro_count) * world / global_count;

            double local_loss = 0.0;
            std::vector<double> grads(param_count, 0.0);
            if (micro_count > 0) {
                Tensor logits = net.forward(micro.images);
                const auto loss = softmax_cross_entropy(logits, micro.labels);
                local_loss = loss.loss * scale;
                if (std::isfinite(local_loss)) {
                    net.backward(loss.logit_gradient);
                    grads = flatten_gradients(net);
                    for (double& g : grads) {
                        g *= scale;
                    }
                }
            }

            // Divergence must be agreed on collectively or ranks desync;
            // non-finite values survive the mean, so one reduce settles it.
            const auto mean_loss = env.allreduce_mean({local_loss});
            if (!std::isfinite(mean_loss[0])) {
                return failure("diverged", parameters);
            }

            const std::vector<double> mean_grads = env.allreduce_mean(grads);
            unflatten_gradients(net, mean_grads);
            sgd_step(states, cfg.learning_rate);
        }
    }
    const std::chrono::duration<double> elapsed = Clock::now() - start;

    // Sharded test pass: sum correct counts and shard sizes across ranks.
    const Shard test_shard = shard(test_data, rank, world);
    const long long correct =
        count_correct(net, test_data, test_shard, cfg.batch_size);
    const auto sums = env.allreduce_mean(
        {static_cast<double>(correct),
         static_cast<double>(test_shard.indices.size())});

    EvaluationResult result;
    result.test_accuracy = sums[0] / sums[1];
    result.trainable_parameters = parameters;
    result.epochs_run = cfg.epochs;
    // ranks finish at slightly different times; rank 0's clock is the one
    // reported everywhere so results stay identical
    result.train_seconds = env.broadcast({elapsed.count()}, 0)[0];
    if (trained_out) {
        *trained_out = std::move(net);
    }
    return result;
}

} // namespace nasf
