#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nasf/curator.hpp"
#include "nasf/descriptor.hpp"
#include "nasf/environment.hpp"
#include "nasf/evaluator.hpp"
#include "nasf/rng.hpp"
#include "nasf/run_log.hpp"

namespace nasf {

/// Genotype: [k1, f1, k2, f2] - kernel size and filter count of the two
/// convolution layers, each in [1, 50].
struct Chromosome {
    static constexpr int kGeneMin = 1;
    static constexpr int kGeneMax = 50;

    std::array<int, 4> genes{1, 1, 1, 1};

    void check_bounds() const;
    std::uint64_t hash() const;  // FNV-1a over the gene bytes
    bool operator==(const Chromosome&) const = default;
};

struct Individual {
    Chromosome chromosome;
    std::optional<EvaluationResult> eval_result;

    bool evaluated() const { return eval_result.has_value(); }
    /// Test accuracy, or exactly 0 for failed evaluations (penalty).
    double fitness() const;
    std::int64_t parameters() const;
};

enum class RunMode { Local, DistributedEvaluation, DistributedPopulation };

std::string run_mode_name(RunMode mode);
RunMode run_mode_from_name(const std::string& name);

struct GAConfig {
    int population_size = 10;
    int generations = 10;
    double crossover_rate = 0.9;
    double mutation_rate = 0.2;   // per-gene resample probability
    int tournament_size = 2;
    int elitism = 1;
    std::uint64_t seed = 0;
    RunMode mode = RunMode::Local;

    void validate() const;  // throws ConfigError
};

/// Chromosome -> the fixed search-space architecture:
/// conv(in->f1, k1) -> relu -> conv(f1->f2, k2) -> relu -> flatten ->
/// dense(-> classes), built in sequential mode.
Descriptor decode(const Chromosome& chromosome, int in_channels = 3,
                  int classes = 10);

std::vector<Individual> init_population(const GAConfig& cfg, Rng& rng);
/// Convenience overload seeding a fresh generator from cfg.seed.
std::vector<Individual> init_population(const GAConfig& cfg);

/// Tournament selection. Winner has the highest fitness; ties fall to fewer
/// trainable parameters, then to the lower population index. All entrants
/// must be evaluated.
const Individual& select(const std::vector<Individual>& population,
                         int tournament_size, Rng& rng);

/// Single-point crossover at a cut drawn uniformly from {1,2,3} with
/// probability crossover_rate; otherwise the children are copies.
std::pair<Chromosome, Chromosome> crossover(const Chromosome& a,
                                            const Chromosome& b,
                                            double crossover_rate, Rng& rng);

/// Each gene is independently resampled uniformly from [1,50] with
/// probability mutation_rate.
Chromosome mutate(const Chromosome& chromosome, double mutation_rate, Rng& rng);

using EvaluateFn = std::function<EvaluationResult(const Chromosome&)>;

/// One synchronous generation: carry the cfg.elitism best over unchanged,
/// fill the rest by select -> crossover -> mutate, then evaluate every new
/// individual. Population size is preserved.
std::vector<Individual> evolve_generation(const std::vector<Individual>& population,
                                          const EvaluateFn& evaluate,
                                          const GAConfig& cfg, Rng& rng);

/// Serial search on this process.
RunLog run_mode_local(const GAConfig& ga, const EvaluationConfig& eval_cfg,
                      const Dataset& train, const Dataset& test,
                      const std::string& config_json = "{}");

/// Replicated GA with collective data-parallel evaluation: every rank runs
/// the identical deterministic loop; each evaluation is a collective
/// distributed_descriptor_evaluate. A chromosome-hash gather per generation
/// guards against rank divergence. Rank 0's log is authoritative.
RunLog run_mode_distributed_evaluation(const GAConfig& ga,
                                       const EvaluationConfig& eval_cfg,
                                       const Dataset& train, const Dataset& test,
                                       Environment& env,
                                       const std::string& config_json = "{}");

/// TASK payload: the descriptor serialization plus the evaluation config,
/// one JSON object. RESULT payload: the EvaluationResult serialization.
std::vector<std::uint8_t> encode_task(const Descriptor& desc,
                                      const EvaluationConfig& cfg);
void decode_task(const std::vector<std::uint8_t>& payload, Descriptor& desc,
                 EvaluationConfig& cfg);

/// Maps a TASK payload to a RESULT payload on a worker.
using TaskHandler =
    std::function<std::vector<std::uint8_t>(const std::vector<std::uint8_t>&)>;

/// Ready-made handler: decode the task, run descriptor_evaluate on the
/// given datasets, serialize the result. Malformed tasks produce a failed
/// result instead of bringing the worker down.
TaskHandler local_evaluation_handler(const Dataset& train, const Dataset& test);

/// Worker serve loop: answer TASKs until SHUTDOWN arrives.
void serve_tasks(Environment& env, const TaskHandler& handler);

/// Master-side search with per-individual dispatch: unevaluated individuals
/// are sent round-robin to workers 1..world-1 each generation; the master
/// blocks until every result is back before evolving (the synchronous
/// barrier). Call on rank 0 while workers run serve_tasks. The master never
/// touches the dataset, so the decode context (input channels, classes)
/// comes from the config.
RunLog run_mode_distributed_population(const GAConfig& ga,
                                       const EvaluationConfig& eval_cfg,
                                       int in_channels, int classes,
                                       Environment& env,
                                       const std::string& config_json = "{}");

} // namespace nasf
