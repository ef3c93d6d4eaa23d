#include "nasf/search.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include <nlohmann/json.hpp>

#include "nasf/errors.hpp"

namespace nasf {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

void Chromosome::check_bounds() const {
    for (int g : genes) {
        if (g < kGeneMin || g > kGeneMax) {
            throw ConfigError("gene " + std::to_string(g) + " outside [" +
                              std::to_string(kGeneMin) + ", " +
                              std::to_string(kGeneMax) + "]");
        }
    }
}

std::uint64_t Chromosome::hash() const {
    return fnv1a64(genes.data(), genes.size() * sizeof(int));
}

double Individual::fitness() const {
    if (!eval_result) {
        throw UsageError("individual has not been evaluated");
    }
    return eval_result->test_accuracy;
}

std::int64_t Individual::parameters() const {
    if (!eval_result) {
        throw UsageError("individual has not been evaluated");
    }
    return eval_result->trainable_parameters;
}

std::string run_mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::Local: return "local";
        case RunMode::DistributedEvaluation: return "dist-eval";
        case RunMode::DistributedPopulation: return "dist-pop";
    }
    throw UsageError("unknown run mode");
}

RunMode run_mode_from_name(const std::string& name) {
    if (name == "local") return RunMode::Local;
    if (name == "dist-eval" || name == "distributed_evaluation") {
        return RunMode::DistributedEvaluation;
    }
    if (name == "dist-pop" || name == "distributed_population") {
        return RunMode::DistributedPopulation;
    }
    throw ConfigError("unknown mode \"" + name +
                      "\" (expected local, dist-eval or dist-pop)");
}

void GAConfig::validate() const {
    if (population_size < 2) {
        throw ConfigError("population_size must be >= 2");
    }
    if (generations < 1) {
        throw ConfigError("generations must be >= 1");
    }
    if (crossover_rate < 0.0 || crossover_rate > 1.0) {
        throw ConfigError("crossover_rate must be in [0,1]");
    }
    if (mutation_rate < 0.0 || mutation_rate > 1.0) {
        throw ConfigError("mutation_rate must be in [0,1]");
    }
    if (tournament_size < 1) {
        throw ConfigError("tournament_size must be >= 1");
    }
    if (elitism < 0 || elitism >= population_size) {
        throw ConfigError("elitism must be in [0, population_size)");
    }
}

Descriptor decode(const Chromosome& chromosome, int in_channels, int classes) {
    chromosome.check_bounds();
    const auto [k1, f1, k2, f2] = chromosome.genes;
    Descriptor desc;
    desc.add_layer_sequential(LayerKind::conv2d(in_channels, f1, k1));
    desc.add_layer_sequential(LayerKind::relu());
    desc.add_layer_sequential(LayerKind::conv2d(f1, f2, k2));
    desc.add_layer_sequential(LayerKind::relu());
    desc.add_layer_sequential(LayerKind::flatten());
    desc.add_layer_sequential(LayerKind::dense(0, classes));
    return desc;
}

std::vector<Individual> init_population(const GAConfig& cfg, Rng& rng) {
    std::vector<Individual> population(cfg.population_size);
    for (auto& individual : population) {
        for (int& gene : individual.chromosome.genes) {
            gene = rng.uniform_int(Chromosome::kGeneMin, Chromosome::kGeneMax);
        }
    }
    return population;
}

std::vector<Individual> init_population(const GAConfig& cfg) {
    Rng rng(cfg.seed);
    return init_population(cfg, rng);
}

namespace {

/// true when a beats b: higher fitness, then fewer parameters, then the
/// lower index.
bool beats(const Individual& a, std::size_t ia, const Individual& b,
           std::size_t ib) {
    if (a.fitness() != b.fitness()) return a.fitness() > b.fitness();
    if (a.parameters() != b.parameters()) return a.parameters() < b.parameters();
    return ia < ib;
}

} // namespace

const Individual& select(const std::vector<Individual>& population,
                         int tournament_size, Rng& rng) {
    if (population.empty()) {
        throw UsageError("cannot select from an empty population");
    }
    std::size_t winner = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(population.size()) - 1));
    population[winner].fitness();  // raises UsageError if unevaluated
    for (int i = 1; i < tournament_size; ++i) {
        const std::size_t challenger = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(population.size()) - 1));
        if (beats(population[challenger], challenger, population[winner], winner)) {
            winner = challenger;
        }
    }
    return population[winner];
}

std::pair<Chromosome, Chromosome> crossover(const Chromosome& a,
                                            const Chromosome& b,
                                            double crossover_rate, Rng& rng) {
    if (rng.uniform_real() >= crossover_rate) {
        return {a, b};
    }
    const int cut = rng.uniform_int(1, 3);
    Chromosome c1 = a, c2 = b;
    for (int i = cut; i < 4; ++i) {
        std::swap(c1.genes[i], c2.genes[i]);
    }
    return {c1, c2};
}

Chromosome mutate(const Chromosome& chromosome, double mutation_rate, Rng& rng) {
    Chromosome result = chromosome;
    for (int& gene : result.genes) {
        if (rng.uniform_real() < mutation_rate) {
            gene = rng.uniform_int(Chromosome::kGeneMin, Chromosome::kGeneMax);
        }
    }
    return result;
}

namespace {

/// Population indices best-first under the (fitness, parameters, index)
/// order.
std::vector<std::size_t> ranked_indices(const std::vector<Individual>& population) {
    std::vector<std::size_t> order(population.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return beats(population[a], a, population[b], b);
    });
    return order;
}

} // namespace

namespace {

/// Elites plus freshly bred (still unevaluated) offspring.
std::vector<Individual> breed_generation(const std::vector<Individual>& population,
                                         const GAConfig& cfg, Rng& rng) {
    if (static_cast<int>(population.size()) != cfg.population_size) {
        throw UsageError("population size drifted");
    }
    for (const auto& individual : population) {
        individual.fitness();  // the whole parent population must be scored
    }

    std::vector<Individual> next;
    next.reserve(population.size());
    const auto order = ranked_indices(population);
    for (int e = 0; e < cfg.elitism; ++e) {
        next.push_back(population[order[e]]);  // result carried over
    }

    while (next.size() < population.size()) {
        const Individual& parent_a = select(population, cfg.tournament_size, rng);
        const Individual& parent_b = select(population, cfg.tournament_size, rng);
        auto [child_a, child_b] = crossover(parent_a.chromosome,
                                            parent_b.chromosome,
                                            cfg.crossover_rate, rng);
        child_a = mutate(child_a, cfg.mutation_rate, rng);
        child_b = mutate(child_b, cfg.mutation_rate, rng);
        next.push_back(Individual{child_a, std::nullopt});
        if (next.size() < population.size()) {
            next.push_back(Individual{child_b, std::nullopt});
        }
    }
    return next;
}

} // namespace

std::vector<Individual> evolve_generation(const std::vector<Individual>& population,
                                          const EvaluateFn& evaluate,
                                          const GAConfig& cfg, Rng& rng) {
    std::vector<Individual> next = breed_generation(population, cfg, rng);
    for (auto& individual : next) {
        if (!individual.evaluated()) {
            individual.eval_result = evaluate(individual.chromosome);
        }
    }
    return next;
}

namespace {

std::string log_status(const EvaluationResult& result) {
    return result.ok() ? "ok" : "failed(" + result.reason + ")";
}

void record_generation(RunLog& log, int generation,
                       const std::vector<Individual>& population,
                       double wall_seconds) {
    for (std::size_t i = 0; i < population.size(); ++i) {
        const auto& result = *population[i].eval_result;
        EvalRecord record;
        record.generation = generation;
        record.index = static_cast<int>(i);
        record.chromosome = population[i].chromosome.genes;
        record.accuracy = result.test_accuracy;
        record.parameters = result.trainable_parameters;
        record.train_seconds = result.train_seconds;
        record.status = log_status(result);
        log.evals.push_back(std::move(record));
    }
    log.generations.push_back(GenerationRecord{generation, wall_seconds});
}

using GenerationGuard = std::function<void(int, const std::vector<Individual>&)>;

/// The synchronous generational loop shared by the local and the
/// distributed-evaluation modes; they differ only in the evaluate function
/// and in the divergence guard.
RunLog run_ga_loop(const GAConfig& ga, const EvaluateFn& evaluate,
                   const GenerationGuard& guard, const std::string& mode,
                   int world_size, const std::string& config_json) {
    ga.validate();
    RunLog log;
    log.header.mode = mode;
    log.header.world_size = world_size;
    log.header.started_at = iso8601_utc_now();
    log.header.config_json = config_json;

    Rng ga_rng(ga.seed);
    std::vector<Individual> population;
    for (int generation = 0; generation < ga.generations; ++generation) {
        const auto start = Clock::now();
        if (generation == 0) {
            population = init_population(ga, ga_rng);
            guard(generation, population);
            for (auto& individual : population) {
                individual.eval_result = evaluate(individual.chromosome);
            }
        } else {
            // the guard inspects the bred chromosomes before any of the
            // evaluation work starts
            std::vector<Individual> staged = breed_generation(population, ga, ga_rng);
            guard(generation, staged);
            for (auto& individual : staged) {
                if (!individual.evaluated()) {
                    individual.eval_result = evaluate(individual.chromosome);
                }
            }
            population = std::move(staged);
        }
        const std::chrono::duration<double> elapsed = Clock::now() - start;
        record_generation(log, generation, population, elapsed.count());
    }
    return log;
}

} // namespace

RunLog run_mode_local(const GAConfig& ga, const EvaluationConfig& eval_cfg,
                      const Dataset& train, const Dataset& test,
                      const std::string& config_json) {
    const int in_channels = train.image_shape()[0];
    const int classes = train.classes();
    const EvaluateFn evaluate = [&](const Chromosome& chromosome) {
        return descriptor_evaluate(decode(chromosome, in_channels, classes),
                                   train, test, eval_cfg);
    };
    return run_ga_loop(ga, evaluate, [](int, const std::vector<Individual>&) {},
                       "local", 1, config_json);
}

RunLog run_mode_distributed_evaluation(const GAConfig& ga,
                                       const EvaluationConfig& eval_cfg,
                                       const Dataset& train, const Dataset& test,
                                       Environment& env,
                                       const std::string& config_json) {
    const int in_channels = train.image_shape()[0];
    const int classes = train.classes();
    const EvaluateFn evaluate = [&](const Chromosome& chromosome) {
        return distributed_descriptor_evaluate(
            decode(chromosome, in_channels, classes), train, test, eval_cfg, env);
    };
    // Every rank replays the same GA stream; one rank diverging (clock skew
    // cannot cause it, but a config mismatch can) must stop the run before
    // it trains on the wrong architecture.
    const GenerationGuard guard = [&](int generation,
                                      const std::vector<Individual>& population) {
        std::vector<std::uint8_t> digest(8);
        std::uint64_t h = 1469598103934665603ULL;
        for (const auto& individual : population) {
            h ^= individual.chromosome.hash();
            h *= 1099511628211ULL;
        }
        for (int i = 0; i < 8; ++i) {
            digest[i] = static_cast<std::uint8_t>(h >> (8 * (7 - i)));
        }
        const auto all = env.gather_bytes(digest, 0);
        double verdict = 1.0;
        if (env.rank() == 0) {
            for (int r = 1; r < env.world_size(); ++r) {
                if (all[r] != all[0]) {
                    verdict = 0.0;
                }
            }
        }
        if (env.broadcast({verdict}, 0)[0] != 1.0) {
            throw ProtocolError("generation " + std::to_string(generation) +
                                ": chromosome divergence between ranks");
        }
    };
    return run_ga_loop(ga, evaluate, guard, "dist-eval", env.world_size(),
                       config_json);
}

std::vector<std::uint8_t> encode_task(const Descriptor& desc,
                                      const EvaluationConfig& cfg) {
    json doc;
    doc["descriptor"] = json::parse(desc.to_json());
    doc["eval"] = json::parse(cfg.to_json());
    return to_bytes(doc.dump());
}

void decode_task(const std::vector<std::uint8_t>& payload, Descriptor& desc,
                 EvaluationConfig& cfg) {
    json doc;
    try {
        doc = json::parse(to_string(payload));
        desc = Descriptor::from_json(doc.at("descriptor").dump());
        cfg = EvaluationConfig::from_json(doc.at("eval").dump());
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed task payload: ") + e.what());
    }
}

TaskHandler local_evaluation_handler(const Dataset& train, const Dataset& test) {
    return [&train, &test](const std::vector<std::uint8_t>& payload) {
        EvaluationResult result;
        try {
            Descriptor desc;
            EvaluationConfig cfg;
            decode_task(payload, desc, cfg);
            result = descriptor_evaluate(desc, train, test, cfg);
        } catch (const Error& e) {
            result.status = "failed";
            result.reason = std::string("task: ") + e.what();
            result.test_accuracy = 0.0;
        }
        return to_bytes(result.to_json());
    };
}

void serve_tasks(Environment& env, const TaskHandler& handler) {
    while (env.is_open()) {
        const Envelope envelope = env.recv_task();
        if (envelope.msg_type == MsgType::Shutdown) {
            return;
        }
        env.send_result(handler(envelope.payload), envelope.tag);
    }
}

RunLog run_mode_distributed_population(const GAConfig& ga,
                                       const EvaluationConfig& eval_cfg,
                                       int in_channels, int classes,
                                       Environment& env,
                                       const std::string& config_json) {
    if (env.rank() != 0) {
        throw UsageError("run_mode_distributed_population runs on rank 0");
    }
    if (env.world_size() < 2) {
        throw ConfigError("distributed population needs at least one worker");
    }
    ga.validate();

    const int workers = env.world_size() - 1;
    std::uint32_t next_task_tag = 1;

    // Evaluates all pending individuals of one generation: round-robin
    // dispatch in population order, then a blocking collect. The generation
    // ends only when its slowest evaluation does.
    auto evaluate_pending = [&](std::vector<Individual>& population) {
        struct Dispatched {
            std::size_t individual;
            int worker;
            std::uint32_t tag;
        };
        std::vector<Dispatched> in_flight;
        int dispatch_seq = 0;
        for (std::size_t i = 0; i < population.size(); ++i) {
            if (population[i].evaluated()) {
                continue;
            }
            const int worker = 1 + dispatch_seq % workers;
            const std::uint32_t tag = next_task_tag++;
            env.send_task(worker,
                          encode_task(decode(population[i].chromosome,
                                             in_channels, classes),
                                      eval_cfg),
                          tag);
            in_flight.push_back({i, worker, tag});
            ++dispatch_seq;
        }
        for (const auto& entry : in_flight) {
            const Envelope reply = env.recv_result(entry.worker);
            if (reply.tag != entry.tag) {
                throw ProtocolError("result tag " + std::to_string(reply.tag) +
                                    " from rank " + std::to_string(entry.worker) +
                                    ", expected " + std::to_string(entry.tag));
            }
            population[entry.individual].eval_result =
                EvaluationResult::from_json(to_string(reply.payload));
        }
    };

    RunLog log;
    log.header.mode = "dist-pop";
    log.header.world_size = env.world_size();
    log.header.started_at = iso8601_utc_now();
    log.header.config_json = config_json;

    Rng ga_rng(ga.seed);
    std::vector<Individual> population;
    for (int generation = 0; generation < ga.generations; ++generation) {
        const auto start = Clock::now();
        if (generation == 0) {
            population = init_population(ga, ga_rng);
        } else {
            population = breed_generation(population, ga, ga_rng);
        }
        evaluate_pending(population);
        const std::chrono::duration<double> elapsed = Clock::now() - start;
        record_generation(log, generation, population, elapsed.count());
    }
    return log;
}

} // namespace nasf
