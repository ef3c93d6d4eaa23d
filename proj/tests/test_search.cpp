#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include "doctest.h"

#include <nlohmann/json.hpp>

#include "nasf/curator.hpp"
#include "nasf/errors.hpp"
#include "nasf/network.hpp"
#include "nasf/search.hpp"
#include "nasf/transport.hpp"

using namespace nasf;
using namespace std::chrono_literals;

namespace {

void run_ranks(int world, const std::function<void(int)>& fn) {
    std::vector<std::exception_ptr> errors(world);
    std::vector<std::thread> threads;
    for (int r = 0; r < world; ++r) {
        threads.emplace_back([&, r] {
            try {
                fn(r);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<Environment> make_envs(int world,
                                   std::chrono::milliseconds timeout = 10s) {
    auto transports = make_in_process_world(world);
    std::vector<Environment> envs;
    for (auto& t : transports) {
        envs.push_back(Environment::over(std::move(t), timeout));
    }
    return envs;
}

Individual scored(std::array<int, 4> genes, double fitness,
                  std::int64_t parameters = 100) {
    Individual ind;
    ind.chromosome.genes = genes;
    EvaluationResult result;
    result.test_accuracy = fitness;
    result.trainable_parameters = parameters;
    ind.eval_result = result;
    return ind;
}

// The deterministic fake landscape: best at all-genes-25.
EvaluationResult fake_fitness(const Chromosome& chromosome) {
    double distance = 0.0;
    for (int g : chromosome.genes) {
        distance += std::fabs(g - 25.0) / 25.0;
    }
    EvaluationResult result;
    result.test_accuracy = 1.0 - distance / 4.0;
    result.trainable_parameters = 0;
    return result;
}

double mean_fitness(const std::vector<Individual>& population) {
    double sum = 0.0;
    for (const auto& individual : population) {
        sum += individual.fitness();
    }
    return sum / static_cast<double>(population.size());
}

// Chromosome sequence of a log, in record order.
std::vector<std::array<int, 4>> chromosome_sequence(const RunLog& log) {
    std::vector<std::array<int, 4>> out;
    for (const auto& record : log.evals) {
        out.push_back(record.chromosome);
    }
    return out;
}

// Log bytes with the timing fields and the mode metadata removed: what is
// left must be reproducible.
std::string masked_jsonl(const RunLog& log) {
    std::ostringstream raw;
    log.write_jsonl(raw);
    std::istringstream lines(raw.str());
    std::ostringstream out;
    std::string line;
    while (std::getline(lines, line)) {
        auto doc = nlohmann::json::parse(line);
        doc.erase("started_at");
        doc.erase("train_seconds");
        doc.erase("wall_seconds");
        doc.erase("mode");
        doc.erase("world_size");
        if (doc.contains("config")) {
            doc["config"].erase("mode");
            doc["config"].erase("comms");
        }
        out << doc.dump() << "\n";
    }
    return out.str();
}

} // namespace

TEST_CASE("decode builds the two-conv search-space chain") {
    Chromosome ch;
    ch.genes = {5, 10, 5, 10};
    Descriptor desc = decode(ch, 3, 10);
    CHECK(desc.layers().size() == 6);
    CHECK(desc.validate().valid);
    CHECK(count_parameters(desc, {3, 32, 32}) == 105680);

    Chromosome minimal;
    minimal.genes = {1, 1, 1, 1};
    CHECK(count_parameters(decode(minimal, 3, 10), {3, 32, 32}) == 10256);
}

TEST_CASE("decode is injective on gene vectors") {
    Rng rng(8);
    std::set<std::string> serializations;
    std::set<std::array<int, 4>> seen;
    for (int trial = 0; trial < 200; ++trial) {
        Chromosome ch;
        for (int& g : ch.genes) {
            g = rng.uniform_int(1, 50);
        }
        if (!seen.insert(ch.genes).second) {
            continue;
        }
        REQUIRE(serializations.insert(decode(ch).to_json()).second);
    }
}

TEST_CASE("init_population is seeded and in bounds") {
    GAConfig cfg;
    cfg.population_size = 10;
    cfg.seed = 4242;

    const auto a = init_population(cfg);
    const auto b = init_population(cfg);
    REQUIRE(a.size() == 10);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].chromosome == b[i].chromosome);
        CHECK_FALSE(a[i].evaluated());
    }

    // bounds and first moment over 10^4 genes
    GAConfig big;
    big.population_size = 2500;
    big.seed = 77;
    double sum = 0.0;
    int count = 0;
    for (const auto& individual : init_population(big)) {
        for (int g : individual.chromosome.genes) {
            REQUIRE(g >= 1);
            REQUIRE(g <= 50);
            sum += g;
            ++count;
        }
    }
    CHECK(count == 10000);
    const double mean = sum / count;
    CHECK(mean > 25.0);
    CHECK(mean < 26.0);
}

TEST_CASE("tournament selection prefers fitness, then size, then index") {
    SUBCASE("higher fitness wins") {
        std::vector<Individual> population{scored({1, 1, 1, 1}, 0.3),
                                           scored({2, 2, 2, 2}, 0.7)};
        Rng rng(5);
        // a large tournament sees both individuals
        const Individual& winner = select(population, 16, rng);
        CHECK(winner.fitness() == 0.7);
    }
    SUBCASE("all equal: the lowest index wins") {
        std::vector<Individual> population{scored({1, 1, 1, 1}, 0.5),
                                           scored({2, 2, 2, 2}, 0.5),
                                           scored({3, 3, 3, 3}, 0.5)};
        Rng rng(6);
        const Individual& winner = select(population, 32, rng);
        CHECK(winner.chromosome.genes == std::array<int, 4>{1, 1, 1, 1});
    }
    SUBCASE("fitness tie falls to fewer parameters") {
        std::vector<Individual> population{scored({1, 1, 1, 1}, 0.5, 500),
                                           scored({2, 2, 2, 2}, 0.5, 100)};
        Rng rng(7);
        const Individual& winner = select(population, 16, rng);
        CHECK(winner.parameters() == 100);
    }
    SUBCASE("unevaluated individuals are a usage error") {
        std::vector<Individual> population(2);
        population[0].chromosome.genes = {1, 2, 3, 4};
        population[1].chromosome.genes = {5, 6, 7, 8};
        Rng rng(8);
        CHECK_THROWS_AS(select(population, 2, rng), UsageError);
    }
    SUBCASE("selection pressure favors the best individual") {
        std::vector<Individual> population;
        for (int i = 0; i < 10; ++i) {
            population.push_back(scored({1, 1, 1, 1}, 0.1 * (i + 1)));
        }
        Rng rng(9);
        std::vector<int> wins(10, 0);
        for (int trial = 0; trial < 10000; ++trial) {
            const Individual& winner = select(population, 2, rng);
            ++wins[static_cast<int>(winner.fitness() * 10 + 0.5) - 1];
        }
        CHECK(*std::max_element(wins.begin(), wins.end()) == wins[9]);
        CHECK(wins[9] > wins[0]);
    }
}

TEST_CASE("affine fitness rescaling never changes a tournament winner") {
    Rng meta(1234);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Individual> original, rescaled;
        const double a = meta.uniform_real(0.1, 10.0);
        const double b = meta.uniform_real(-5.0, 5.0);
        const int n = meta.uniform_int(2, 12);
        for (int i = 0; i < n; ++i) {
            // coarse grid so exact ties actually occur
            const double f = meta.uniform_int(0, 4) / 4.0;
            const std::int64_t params = meta.uniform_int(1, 3) * 100;
            std::array<int, 4> genes{i + 1, 1, 1, 1};
            original.push_back(scored(genes, f, params));
            rescaled.push_back(scored(genes, a * f + b, params));
        }
        const std::uint64_t seed = meta.next_u64();
        Rng rng_a(seed), rng_b(seed);
        const Individual& winner_a = select(original, 2, rng_a);
        const Individual& winner_b = select(rescaled, 2, rng_b);
        REQUIRE(winner_a.chromosome == winner_b.chromosome);
    }
}

TEST_CASE("crossover honors its rate and produces tail swaps") {
    Chromosome a, b;
    a.genes = {1, 2, 3, 4};
    b.genes = {5, 6, 7, 8};

    SUBCASE("rate zero clones the parents") {
        Rng rng(1);
        for (int i = 0; i < 20; ++i) {
            auto [c1, c2] = crossover(a, b, 0.0, rng);
            REQUIRE(c1 == a);
            REQUIRE(c2 == b);
        }
    }

    SUBCASE("rate one produces exactly the three single-point patterns") {
        const std::array<Chromosome, 3> cut1{{{{1, 6, 7, 8}}, {{1, 2, 7, 8}}, {{1, 2, 3, 8}}}};
        const std::array<Chromosome, 3> cut2{{{{5, 2, 3, 4}}, {{5, 6, 3, 4}}, {{5, 6, 7, 4}}}};
        std::set<int> cuts_seen;
        for (std::uint64_t seed = 0; seed < 60; ++seed) {
            Rng rng(seed);
            auto [c1, c2] = crossover(a, b, 1.0, rng);
            bool matched = false;
            for (int cut = 1; cut <= 3; ++cut) {
                if (c1 == cut1[cut - 1] && c2 == cut2[cut - 1]) {
                    cuts_seen.insert(cut);
                    matched = true;
                    // the worked example: cut 2 swaps the last two genes
                    if (cut == 2) {
                        REQUIRE(c1.genes == std::array<int, 4>{1, 2, 7, 8});
                        REQUIRE(c2.genes == std::array<int, 4>{5, 6, 3, 4});
                    }
                }
            }
            REQUIRE(matched);
        }
        CHECK(cuts_seen == std::set<int>{1, 2, 3});
    }

    SUBCASE("children draw each position from one of the parents") {
        Rng rng(33);
        for (int trial = 0; trial < 200; ++trial) {
            auto [c1, c2] = crossover(a, b, 0.5, rng);
            for (int i = 0; i < 4; ++i) {
                const bool straight =
                    c1.genes[i] == a.genes[i] && c2.genes[i] == b.genes[i];
                const bool swapped =
                    c1.genes[i] == b.genes[i] && c2.genes[i] == a.genes[i];
                REQUIRE((straight || swapped));
            }
        }
    }
}

TEST_CASE("mutation rates behave as per-gene probabilities") {
    Chromosome base;
    base.genes = {10, 20, 30, 40};

    SUBCASE("rate zero is the identity") {
        Rng rng(2);
        for (int i = 0; i < 50; ++i) {
            REQUIRE(mutate(base, 0.0, rng) == base);
        }
    }

    SUBCASE("rate one resamples everything; 49/50 of genes change") {
        Rng rng(3);
        int changed = 0, total = 0;
        for (int trial = 0; trial < 10000; ++trial) {
            const Chromosome mutated = mutate(base, 1.0, rng);
            for (int i = 0; i < 4; ++i) {
                changed += mutated.genes[i] != base.genes[i];
                ++total;
            }
        }
        const double fraction = static_cast<double>(changed) / total;
        CHECK(fraction > 0.98 - 0.01);
        CHECK(fraction < 0.98 + 0.01);
    }

    SUBCASE("rate 0.2 changes 0.2 * 49/50 of genes") {
        Rng rng(4);
        int changed = 0, total = 0;
        for (int trial = 0; trial < 10000; ++trial) {
            const Chromosome mutated = mutate(base, 0.2, rng);
            for (int i = 0; i < 4; ++i) {
                changed += mutated.genes[i] != base.genes[i];
                ++total;
            }
        }
        const double fraction = static_cast<double>(changed) / total;
        const double expected = 0.2 * 49.0 / 50.0;  // 0.196
        CHECK(fraction > expected - 0.01);
        CHECK(fraction < expected + 0.01);
    }
}

TEST_CASE("gene bounds survive long operator chains") {
    Rng rng(55);
    Chromosome a, b;
    for (int& g : a.genes) g = rng.uniform_int(1, 50);
    for (int& g : b.genes) g = rng.uniform_int(1, 50);
    for (int op = 0; op < 100000; ++op) {
        if (rng.uniform_real() < 0.5) {
            auto [c1, c2] = crossover(a, b, 0.9, rng);
            a = c1;
            b = c2;
        } else {
            a = mutate(a, 0.2, rng);
            b = mutate(b, 0.2, rng);
        }
        a.check_bounds();
        b.check_bounds();
    }
}

TEST_CASE("evolve_generation keeps size and carries the elite") {
    GAConfig cfg;
    cfg.population_size = 10;
    cfg.generations = 10;
    cfg.elitism = 1;
    cfg.seed = 99;

    Rng rng(cfg.seed);
    auto population = init_population(cfg, rng);
    for (auto& individual : population) {
        individual.eval_result = fake_fitness(individual.chromosome);
    }

    double best = -1.0;
    for (int generation = 1; generation < 10; ++generation) {
        population = evolve_generation(population, fake_fitness, cfg, rng);
        REQUIRE(population.size() == 10);
        double gen_best = -1.0;
        for (const auto& individual : population) {
            gen_best = std::max(gen_best, individual.fitness());
        }
        REQUIRE(gen_best >= best);  // elitism: never loses the champion
        best = gen_best;
    }
}

TEST_CASE("ten generations improve the fake landscape in >= 95% of seeds") {
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        GAConfig cfg;
        cfg.population_size = 10;
        cfg.generations = 10;
        cfg.seed = seed;

        Rng rng(cfg.seed);
        auto population = init_population(cfg, rng);
        for (auto& individual : population) {
            individual.eval_result = fake_fitness(individual.chromosome);
        }
        const double initial = mean_fitness(population);
        for (int generation = 1; generation < cfg.generations; ++generation) {
            population = evolve_generation(population, fake_fitness, cfg, rng);
        }
        if (mean_fitness(population) > initial) {
            ++improved;
        }
    }
    CHECK(improved >= 95);
}

TEST_CASE("ga config validation rejects out-of-range values") {
    GAConfig cfg;
    cfg.validate();
    GAConfig bad = cfg;
    bad.population_size = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.crossover_rate = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.elitism = cfg.population_size;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.mutation_rate = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("task payloads round-trip descriptor and config") {
    Chromosome ch;
    ch.genes = {3, 4, 5, 6};
    const Descriptor desc = decode(ch, 1, 4);
    EvaluationConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.125;
    cfg.seed = 31;

    const auto payload = encode_task(desc, cfg);
    Descriptor desc_back;
    EvaluationConfig cfg_back;
    decode_task(payload, desc_back, cfg_back);
    CHECK(desc_back == desc);
    CHECK(cfg_back.epochs == cfg.epochs);
    CHECK(cfg_back.learning_rate == cfg.learning_rate);
    CHECK(cfg_back.seed == cfg.seed);

    CHECK_THROWS_AS(
        decode_task(to_bytes("definitely not json"), desc_back, cfg_back),
        ProtocolError);
}

TEST_CASE("run_mode_local: record counts, bounds and determinism") {
    auto [train, test] = synthetic_dataset(60, 48, 24, 2, {1, 4, 4});
    GAConfig ga;
    ga.population_size = 4;
    ga.generations = 3;
    ga.seed = 7;
    EvaluationConfig eval_cfg;
    eval_cfg.epochs = 1;
    eval_cfg.batch_size = 16;
    eval_cfg.learning_rate = 0.1;
    eval_cfg.seed = 3;

    const RunLog a = run_mode_local(ga, eval_cfg, train, test);
    REQUIRE(a.evals.size() == 12);  // generations x population
    REQUIRE(a.generations.size() == 3);
    for (const auto& record : a.evals) {
        REQUIRE(record.accuracy >= 0.0);
        REQUIRE(record.accuracy <= 1.0);
    }
    // population_size records per generation, contiguous numbering
    for (int g = 0; g < 3; ++g) {
        int count = 0;
        for (const auto& record : a.evals) {
            count += record.generation == g;
        }
        REQUIRE(count == 4);
    }

    const RunLog b = run_mode_local(ga, eval_cfg, train, test);
    CHECK(chromosome_sequence(a) == chromosome_sequence(b));
    CHECK(masked_jsonl(a) == masked_jsonl(b));  // identical minus timings
}

TEST_CASE("distributed evaluation over world 1 replays the local run") {
    auto [train, test] = synthetic_dataset(61, 48, 24, 2, {1, 4, 4});
    GAConfig ga;
    ga.population_size = 4;
    ga.generations = 3;
    ga.seed = 11;
    EvaluationConfig eval_cfg;
    eval_cfg.epochs = 1;
    eval_cfg.batch_size = 16;
    eval_cfg.learning_rate = 0.1;

    const RunLog local = run_mode_local(ga, eval_cfg, train, test);
    Environment env = Environment::local();
    const RunLog dist =
        run_mode_distributed_evaluation(ga, eval_cfg, train, test, env);
    CHECK(chromosome_sequence(local) == chromosome_sequence(dist));
    CHECK(masked_jsonl(local) == masked_jsonl(dist));
}

TEST_CASE("two-rank distributed evaluation matches the local trajectory") {
    auto [train, test] = synthetic_dataset(62, 64, 32, 2, {1, 4, 4});
    GAConfig ga;
    ga.population_size = 4;
    ga.generations = 3;
    ga.seed = 13;
    EvaluationConfig eval_cfg;
    eval_cfg.epochs = 1;
    eval_cfg.batch_size = 8;
    eval_cfg.learning_rate = 0.1;

    const RunLog local = run_mode_local(ga, eval_cfg, train, test);

    auto envs = make_envs(2, 30s);
    std::vector<RunLog> logs(2);
    run_ranks(2, [&](int r) {
        logs[r] = run_mode_distributed_evaluation(ga, eval_cfg, train, test,
                                                  envs[r]);
    });

    CHECK(chromosome_sequence(logs[0]) == chromosome_sequence(local));
    CHECK(chromosome_sequence(logs[1]) == chromosome_sequence(local));
    REQUIRE(logs[0].evals.size() == local.evals.size());
    for (std::size_t i = 0; i < local.evals.size(); ++i) {
        REQUIRE(std::fabs(logs[0].evals[i].accuracy - local.evals[i].accuracy) <
                1e-9);
    }
}

TEST_CASE("rank divergence is caught by the chromosome-hash guard") {
    auto [train, test] = synthetic_dataset(63, 32, 16, 2, {1, 4, 4});
    EvaluationConfig eval_cfg;
    eval_cfg.epochs = 1;
    eval_cfg.batch_size = 16;

    auto envs = make_envs(2, 10s);
    std::atomic<int> caught{0};
    run_ranks(2, [&](int r) {
        GAConfig ga;
        ga.population_size = 4;
        ga.generations = 2;
        ga.seed = 100 + r;  // divergence injection: different seeds
        try {
            run_mode_distributed_evaluation(ga, eval_cfg, train, test, envs[r]);
        } catch (const ProtocolError& e) {
            ++caught;
            CHECK(std::string(e.what()).find("generation 0") !=
                  std::string::npos);
        }
    });
    CHECK(caught == 2);
}

TEST_CASE("distributed population splits tasks round-robin as {4,3,3}") {
    constexpr int kWorkers = 3;
    auto envs = make_envs(1 + kWorkers, 20s);

    GAConfig ga;
    ga.population_size = 10;
    ga.generations = 1;
    ga.seed = 5;
    EvaluationConfig eval_cfg;
    eval_cfg.epochs = 1;

    std::array<std::atomic<int>, kWorkers> task_counts{};
    RunLog log;
    run_ranks(1 + kWorkers, [&](int r) {
        if (r == 0) {
            log = run_mode_distributed_population(ga, eval_cfg, 1, 2, envs[0]);
            envs[0].shutdown();
        } else {
            serve_tasks(envs[r], [&, r](const std::vector<std::uint8_t>& payload) {
                ++task_counts[r - 1];
                Descriptor desc;
                EvaluationConfig cfg;
                decode_task(payload, desc, cfg);
                EvaluationResult result;
                result.test_accuracy = 0.5;
                result.trainable_parameters = count_parameters(desc, {1, 4, 4});
                return to_bytes(result.to_json());
            });
        }
    });

    CHECK(task_counts[0] == 4);
    CHECK(task_counts[1] == 3);
    CHECK(task_counts[2] == 3);
    CHECK(log.evals.size() == 10);
    for (const auto& record : log.evals) {
        CHECK(record.accuracy == 0.5);
    }
}

TEST_CASE("ten workers each receive exactly one task per generation") {
    constexpr int kWorkers = 10;
    auto envs = make_envs(1 + kWorkers, 20s);

    GAConfig ga;
    ga.population_size = 10;
    ga.generations = 1;
    ga.seed = 6;
    EvaluationConfig eval_cfg;

    std::array<std::atomic<int>, kWorkers> task_counts{};
    run_ranks(1 + kWorkers, [&](int r) {
        if (r == 0) {
            run_mode_distributed_population(ga, eval_cfg, 1, 2, envs[0]);
            envs[0].shutdown();
        } else {
            serve_tasks(envs[r], [&, r](const std::vector<std::uint8_t>&) {
                ++task_counts[r - 1];
                EvaluationResult result;
                result.test_accuracy = 0.1;
                return to_bytes(result.to_json());
            });
        }
    });
    for (int w = 0; w < kWorkers; ++w) {
        REQUIRE(task_counts[w] == 1);
    }
}

TEST_CASE("a malformed task yields a failed result and the worker survives") {
    auto envs = make_envs(2, 10s);
    auto [train, test] = synthetic_dataset(64, 32, 16, 2, {1, 4, 4});

    run_ranks(2, [&](int r) {
        if (r == 0) {
            envs[0].send_task(1, to_bytes("garbage"), 1);
            const Envelope bad_reply = envs[0].recv_result(1);
            const auto bad = EvaluationResult::from_json(to_string(bad_reply.payload));
            CHECK(bad.status == "failed");
            CHECK(bad.test_accuracy == 0.0);

            // the worker keeps serving after the bad task
            Chromosome ch;
            ch.genes = {1, 2, 1, 2};
            envs[0].send_task(1, encode_task(decode(ch, 1, 2), EvaluationConfig{}), 2);
            const Envelope good_reply = envs[0].recv_result(1);
            const auto good = EvaluationResult::from_json(to_string(good_reply.payload));
            CHECK(good.status == "ok");
            envs[0].shutdown();
        } else {
            serve_tasks(envs[1], local_evaluation_handler(train, test));
        }
    });
}

TEST_CASE("losing a worker aborts the distributed-population run") {
    auto transports = make_in_process_world(3);
    Environment master = Environment::over(std::move(transports[0]), 1s);
    Environment worker1 = Environment::over(std::move(transports[1]), 1s);
    auto dead = std::move(transports[2]);  // rank 2 never serves

    GAConfig ga;
    ga.population_size = 4;
    ga.generations = 1;
    ga.seed = 9;
    EvaluationConfig eval_cfg;

    std::atomic<bool> aborted{false};
    run_ranks(3, [&](int r) {
        if (r == 0) {
            try {
                run_mode_distributed_population(ga, eval_cfg, 1, 2, master);
            } catch (const CommError&) {
                aborted = true;
            }
        } else if (r == 1) {
            try {
                serve_tasks(worker1, [&](const std::vector<std::uint8_t>&) {
                    EvaluationResult result;
                    result.test_accuracy = 0.2;
                    return to_bytes(result.to_json());
                });
            } catch (const CommError&) {
                // the master aborted instead of sending SHUTDOWN
            }
        } else {
            dead->close();
        }
    });
    CHECK(aborted);
}
