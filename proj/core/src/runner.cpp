#include "nasf/runner.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nasf/analysis.hpp"
#include "nasf/envelope.hpp"
#include "nasf/environment.hpp"
#include "nasf/errors.hpp"
#include "nasf/run_config.hpp"
#include "nasf/search.hpp"

namespace nasf {

namespace {

std::chrono::milliseconds comms_timeout(const RunConfig& config) {
    return timeout_from_env(std::chrono::milliseconds(
        static_cast<long long>(config.comms.timeout_secs * 1000)));
}

RunLog execute_run(const RunConfig& config) {
    const std::string snapshot = config.to_json();

    switch (config.ga.mode) {
        case RunMode::Local: {
            const auto [train, test] = config.load_data();
            return run_mode_local(config.ga, config.eval, train, test, snapshot);
        }
        case RunMode::DistributedEvaluation: {
            InitConfig init;
            init.role = InitConfig::Role::Master;
            init.listen_address = config.comms.listen;
            init.expected_world_size = config.comms.world_size;
            init.timeout = comms_timeout(config);
            Environment env = Environment::init(init);
            env.broadcast_bytes(to_bytes(snapshot), 0);
            const auto [train, test] = config.load_data();
            RunLog log = run_mode_distributed_evaluation(
                config.ga, config.eval, train, test, env, snapshot);
            env.shutdown();
            return log;
        }
        case RunMode::DistributedPopulation: {
            InitConfig init;
            init.role = InitConfig::Role::Master;
            init.listen_address = config.comms.listen;
            init.expected_world_size = config.comms.world_size;
            init.timeout = comms_timeout(config);
            Environment env = Environment::init(init);
            env.broadcast_bytes(to_bytes(snapshot), 0);
            // the master schedules; only workers touch the dataset
            const int in_channels = config.data.source == "cifar10"
                                        ? 3
                                        : config.data.image_shape[0];
            const int classes =
                config.data.source == "cifar10" ? 10 : config.data.classes;
            RunLog log = run_mode_distributed_population(
                config.ga, config.eval, in_channels, classes, env, snapshot);
            env.shutdown();
            return log;
        }
    }
    throw UsageError("unhandled run mode");
}

} // namespace

int cmd_run(const RunOptions& options) {
    RunConfig config;
    try {
        config = RunConfig::load(options.config_path);
        if (!options.mode_override.empty()) {
            config.ga.mode = run_mode_from_name(options.mode_override);
        }
        if (!options.listen_override.empty()) {
            config.comms.listen = options.listen_override;
        }
        if (options.world_override > 0) {
            config.comms.world_size = options.world_override;
        }
        config.validate();
        if (options.out_path.empty()) {
            throw ConfigError("--out is required");
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        const RunLog log = execute_run(config);
        log.save(options.out_path);
        std::cout << "run complete: " << log.generations.size()
                  << " generations, " << log.evals.size()
                  << " evaluations -> " << options.out_path << "\n";
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_worker(const std::string& master_address) {
    std::string address = master_address;
    if (address.empty()) {
        const char* env_address = std::getenv("NASF_MASTER");
        if (env_address) {
            address = env_address;
        }
    }
    if (address.empty()) {
        std::cerr << "config error: no master address (--master or NASF_MASTER)\n";
        return kExitConfig;
    }

    try {
        InitConfig init;
        init.role = InitConfig::Role::Worker;
        init.master_address = address;
        init.timeout = timeout_from_env();
        Environment env = Environment::init(init);

        const auto config_bytes = env.broadcast_bytes({}, 0);
        const RunConfig config = RunConfig::from_json_text(to_string(config_bytes));

        if (config.ga.mode == RunMode::DistributedEvaluation) {
            const auto [train, test] = config.load_data();
            run_mode_distributed_evaluation(config.ga, config.eval, train, test,
                                            env, config.to_json());
            env.shutdown();  // waits for the master's SHUTDOWN
        } else if (config.ga.mode == RunMode::DistributedPopulation) {
            const auto [train, test] = config.load_data();
            serve_tasks(env, local_evaluation_handler(train, test));
        } else {
            std::cerr << "run failed: master sent mode \""
                      << run_mode_name(config.ga.mode)
                      << "\", which has no worker role\n";
            return kExitRuntime;
        }
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "worker failed: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_analyze(const AnalyzeOptions& options) {
    if (options.log_paths.empty()) {
        std::cerr << "config error: analyze needs at least one run log\n";
        return kExitConfig;
    }
    try {
        std::filesystem::create_directories(options.out_dir);

        std::vector<std::pair<std::string, std::vector<GenerationStats>>> runs;
        for (const auto& path : options.log_paths) {
            const RunLog log = RunLog::load(path);
            const auto stats = analyze_log(log);
            const std::string label = std::filesystem::path(path).stem().string();

            const auto csv_path =
                std::filesystem::path(options.out_dir) / (label + ".stats.csv");
            std::ofstream out(csv_path);
            if (!out) {
                throw AnalysisError("cannot write \"" + csv_path.string() + "\"");
            }
            write_stats_csv(out, stats);
            runs.emplace_back(label, stats);
        }

        const auto comparison_path =
            std::filesystem::path(options.out_dir) / "comparison.csv";
        std::ofstream out(comparison_path);
        if (!out) {
            throw AnalysisError("cannot write \"" + comparison_path.string() +
                                "\"");
        }
        write_comparison_csv(out, runs);
        std::cout << "analyzed " << runs.size() << " log(s) -> "
                  << options.out_dir << "\n";
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "analyze failed: " << e.what() << "\n";
        return kExitRuntime;
    }
}

} // namespace nasf
