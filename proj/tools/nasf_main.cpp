#include <string>
#include <vector>

#include "CLI11.hpp"

#include "nasf/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"nasf - distributed neural architecture search at desk scale"};
    app.require_subcommand(1);

    nasf::RunOptions run_options;
    auto* run = app.add_subcommand("run", "Execute a search run");
    run->add_option("--config", run_options.config_path, "Config file (JSON)")
        ->required();
    run->add_option("--out", run_options.out_path, "Run log output path")
        ->required();
    run->add_option("--mode", run_options.mode_override,
                    "Override the config mode: local|dist-eval|dist-pop")
        ->check(CLI::IsMember({"local", "dist-eval", "dist-pop"}));
    run->add_option("--listen", run_options.listen_override,
                    "Master listen address host:port (distributed modes)");
    run->add_option("--world", run_options.world_override,
                    "Total ranks including the master (distributed modes)");

    std::string master_address;
    auto* worker = app.add_subcommand("worker", "Join a master and serve");
    worker->add_option("--master", master_address,
                       "Master address host:port (or NASF_MASTER)");

    nasf::AnalyzeOptions analyze_options;
    auto* analyze =
        app.add_subcommand("analyze", "Generation statistics CSVs from run logs");
    analyze->add_option("logs", analyze_options.log_paths, "Run log files")
        ->required();
    analyze->add_option("--out-dir", analyze_options.out_dir, "Output directory")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : nasf::kExitConfig;
    }

    if (run->parsed()) {
        return nasf::cmd_run(run_options);
    }
    if (worker->parsed()) {
        return nasf::cmd_worker(master_address);
    }
    return nasf::cmd_analyze(analyze_options);
}
