#pragma once

#include <string>
#include <vector>

namespace nasf {

// Exit codes shared by every command: 0 success, 1 runtime failure,
// 2 invalid configuration or arguments.
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct RunOptions {
    std::string config_path;
    std::string out_path;
    std::string mode_override;    // empty keeps the config's mode
    std::string listen_override;  // empty keeps comms.listen
    int world_override = 0;       // 0 keeps comms.world_size
};

/// Executes a search run and writes the run log to out_path.
int cmd_run(const RunOptions& options);

/// Joins a master, receives the run configuration, and serves its role for
/// the selected mode until shutdown. Empty address falls back to NASF_MASTER.
int cmd_worker(const std::string& master_address);

struct AnalyzeOptions {
    std::vector<std::string> log_paths;
    std::string out_dir;
};

/// Writes per-log generation statistics CSVs plus a cross-run comparison
/// CSV into out_dir.
int cmd_analyze(const AnalyzeOptions& options);

} // namespace nasf
