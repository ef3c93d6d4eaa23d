#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace nasf {

/// One evaluated individual in one generation.
struct EvalRecord {
    int generation = 0;
    int index = 0;                        // position in the population
    std::array<int, 4> chromosome{};
    double accuracy = 0.0;
    std::int64_t parameters = 0;
    double train_seconds = 0.0;
    std::string status = "ok";            // "ok" or "failed(reason)"
};

struct GenerationRecord {
    int generation = 0;
    double wall_seconds = 0.0;
};

struct RunLogHeader {
    std::string config_json;              // full run config snapshot
    std::string mode;                     // local | dist-eval | dist-pop
    int world_size = 1;
    std::string started_at;               // ISO-8601 UTC; the only wall-clock
                                          // stamp in the log
};

/// Line-delimited log of one search run: a header line, then one line per
/// evaluation and one per finished generation, in execution order. The
/// format is append-safe during long runs and each line is one JSON object.
struct RunLog {
    RunLogHeader header;
    std::vector<EvalRecord> evals;
    std::vector<GenerationRecord> generations;

    void write_jsonl(std::ostream& out) const;
    void save(const std::string& path) const;
    static RunLog parse_jsonl(std::istream& in);
    static RunLog load(const std::string& path);
};

/// "2026-01-31T12:00:00Z" for the current wall clock.
std::string iso8601_utc_now();

} // namespace nasf
