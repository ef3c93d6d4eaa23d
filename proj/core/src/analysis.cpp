#include "nasf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include <nlohmann/json.hpp>

#include "nasf/errors.hpp"

namespace nasf {

double quantile_linear(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) {
        throw UsageError("quantile of an empty sample");
    }
    if (sorted.size() == 1) {
        return sorted[0];
    }
    const double position = q * static_cast<double>(sorted.size() - 1);
    const std::size_t below = static_cast<std::size_t>(position);
    const double frac = position - static_cast<double>(below);
    if (below + 1 >= sorted.size()) {
        return sorted.back();
    }
    return sorted[below] + frac * (sorted[below + 1] - sorted[below]);
}

std::vector<GenerationStats> analyze_log(const RunLog& log) {
    std::map<int, std::vector<const EvalRecord*>> by_generation;
    for (const auto& record : log.evals) {
        by_generation[record.generation].push_back(&record);
    }
    if (by_generation.empty()) {
        throw AnalysisError("run log contains no evaluation records");
    }

    // expected population: prefer the config snapshot, fall back to the
    // first generation's record count
    std::size_t expected = by_generation.begin()->second.size();
    try {
        const auto config = nlohmann::json::parse(log.header.config_json);
        if (config.contains("ga") && config["ga"].contains("population_size")) {
            expected = config["ga"]["population_size"].get<std::size_t>();
        }
    } catch (const nlohmann::json::exception&) {
        // no usable snapshot; the fallback stands
    }

    std::map<int, double> wall;
    for (const auto& gen : log.generations) {
        wall[gen.generation] = gen.wall_seconds;
    }

    std::vector<GenerationStats> stats;
    int expected_generation = 0;
    for (const auto& [generation, records] : by_generation) {
        if (generation != expected_generation) {
            throw AnalysisError("generation " + std::to_string(expected_generation) +
                                " is missing from the log");
        }
        ++expected_generation;
        if (records.size() != expected) {
            throw AnalysisError("generation " + std::to_string(generation) +
                                " has " + std::to_string(records.size()) +
                                " evaluation records, expected " +
                                std::to_string(expected));
        }

        std::vector<double> accuracies;
        accuracies.reserve(records.size());
        double accuracy_sum = 0.0;
        double parameter_sum = 0.0;
        for (const EvalRecord* r : records) {
            accuracies.push_back(r->accuracy);
            accuracy_sum += r->accuracy;
            parameter_sum += static_cast<double>(r->parameters);
        }
        std::sort(accuracies.begin(), accuracies.end());

        GenerationStats s;
        s.generation = generation;
        s.mean_accuracy = accuracy_sum / static_cast<double>(records.size());
        s.min = accuracies.front();
        s.q1 = quantile_linear(accuracies, 0.25);
        s.median = quantile_linear(accuracies, 0.5);
        s.q3 = quantile_linear(accuracies, 0.75);
        s.max = accuracies.back();
        s.mean_parameters = parameter_sum / static_cast<double>(records.size());
        const auto it = wall.find(generation);
        if (it == wall.end()) {
            throw AnalysisError("generation " + std::to_string(generation) +
                                " has no wall-time record");
        }
        s.wall_seconds = it->second;
        stats.push_back(s);
    }
    return stats;
}

std::string format_csv_float(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

namespace {

constexpr const char* kCsvPreamble =
    "# quantiles: linear interpolation between closest ranks; "
    "floats: 6 significant digits\n";

void write_stats_row(std::ostream& out, const GenerationStats& s) {
    out << s.generation << ',' << format_csv_float(s.mean_accuracy) << ','
        << format_csv_float(s.min) << ',' << format_csv_float(s.q1) << ','
        << format_csv_float(s.median) << ',' << format_csv_float(s.q3) << ','
        << format_csv_float(s.max) << ',' << format_csv_float(s.mean_parameters)
        << ',' << format_csv_float(s.wall_seconds) << '\n';
}

} // namespace

void write_stats_csv(std::ostream& out,
                     const std::vector<GenerationStats>& stats) {
    out << kCsvPreamble;
    out << "generation,mean_accuracy,min,q1,median,q3,max,mean_parameters,"
           "wall_seconds\n";
    double total_wall = 0.0;
    for (const auto& s : stats) {
        write_stats_row(out, s);
        total_wall += s.wall_seconds;
    }
    out << "total,,,,,,,," << format_csv_float(total_wall) << '\n';
}

void write_comparison_csv(
    std::ostream& out,
    const std::vector<std::pair<std::string, std::vector<GenerationStats>>>& runs) {
    out << kCsvPreamble;
    out << "log,generation,mean_accuracy,min,q1,median,q3,max,mean_parameters,"
           "wall_seconds\n";
    for (const auto& [label, stats] : runs) {
        for (const auto& s : stats) {
            out << label << ',';
            write_stats_row(out, s);
        }
    }
}

} // namespace nasf
