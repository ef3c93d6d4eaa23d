#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nasf/run_log.hpp"

namespace nasf {

/// Accuracy distribution, parameter mean and wall time of one generation.
struct GenerationStats {
    int generation = 0;
    double mean_accuracy = 0.0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double mean_parameters = 0.0;
    double wall_seconds = 0.0;
};

/// Per-generation statistics of one run log. Every generation must carry
/// the same number of evaluation records (the population size) and the
/// generation numbers must be 0..G-1; anything else names the offending
/// generation in an AnalysisError.
std::vector<GenerationStats> analyze_log(const RunLog& log);

/// Quantile by linear interpolation between closest ranks; `sorted` must be
/// ascending and non-empty, q in [0,1].
double quantile_linear(const std::vector<double>& sorted, double q);

/// Fixed float formatting for CSV output: 6 significant digits, '.' decimal
/// separator.
std::string format_csv_float(double value);

/// Per-log CSV: a documentation header, one row per generation, and a
/// footer row carrying the total wall time.
void write_stats_csv(std::ostream& out, const std::vector<GenerationStats>& stats);

/// Cross-run CSV: one row per (log label, generation).
void write_comparison_csv(
    std::ostream& out,
    const std::vector<std::pair<std::string, std::vector<GenerationStats>>>& runs);

} // namespace nasf
