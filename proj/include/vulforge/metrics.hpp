#pragma once

#include "vulforge/core.hpp"
#include "vulforge/io.hpp"

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace vulforge {

/// num / den, or 0 when den is 0.
double safe_ratio(double num, double den) noexcept;

/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_from_pr(double precision, double recall) noexcept;

struct MetricsReport {
    std::size_t classes = 0;
    std::size_t total = 0;
    /// confusion[truth][pred].
    std::vector<std::vector<std::size_t>> confusion;

    // Binary counts with class 1 as the positive (vulnerable) class.
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    // Per-class one-vs-rest scores and their support-weighted averages.
    std::vector<double> class_weights;
    std::vector<double> class_precision;
    std::vector<double> class_recall;
    std::vector<double> class_f1;
    double w_precision = 0.0;
    double w_recall = 0.0;
    double w_f1 = 0.0;
};

/// Labels must be 0 or 1. Throws LengthMismatch, UnknownLabel.
MetricsReport binary_metrics(std::span<const Label> preds, std::span<const Label> truth);

/// Labels must be < classes. Fills the confusion matrix, accuracy and the
/// weighted scores; for K = 2 the binary fields are filled too.
MetricsReport weighted_metrics(std::span<const Label> preds, std::span<const Label> truth, std::size_t classes);

json to_json(const MetricsReport &report);

// --- rank tables -------------------------------------------------------------

enum class TieRule { average, competition };

std::string_view to_string(TieRule rule) noexcept;
TieRule parse_tie_rule(std::string_view text);

/// Ranks of `scores` (rank 1 = highest). average: tied entries share the mean
/// of their positions. competition: tied entries share the best position.
std::vector<double> rank_scores(std::span<const double> scores, TieRule rule);

/// Scores for every (metric, instance, method) triple.
struct ScoreCube {
    std::vector<std::string> methods;
    std::vector<std::string> instances;
    std::vector<std::string> metrics;
    /// values[metric][instance][method].
    std::vector<std::vector<std::vector<double>>> values;
};

struct RankTable {
    std::vector<std::string> methods;
    std::vector<std::string> instances;
    std::vector<std::string> metrics;
    TieRule tie_rule = TieRule::average;
    /// ranks[metric][instance][method].
    std::vector<std::vector<std::vector<double>>> ranks;
    /// average[metric][method].
    std::vector<std::vector<double>> average;
};

/// Throws LengthMismatch when the cube is ragged or has no instances.
RankTable average_rank(const ScoreCube &cube, TieRule rule = TieRule::average);

// --- divergence and overlap --------------------------------------------------

struct DivergenceReport {
    std::size_t total = 0;
    /// Ids whose decision labels are not all equal, sorted.
    std::vector<std::string> divergent_ids;
    std::vector<std::string> methods;
    /// Correct fraction on the divergent ids, aligned with `methods`.
    std::vector<double> correct_proportion;
};

/// Divergence among `sets` over `ids` (with true labels `truth`). The correct
/// proportion is reported for every set and every set in `extra`. Throws
/// CoverageMismatch, LengthMismatch, ConfigError (fewer than two sets).
DivergenceReport divergence(std::span<const PredictionSet> sets, std::span<const std::string> ids, std::span<const Label> truth, std::span<const PredictionSet> extra = {});

/// counts[mask] for every mask in [1, 2^K); bit i stands for set i. Index 0 is
/// unused. Throws TooManySets when K > 6 or ConfigError when K = 0.
std::vector<std::size_t> overlap_regions(std::span<const std::set<std::string>> sets);

/// The mask as K binary digits, most significant (set K-1) first.
std::string region_name(std::uint32_t mask, std::size_t sets);

}  // namespace vulforge
