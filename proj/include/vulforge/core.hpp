#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vulforge {

/// Class id. Binary tasks use 0 = non-vulnerable, 1 = vulnerable; multi-class
/// tasks use 0 = non-vulnerable and 1..K-1 for CWE classes.
using Label = std::uint32_t;

/// Tolerance applied to probability vectors read from external files.
inline constexpr double kIngestTolerance = 1e-6;
/// Tolerance applied to probability vectors produced in-process.
inline constexpr double kInternalTolerance = 1e-9;

/// A categorical distribution over K classes. Entries lie in [0,1] and sum to 1
/// within kInternalTolerance. Immutable once built.
class ProbVector {
  public:
    ProbVector() = default;

    /// Wraps probabilities computed in-process. Throws InvalidProbVector when
    /// the entries are not a distribution within kInternalTolerance.
    static ProbVector from_normalized(std::vector<double> probs);
    static ProbVector one_hot(std::size_t classes, Label hot);
    static ProbVector uniform(std::size_t classes);

    [[nodiscard]] std::size_t size() const noexcept { return probs_.size(); }
    [[nodiscard]] bool empty() const noexcept { return probs_.empty(); }
    [[nodiscard]] double operator[](std::size_t i) const { return probs_[i]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return probs_; }
    [[nodiscard]] auto begin() const noexcept { return probs_.begin(); }
    [[nodiscard]] auto end() const noexcept { return probs_.end(); }

    friend bool operator==(const ProbVector &, const ProbVector &) = default;

  private:
    explicit ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {}
    friend ProbVector validate_prob_vector(std::span<const double> raw);

    std::vector<double> probs_;
};

/// Checks raw (typically file-sourced) probabilities: entries must be
/// non-negative and sum to 1 within kIngestTolerance. The result is
/// renormalized; applying it twice yields the same bits as applying it once.
ProbVector validate_prob_vector(std::span<const double> raw);

/// Index of the largest entry; ties go to the lowest index.
Label argmax_label(const ProbVector &p);
Label argmax_label(std::span<const double> scores);

/// The label an output vector stands for. For K = 2 this is the 0.5 threshold
/// rule (p(1) >= 0.5 -> 1); otherwise argmax_label.
Label decision_label(const ProbVector &p);

/// Correctly rounded sum of the inputs (Shewchuk partials). Independent of
/// input order.
double exact_sum(std::span<const double> values);

/// Correctly rounded dot product, computed with error-free products.
double exact_dot(std::span<const double> a, std::span<const double> b);

/// Weighted mixture sum_j weights[j] * rows[j]; weights must sum to 1. Each
/// class entry is the correctly rounded weighted sum, so the result does not
/// depend on the row order. Equal weights give the correctly rounded mean.
/// Throws MemberKMismatch if the rows disagree on K.
ProbVector mixture(std::span<const ProbVector> rows, std::span<const double> weights);

enum class Split { train, val, test };

std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view text);

/// One model's outputs over one split. Rows keep insertion order.
class PredictionSet {
  public:
    PredictionSet() = default;
    PredictionSet(std::string model_id, Split split);

    /// Throws DuplicateId or MalformedProbVector (K differs from earlier rows).
    void add(const std::string &id, ProbVector probs);

    [[nodiscard]] const std::string &model_id() const noexcept { return model_id_; }
    [[nodiscard]] Split split() const noexcept { return split_; }
    [[nodiscard]] std::size_t classes() const noexcept { return classes_; }
    [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
    [[nodiscard]] const std::vector<std::string> &ids() const noexcept { return ids_; }
    [[nodiscard]] const std::vector<ProbVector> &rows() const noexcept { return rows_; }
    [[nodiscard]] bool contains(const std::string &id) const { return index_.contains(id); }
    /// Throws UnknownSample when absent.
    [[nodiscard]] const ProbVector &at(const std::string &id) const;

    friend bool operator==(const PredictionSet &a, const PredictionSet &b) {
        return a.model_id_ == b.model_id_ && a.split_ == b.split_ && a.ids_ == b.ids_ && a.rows_ == b.rows_;
    }

  private:
    std::string model_id_;
    Split split_ = Split::test;
    std::size_t classes_ = 0;
    std::vector<std::string> ids_;
    std::vector<ProbVector> rows_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace vulforge
