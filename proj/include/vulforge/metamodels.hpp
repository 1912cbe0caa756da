#pragma once

#include "vulforge/core.hpp"
#include "vulforge/io.hpp"
#include "vulforge/softmax.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace vulforge {

enum class MetaKind { lr, rf, svm, knn };

std::string_view to_string(MetaKind kind) noexcept;
MetaKind parse_meta_kind(std::string_view text);

/// Dense training rows, one inner vector per row.
using MetaRows = std::vector<std::vector<double>>;

struct MetaConfig {
    // lr / svm
    double learning_rate = 0.5;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double l2 = 1e-4;
    // rf
    std::size_t trees = 100;
    /// 0 means unlimited depth.
    std::size_t max_depth = 16;
    bool bootstrap = true;
    // knn
    std::size_t k = 5;

    std::uint64_t seed = 0;
    /// Forest training threads; does not change the result.
    std::size_t workers = 1;
};

json to_json(const MetaConfig &config);
MetaConfig meta_config_from_json(const json &doc);

/// One-vs-rest linear SVM. Row c of `weights` scores class c.
struct LinearSvm {
    std::size_t classes = 0;
    std::size_t width = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    friend bool operator==(const LinearSvm &, const LinearSvm &) = default;
};

/// sum over classes c of  l2/2 ||w_c||^2 + mean_i max(0, 1 - s_ic (w_c.x_i + b_c)),
/// with s_ic = +1 if y_i = c else -1.
double svm_objective(const LinearSvm &svm, const MetaRows &rows, std::span<const Label> labels, double l2);
void svm_subgradient(const LinearSvm &svm, const MetaRows &rows, std::span<const Label> labels, double l2, std::vector<double> &grad_weights, std::vector<double> &grad_bias);

/// Subgradient descent with step halving: a step is taken only when it does
/// not increase the objective, so the per-epoch objective never goes up.
LinearSvm train_svm(const MetaRows &rows, std::span<const Label> labels, std::size_t classes, const MetaConfig &config, std::vector<double> *epoch_objectives = nullptr);

struct TreeNode {
    /// -1 marks a leaf.
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    /// Number of training rows that reached this node.
    std::size_t count = 0;
    /// Leaf class frequencies (empty for internal nodes).
    std::vector<double> distribution;

    friend bool operator==(const TreeNode &, const TreeNode &) = default;
};

/// Gini tree; rows with x[feature] <= threshold go left. Node 0 is the root.
struct DecisionTree {
    std::vector<TreeNode> nodes;

    [[nodiscard]] const TreeNode &leaf_for(std::span<const double> row) const;

    friend bool operator==(const DecisionTree &, const DecisionTree &) = default;
};

struct Forest {
    std::vector<DecisionTree> trees;

    friend bool operator==(const Forest &, const Forest &) = default;
};

struct KnnIndex {
    MetaRows rows;
    std::vector<Label> labels;
    std::size_t k = 5;

    friend bool operator==(const KnnIndex &, const KnnIndex &) = default;
};

/// Per-column centering and scaling fitted on the training rows. Empty means
/// rows are used as given.
/// Largest eigenvalue of the mean of x x^T over the rows, each extended with a
/// trailing 1 for the bias, by power iteration. Half of it bounds the
/// curvature of the softmax cross-entropy, which caps a stable step size.
double second_moment_bound(const MetaRows &rows);

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const MetaRows &rows);
    [[nodiscard]] bool empty() const noexcept { return mean.empty(); }
    [[nodiscard]] std::vector<double> apply(std::span<const double> row) const;
    [[nodiscard]] MetaRows apply(const MetaRows &rows) const;

    friend bool operator==(const Standardizer &, const Standardizer &) = default;
};

/// Second-level learner with a uniform fit/predict contract. lr and svm
/// standardize their inputs; rf and knn see rows verbatim.
class MetaModel {
  public:
    using Params = std::variant<SoftmaxModel, LinearSvm, Forest, KnnIndex>;

    MetaModel() = default;
    MetaModel(MetaKind kind, std::size_t input_width, std::size_t output_width, MetaConfig config, Params params, Standardizer standardizer = {});

    [[nodiscard]] MetaKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::size_t input_width() const noexcept { return input_width_; }
    [[nodiscard]] std::size_t output_width() const noexcept { return output_width_; }
    [[nodiscard]] const MetaConfig &config() const noexcept { return config_; }
    [[nodiscard]] const Params &params() const noexcept { return params_; }
    [[nodiscard]] const Standardizer &standardizer() const noexcept { return standardizer_; }

    /// Compares the fitted model; the training config (worker count included)
    /// is not part of the identity.
    friend bool operator==(const MetaModel &a, const MetaModel &b) {
        return a.kind_ == b.kind_ && a.input_width_ == b.input_width_ && a.output_width_ == b.output_width_ && a.params_ == b.params_ && a.standardizer_ == b.standardizer_;
    }

  private:
    MetaKind kind_ = MetaKind::lr;
    std::size_t input_width_ = 0;
    std::size_t output_width_ = 0;
    MetaConfig config_;
    Params params_;
    Standardizer standardizer_;
};

/// Throws EmptyTrainingSet, WidthMismatch (ragged rows or label count).
MetaModel meta_fit(MetaKind kind, const MetaRows &rows, std::span<const Label> labels, std::size_t classes, const MetaConfig &config);

/// Fits against target distributions. lr minimizes soft-target cross-entropy;
/// the other kinds train on argmax_label of each target.
MetaModel meta_fit_soft(MetaKind kind, const MetaRows &rows, std::span<const ProbVector> targets, const MetaConfig &config);

/// lr: softmax; svm: logistic-squashed margins renormalized; rf: mean of the
/// reached leaves' class frequencies; knn: label fractions among the k nearest,
/// widened to every row tied with the k-th distance. Throws WidthMismatch.
ProbVector meta_predict(const MetaModel &model, std::span<const double> row);

json to_json(const MetaModel &model);
MetaModel meta_model_from_json(const json &doc);

}  // namespace vulforge
