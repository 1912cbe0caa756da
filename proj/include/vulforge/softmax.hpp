#pragma once

#include "vulforge/core.hpp"
#include "vulforge/sparse.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace vulforge {

/// sgd: one global step size. adagrad: per-coordinate steps scaled by the
/// root of the summed squared gradients; rare hashed features move as fast
/// as common ones.
enum class Optimizer { sgd, adagrad };

std::string_view to_string(Optimizer optimizer) noexcept;
Optimizer parse_optimizer(std::string_view text);

/// Mini-batch gradient descent settings for weighted softmax regression.
struct SoftmaxConfig {
    double learning_rate = 0.5;
    std::size_t epochs = 200;
    /// 0 means full batch.
    std::size_t batch_size = 32;
    double l2 = 1e-4;
    std::uint64_t seed = 0;
    /// Reshuffle the batch order every epoch; off gives a fixed order.
    bool shuffle = true;
    Optimizer optimizer = Optimizer::sgd;
};

/// Multinomial logistic regression: p = softmax(W x + b), W is K x width.
class SoftmaxModel {
  public:
    SoftmaxModel() = default;
    SoftmaxModel(std::size_t classes, std::size_t width);
    SoftmaxModel(std::size_t classes, std::size_t width, std::vector<double> weights, std::vector<double> bias);

    [[nodiscard]] std::size_t classes() const noexcept { return bias_.size(); }
    [[nodiscard]] std::size_t width() const noexcept { return width_; }
    /// Row-major K x width.
    [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
    [[nodiscard]] std::span<double> weights() noexcept { return weights_; }
    [[nodiscard]] std::span<const double> bias() const noexcept { return bias_; }
    [[nodiscard]] std::span<double> bias() noexcept { return bias_; }

    void logits(std::span<const SparseEntry> row, std::span<double> out) const;
    [[nodiscard]] ProbVector predict(std::span<const SparseEntry> row) const;

    friend bool operator==(const SoftmaxModel &, const SoftmaxModel &) = default;

  private:
    std::size_t width_ = 0;
    std::vector<double> weights_;
    std::vector<double> bias_;
};

/// Training data: rows, per-row target distributions (N x K, row-major) and
/// per-row loss weights that sum to 1.
struct SoftmaxProblem {
    const SparseMatrix &rows;
    std::span<const double> targets;
    std::span<const double> weights;
};

/// sum_i w_i * CE(t_i, p_i) + l2/2 * ||W||^2 (bias unregularized).
double softmax_objective(const SoftmaxModel &model, const SoftmaxProblem &problem, double l2);

/// Analytic gradient of softmax_objective.
void softmax_gradient(const SoftmaxModel &model, const SoftmaxProblem &problem, double l2, std::vector<double> &grad_weights, std::vector<double> &grad_bias);

/// Trains from zero weights. Mini-batch steps scale the batch gradient by
/// N/|batch| so each step is an unbiased estimate of the full gradient. When
/// `epoch_objectives` is given, the objective after every epoch is appended.
SoftmaxModel train_softmax(const SoftmaxProblem &problem, std::size_t classes, const SoftmaxConfig &config, std::vector<double> *epoch_objectives = nullptr);

/// Numerically stable softmax of logits.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace vulforge
