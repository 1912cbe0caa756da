#include "vulforge/softmax.hpp"

#include "vulforge/error.hpp"
#include "vulforge/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vulforge {

SoftmaxModel::SoftmaxModel(std::size_t classes, std::size_t width) :
    width_(width),
    weights_(classes * width, 0.0),
    bias_(classes, 0.0) {}

SoftmaxModel::SoftmaxModel(std::size_t classes, std::size_t width, std::vector<double> weights, std::vector<double> bias) :
    width_(width),
    weights_(std::move(weights)),
    bias_(std::move(bias)) {
    if (bias_.size() != classes || weights_.size() != classes * width) {
        throw Error(ErrorCode::WidthMismatch, "softmax parameter shapes do not match K x width");
    }
    for (double v : weights_) {
        if (!std::isfinite(v)) throw Error(ErrorCode::ConfigError, "non-finite weight");
    }
    for (double v : bias_) {
        if (!std::isfinite(v)) throw Error(ErrorCode::ConfigError, "non-finite bias");
    }
}

void SoftmaxModel::logits(std::span<const SparseEntry> row, std::span<double> out) const {
    const std::size_t k = classes();
    for (std::size_t c = 0; c < k; ++c) {
        double z = bias_[c];
        const double *w = weights_.data() + c * width_;
        for (const auto &e : row) {
            z += w[e.index] * e.value;
        }
        out[c] = z;
    }
}

ProbVector SoftmaxModel::predict(std::span<const SparseEntry> row) const {
    std::vector<double> z(classes());
    logits(row, z);
    return ProbVector::from_normalized(softmax(z));
}

std::vector<double> softmax(std::span<const double> logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        out[c] = std::exp(logits[c] - top);
        sum += out[c];
    }
    for (double &p : out) {
        p /= sum;
    }
    return out;
}

namespace {

void check_problem(const SoftmaxProblem &problem, std::size_t classes) {
    const std::size_t n = problem.rows.rows();
    if (n == 0) {
        throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
    }
    if (problem.targets.size() != n * classes || problem.weights.size() != n) {
        throw Error(ErrorCode::LengthMismatch, "targets/weights do not match the row count");
    }
}

}  // namespace

double softmax_objective(const SoftmaxModel &model, const SoftmaxProblem &problem, double l2) {
    const std::size_t k = model.classes();
    check_problem(problem, k);
    std::vector<double> z(k);
    double loss = 0.0;
    for (std::size_t i = 0; i < problem.rows.rows(); ++i) {
        model.logits(problem.rows.row(i), z);
        const double top = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - top);
        const double lse = top + std::log(sum);
        double ce = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double t = problem.targets[i * k + c];
            if (t != 0.0) ce -= t * (z[c] - lse);
        }
        loss += problem.weights[i] * ce;
    }
    double sq = 0.0;
    for (double w : model.weights()) sq += w * w;
    return loss + 0.5 * l2 * sq;
}

void softmax_gradient(const SoftmaxModel &model, const SoftmaxProblem &problem, double l2, std::vector<double> &grad_weights, std::vector<double> &grad_bias) {
    const std::size_t k = model.classes();
    const std::size_t width = model.width();
    check_problem(problem, k);
    grad_weights.assign(k * width, 0.0);
    grad_bias.assign(k, 0.0);
    std::vector<double> z(k);
    for (std::size_t i = 0; i < problem.rows.rows(); ++i) {
        const auto row = problem.rows.row(i);
        model.logits(row, z);
        const auto p = softmax(z);
        for (std::size_t c = 0; c < k; ++c) {
            const double r = problem.weights[i] * (p[c] - problem.targets[i * k + c]);
            grad_bias[c] += r;
            for (const auto &e : row) {
                grad_weights[c * width + e.index] += r * e.value;
            }
        }
    }
    const auto w = model.weights();
    for (std::size_t j = 0; j < w.size(); ++j) {
        grad_weights[j] += l2 * w[j];
    }
}

std::string_view to_string(Optimizer optimizer) noexcept { return optimizer == Optimizer::adagrad ? "adagrad" : "sgd"; }

Optimizer parse_optimizer(std::string_view text) {
    if (text == "sgd") return Optimizer::sgd;
    if (text == "adagrad") return Optimizer::adagrad;
    throw Error(ErrorCode::ConfigError, "unknown optimizer '" + std::string(text) + "'");
}

SoftmaxModel train_softmax(const SoftmaxProblem &problem, std::size_t classes, const SoftmaxConfig &config, std::vector<double> *epoch_objectives) {
    check_problem(problem, classes);
    if (config.epochs == 0) {
        throw Error(ErrorCode::ConfigError, "epochs must be >= 1");
    }
    if (!(config.learning_rate > 0.0) || config.l2 < 0.0 || config.learning_rate * config.l2 >= 1.0) {
        throw Error(ErrorCode::ConfigError, "need learning rate > 0, l2 >= 0 and learning rate * l2 < 1");
    }
    const std::size_t n = problem.rows.rows();
    const std::size_t width = problem.rows.cols();
    const std::size_t k = classes;
    const std::size_t batch = (config.batch_size == 0 || config.batch_size > n) ? n : config.batch_size;
    const bool adagrad = config.optimizer == Optimizer::adagrad;

    // SGD keeps W = scale * V so the L2 shrinkage costs O(1) per step on
    // sparse rows. AdaGrad uses scale 1 and applies L2 to touched columns.
    std::vector<double> v(k * width, 0.0);
    std::vector<double> bias(k, 0.0);
    double scale = 1.0;
    std::vector<double> sq;
    std::vector<double> sq_bias;
    if (adagrad) {
        sq.assign(k * width, 0.0);
        sq_bias.assign(k, 0.0);
    }
    std::vector<double> grad(k * width, 0.0);
    std::vector<double> grad_bias(k);
    std::vector<char> is_touched(width, 0);
    std::vector<std::uint32_t> touched;
    std::vector<double> z(k);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(config.seed);

    const auto adaptive_step = [&](double &param, double &acc, double g) {
        if (g == 0.0) return;
        acc += g * g;
        param -= config.learning_rate * g / std::sqrt(acc);
    };

    const auto materialize = [&] {
        std::vector<double> w(v);
        for (double &x : w) x *= scale;
        return SoftmaxModel(k, width, std::move(w), bias);
    };

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle) {
            rng.shuffle(std::span<std::size_t>(order));
        }
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(n, start + batch);
            const double factor = static_cast<double>(n) / static_cast<double>(end - start);
            std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
            for (std::size_t idx = start; idx < end; ++idx) {
                const std::size_t i = order[idx];
                const auto row = problem.rows.row(i);
                for (std::size_t c = 0; c < k; ++c) {
                    double acc = 0.0;
                    const double *vc = v.data() + c * width;
                    for (const auto &e : row) acc += vc[e.index] * e.value;
                    z[c] = scale * acc + bias[c];
                }
                const auto p = softmax(z);
                for (const auto &e : row) {
                    if (!is_touched[e.index]) {
                        is_touched[e.index] = 1;
                        touched.push_back(e.index);
                    }
                }
                for (std::size_t c = 0; c < k; ++c) {
                    const double r = problem.weights[i] * factor * (p[c] - problem.targets[i * k + c]);
                    grad_bias[c] += r;
                    double *gc = grad.data() + c * width;
                    for (const auto &e : row) gc[e.index] += r * e.value;
                }
            }
            if (adagrad) {
                for (const auto j : touched) {
                    for (std::size_t c = 0; c < k; ++c) {
                        const std::size_t at = c * width + j;
                        adaptive_step(v[at], sq[at], grad[at] + config.l2 * v[at]);
                        grad[at] = 0.0;
                    }
                    is_touched[j] = 0;
                }
                for (std::size_t c = 0; c < k; ++c) adaptive_step(bias[c], sq_bias[c], grad_bias[c]);
            } else {
                scale *= 1.0 - config.learning_rate * config.l2;
                for (const auto j : touched) {
                    for (std::size_t c = 0; c < k; ++c) {
                        double &g = grad[c * width + j];
                        v[c * width + j] -= config.learning_rate * g / scale;
                        g = 0.0;
                    }
                    is_touched[j] = 0;
                }
                for (std::size_t c = 0; c < k; ++c) {
                    bias[c] -= config.learning_rate * grad_bias[c];
                }
                if (scale < 1e-9) {
                    for (double &x : v) x *= scale;
                    scale = 1.0;
                }
            }
            touched.clear();
        }
        if (epoch_objectives != nullptr) {
            epoch_objectives->push_back(softmax_objective(materialize(), problem, config.l2));
        }
    }
    return materialize();
}

}  // namespace vulforge
