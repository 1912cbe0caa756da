#include "vulforge/core.hpp"

#include "vulforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace vulforge {

namespace {

// Renormalization is skipped inside this band so that re-validating an already
// normalized vector is a bitwise no-op.
constexpr double kRenormBand = 1e-12;

std::vector<double> renormalize(std::vector<double> probs, double sum) {
    if (std::abs(sum - 1.0) > kRenormBand) {
        for (double &p : probs) {
            p /= sum;
        }
    }
    return probs;
}

}  // namespace

ProbVector ProbVector::from_normalized(std::vector<double> probs) {
    if (probs.empty()) {
        throw Error(ErrorCode::InvalidProbVector, "empty probability vector");
    }
    for (double &p : probs) {
        if (!std::isfinite(p) || p < -kInternalTolerance || p > 1.0 + kInternalTolerance) {
            throw Error(ErrorCode::InvalidProbVector, "entry outside [0,1]");
        }
        p = std::clamp(p, 0.0, 1.0);
    }
    const double sum = exact_sum(probs);
    if (std::abs(sum - 1.0) > kInternalTolerance) {
        throw Error(ErrorCode::InvalidProbVector, "entries sum to " + std::to_string(sum));
    }
    return ProbVector(renormalize(std::move(probs), sum));
}

ProbVector ProbVector::one_hot(std::size_t classes, Label hot) {
    if (hot >= classes) {
        throw Error(ErrorCode::InvalidProbVector, "one-hot index out of range");
    }
    std::vector<double> probs(classes, 0.0);
    probs[hot] = 1.0;
    return ProbVector(std::move(probs));
}

ProbVector ProbVector::uniform(std::size_t classes) {
    if (classes == 0) {
        throw Error(ErrorCode::InvalidProbVector, "empty probability vector");
    }
    return ProbVector(std::vector<double>(classes, 1.0 / static_cast<double>(classes)));
}

ProbVector validate_prob_vector(std::span<const double> raw) {
    if (raw.empty()) {
        throw Error(ErrorCode::InvalidProbVector, "empty probability vector");
    }
    for (double p : raw) {
        if (!std::isfinite(p)) {
            throw Error(ErrorCode::InvalidProbVector, "non-finite entry");
        }
        if (p < 0.0) {
            throw Error(ErrorCode::NegativeEntry, "entry " + std::to_string(p));
        }
    }
    const double sum = exact_sum(raw);
    if (sum < 1.0 - kIngestTolerance || sum > 1.0 + kIngestTolerance) {
        throw Error(ErrorCode::SumOutOfTolerance, "entries sum to " + std::to_string(sum));
    }
    return ProbVector(renormalize(std::vector<double>(raw.begin(), raw.end()), sum));
}

Label argmax_label(std::span<const double> scores) {
    if (scores.empty()) {
        throw Error(ErrorCode::InvalidProbVector, "argmax of an empty vector");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) {
            best = i;
        }
    }
    return static_cast<Label>(best);
}

Label argmax_label(const ProbVector &p) { return argmax_label(p.values()); }

Label decision_label(const ProbVector &p) {
    if (p.size() == 2) {
        return p[1] >= 0.5 ? 1U : 0U;
    }
    return argmax_label(p);
}

double exact_sum(std::span<const double> values) {
    // Shewchuk / msum: maintain non-overlapping partials whose exact sum equals
    // the exact sum of the inputs seen so far.
    std::vector<double> partials;
    for (double x : values) {
        std::size_t kept = 0;
        for (std::size_t j = 0; j < partials.size(); ++j) {
            double y = partials[j];
            if (std::abs(x) < std::abs(y)) {
                std::swap(x, y);
            }
            const double hi = x + y;
            const double lo = y - (hi - x);
            if (lo != 0.0) {
                partials[kept++] = lo;
            }
            x = hi;
        }
        partials.resize(kept);
        partials.push_back(x);
    }
    if (partials.empty()) {
        return 0.0;
    }
    std::size_t n = partials.size();
    double hi = partials[--n];
    double lo = 0.0;
    while (n > 0) {
        const double x = hi;
        const double y = partials[--n];
        hi = x + y;
        lo = y - (hi - x);
        if (lo != 0.0) {
            break;
        }
    }
    // Round-half-even correction when the remaining partials push past a tie.
    if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
        const double y = lo * 2.0;
        const double x = hi + y;
        if (y == x - hi) {
            hi = x;
        }
    }
    return hi;
}

double exact_dot(std::span<const double> a, std::span<const double> b) {
    std::vector<double> terms;
    terms.reserve(2 * a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double prod = a[i] * b[i];
        terms.push_back(prod);
        terms.push_back(std::fma(a[i], b[i], -prod));
    }
    return exact_sum(terms);
}

ProbVector mixture(std::span<const ProbVector> rows, std::span<const double> weights) {
    if (rows.empty() || rows.size() != weights.size()) {
        throw Error(ErrorCode::MemberKMismatch, "mixture needs one weight per row");
    }
    const std::size_t classes = rows.front().size();
    for (const auto &row : rows) {
        if (row.size() != classes) {
            throw Error(ErrorCode::MemberKMismatch, "rows disagree on the class count");
        }
    }
    // Equal weights stand for exactly 1/M; dividing the exact sum by M avoids
    // the rounding baked into a stored 1/M.
    const bool uniform = std::all_of(weights.begin(), weights.end(), [&](double w) { return w == weights.front(); });
    const double m = static_cast<double>(rows.size());
    std::vector<double> column(rows.size());
    std::vector<double> out(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t j = 0; j < rows.size(); ++j) {
            column[j] = rows[j][c];
        }
        out[c] = uniform ? exact_sum(column) / m : exact_dot(weights, column);
    }
    return ProbVector::from_normalized(std::move(out));
}

std::string_view to_string(Split split) noexcept {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "test";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "val") return Split::val;
    if (text == "test") return Split::test;
    throw Error(ErrorCode::ConfigError, "unknown split '" + std::string(text) + "'");
}

PredictionSet::PredictionSet(std::string model_id, Split split) :
    model_id_(std::move(model_id)),
    split_(split) {}

void PredictionSet::add(const std::string &id, ProbVector probs) {
    if (index_.contains(id)) {
        throw Error(ErrorCode::DuplicateId, "sample '" + id + "' listed twice in " + model_id_);
    }
    if (ids_.empty()) {
        classes_ = probs.size();
    } else if (probs.size() != classes_) {
        throw Error(ErrorCode::MalformedProbVector, "sample '" + id + "' has K=" + std::to_string(probs.size()) + ", expected " + std::to_string(classes_));
    }
    index_.emplace(id, ids_.size());
    ids_.push_back(id);
    rows_.push_back(std::move(probs));
}

const ProbVector &PredictionSet::at(const std::string &id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) {
        throw Error(ErrorCode::UnknownSample, "sample '" + id + "' not in " + model_id_);
    }
    return rows_[it->second];
}

}  // namespace vulforge
