#include "vulforge/metamodels.hpp"

#include "vulforge/error.hpp"
#include "vulforge/parallel.hpp"
#include "vulforge/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vulforge {

std::string_view to_string(MetaKind kind) noexcept {
    switch (kind) {
        case MetaKind::lr: return "lr";
        case MetaKind::rf: return "rf";
        case MetaKind::svm: return "svm";
        case MetaKind::knn: return "knn";
    }
    return "lr";
}

MetaKind parse_meta_kind(std::string_view text) {
    if (text == "lr") return MetaKind::lr;
    if (text == "rf") return MetaKind::rf;
    if (text == "svm") return MetaKind::svm;
    if (text == "knn") return MetaKind::knn;
    throw Error(ErrorCode::ConfigError, "unknown meta-model kind '" + std::string(text) + "'");
}

json to_json(const MetaConfig &config) {
    return json{
        {"learning_rate", config.learning_rate},
        {"epochs", config.epochs},
        {"batch_size", config.batch_size},
        {"l2", config.l2},
        {"trees", config.trees},
        {"max_depth", config.max_depth},
        {"bootstrap", config.bootstrap},
        {"k", config.k},
        {"seed", config.seed},
    };
}

MetaConfig meta_config_from_json(const json &doc) {
    MetaConfig config;
    try {
        config.learning_rate = doc.value("learning_rate", config.learning_rate);
        config.epochs = doc.value("epochs", config.epochs);
        config.batch_size = doc.value("batch_size", config.batch_size);
        config.l2 = doc.value("l2", config.l2);
        config.trees = doc.value("trees", config.trees);
        config.max_depth = doc.value("max_depth", config.max_depth);
        config.bootstrap = doc.value("bootstrap", config.bootstrap);
        config.k = doc.value("k", config.k);
        config.seed = doc.value("seed", config.seed);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::ConfigError, std::string("meta config: ") + e.what());
    }
    return config;
}

// --- linear SVM --------------------------------------------------------------

namespace {

double dot_row(const double *w, const std::vector<double> &x) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += w[j] * x[j];
    return acc;
}

double class_objective(const double *w, double b, std::size_t width, const MetaRows &rows, std::span<const Label> labels, Label cls, double l2) {
    double hinge = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double s = labels[i] == cls ? 1.0 : -1.0;
        hinge += std::max(0.0, 1.0 - s * (dot_row(w, rows[i]) + b));
    }
    double sq = 0.0;
    for (std::size_t j = 0; j < width; ++j) sq += w[j] * w[j];
    return 0.5 * l2 * sq + hinge / static_cast<double>(rows.size());
}

void class_subgradient(const double *w, double b, std::size_t width, const MetaRows &rows, std::span<const Label> labels, Label cls, double l2, double *grad_w, double &grad_b) {
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    for (std::size_t j = 0; j < width; ++j) grad_w[j] = l2 * w[j];
    grad_b = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double s = labels[i] == cls ? 1.0 : -1.0;
        if (s * (dot_row(w, rows[i]) + b) < 1.0) {
            for (std::size_t j = 0; j < width; ++j) grad_w[j] -= s * rows[i][j] * inv_n;
            grad_b -= s * inv_n;
        }
    }
}

void check_rows(const MetaRows &rows, std::size_t label_count) {
    if (rows.empty()) {
        throw Error(ErrorCode::EmptyTrainingSet, "meta-model needs at least one row");
    }
    if (label_count != rows.size()) {
        throw Error(ErrorCode::WidthMismatch, std::to_string(rows.size()) + " rows but " + std::to_string(label_count) + " labels");
    }
    const std::size_t width = rows.front().size();
    for (const auto &row : rows) {
        if (row.size() != width) {
            throw Error(ErrorCode::WidthMismatch, "ragged meta rows");
        }
    }
}

}  // namespace

double svm_objective(const LinearSvm &svm, const MetaRows &rows, std::span<const Label> labels, double l2) {
    check_rows(rows, labels.size());
    double total = 0.0;
    for (std::size_t c = 0; c < svm.classes; ++c) {
        total += class_objective(svm.weights.data() + c * svm.width, svm.bias[c], svm.width, rows, labels, static_cast<Label>(c), l2);
    }
    return total;
}

void svm_subgradient(const LinearSvm &svm, const MetaRows &rows, std::span<const Label> labels, double l2, std::vector<double> &grad_weights, std::vector<double> &grad_bias) {
    check_rows(rows, labels.size());
    grad_weights.assign(svm.classes * svm.width, 0.0);
    grad_bias.assign(svm.classes, 0.0);
    for (std::size_t c = 0; c < svm.classes; ++c) {
        class_subgradient(svm.weights.data() + c * svm.width, svm.bias[c], svm.width, rows, labels, static_cast<Label>(c), l2, grad_weights.data() + c * svm.width, grad_bias[c]);
    }
}

LinearSvm train_svm(const MetaRows &rows, std::span<const Label> labels, std::size_t classes, const MetaConfig &config, std::vector<double> *epoch_objectives) {
    check_rows(rows, labels.size());
    if (config.epochs == 0 || !(config.learning_rate > 0.0)) {
        throw Error(ErrorCode::ConfigError, "svm needs epochs >= 1 and a positive learning rate");
    }
    LinearSvm svm;
    svm.classes = classes;
    svm.width = rows.front().size();
    svm.weights.assign(classes * svm.width, 0.0);
    svm.bias.assign(classes, 0.0);

    std::vector<double> step(classes, config.learning_rate);
    std::vector<double> objective(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        objective[c] = class_objective(svm.weights.data() + c * svm.width, svm.bias[c], svm.width, rows, labels, static_cast<Label>(c), config.l2);
    }
    std::vector<double> grad_w(svm.width);
    std::vector<double> trial_w(svm.width);
    constexpr int kMaxHalvings = 40;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t c = 0; c < classes; ++c) {
            double *w = svm.weights.data() + c * svm.width;
            double grad_b = 0.0;
            class_subgradient(w, svm.bias[c], svm.width, rows, labels, static_cast<Label>(c), config.l2, grad_w.data(), grad_b);
            double eta = step[c];
            for (int attempt = 0; attempt < kMaxHalvings; ++attempt, eta *= 0.5) {
                for (std::size_t j = 0; j < svm.width; ++j) trial_w[j] = w[j] - eta * grad_w[j];
                const double trial_b = svm.bias[c] - eta * grad_b;
                const double trial = class_objective(trial_w.data(), trial_b, svm.width, rows, labels, static_cast<Label>(c), config.l2);
                if (trial <= objective[c]) {
                    std::copy(trial_w.begin(), trial_w.end(), w);
                    svm.bias[c] = trial_b;
                    objective[c] = trial;
                    step[c] = std::min(config.learning_rate, eta * 2.0);
                    break;
                }
            }
        }
        if (epoch_objectives != nullptr) {
            epoch_objectives->push_back(std::accumulate(objective.begin(), objective.end(), 0.0));
        }
    }
    return svm;
}

// --- random forest -----------------------------------------------------------

const TreeNode &DecisionTree::leaf_for(std::span<const double> row) const {
    const TreeNode *node = &nodes.front();
    while (node->feature >= 0) {
        node = &nodes[row[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right];
    }
    return *node;
}

namespace {

class TreeBuilder {
  public:
    TreeBuilder(const MetaRows &rows, std::span<const Label> labels, std::size_t classes, const MetaConfig &config, Rng &rng) :
        rows_(rows),
        labels_(labels),
        classes_(classes),
        width_(rows.front().size()),
        config_(config),
        rng_(rng) {}

    DecisionTree build(std::vector<std::size_t> sample) {
        build_node(sample, 0);
        return std::move(tree_);
    }

  private:
    struct Split {
        bool found = false;
        std::size_t feature = 0;
        double threshold = 0.0;
        double impurity = 0.0;
    };

    std::uint32_t build_node(std::vector<std::size_t> &sample, std::size_t depth) {
        const auto index = static_cast<std::uint32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        tree_.nodes[index].count = sample.size();

        std::vector<double> counts(classes_, 0.0);
        for (auto r : sample) counts[labels_[r]] += 1.0;
        const auto represented = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; });
        const bool depth_capped = config_.max_depth != 0 && depth >= config_.max_depth;

        Split best;
        if (represented > 1 && !depth_capped && sample.size() >= 2) {
            best = find_split(sample);
        }
        if (!best.found) {
            for (double &c : counts) c /= static_cast<double>(sample.size());
            tree_.nodes[index].distribution = std::move(counts);
            return index;
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (auto r : sample) {
            (rows_[r][best.feature] <= best.threshold ? left : right).push_back(r);
        }
        sample.clear();
        sample.shrink_to_fit();
        const auto left_index = build_node(left, depth + 1);
        const auto right_index = build_node(right, depth + 1);
        auto &node = tree_.nodes[index];
        node.feature = static_cast<std::int32_t>(best.feature);
        node.threshold = best.threshold;
        node.left = left_index;
        node.right = right_index;
        return index;
    }

    Split find_split(const std::vector<std::size_t> &sample) {
        std::vector<std::size_t> features(width_);
        std::iota(features.begin(), features.end(), std::size_t{0});
        rng_.shuffle(std::span<std::size_t>(features));
        const std::size_t wanted = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(width_))));

        Split best;
        std::vector<std::size_t> order(sample);
        std::vector<double> left(classes_);
        std::vector<double> total(classes_, 0.0);
        for (auto r : sample) total[labels_[r]] += 1.0;
        const double n = static_cast<double>(sample.size());

        // Look at `wanted` features; if none of them splits, keep scanning.
        for (std::size_t idx = 0; idx < features.size(); ++idx) {
            if (idx >= wanted && best.found) break;
            const std::size_t f = features[idx];
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double va = rows_[a][f];
                const double vb = rows_[b][f];
                return va < vb || (va == vb && a < b);
            });
            std::fill(left.begin(), left.end(), 0.0);
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                left[labels_[order[i]]] += 1.0;
                const double here = rows_[order[i]][f];
                const double next = rows_[order[i + 1]][f];
                if (here == next) continue;
                const double n_left = static_cast<double>(i + 1);
                const double n_right = n - n_left;
                double sq_left = 0.0;
                double sq_right = 0.0;
                for (std::size_t c = 0; c < classes_; ++c) {
                    sq_left += left[c] * left[c];
                    const double rc = total[c] - left[c];
                    sq_right += rc * rc;
                }
                // n * weighted Gini of the two children.
                const double impurity = (n_left - sq_left / n_left) + (n_right - sq_right / n_right);
                if (!best.found || impurity < best.impurity) {
                    double threshold = here + (next - here) / 2.0;
                    if (!(threshold < next)) threshold = here;
                    best = {true, f, threshold, impurity};
                }
            }
        }
        return best;
    }

    const MetaRows &rows_;
    std::span<const Label> labels_;
    std::size_t classes_;
    std::size_t width_;
    const MetaConfig &config_;
    Rng &rng_;
    DecisionTree tree_;
};

Forest train_forest(const MetaRows &rows, std::span<const Label> labels, std::size_t classes, const MetaConfig &config) {
    if (config.trees == 0) {
        throw Error(ErrorCode::ConfigError, "forest needs at least one tree");
    }
    Forest forest;
    forest.trees.resize(config.trees);
    parallel_for(config.trees, config.workers, [&](std::size_t t) {
        Rng rng(derive_seed(config.seed, t));
        std::vector<std::size_t> sample(rows.size());
        if (config.bootstrap) {
            for (auto &r : sample) r = rng.uniform_index(rows.size());
        } else {
            std::iota(sample.begin(), sample.end(), std::size_t{0});
        }
        forest.trees[t] = TreeBuilder(rows, labels, classes, config, rng).build(std::move(sample));
    });
    return forest;
}

MetaModel fit_hard(MetaKind kind, const MetaRows &raw_rows, std::span<const Label> labels, std::size_t classes, const MetaConfig &config, std::span<const double> soft_targets) {
    check_rows(raw_rows, labels.size());
    if (classes < 2) {
        throw Error(ErrorCode::ConfigError, "meta-model needs at least two classes");
    }
    for (auto y : labels) {
        if (y >= classes) throw Error(ErrorCode::UnknownLabel, "label " + std::to_string(y));
    }
    const std::size_t width = raw_rows.front().size();
    // Gradient methods need comparable column scales: a rare indicator column
    // next to dense probability columns is otherwise out of reach of any
    // single step size.
    Standardizer standardizer;
    if (kind == MetaKind::lr || kind == MetaKind::svm) standardizer = Standardizer::fit(raw_rows);
    const MetaRows rows = standardizer.empty() ? raw_rows : standardizer.apply(raw_rows);
    switch (kind) {
        case MetaKind::lr: {
            SparseMatrix matrix(width);
            for (const auto &row : rows) matrix.add_dense_row(row);
            std::vector<double> targets;
            if (soft_targets.empty()) {
                targets.assign(rows.size() * classes, 0.0);
                for (std::size_t i = 0; i < rows.size(); ++i) targets[i * classes + labels[i]] = 1.0;
            } else {
                targets.assign(soft_targets.begin(), soft_targets.end());
            }
            const std::vector<double> weights(rows.size(), 1.0 / static_cast<double>(rows.size()));
            // Correlated columns (members that mostly agree) pile curvature onto
            // one direction; shrink the step so it stays under 2 / curvature.
            const double curvature = 0.5 * second_moment_bound(rows);
            SoftmaxConfig sc;
            sc.learning_rate = config.learning_rate * std::min(1.0, 1.0 / curvature);
            sc.epochs = config.epochs;
            sc.batch_size = config.batch_size;
            sc.l2 = config.l2;
            sc.seed = config.seed;
            return MetaModel(kind, width, classes, config, train_softmax({matrix, targets, weights}, classes, sc), std::move(standardizer));
        }
        case MetaKind::svm:
            return MetaModel(kind, width, classes, config, train_svm(rows, labels, classes, config), std::move(standardizer));
        case MetaKind::rf:
            return MetaModel(kind, width, classes, config, train_forest(rows, labels, classes, config));
        case MetaKind::knn: {
            if (config.k == 0) {
                throw Error(ErrorCode::ConfigError, "knn needs k >= 1");
            }
            KnnIndex index{rows, std::vector<Label>(labels.begin(), labels.end()), std::min(config.k, rows.size())};
            return MetaModel(kind, width, classes, config, std::move(index));
        }
    }
    throw Error(ErrorCode::ConfigError, "unknown meta-model kind");
}

}  // namespace

double second_moment_bound(const MetaRows &rows) {
    if (rows.empty()) return 1.0;
    const std::size_t width = rows.front().size() + 1;
    const double n = static_cast<double>(rows.size());
    // A fixed generic start: symmetric starts can be orthogonal to the data
    // (complementary probability columns standardize to exact negatives).
    Rng rng(0x9e3779b97f4a7c15ULL);
    std::vector<double> v(width);
    for (double &x : v) x = rng.uniform(0.5, 1.5) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    std::vector<double> next(width);
    double lambda = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (const auto &row : rows) {
            double dot = v.back();
            for (std::size_t j = 0; j + 1 < width; ++j) dot += row[j] * v[j];
            for (std::size_t j = 0; j + 1 < width; ++j) next[j] += dot * row[j];
            next.back() += dot;
        }
        double norm = 0.0;
        for (double &x : next) {
            x /= n;
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (!(norm > 0.0)) return 1.0;
        const double previous = lambda;
        lambda = norm;
        for (std::size_t j = 0; j < width; ++j) v[j] = next[j] / norm;
        if (iter > 0 && std::abs(lambda - previous) <= 1e-9 * lambda) break;
    }
    return lambda;
}

Standardizer Standardizer::fit(const MetaRows &rows) {
    Standardizer s;
    if (rows.empty()) return s;
    const std::size_t width = rows.front().size();
    const double n = static_cast<double>(rows.size());
    s.mean.assign(width, 0.0);
    s.scale.assign(width, 1.0);
    std::vector<double> column(rows.size());
    for (std::size_t j = 0; j < width; ++j) {
        for (std::size_t i = 0; i < rows.size(); ++i) column[i] = rows[i][j];
        const double mean = exact_sum(column) / n;
        for (double &x : column) x = (x - mean) * (x - mean);
        const double sd = std::sqrt(exact_sum(column) / n);
        s.mean[j] = mean;
        if (sd > 1e-12) s.scale[j] = sd;
    }
    return s;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
    if (empty()) return {row.begin(), row.end()};
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / scale[j];
    return out;
}

MetaRows Standardizer::apply(const MetaRows &rows) const {
    MetaRows out;
    out.reserve(rows.size());
    for (const auto &row : rows) out.push_back(apply(row));
    return out;
}

MetaModel::MetaModel(MetaKind kind, std::size_t input_width, std::size_t output_width, MetaConfig config, Params params, Standardizer standardizer) :
    kind_(kind),
    input_width_(input_width),
    output_width_(output_width),
    config_(config),
    params_(std::move(params)),
    standardizer_(std::move(standardizer)) {
    if (!standardizer_.empty() && (standardizer_.mean.size() != input_width_ || standardizer_.scale.size() != input_width_)) {
        throw Error(ErrorCode::WidthMismatch, "standardizer width differs from the model input width");
    }
}

MetaModel meta_fit(MetaKind kind, const MetaRows &rows, std::span<const Label> labels, std::size_t classes, const MetaConfig &config) {
    return fit_hard(kind, rows, labels, classes, config, {});
}

MetaModel meta_fit_soft(MetaKind kind, const MetaRows &rows, std::span<const ProbVector> targets, const MetaConfig &config) {
    if (targets.empty()) {
        throw Error(ErrorCode::EmptyTrainingSet, "meta-model needs at least one row");
    }
    const std::size_t classes = targets.front().size();
    std::vector<Label> labels;
    std::vector<double> flat;
    for (const auto &t : targets) {
        if (t.size() != classes) {
            throw Error(ErrorCode::WidthMismatch, "targets disagree on width");
        }
        labels.push_back(argmax_label(t));
        flat.insert(flat.end(), t.begin(), t.end());
    }
    return fit_hard(kind, rows, labels, classes, config, kind == MetaKind::lr ? std::span<const double>(flat) : std::span<const double>());
}

ProbVector meta_predict(const MetaModel &model, std::span<const double> row) {
    if (row.size() != model.input_width()) {
        throw Error(ErrorCode::WidthMismatch, "row width " + std::to_string(row.size()) + " != " + std::to_string(model.input_width()));
    }
    const std::size_t classes = model.output_width();
    const auto &standardizer = model.standardizer();
    std::vector<double> scaled;
    if (!standardizer.empty()) {
        scaled = standardizer.apply(row);
        row = scaled;
    }
    switch (model.kind()) {
        case MetaKind::lr: {
            std::vector<SparseEntry> sparse;
            for (std::size_t j = 0; j < row.size(); ++j) {
                if (row[j] != 0.0) sparse.push_back({static_cast<std::uint32_t>(j), row[j]});
            }
            return std::get<SoftmaxModel>(model.params()).predict(sparse);
        }
        case MetaKind::svm: {
            const auto &svm = std::get<LinearSvm>(model.params());
            std::vector<double> squashed(classes);
            double sum = 0.0;
            for (std::size_t c = 0; c < classes; ++c) {
                double margin = svm.bias[c];
                for (std::size_t j = 0; j < row.size(); ++j) margin += svm.weights[c * svm.width + j] * row[j];
                squashed[c] = 1.0 / (1.0 + std::exp(-margin));
                sum += squashed[c];
            }
            for (double &p : squashed) p /= sum;
            return ProbVector::from_normalized(std::move(squashed));
        }
        case MetaKind::rf: {
            const auto &forest = std::get<Forest>(model.params());
            std::vector<double> acc(classes, 0.0);
            for (const auto &tree : forest.trees) {
                const auto &leaf = tree.leaf_for(row);
                for (std::size_t c = 0; c < classes; ++c) acc[c] += leaf.distribution[c];
            }
            for (double &p : acc) p /= static_cast<double>(forest.trees.size());
            return ProbVector::from_normalized(std::move(acc));
        }
        case MetaKind::knn: {
            const auto &index = std::get<KnnIndex>(model.params());
            std::vector<std::pair<double, std::size_t>> dist(index.rows.size());
            for (std::size_t i = 0; i < index.rows.size(); ++i) {
                double d = 0.0;
                for (std::size_t j = 0; j < row.size(); ++j) {
                    const double diff = index.rows[i][j] - row[j];
                    d += diff * diff;
                }
                dist[i] = {d, i};
            }
            std::sort(dist.begin(), dist.end());
            const double cutoff = dist[index.k - 1].first;
            std::vector<double> votes(classes, 0.0);
            double selected = 0.0;
            for (const auto &[d, i] : dist) {
                if (d > cutoff) break;
                votes[index.labels[i]] += 1.0;
                selected += 1.0;
            }
            for (double &v : votes) v /= selected;
            return ProbVector::from_normalized(std::move(votes));
        }
    }
    throw Error(ErrorCode::ConfigError, "unknown meta-model kind");
}

json to_json(const MetaModel &model) {
    json params;
    switch (model.kind()) {
        case MetaKind::lr: {
            const auto &sm = std::get<SoftmaxModel>(model.params());
            params = {{"weights", std::vector<double>(sm.weights().begin(), sm.weights().end())}, {"bias", std::vector<double>(sm.bias().begin(), sm.bias().end())}};
            break;
        }
        case MetaKind::svm: {
            const auto &svm = std::get<LinearSvm>(model.params());
            params = {{"weights", svm.weights}, {"bias", svm.bias}};
            break;
        }
        case MetaKind::rf: {
            json trees = json::array();
            for (const auto &tree : std::get<Forest>(model.params()).trees) {
                json nodes = json::array();
                for (const auto &n : tree.nodes) {
                    nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.count, n.distribution}));
                }
                trees.push_back(std::move(nodes));
            }
            params = {{"trees", std::move(trees)}};
            break;
        }
        case MetaKind::knn: {
            const auto &index = std::get<KnnIndex>(model.params());
            params = {{"k", index.k}, {"rows", index.rows}, {"labels", index.labels}};
            break;
        }
    }
    json doc{
        {"kind", std::string(to_string(model.kind()))},
        {"input_width", model.input_width()},
        {"output_width", model.output_width()},
        {"config", to_json(model.config())},
        {"params", std::move(params)},
    };
    if (!model.standardizer().empty()) {
        doc["standardizer"] = {{"mean", model.standardizer().mean}, {"scale", model.standardizer().scale}};
    }
    return doc;
}

MetaModel meta_model_from_json(const json &doc) {
    try {
        const auto kind = parse_meta_kind(doc.at("kind").get<std::string>());
        const auto in = doc.at("input_width").get<std::size_t>();
        const auto out = doc.at("output_width").get<std::size_t>();
        const auto config = meta_config_from_json(doc.at("config"));
        const auto &params = doc.at("params");
        Standardizer standardizer;
        if (doc.contains("standardizer")) {
            standardizer.mean = doc.at("standardizer").at("mean").get<std::vector<double>>();
            standardizer.scale = doc.at("standardizer").at("scale").get<std::vector<double>>();
        }
        switch (kind) {
            case MetaKind::lr:
                return MetaModel(kind, in, out, config, SoftmaxModel(out, in, params.at("weights").get<std::vector<double>>(), params.at("bias").get<std::vector<double>>()), std::move(standardizer));
            case MetaKind::svm:
                return MetaModel(kind, in, out, config, LinearSvm{out, in, params.at("weights").get<std::vector<double>>(), params.at("bias").get<std::vector<double>>()}, std::move(standardizer));
            case MetaKind::rf: {
                Forest forest;
                for (const auto &nodes : params.at("trees")) {
                    DecisionTree tree;
                    for (const auto &n : nodes) {
                        tree.nodes.push_back(TreeNode{n.at(0).get<std::int32_t>(), n.at(1).get<double>(), n.at(2).get<std::uint32_t>(), n.at(3).get<std::uint32_t>(), n.at(4).get<std::size_t>(), n.at(5).get<std::vector<double>>()});
                    }
                    forest.trees.push_back(std::move(tree));
                }
                return MetaModel(kind, in, out, config, std::move(forest));
            }
            case MetaKind::knn:
                return MetaModel(kind, in, out, config, KnnIndex{params.at("rows").get<MetaRows>(), params.at("labels").get<std::vector<Label>>(), params.at("k").get<std::size_t>()});
        }
    } catch (const json::exception &e) {
        throw Error(ErrorCode::MalformedRecord, std::string("meta model: ") + e.what());
    }
    throw Error(ErrorCode::MalformedRecord, "meta model: unknown kind");
}

}  // namespace vulforge
