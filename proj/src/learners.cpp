#include "vulforge/learners.hpp"

#include "vulforge/error.hpp"
#include "vulforge/parallel.hpp"
#include "vulforge/random.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace vulforge {

SampleWeights SampleWeights::uniform(std::vector<std::string> ids) {
    SampleWeights w;
    w.weights.assign(ids.size(), ids.empty() ? 0.0 : 1.0 / static_cast<double>(ids.size()));
    w.ids = std::move(ids);
    return w;
}

SampleWeights SampleWeights::normalized(std::vector<std::string> ids, std::vector<double> masses) {
    if (ids.size() != masses.size()) {
        throw Error(ErrorCode::WeightCoverageMismatch, "one mass per id required");
    }
    for (double m : masses) {
        if (!std::isfinite(m) || m < 0.0) {
            throw Error(ErrorCode::WeightCoverageMismatch, "weights must be finite and non-negative");
        }
    }
    const double total = exact_sum(masses);
    if (!(total > 0.0)) {
        throw Error(ErrorCode::WeightCoverageMismatch, "weights sum to zero");
    }
    for (double &m : masses) m /= total;
    return SampleWeights{std::move(ids), std::move(masses)};
}

SampleWeights SampleWeights::from_draw(std::span<const std::string> draw) {
    std::vector<std::string> ids;
    std::vector<double> counts;
    std::unordered_map<std::string, std::size_t> slot;
    for (const auto &id : draw) {
        const auto [it, inserted] = slot.emplace(id, ids.size());
        if (inserted) {
            ids.push_back(id);
            counts.push_back(0.0);
        }
        counts[it->second] += 1.0;
    }
    return normalized(std::move(ids), std::move(counts));
}

void SampleWeights::validate() const {
    if (ids.size() != weights.size()) {
        throw Error(ErrorCode::WeightCoverageMismatch, "one weight per id required");
    }
    std::unordered_set<std::string_view> seen;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!seen.insert(ids[i]).second) {
            throw Error(ErrorCode::WeightCoverageMismatch, "id '" + ids[i] + "' weighted twice");
        }
        if (!std::isfinite(weights[i]) || weights[i] < 0.0) {
            throw Error(ErrorCode::WeightCoverageMismatch, "negative weight for '" + ids[i] + "'");
        }
    }
    const double total = exact_sum(weights);
    if (std::abs(total - 1.0) > kInternalTolerance) {
        throw Error(ErrorCode::WeightCoverageMismatch, "weights sum to " + std::to_string(total));
    }
}

std::string_view to_string(WeightMode mode) noexcept { return mode == WeightMode::loss ? "loss" : "resample"; }

WeightMode parse_weight_mode(std::string_view text) {
    if (text == "loss") return WeightMode::loss;
    if (text == "resample") return WeightMode::resample;
    throw Error(ErrorCode::ConfigError, "unknown weight mode '" + std::string(text) + "'");
}

json to_json(const LearnerConfig &config) {
    return json{
        {"dims", config.features.dims},
        {"ngram_orders", config.features.ngram_orders},
        {"learning_rate", config.learning_rate},
        {"epochs", config.epochs},
        {"batch_size", config.batch_size},
        {"l2", config.l2},
        {"normalize", config.normalize},
        {"optimizer", std::string(to_string(config.optimizer))},
        {"seed", config.seed},
        {"weight_mode", std::string(to_string(config.weight_mode))},
    };
}

LearnerConfig learner_config_from_json(const json &doc) {
    LearnerConfig config;
    try {
        config.features.dims = doc.value("dims", config.features.dims);
        config.features.ngram_orders = doc.value("ngram_orders", config.features.ngram_orders);
        config.learning_rate = doc.value("learning_rate", config.learning_rate);
        config.epochs = doc.value("epochs", config.epochs);
        config.batch_size = doc.value("batch_size", config.batch_size);
        config.l2 = doc.value("l2", config.l2);
        config.normalize = doc.value("normalize", config.normalize);
        config.optimizer = parse_optimizer(doc.value("optimizer", std::string(to_string(config.optimizer))));
        config.seed = doc.value("seed", config.seed);
        config.weight_mode = parse_weight_mode(doc.value("weight_mode", std::string("loss")));
    } catch (const json::exception &e) {
        throw Error(ErrorCode::ConfigError, std::string("learner config: ") + e.what());
    }
    return config;
}

FeatureTable FeatureTable::build(const Dataset &dataset, const FeatureConfig &config, std::size_t workers) {
    std::vector<FeatureVector> vectors(dataset.size());
    parallel_for(dataset.size(), workers, [&](std::size_t i) {
        vectors[i] = featurize(tokenize(dataset.samples()[i].code), config);
    });
    FeatureTable table;
    table.dims_ = config.dims;
    table.vectors_.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        table.vectors_.emplace(dataset.samples()[i].id, std::move(vectors[i]));
    }
    return table;
}

const FeatureVector &FeatureTable::at(const std::string &id) const {
    const auto it = vectors_.find(id);
    if (it == vectors_.end()) {
        throw Error(ErrorCode::UnknownSample, "no features for '" + id + "'");
    }
    return it->second;
}

json to_json(const LinearModel &model) {
    const auto &sm = model.softmax;
    json nonzero = json::array();
    for (std::size_t c = 0; c < sm.classes(); ++c) {
        for (std::size_t j = 0; j < sm.width(); ++j) {
            const double w = sm.weights()[c * sm.width() + j];
            if (w != 0.0) nonzero.push_back(json::array({c, j, w}));
        }
    }
    return json{
        {"kind", "builtin_linear"},
        {"classes", sm.classes()},
        {"dims", sm.width()},
        {"bias", std::vector<double>(sm.bias().begin(), sm.bias().end())},
        {"weights", std::move(nonzero)},
        {"config", to_json(model.config)},
    };
}

LinearModel linear_model_from_json(const json &doc) {
    try {
        const auto classes = doc.at("classes").get<std::size_t>();
        const auto dims = doc.at("dims").get<std::size_t>();
        std::vector<double> weights(classes * dims, 0.0);
        for (const auto &entry : doc.at("weights")) {
            const auto c = entry.at(0).get<std::size_t>();
            const auto j = entry.at(1).get<std::size_t>();
            if (c >= classes || j >= dims) {
                throw Error(ErrorCode::WidthMismatch, "weight index out of range");
            }
            weights[c * dims + j] = entry.at(2).get<double>();
        }
        LinearModel model;
        model.config = learner_config_from_json(doc.at("config"));
        model.softmax = SoftmaxModel(classes, dims, std::move(weights), doc.at("bias").get<std::vector<double>>());
        return model;
    } catch (const json::exception &e) {
        throw Error(ErrorCode::MalformedRecord, std::string("linear model: ") + e.what());
    }
}

std::vector<SparseEntry> model_row(const FeatureVector &features, bool normalize) {
    std::vector<SparseEntry> row = features.entries;
    if (normalize && features.norm > 0.0) {
        for (auto &e : row) e.value /= features.norm;
    }
    return row;
}

LinearModel fit_linear(std::span<const FeatureVector> rows, std::span<const Label> labels, std::span<const double> weights, std::size_t classes, const LearnerConfig &config) {
    if (rows.empty()) {
        throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
    }
    if (labels.size() != rows.size() || weights.size() != rows.size()) {
        throw Error(ErrorCode::WeightCoverageMismatch, "rows, labels and weights differ in length");
    }
    if (config.epochs == 0) {
        throw Error(ErrorCode::ConfigError, "epochs must be >= 1");
    }
    SparseMatrix matrix(config.features.dims);
    std::vector<double> targets(rows.size() * classes, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].dims != config.features.dims) {
            throw Error(ErrorCode::DimensionMismatch, "feature width " + std::to_string(rows[i].dims) + " != " + std::to_string(config.features.dims));
        }
        if (labels[i] >= classes) {
            throw Error(ErrorCode::UnknownLabel, "label " + std::to_string(labels[i]));
        }
        matrix.add_row(model_row(rows[i], config.normalize));
        targets[i * classes + labels[i]] = 1.0;
    }
    SoftmaxConfig sc;
    sc.learning_rate = config.learning_rate;
    sc.epochs = config.epochs;
    sc.batch_size = config.batch_size;
    sc.l2 = config.l2;
    sc.seed = config.seed;
    sc.optimizer = config.optimizer;
    LinearModel model;
    model.config = config;
    model.softmax = train_softmax({matrix, targets, weights}, classes, sc);
    return model;
}

LinearModel fit_builtin(const Dataset &dataset, const FeatureTable &features, std::span<const std::string> ids, const SampleWeights &w, const LearnerConfig &config) {
    if (ids.empty()) {
        throw Error(ErrorCode::EmptyTrainingSet, "no training ids");
    }
    if (config.epochs == 0) {
        throw Error(ErrorCode::ConfigError, "epochs must be >= 1");
    }
    w.validate();
    if (w.ids.size() != ids.size()) {
        throw Error(ErrorCode::WeightCoverageMismatch, "weights cover " + std::to_string(w.ids.size()) + " ids, training set has " + std::to_string(ids.size()));
    }
    std::unordered_map<std::string_view, double> weight_of;
    for (std::size_t i = 0; i < w.ids.size(); ++i) weight_of.emplace(w.ids[i], w.weights[i]);

    std::vector<double> weights;
    weights.reserve(ids.size());
    for (const auto &id : ids) {
        const auto it = weight_of.find(id);
        if (it == weight_of.end()) {
            throw Error(ErrorCode::WeightCoverageMismatch, "no weight for training id '" + id + "'");
        }
        weights.push_back(it->second);
    }
    if (std::unordered_set<std::string_view>(ids.begin(), ids.end()).size() != ids.size()) {
        throw Error(ErrorCode::WeightCoverageMismatch, "training ids repeat");
    }

    if (config.weight_mode == WeightMode::resample) {
        // Draw |ids| samples from the weight distribution and train uniformly
        // on the multiset (expressed as multiplicity weights).
        std::vector<double> cumulative(weights.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            cumulative[i] = acc;
        }
        Rng rng(derive_seed(config.seed, 0x5E5A));
        std::vector<double> counts(weights.size(), 0.0);
        for (std::size_t k = 0; k < weights.size(); ++k) {
            const double u = rng.uniform() * acc;
            const auto pos = std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin();
            counts[std::min<std::size_t>(static_cast<std::size_t>(pos), counts.size() - 1)] += 1.0;
        }
        const double n = static_cast<double>(weights.size());
        for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = counts[i] / n;
    }

    std::vector<FeatureVector> rows;
    std::vector<Label> labels;
    rows.reserve(ids.size());
    labels.reserve(ids.size());
    for (const auto &id : ids) {
        rows.push_back(features.at(id));
        labels.push_back(dataset.label(id));
    }
    return fit_linear(rows, labels, weights, dataset.classes(), config);
}

ProbVector predict_builtin(const LinearModel &model, const FeatureVector &features) {
    if (features.dims != model.softmax.width()) {
        throw Error(ErrorCode::DimensionMismatch, "feature width " + std::to_string(features.dims) + " != model width " + std::to_string(model.softmax.width()));
    }
    return model.softmax.predict(model_row(features, model.config.normalize));
}

PredictionSet predict_split(const LinearModel &model, const FeatureTable &features, std::span<const std::string> ids, const std::string &model_id, Split split) {
    PredictionSet set(model_id, split);
    for (const auto &id : ids) {
        set.add(id, predict_builtin(model, features.at(id)));
    }
    return set;
}

std::filesystem::path predictions_path(const std::filesystem::path &dir, const std::string &model_id, Split split) {
    return dir / "preds" / model_id / (std::string(to_string(split)) + ".jsonl");
}

std::filesystem::path round_dir(const std::filesystem::path &dir, std::size_t round) {
    return dir / "boost" / ("round_" + std::to_string(round));
}

std::string predictions_to_jsonl(const PredictionSet &set) {
    std::string out;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto &row = set.rows()[i];
        json line{{"id", set.ids()[i]}, {"probs", std::vector<double>(row.begin(), row.end())}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

void write_predictions(const std::filesystem::path &dir, const PredictionSet &set) {
    atomic_write(predictions_path(dir, set.model_id(), set.split()), predictions_to_jsonl(set));
}

PredictionSet read_predictions_file(const std::filesystem::path &path, const std::string &model_id, Split split, std::span<const std::string> split_ids) {
    std::unordered_map<std::string_view, std::size_t> expected;
    for (std::size_t i = 0; i < split_ids.size(); ++i) expected.emplace(split_ids[i], i);

    std::vector<std::optional<ProbVector>> rows(split_ids.size());
    std::size_t classes = 0;
    for (const auto &[number, text] : read_lines(path)) {
        const std::string where = path.string() + ":" + std::to_string(number);
        json line;
        try {
            line = json::parse(text);
        } catch (const json::parse_error &e) {
            throw Error(ErrorCode::MalformedRecord, where + ": " + e.what());
        }
        if (!line.is_object() || !line.contains("id") || !line["id"].is_string()) {
            throw Error(ErrorCode::MalformedRecord, where + ": missing string 'id'");
        }
        const auto id = line["id"].get<std::string>();
        const auto it = expected.find(id);
        if (it == expected.end()) {
            throw Error(ErrorCode::UnknownSample, id);
        }
        if (rows[it->second]) {
            throw Error(ErrorCode::DuplicateId, id + " appears twice in " + path.string());
        }
        std::vector<double> probs;
        try {
            probs = line.at("probs").get<std::vector<double>>();
            rows[it->second] = validate_prob_vector(probs);
        } catch (const json::exception &) {
            throw Error(ErrorCode::MalformedProbVector, id);
        } catch (const Error &) {
            throw Error(ErrorCode::MalformedProbVector, id);
        }
        if (classes == 0) {
            classes = probs.size();
        } else if (probs.size() != classes) {
            throw Error(ErrorCode::MalformedProbVector, id + " has K=" + std::to_string(probs.size()));
        }
    }
    PredictionSet set(model_id, split);
    for (std::size_t i = 0; i < split_ids.size(); ++i) {
        if (!rows[i]) {
            throw Error(ErrorCode::MissingSample, split_ids[i]);
        }
        set.add(split_ids[i], std::move(*rows[i]));
    }
    return set;
}

PredictionSet ingest_predictions(const std::filesystem::path &dir, const std::string &model_id, Split split, std::span<const std::string> split_ids) {
    return read_predictions_file(predictions_path(dir, model_id, split), model_id, split, split_ids);
}

std::filesystem::path emit_round_weights(const std::filesystem::path &dir, std::size_t round, const SampleWeights &w) {
    if (round == 0) {
        throw Error(ErrorCode::ProtocolOrderError, "boosting rounds start at 1");
    }
    w.validate();
    const auto path = round_dir(dir, round) / "weights.jsonl";
    std::string content;
    for (std::size_t i = 0; i < w.ids.size(); ++i) {
        content += json{{"id", w.ids[i]}, {"weight", w.weights[i]}}.dump();
        content += '\n';
    }
    if (round > 1 && !std::filesystem::exists(round_dir(dir, round - 1) / "weights.jsonl")) {
        throw Error(ErrorCode::ProtocolOrderError, "round " + std::to_string(round) + " emitted before round " + std::to_string(round - 1));
    }
    if (std::filesystem::exists(path) && read_text(path) == content) {
        return path;
    }
    if (std::filesystem::exists(round_dir(dir, round + 1) / "weights.jsonl")) {
        throw Error(ErrorCode::ProtocolOrderError, "round " + std::to_string(round) + " already has a successor; refusing to rewrite it");
    }
    atomic_write(path, content);
    return path;
}

SampleWeights read_round_weights(const std::filesystem::path &dir, std::size_t round) {
    const auto path = round_dir(dir, round) / "weights.jsonl";
    SampleWeights w;
    for (const auto &[number, text] : read_lines(path)) {
        try {
            const auto line = json::parse(text);
            w.ids.push_back(line.at("id").get<std::string>());
            w.weights.push_back(line.at("weight").get<double>());
        } catch (const json::exception &e) {
            throw Error(ErrorCode::MalformedRecord, path.string() + ":" + std::to_string(number) + ": " + e.what());
        }
    }
    w.validate();
    return w;
}

}  // namespace vulforge
