#include "vulforge/experiment.hpp"

#include "vulforge/parallel.hpp"
#include "vulforge/random.hpp"
#include "vulforge/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace vulforge {

namespace fs = std::filesystem;

namespace {

// Seed streams derived from the experiment seed.
constexpr std::uint64_t kBootstrapStream = 1;
constexpr std::uint64_t kLearnerStream = 2;
constexpr std::uint64_t kMetaStream = 3;
constexpr std::uint64_t kFoldStream = 4;

constexpr std::size_t kMaxOverlapSets = 6;

void check_keys(const json &doc, const json &reference, const std::string &where) {
    if (!doc.is_object()) {
        throw Error(ErrorCode::ConfigError, where + " must be a JSON object");
    }
    for (const auto &[key, value] : doc.items()) {
        if (!reference.contains(key)) {
            throw Error(ErrorCode::ConfigError, "unknown key '" + key + "' in " + where);
        }
    }
}

std::string format_fixed(double value, int digits) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.*f", digits, value);
    return buffer;
}

std::string format_double(double value) { return json(value).dump(); }

void note(const RunOptions &options, const std::string &line) {
    if (options.log) *options.log << line << '\n';
}

std::vector<Label> truth_of(const Dataset &dataset, std::span<const std::string> ids) {
    std::vector<Label> truth;
    truth.reserve(ids.size());
    for (const auto &id : ids) truth.push_back(dataset.label(id));
    return truth;
}

std::vector<Label> decisions(const PredictionSet &set, std::span<const std::string> ids) {
    std::vector<Label> out;
    out.reserve(ids.size());
    for (const auto &id : ids) out.push_back(decision_label(set.at(id)));
    return out;
}

std::vector<std::string> sorted_subdirs(const fs::path &dir) {
    std::vector<std::string> names;
    if (!fs::is_directory(dir)) return names;
    for (const auto &entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

/// One experiment run: the resolved config plus lazily loaded inputs.
class Run {
  public:
    Run(const ExperimentConfig &config, const RunOptions &options) :
        config_(config),
        options_(options),
        ws_(options.out, config) {}

    std::vector<std::string> dispatch(const std::string &command);

  private:
    const Dataset &dataset();
    const SplitIndices &splits();
    const FeatureTable &features();

    std::vector<std::string> base_ids();
    std::vector<PredictionSet> base_sets(Split split);
    PredictionSet load_set(const std::string &id, Split split);
    MetaConfig meta_config() const;

    json report(const std::string &method, const PredictionSet &set);
    void write_method(const std::string &method, const json &ensemble, const PredictionSet &test, json extra = json::object());

    void split();
    void featurize();
    void train_base();
    void bag();
    void boost();
    void stack();
    void dgs();
    void eval();
    void rank();
    void overlap();
    void divergence_cmd();
    void cwe_subsets();
    void synth();

    std::vector<PredictionSet> oof_sets();

    ExperimentConfig config_;
    const RunOptions &options_;
    Workspace ws_;
    std::optional<Dataset> dataset_;
    std::optional<SplitIndices> splits_;
    std::optional<FeatureTable> features_;
};

const Dataset &Run::dataset() {
    if (!dataset_) {
        if (config_.dataset.empty()) {
            throw Error(ErrorCode::ConfigError, "no dataset given (--dataset or the config file)");
        }
        dataset_ = load_dataset(config_.dataset, config_.schema);
        for (const auto &w : dataset_->warnings()) note(options_, "warning: " + w);
    }
    return *dataset_;
}

const SplitIndices &Run::splits() {
    if (!splits_) {
        const auto path = options_.out / "splits.json";
        if (!fs::exists(path)) {
            throw Error(ErrorCode::IoError, path.string() + " not found; run `split` first");
        }
        json doc;
        try {
            doc = json::parse(read_text(path));
        } catch (const json::parse_error &e) {
            throw Error(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
        }
        splits_ = splits_from_json(doc);
        if (splits_->seed != config_.seed) {
            throw Error(ErrorCode::ConfigError, "splits.json was written with seed " + std::to_string(splits_->seed) + "; rerun `split` with --seed " + std::to_string(config_.seed));
        }
    }
    return *splits_;
}

const FeatureTable &Run::features() {
    if (!features_) features_ = FeatureTable::build(dataset(), config_.learner.features, options_.workers);
    return *features_;
}

MetaConfig Run::meta_config() const {
    MetaConfig meta = config_.meta_config;
    meta.workers = options_.workers;
    return meta;
}

std::vector<std::string> Run::base_ids() {
    if (!config_.models.empty()) return config_.models;
    if (config_.external) {
        auto ids = sorted_subdirs(fs::path(config_.external_dir) / "preds");
        if (ids.empty()) {
            throw Error(ErrorCode::IoError, "no model directories under " + (fs::path(config_.external_dir) / "preds").string());
        }
        return ids;
    }
    const auto path = options_.out / "base.json";
    if (!fs::exists(path)) {
        throw Error(ErrorCode::IoError, path.string() + " not found; run `train-base` first");
    }
    try {
        return json::parse(read_text(path)).at("member_ids").get<std::vector<std::string>>();
    } catch (const json::exception &e) {
        throw Error(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
    }
}

PredictionSet Run::load_set(const std::string &id, Split split) {
    const auto &ids = splits().ids(split);
    const auto local = predictions_path(options_.out, id, split);
    if (!config_.external || fs::exists(local)) {
        if (!fs::exists(local)) {
            throw Error(ErrorCode::IoError, local.string() + " not found");
        }
        return read_predictions_file(local, id, split, ids);
    }
    return ingest_predictions(config_.external_dir, id, split, ids);
}

std::vector<PredictionSet> Run::base_sets(Split split) {
    std::vector<PredictionSet> sets;
    for (const auto &id : base_ids()) {
        if (config_.external) {
            sets.push_back(ingest_predictions(config_.external_dir, id, split, splits().ids(split)));
        } else {
            sets.push_back(load_set(id, split));
        }
    }
    return sets;
}

json Run::report(const std::string &method, const PredictionSet &set) {
    const auto &ids = splits().test;
    const auto metrics = weighted_metrics(decisions(set, ids), truth_of(dataset(), ids), dataset().classes());
    return json{{"method", method}, {"split", "test"}, {"metrics", to_json(metrics)}};
}

void Run::write_method(const std::string &method, const json &ensemble, const PredictionSet &test, json extra) {
    ws_.write_json(method + "/ensemble.json", ensemble);
    ws_.write_predictions(test);
    json doc = report(method, test);
    for (auto &[key, value] : extra.items()) doc[key] = value;
    ws_.write_json(method + "/report.json", doc);
    const auto &m = doc.at("metrics");
    note(options_, method + ": accuracy " + format_fixed(100.0 * m.at("accuracy").get<double>(), 2) + "%");
}

// --- subcommands ---------------------------------------------------------------

void Run::split() {
    const auto split = stratified_split(dataset(), config_.seed);
    json doc = splits_to_json(split);
    json counts = json::object();
    for (const Split s : {Split::train, Split::val, Split::test}) {
        std::vector<std::size_t> per_class(dataset().classes(), 0);
        for (const auto &id : split.ids(s)) ++per_class[dataset().label(id)];
        counts[std::string(to_string(s))] = per_class;
    }
    doc["class_names"] = dataset().class_names();
    doc["class_counts"] = counts;
    doc["warnings"] = dataset().warnings();
    ws_.write_json("splits.json", doc);
    note(options_, "split: " + std::to_string(split.train.size()) + "/" + std::to_string(split.val.size()) + "/" + std::to_string(split.test.size()));
}

void Run::featurize() {
    const auto &table = features();
    std::string lines;
    std::size_t nonzeros = 0;
    for (const auto &sample : dataset().samples()) {
        const auto &fv = table.at(sample.id);
        json entries = json::array();
        for (const auto &e : fv.entries) entries.push_back(json::array({e.index, e.value}));
        nonzeros += fv.entries.size();
        lines += json{{"id", sample.id}, {"entries", std::move(entries)}}.dump();
        lines += '\n';
    }
    ws_.write_raw("features.jsonl", lines);
    ws_.write_json("features.json", json{{"dims", table.dims()}, {"ngram_orders", config_.learner.features.ngram_orders}, {"samples", dataset().size()}, {"nonzeros", nonzeros}});
    note(options_, "featurize: " + std::to_string(dataset().size()) + " samples, " + std::to_string(nonzeros) + " nonzeros");
}

void Run::train_base() {
    if (config_.external) {
        throw Error(ErrorCode::ConfigError, "train-base trains built-in learners; in external mode member predictions come from --external");
    }
    const auto plan = bootstrap(dataset(), splits(), config_.members, derive_seed(config_.seed, kBootstrapStream));
    const auto ensemble = bagging_fit(dataset(), features(), plan, config_.learner, config_.vote, options_.workers);
    json draws = json::array();
    for (std::size_t j = 0; j < ensemble.members.size(); ++j) {
        const auto &id = ensemble.member_ids[j];
        ws_.write_json("models/" + id + ".json", to_json(ensemble.members[j]));
        for (const Split s : {Split::val, Split::test}) {
            ws_.write_predictions(predict_split(ensemble.members[j], features(), splits().ids(s), id, s));
        }
        const std::set<std::string> distinct(plan.draws[j].begin(), plan.draws[j].end());
        draws.push_back(json{{"member", id}, {"draws", plan.draws[j].size()}, {"distinct", distinct.size()}});
    }
    ws_.write_json("base.json", json{{"member_ids", ensemble.member_ids}, {"bootstrap_seed", plan.seed}, {"draws", draws}});
    note(options_, "train-base: " + std::to_string(ensemble.members.size()) + " members");
}

void Run::bag() {
    const auto sets = base_sets(Split::test);
    const std::string method = "bagging_" + std::string(to_string(config_.vote));
    const auto combined = combine_sets(config_.vote, sets, splits().test, method, Split::test);
    json ensemble{
        {"schema_version", kEnsembleSchemaVersion},
        {"variant", "bagging"},
        {"mode", std::string(to_string(config_.vote))},
        {"member_ids", base_ids()},
    };
    if (!config_.external) {
        json refs = json::array();
        for (const auto &id : base_ids()) refs.push_back("models/" + id + ".json");
        ensemble["member_models"] = refs;
    }
    json members = json::object();
    for (const auto &set : sets) members[set.model_id()] = report(set.model_id(), set).at("metrics");
    write_method(method, ensemble, combined, json{{"members", members}});
}

void Run::boost() {
    const auto &train = splits().train;
    const auto truth = truth_of(dataset(), train);
    BoostConfig cfg{config_.rounds, config_.force_samme, config_.boost_vote};

    std::unique_ptr<RoundLearner> learner;
    if (config_.external) {
        learner = std::make_unique<ExternalRoundLearner>(config_.external_dir, train);
    } else {
        LearnerConfig lc = config_.learner;
        learner = std::make_unique<BuiltinRoundLearner>(dataset(), features(), train, lc);
    }
    const auto fit = adaboost_fit(train, truth, dataset().classes(), *learner, cfg);

    for (std::size_t t = 0; t < fit.weights.size(); ++t) {
        std::string body = "id,weight,label\n";
        const auto &w = fit.weights[t];
        for (std::size_t i = 0; i < w.ids.size(); ++i) {
            body += w.ids[i] + "," + format_double(w.weights[i]) + "," + std::to_string(dataset().label(w.ids[i])) + "\n";
        }
        ws_.write_csv("boosting/boost_weights_round_" + std::to_string(t + 1) + ".csv", body);
    }

    const auto &test = splits().test;
    PredictionSet combined("boosting", Split::test);
    PredictionSet first("boosting_round_1", Split::test);
    if (config_.external) {
        std::vector<PredictionSet> rounds;
        for (const auto &r : fit.ensemble.rounds) {
            rounds.push_back(read_predictions_file(round_predictions_path(config_.external_dir, r.t, Split::test), r.model_id, Split::test, test));
        }
        for (const auto &id : test) {
            const auto row = member_row(rounds, id);
            combined.add(id, adaboost_combine(fit.ensemble, row));
            first.add(id, row.front());
        }
    } else {
        for (const auto &id : test) {
            const auto &fv = features().at(id);
            combined.add(id, adaboost_predict(fit.ensemble, fv));
            first.add(id, predict_builtin(*fit.ensemble.rounds.front().model, fv));
        }
    }
    json rounds = json::array();
    for (const auto &r : fit.ensemble.rounds) {
        rounds.push_back(json{{"t", r.t}, {"epsilon", r.epsilon}, {"alpha", r.alpha}, {"z", r.z}});
    }
    write_method("boosting", to_json(fit.ensemble), combined,
                 json{{"stop_reason", fit.stop_reason}, {"rounds", rounds}, {"round_1", report("boosting_round_1", first).at("metrics")}});
}

std::vector<PredictionSet> Run::oof_sets() {
    const auto &train = splits().train;
    const std::size_t folds = config_.oof_folds;
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(config_.seed, kFoldStream));
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> fold_of(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) fold_of[order[i]] = i % folds;

    const auto ids = base_ids();
    std::vector<std::vector<ProbVector>> rows(ids.size(), std::vector<ProbVector>(train.size(), ProbVector::uniform(dataset().classes())));
    parallel_for(ids.size() * folds, options_.workers, [&](std::size_t task) {
        const std::size_t member = task / folds;
        const std::size_t fold = task % folds;
        std::vector<std::string> fit_ids;
        for (std::size_t i = 0; i < train.size(); ++i) {
            if (fold_of[i] != fold) fit_ids.push_back(train[i]);
        }
        LearnerConfig lc = config_.learner;
        lc.seed = derive_seed(derive_seed(config_.learner.seed, member), fold);
        const auto model = fit_builtin(dataset(), features(), fit_ids, SampleWeights::uniform(fit_ids), lc);
        for (std::size_t i = 0; i < train.size(); ++i) {
            if (fold_of[i] == fold) rows[member][i] = predict_builtin(model, features().at(train[i]));
        }
    });
    std::vector<PredictionSet> sets;
    for (std::size_t m = 0; m < ids.size(); ++m) {
        PredictionSet set(ids[m], Split::train);
        for (std::size_t i = 0; i < train.size(); ++i) set.add(train[i], rows[m][i]);
        sets.push_back(std::move(set));
    }
    return sets;
}

void Run::stack() {
    const std::string method = "stacking_" + std::string(to_string(config_.meta));
    std::vector<PredictionSet> fit_sets;
    std::vector<std::string> fit_ids;
    if (config_.oof_folds > 1) {
        if (config_.external) {
            throw Error(ErrorCode::ConfigError, "out-of-fold stacking needs built-in learners");
        }
        // Force the feature table before the parallel section.
        (void)features();
        fit_sets = oof_sets();
        fit_ids = splits().train;
    } else {
        fit_sets = base_sets(Split::val);
        fit_ids = splits().val;
    }
    const auto model = stacking_fit(fit_sets, fit_ids, truth_of(dataset(), fit_ids), config_.meta, meta_config());
    const auto test_sets = base_sets(Split::test);
    check_coverage(test_sets, splits().test);
    PredictionSet out(method, Split::test);
    for (const auto &id : splits().test) out.add(id, stacking_predict(model, member_row(test_sets, id)));
    write_method(method, to_json(model), out, json{{"meta_training", config_.oof_folds > 1 ? "oof_train" : "val"}});
}

void Run::dgs() {
    const std::string method = "dgs_" + std::string(to_string(config_.routing));
    const auto &val = splits().val;
    const auto val_sets = base_sets(Split::val);
    std::vector<FeatureVector> val_features;
    for (const auto &id : val) val_features.push_back(features().at(id));
    GateConfig gc{config_.gate, config_.routing, config_.gate_dims, meta_config()};
    const auto model = dgs_fit(val_sets, val, truth_of(dataset(), val), val_features, gc);

    const auto test_sets = base_sets(Split::test);
    check_coverage(test_sets, splits().test);
    PredictionSet out(method, Split::test);
    std::size_t routed_right = 0;
    std::size_t any_right = 0;
    std::vector<std::size_t> chosen(test_sets.size(), 0);
    for (const auto &id : splits().test) {
        const auto row = member_row(test_sets, id);
        const auto &fv = features().at(id);
        const auto gate = gate_scores(model, fv, row);
        const Label truth = dataset().label(id);
        const Label pick = argmax_label(gate);
        ++chosen[pick];
        if (decision_label(row[pick]) == truth) ++routed_right;
        if (std::any_of(row.begin(), row.end(), [&](const ProbVector &p) { return decision_label(p) == truth; })) ++any_right;
        out.add(id, route(config_.routing, gate, row));
    }
    const double n = static_cast<double>(splits().test.size());
    json picks = json::object();
    for (std::size_t j = 0; j < chosen.size(); ++j) picks[model.base_ids[j]] = chosen[j];
    write_method(method, to_json(model), out,
                 json{{"routing_accuracy", safe_ratio(static_cast<double>(routed_right), n)},
                      {"oracle_accuracy", safe_ratio(static_cast<double>(any_right), n)},
                      {"gate_choices", picks}});
}

void Run::eval() {
    std::vector<std::string> methods;
    std::set<std::string> seen;
    const bool have_base = config_.external || fs::exists(options_.out / "base.json") || !config_.models.empty();
    if (have_base) {
        for (const auto &id : base_ids()) {
            if (seen.insert(id).second) methods.push_back(id);
        }
    }
    for (const auto &id : sorted_subdirs(options_.out / "preds")) {
        if (fs::exists(predictions_path(options_.out, id, Split::test)) && seen.insert(id).second) methods.push_back(id);
    }
    if (methods.empty()) {
        throw Error(ErrorCode::IoError, "no test predictions under " + (options_.out / "preds").string());
    }
    json reports = json::object();
    std::string csv = "method,accuracy,precision,recall,f1,w_precision,w_recall,w_f1\n";
    for (const auto &m : methods) {
        const auto set = load_set(m, Split::test);
        const auto r = report(m, set);
        const auto &x = r.at("metrics");
        reports[m] = x;
        csv += m;
        // Positive-class scores exist only for K = 2; their cells stay empty otherwise.
        for (const char *key : {"accuracy", "precision", "recall", "f1", "w_precision", "w_recall", "w_f1"}) {
            csv += ",";
            if (x.contains(key)) csv += format_double(x.at(key).get<double>());
        }
        csv += "\n";
        const std::string prefix = x.contains("precision") ? "" : "w_";
        const auto pct = [&](const std::string &key) { return format_fixed(100 * x.at(key).get<double>(), 2); };
        note(options_, m + ": acc " + pct("accuracy") + " " + prefix + "p " + pct(prefix + "precision") + " " + prefix + "r " + pct(prefix + "recall") + " " + prefix + "f1 " + pct(prefix + "f1"));
    }
    ws_.write_json("report.json", json{{"split", "test"}, {"classes", dataset().class_names()}, {"methods", methods}, {"reports", reports}});
    ws_.write_csv("report.csv", csv);
}

void Run::rank() {
    if (config_.input.empty()) {
        throw Error(ErrorCode::ConfigError, "rank needs --input <scores.csv> (method,model,dataset,metric,value)");
    }
    ScoreCube cube;
    std::map<std::tuple<std::string, std::string, std::string>, double> cells;
    auto index_of = [](std::vector<std::string> &names, const std::string &name) {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) names.push_back(name);
    };
    bool header = true;
    for (const auto &[number, text] : read_lines(config_.input)) {
        if (text.empty() || text.front() == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells_text;
        std::stringstream ss(text);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells_text.push_back(cell);
        if (cells_text.size() != 5) {
            throw Error(ErrorCode::MalformedRecord, config_.input + ":" + std::to_string(number) + ": expected method,model,dataset,metric,value");
        }
        double value = 0;
        try {
            value = std::stod(cells_text[4]);
        } catch (const std::exception &) {
            throw Error(ErrorCode::MalformedRecord, config_.input + ":" + std::to_string(number) + ": bad value '" + cells_text[4] + "'");
        }
        const std::string instance = cells_text[1] + "/" + cells_text[2];
        index_of(cube.methods, cells_text[0]);
        index_of(cube.instances, instance);
        index_of(cube.metrics, cells_text[3]);
        if (!cells.emplace(std::tuple{cells_text[3], instance, cells_text[0]}, value).second) {
            throw Error(ErrorCode::DuplicateId, config_.input + ":" + std::to_string(number) + ": duplicate score");
        }
    }
    cube.values.assign(cube.metrics.size(), std::vector<std::vector<double>>(cube.instances.size(), std::vector<double>(cube.methods.size())));
    for (std::size_t m = 0; m < cube.metrics.size(); ++m) {
        for (std::size_t i = 0; i < cube.instances.size(); ++i) {
            for (std::size_t j = 0; j < cube.methods.size(); ++j) {
                const auto it = cells.find({cube.metrics[m], cube.instances[i], cube.methods[j]});
                if (it == cells.end()) {
                    throw Error(ErrorCode::MissingSample, "no score for " + cube.methods[j] + " on " + cube.instances[i] + " (" + cube.metrics[m] + ")");
                }
                cube.values[m][i][j] = it->second;
            }
        }
    }
    const auto table = average_rank(cube, config_.tie_rule);
    std::string avg = "metric,method,average_rank\n";
    std::string detail = "metric,instance,method,score,rank\n";
    for (std::size_t m = 0; m < table.metrics.size(); ++m) {
        for (std::size_t j = 0; j < table.methods.size(); ++j) {
            avg += table.metrics[m] + "," + table.methods[j] + "," + format_double(table.average[m][j]) + "\n";
            note(options_, table.metrics[m] + " " + table.methods[j] + ": " + format_fixed(table.average[m][j], 2));
        }
        for (std::size_t i = 0; i < table.instances.size(); ++i) {
            for (std::size_t j = 0; j < table.methods.size(); ++j) {
                detail += table.metrics[m] + "," + table.instances[i] + "," + table.methods[j] + "," + format_double(cube.values[m][i][j]) + "," + format_double(table.ranks[m][i][j]) + "\n";
            }
        }
    }
    ws_.write_csv("ranks.csv", avg);
    ws_.write_csv("ranks_detail.csv", detail);
}

void Run::overlap() {
    std::vector<std::string> ids = config_.models.empty() ? base_ids() : config_.models;
    if (ids.size() > kMaxOverlapSets) {
        throw Error(ErrorCode::TooManySets, "overlap supports at most 6 models; pass --models");
    }
    const auto &test = splits().test;
    std::vector<std::set<std::string>> correct;
    for (const auto &id : ids) {
        const auto set = load_set(id, Split::test);
        std::set<std::string> right;
        for (const auto &sid : test) {
            if (decision_label(set.at(sid)) == dataset().label(sid)) right.insert(sid);
        }
        correct.push_back(std::move(right));
    }
    const auto counts = overlap_regions(correct);
    std::string names;
    for (std::size_t i = 0; i < ids.size(); ++i) names += (i ? "," : "") + ids[i];
    std::string body = "# sets=" + names + " (rightmost digit is the first set)\nregion,count\n";
    for (std::uint32_t mask = 1; mask < counts.size(); ++mask) {
        body += region_name(mask, ids.size()) + "," + std::to_string(counts[mask]) + "\n";
    }
    ws_.write_csv("overlap.csv", body);
    note(options_, "overlap: " + std::to_string(counts.size() - 1) + " regions over " + std::to_string(ids.size()) + " models");
}

void Run::divergence_cmd() {
    const auto ids = base_ids();
    const auto &test = splits().test;
    std::vector<PredictionSet> sets;
    for (const auto &id : ids) sets.push_back(load_set(id, Split::test));
    std::vector<PredictionSet> extra;
    for (const auto &id : sorted_subdirs(options_.out / "preds")) {
        if (std::find(ids.begin(), ids.end(), id) == ids.end() && fs::exists(predictions_path(options_.out, id, Split::test))) {
            extra.push_back(load_set(id, Split::test));
        }
    }
    const auto report = vulforge::divergence(sets, test, truth_of(dataset(), test), extra);
    std::string body = "# divergent=" + std::to_string(report.divergent_ids.size()) + " total=" + std::to_string(report.total) + "\nmethod,correct_proportion\n";
    for (std::size_t j = 0; j < report.methods.size(); ++j) {
        body += report.methods[j] + "," + format_double(report.correct_proportion[j]) + "\n";
    }
    std::string listing = "id\n";
    for (const auto &id : report.divergent_ids) listing += id + "\n";
    ws_.write_csv("divergence.csv", body);
    ws_.write_csv("divergent_ids.csv", listing);
    note(options_, "divergence: " + std::to_string(report.divergent_ids.size()) + " of " + std::to_string(report.total) + " test samples");
}

void Run::cwe_subsets() {
    if (dataset().schema() != Schema::multiclass) {
        throw Error(ErrorCode::ConfigError, "cwe-subsets needs --schema multiclass");
    }
    const auto cwes = config_.cwes.empty() ? top_cwes(dataset(), config_.top_cwes) : config_.cwes;
    std::string summary = "cwe,samples,vulnerable\n";
    for (const auto &cwe : cwes) {
        const auto subset = cwe_subset(dataset(), cwe);
        std::size_t vulnerable = 0;
        for (const auto &s : subset.samples()) vulnerable += s.label != 0 ? 1 : 0;
        ws_.write_raw("cwe_subsets/" + cwe + ".jsonl", dataset_to_jsonl(subset));
        summary += cwe + "," + std::to_string(subset.size()) + "," + std::to_string(vulnerable) + "\n";
    }
    ws_.write_csv("cwe_subsets/summary.csv", summary);
    note(options_, "cwe-subsets: " + std::to_string(cwes.size()) + " subsets");
}

void Run::synth() {
    if (config_.dataset.empty()) {
        throw Error(ErrorCode::ConfigError, "synth writes to --dataset <path>");
    }
    Dataset generated;
    const auto &kind = config_.synth_kind;
    if (kind == "devign") {
        generated = devign_like(config_.seed, config_.synth_scale);
    } else if (kind == "reveal") {
        generated = reveal_like(config_.seed, config_.synth_scale);
    } else if (kind == "bigvul") {
        generated = bigvul_like(config_.seed, config_.synth_scale);
    } else if (kind == "separable") {
        generated = separable_corpus(static_cast<std::size_t>(1000 * config_.synth_scale), config_.seed);
    } else {
        throw Error(ErrorCode::ConfigError, "unknown synth kind '" + kind + "' (devign, reveal, bigvul, separable)");
    }
    atomic_write(config_.dataset, dataset_to_jsonl(generated));
    note(options_, "synth: " + std::to_string(generated.size()) + " samples to " + config_.dataset);
}

std::vector<std::string> Run::dispatch(const std::string &command) {
    if (command == "split") split();
    else if (command == "featurize") featurize();
    else if (command == "train-base") train_base();
    else if (command == "bag") bag();
    else if (command == "boost") boost();
    else if (command == "stack") stack();
    else if (command == "dgs") dgs();
    else if (command == "eval") eval();
    else if (command == "rank") rank();
    else if (command == "overlap") overlap();
    else if (command == "divergence") divergence_cmd();
    else if (command == "cwe-subsets") cwe_subsets();
    else if (command == "synth") {
        synth();
        return {};
    } else {
        throw Error(ErrorCode::ConfigError, "unknown command '" + command + "'");
    }
    ws_.commit();
    return ws_.written();
}

/// Component seeds follow from the experiment seed so one flag pins a run.
ExperimentConfig resolve(ExperimentConfig config) {
    config.learner.seed = derive_seed(config.seed, kLearnerStream);
    config.meta_config.seed = derive_seed(config.seed, kMetaStream);
    return config;
}

}  // namespace

// --- config -------------------------------------------------------------------

json to_json(const ExperimentConfig &c) {
    return json{
        {"dataset", c.dataset},
        {"schema", std::string(to_string(c.schema))},
        {"seed", c.seed},
        {"members", c.members},
        {"rounds", c.rounds},
        {"vote", std::string(to_string(c.vote))},
        {"meta", std::string(to_string(c.meta))},
        {"routing", std::string(to_string(c.routing))},
        {"gate", std::string(to_string(c.gate))},
        {"gate_dims", c.gate_dims},
        {"boost_vote", std::string(to_string(c.boost_vote))},
        {"force_samme", c.force_samme},
        {"oof_folds", c.oof_folds},
        {"learner", to_json(c.learner)},
        {"meta_config", to_json(c.meta_config)},
        {"external", c.external},
        {"external_dir", c.external_dir},
        {"models", c.models},
        {"input", c.input},
        {"tie_rule", std::string(to_string(c.tie_rule))},
        {"top_cwes", c.top_cwes},
        {"cwes", c.cwes},
        {"synth_kind", c.synth_kind},
        {"synth_scale", c.synth_scale},
    };
}

ExperimentConfig experiment_config_from_json(const json &doc) {
    const ExperimentConfig defaults;
    const json reference = to_json(defaults);
    check_keys(doc, reference, "config");
    ExperimentConfig c;
    try {
        c.dataset = doc.value("dataset", c.dataset);
        c.schema = parse_schema(doc.value("schema", std::string(to_string(c.schema))));
        c.seed = doc.value("seed", c.seed);
        c.members = doc.value("members", c.members);
        c.rounds = doc.value("rounds", c.rounds);
        c.vote = parse_vote_mode(doc.value("vote", std::string(to_string(c.vote))));
        c.meta = parse_meta_kind(doc.value("meta", std::string(to_string(c.meta))));
        c.routing = parse_routing(doc.value("routing", std::string(to_string(c.routing))));
        c.gate = parse_meta_kind(doc.value("gate", std::string(to_string(c.gate))));
        c.gate_dims = doc.value("gate_dims", c.gate_dims);
        c.boost_vote = parse_boost_vote(doc.value("boost_vote", std::string(to_string(c.boost_vote))));
        c.force_samme = doc.value("force_samme", c.force_samme);
        c.oof_folds = doc.value("oof_folds", c.oof_folds);
        if (doc.contains("learner")) {
            check_keys(doc.at("learner"), reference.at("learner"), "learner");
            c.learner = learner_config_from_json(doc.at("learner"));
        }
        if (doc.contains("meta_config")) {
            check_keys(doc.at("meta_config"), reference.at("meta_config"), "meta_config");
            c.meta_config = meta_config_from_json(doc.at("meta_config"));
        }
        c.external = doc.value("external", c.external);
        c.external_dir = doc.value("external_dir", c.external_dir);
        c.models = doc.value("models", c.models);
        c.input = doc.value("input", c.input);
        c.tie_rule = parse_tie_rule(doc.value("tie_rule", std::string(to_string(c.tie_rule))));
        c.top_cwes = doc.value("top_cwes", c.top_cwes);
        c.cwes = doc.value("cwes", c.cwes);
        c.synth_kind = doc.value("synth_kind", c.synth_kind);
        c.synth_scale = doc.value("synth_scale", c.synth_scale);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
    }
    return c;
}

void validate(const ExperimentConfig &c) {
    auto require = [](bool ok, const std::string &what) {
        if (!ok) throw Error(ErrorCode::ConfigError, what);
    };
    require(c.members >= 1, "members must be at least 1");
    require(c.rounds >= 1, "rounds must be at least 1");
    require(c.gate_dims >= 1, "gate_dims must be at least 1");
    require(c.oof_folds != 1, "oof_folds must be 0 (validation stacking) or at least 2");
    require(c.learner.features.dims >= 1, "feature dims must be at least 1");
    require(!c.learner.features.ngram_orders.empty(), "at least one n-gram order is needed");
    for (unsigned n : c.learner.features.ngram_orders) require(n >= 1, "n-gram orders start at 1");
    require(c.learner.learning_rate > 0, "learning_rate must be positive");
    require(c.learner.epochs >= 1, "epochs must be at least 1");
    require(c.learner.batch_size >= 1, "batch_size must be at least 1");
    require(c.learner.l2 >= 0, "l2 must be non-negative");
    require(c.meta_config.learning_rate > 0, "meta learning_rate must be positive");
    require(c.meta_config.epochs >= 1, "meta epochs must be at least 1");
    require(c.meta_config.batch_size >= 1, "meta batch_size must be at least 1");
    require(c.meta_config.l2 >= 0, "meta l2 must be non-negative");
    require(c.meta_config.trees >= 1, "trees must be at least 1");
    require(c.meta_config.max_depth >= 1, "max_depth must be at least 1");
    require(c.meta_config.k >= 1, "k must be at least 1");
    require(c.top_cwes >= 1, "top_cwes must be at least 1");
    require(c.synth_scale > 0, "synth_scale must be positive");
    require(!c.external || !c.external_dir.empty(), "external mode needs --external <dir>");
}

std::string config_hash(const ExperimentConfig &config) { return hex64(fnv1a64(to_json(config).dump())); }

// --- exit codes ---------------------------------------------------------------

ExitCode exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ConfigError: return ExitCode::config;
        case ErrorCode::IoError: return ExitCode::io;
        case ErrorCode::ProtocolOrderError: return ExitCode::protocol;
        case ErrorCode::VerifyFailed: return ExitCode::verify;
        case ErrorCode::AwaitingExternal: return ExitCode::awaiting;
        default: return ExitCode::data;
    }
}

std::string exit_code_help() {
    return "Exit codes:\n"
           "  0  success\n"
           "  1  unexpected failure\n"
           "  2  configuration error (bad flag, config file or value)\n"
           "  3  I/O error (missing input or prior stage output)\n"
           "  4  protocol order error (external boosting rounds out of order)\n"
           "  5  data error (malformed records, probabilities, coverage)\n"
           "  6  verify found a digest or config hash mismatch\n"
           "  7  awaiting external predictions for the current boosting round\n";
}

// --- workspace ----------------------------------------------------------------

Workspace::Workspace(fs::path root, const ExperimentConfig &config) :
    root_(std::move(root)),
    hash_(config_hash(config)),
    echo_(to_json(config)) {}

void Workspace::record(const std::string &rel, const std::string &content, const std::string &kind) {
    entries_[rel] = json{{"digest", hex64(fnv1a64(content))}, {"config_hash", hash_}, {"kind", kind}};
    if (std::find(written_.begin(), written_.end(), rel) == written_.end()) written_.push_back(rel);
}

void Workspace::write_json(const std::string &rel, json doc) {
    doc["config_hash"] = hash_;
    doc["config"] = echo_;
    doc["schema_version"] = kArtifactSchemaVersion;
    const auto content = dump_json(doc);
    atomic_write(root_ / rel, content);
    record(rel, content, "json");
}

void Workspace::write_csv(const std::string &rel, const std::string &body) {
    const auto content = "# config_hash=" + hash_ + "\n# config=" + echo_.dump() + "\n" + body;
    atomic_write(root_ / rel, content);
    record(rel, content, "csv");
}

void Workspace::write_raw(const std::string &rel, const std::string &content) {
    atomic_write(root_ / rel, content);
    record(rel, content, "raw");
}

void Workspace::write_predictions(const PredictionSet &set) {
    const auto rel = fs::relative(predictions_path(root_, set.model_id(), set.split()), root_).generic_string();
    write_raw(rel, predictions_to_jsonl(set));
}

void Workspace::commit() {
    const auto path = root_ / "manifest.json";
    json files = json::object();
    if (fs::exists(path)) {
        try {
            files = json::parse(read_text(path)).at("files");
        } catch (const json::exception &e) {
            throw Error(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
        }
    }
    for (const auto &[rel, entry] : entries_.items()) files[rel] = entry;
    atomic_write(path, dump_json(json{{"schema_version", kArtifactSchemaVersion}, {"files", files}}));
}

// --- verify -------------------------------------------------------------------

std::vector<std::string> verify_outputs(const fs::path &out) {
    std::vector<std::string> problems;
    const auto manifest_path = out / "manifest.json";
    if (!fs::exists(manifest_path)) {
        return {manifest_path.string() + " not found"};
    }
    json files;
    try {
        files = json::parse(read_text(manifest_path)).at("files");
    } catch (const json::exception &e) {
        return {manifest_path.string() + ": " + e.what()};
    }
    for (const auto &[rel, entry] : files.items()) {
        const auto path = out / rel;
        if (!fs::exists(path)) {
            problems.push_back(rel + ": missing");
            continue;
        }
        const auto content = read_text(path);
        const auto expected_hash = entry.value("config_hash", std::string());
        if (hex64(fnv1a64(content)) != entry.value("digest", std::string())) {
            problems.push_back(rel + ": content digest mismatch");
        }
        const auto kind = entry.value("kind", std::string());
        json echo;
        std::string embedded;
        try {
            if (kind == "json") {
                const auto doc = json::parse(content);
                embedded = doc.at("config_hash").get<std::string>();
                echo = doc.at("config");
            } else if (kind == "csv") {
                const auto first = content.find('\n');
                const auto second = content.find('\n', first + 1);
                const std::string hash_line = content.substr(0, first);
                const std::string config_line = content.substr(first + 1, second - first - 1);
                const std::string hash_prefix = "# config_hash=";
                const std::string config_prefix = "# config=";
                if (hash_line.rfind(hash_prefix, 0) != 0 || config_line.rfind(config_prefix, 0) != 0) {
                    problems.push_back(rel + ": missing config header");
                    continue;
                }
                embedded = hash_line.substr(hash_prefix.size());
                echo = json::parse(config_line.substr(config_prefix.size()));
            } else {
                continue;
            }
        } catch (const json::exception &e) {
            problems.push_back(rel + ": " + e.what());
            continue;
        }
        if (embedded != expected_hash) {
            problems.push_back(rel + ": embedded config hash " + embedded + " differs from manifest " + expected_hash);
        }
        if (hex64(fnv1a64(echo.dump())) != embedded) {
            problems.push_back(rel + ": config echo does not hash to " + embedded);
        }
    }
    return problems;
}

// --- entry point --------------------------------------------------------------

const std::vector<std::string> &command_names() {
    static const std::vector<std::string> names = {"split", "featurize", "train-base", "bag", "boost", "stack", "dgs", "eval", "rank", "overlap", "divergence", "cwe-subsets", "verify", "synth"};
    return names;
}

std::vector<std::string> run_command(const std::string &command, const ExperimentConfig &config, const RunOptions &options) {
    validate(config);
    if (command == "verify") {
        const auto problems = verify_outputs(options.out);
        if (!problems.empty()) {
            std::string text = std::to_string(problems.size()) + " problem(s):";
            for (const auto &p : problems) text += "\n  " + p;
            throw Error(ErrorCode::VerifyFailed, text);
        }
        note(options, "verify: ok");
        return {};
    }
    Run run(resolve(config), options);
    return run.dispatch(command);
}

}  // namespace vulforge
