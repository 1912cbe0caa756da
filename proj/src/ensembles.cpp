#include "vulforge/ensembles.hpp"

#include "vulforge/error.hpp"
#include "vulforge/parallel.hpp"
#include "vulforge/random.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

namespace vulforge {

namespace {

void check_members(std::span<const ProbVector> members) {
    if (members.empty()) {
        throw Error(ErrorCode::ConfigError, "an ensemble needs at least one member");
    }
    for (const auto &m : members) {
        if (m.size() != members.front().size()) {
            throw Error(ErrorCode::MemberKMismatch, "members disagree on K: " + std::to_string(members.front().size()) + " vs " + std::to_string(m.size()));
        }
    }
}

void check_layout(std::span<const ProbVector> base_row, std::size_t members, std::size_t classes) {
    if (base_row.size() != members) {
        throw Error(ErrorCode::LayoutMismatch, "expected " + std::to_string(members) + " base rows, got " + std::to_string(base_row.size()));
    }
    for (const auto &p : base_row) {
        if (p.size() != classes) {
            throw Error(ErrorCode::LayoutMismatch, "base row has width " + std::to_string(p.size()) + ", expected " + std::to_string(classes));
        }
    }
}

template <typename T>
T parse_or_malformed(const char *what, auto &&fn) {
    try {
        return fn();
    } catch (const json::exception &e) {
        throw Error(ErrorCode::MalformedRecord, std::string(what) + ": " + e.what());
    }
}

void check_header(const json &doc, std::string_view variant) {
    if (doc.at("schema_version").get<int>() != kEnsembleSchemaVersion) {
        throw Error(ErrorCode::MalformedRecord, "unsupported ensemble schema version");
    }
    if (doc.at("variant").get<std::string>() != variant) {
        throw Error(ErrorCode::MalformedRecord, "ensemble is not a " + std::string(variant) + " ensemble");
    }
}

}  // namespace

void check_coverage(std::span<const PredictionSet> sets, std::span<const std::string> ids) {
    if (sets.empty()) {
        throw Error(ErrorCode::ConfigError, "no prediction sets");
    }
    for (const auto &set : sets) {
        if (set.classes() != sets.front().classes() && set.size() > 0) {
            throw Error(ErrorCode::MemberKMismatch, "'" + set.model_id() + "' has K=" + std::to_string(set.classes()));
        }
        for (const auto &id : ids) {
            if (!set.contains(id)) {
                throw Error(ErrorCode::CoverageMismatch, "'" + set.model_id() + "' has no prediction for '" + id + "'");
            }
        }
    }
}

std::vector<ProbVector> member_row(std::span<const PredictionSet> sets, const std::string &id) {
    std::vector<ProbVector> row;
    row.reserve(sets.size());
    for (const auto &set : sets) {
        if (!set.contains(id)) {
            throw Error(ErrorCode::CoverageMismatch, "'" + set.model_id() + "' has no prediction for '" + id + "'");
        }
        row.push_back(set.at(id));
    }
    return row;
}

// --- bagging -----------------------------------------------------------------

std::string_view to_string(VoteMode mode) noexcept { return mode == VoteMode::hard ? "hard" : "soft"; }

VoteMode parse_vote_mode(std::string_view text) {
    if (text == "hard") return VoteMode::hard;
    if (text == "soft") return VoteMode::soft;
    throw Error(ErrorCode::ConfigError, "unknown vote mode '" + std::string(text) + "'");
}

ProbVector hard_vote(std::span<const ProbVector> members) {
    check_members(members);
    const std::size_t k = members.front().size();
    std::vector<std::size_t> votes(k, 0);
    for (const auto &m : members) ++votes[decision_label(m)];

    std::vector<double> column(members.size());
    Label best = 0;
    double best_mass = 0.0;
    for (Label c = 0; c < k; ++c) {
        for (std::size_t j = 0; j < members.size(); ++j) column[j] = members[j][c];
        const double mass = exact_sum(column);
        if (c == 0 || votes[c] > votes[best] || (votes[c] == votes[best] && mass > best_mass)) {
            best = c;
            best_mass = mass;
        }
    }
    return ProbVector::one_hot(k, best);
}

ProbVector soft_vote(std::span<const ProbVector> members) {
    check_members(members);
    const std::vector<double> weights(members.size(), 1.0 / static_cast<double>(members.size()));
    return mixture(members, weights);
}

ProbVector bagging_combine(VoteMode mode, std::span<const ProbVector> members) {
    return mode == VoteMode::hard ? hard_vote(members) : soft_vote(members);
}

BaggingEnsemble bagging_fit(const Dataset &dataset, const FeatureTable &features, const BootstrapPlan &plan, const LearnerConfig &config, VoteMode mode, std::size_t workers) {
    const std::size_t m = plan.member_count();
    if (m == 0) {
        throw Error(ErrorCode::ConfigError, "bagging needs at least one member");
    }
    BaggingEnsemble ensemble;
    ensemble.mode = mode;
    ensemble.seed = plan.seed;
    ensemble.members.resize(m);
    for (std::size_t j = 0; j < m; ++j) ensemble.member_ids.push_back("member_" + std::to_string(j));
    parallel_for(m, workers, [&](std::size_t j) {
        const auto weights = SampleWeights::from_draw(plan.draws[j]);
        LearnerConfig member = config;
        member.seed = derive_seed(config.seed, j);
        ensemble.members[j] = fit_builtin(dataset, features, weights.ids, weights, member);
    });
    return ensemble;
}

ProbVector bagging_predict(const BaggingEnsemble &ensemble, const FeatureVector &features) {
    std::vector<ProbVector> row;
    row.reserve(ensemble.members.size());
    for (const auto &m : ensemble.members) row.push_back(predict_builtin(m, features));
    return bagging_combine(ensemble.mode, row);
}

PredictionSet combine_sets(VoteMode mode, std::span<const PredictionSet> sets, std::span<const std::string> ids, const std::string &model_id, Split split) {
    check_coverage(sets, ids);
    PredictionSet out(model_id, split);
    for (const auto &id : ids) {
        out.add(id, bagging_combine(mode, member_row(sets, id)));
    }
    return out;
}

json to_json(const BaggingEnsemble &ensemble) {
    json members = json::array();
    for (const auto &m : ensemble.members) members.push_back(to_json(m));
    return json{
        {"schema_version", kEnsembleSchemaVersion},
        {"variant", "bagging"},
        {"mode", std::string(to_string(ensemble.mode))},
        {"seed", ensemble.seed},
        {"member_ids", ensemble.member_ids},
        {"members", std::move(members)},
    };
}

BaggingEnsemble bagging_from_json(const json &doc) {
    return parse_or_malformed<BaggingEnsemble>("bagging ensemble", [&] {
        check_header(doc, "bagging");
        BaggingEnsemble e;
        e.mode = parse_vote_mode(doc.at("mode").get<std::string>());
        e.seed = doc.at("seed").get<std::uint64_t>();
        e.member_ids = doc.at("member_ids").get<std::vector<std::string>>();
        for (const auto &m : doc.at("members")) e.members.push_back(linear_model_from_json(m));
        return e;
    });
}

// --- boosting ----------------------------------------------------------------

std::string_view to_string(BoostVariant variant) noexcept { return variant == BoostVariant::samme ? "samme" : "binary_adaboost"; }
std::string_view to_string(BoostVote vote) noexcept { return vote == BoostVote::score ? "score" : "label"; }

BoostVote parse_boost_vote(std::string_view text) {
    if (text == "label") return BoostVote::label;
    if (text == "score") return BoostVote::score;
    throw Error(ErrorCode::ConfigError, "unknown boost vote '" + std::string(text) + "'");
}

double binary_alpha(double epsilon) { return 0.5 * std::log((1.0 - epsilon) / epsilon); }

double samme_alpha(double epsilon, std::size_t classes) {
    return std::log((1.0 - epsilon) / epsilon) + std::log(static_cast<double>(classes) - 1.0);
}

std::vector<double> boost_update(std::span<const double> weights, const std::vector<bool> &missed, double alpha, BoostVariant variant, double &z) {
    if (weights.size() != missed.size()) {
        throw Error(ErrorCode::LengthMismatch, "weights and miss flags differ in length");
    }
    const double up = std::exp(alpha);
    const double down = variant == BoostVariant::binary_adaboost ? std::exp(-alpha) : 1.0;
    std::vector<double> next(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        next[i] = weights[i] * (missed[i] ? up : down);
    }
    z = exact_sum(next);
    for (double &w : next) w /= z;
    return next;
}

BoostFit adaboost_fit(std::span<const std::string> ids, std::span<const Label> truth, std::size_t classes, RoundLearner &learner, const BoostConfig &config) {
    if (config.rounds == 0) {
        throw Error(ErrorCode::ConfigError, "boosting needs at least one round");
    }
    if (ids.empty()) {
        throw Error(ErrorCode::EmptyTrainingSet, "no training ids");
    }
    if (ids.size() != truth.size()) {
        throw Error(ErrorCode::LengthMismatch, "ids and labels differ in length");
    }
    if (classes < 2) {
        throw Error(ErrorCode::ConfigError, "boosting needs K >= 2");
    }
    BoostFit fit;
    auto &ensemble = fit.ensemble;
    ensemble.classes = classes;
    ensemble.vote = config.vote;
    ensemble.variant = (classes > 2 || config.force_samme) ? BoostVariant::samme : BoostVariant::binary_adaboost;
    const double limit = ensemble.variant == BoostVariant::samme ? 1.0 - 1.0 / static_cast<double>(classes) : 0.5;

    auto weights = SampleWeights::uniform(std::vector<std::string>(ids.begin(), ids.end()));
    std::vector<bool> missed(ids.size());
    std::vector<double> missed_mass;
    fit.stop_reason = "rounds";
    for (std::size_t t = 1; t <= config.rounds; ++t) {
        const auto preds = learner.fit_round(t, weights);
        if (preds.size() != ids.size()) {
            throw Error(ErrorCode::CoverageMismatch, "round " + std::to_string(t) + " returned " + std::to_string(preds.size()) + " predictions for " + std::to_string(ids.size()) + " samples");
        }
        missed_mass.clear();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (preds[i].size() != classes) {
                throw Error(ErrorCode::MemberKMismatch, "round " + std::to_string(t) + " predicts " + std::to_string(preds[i].size()) + " classes");
            }
            missed[i] = decision_label(preds[i]) != truth[i];
            if (missed[i]) missed_mass.push_back(weights.weights[i]);
        }
        const double epsilon = exact_sum(missed_mass);
        if (epsilon >= limit) {
            if (ensemble.rounds.empty()) {
                throw Error(ErrorCode::NoRoundsRetained, "round 1 has weighted error " + std::to_string(epsilon));
            }
            fit.stop_reason = "degenerate";
            break;
        }
        const bool perfect = epsilon <= 0.0;
        BoostRound round;
        round.t = t;
        round.model_id = "round_" + std::to_string(t);
        round.epsilon = std::max(epsilon, kMinBoostError);
        round.alpha = ensemble.variant == BoostVariant::samme ? samme_alpha(round.epsilon, classes) : binary_alpha(round.epsilon);
        auto next = boost_update(weights.weights, missed, round.alpha, ensemble.variant, round.z);
        round.model = learner.model(t);
        ensemble.rounds.push_back(std::move(round));
        fit.weights.push_back(weights);
        if (perfect) {
            fit.stop_reason = "perfect";
            break;
        }
        weights.weights = std::move(next);
    }
    return fit;
}

ProbVector adaboost_combine(const BoostEnsemble &ensemble, std::span<const ProbVector> round_outputs) {
    if (ensemble.rounds.empty()) {
        throw Error(ErrorCode::NoRoundsRetained, "empty boosted ensemble");
    }
    if (round_outputs.size() != ensemble.rounds.size()) {
        throw Error(ErrorCode::LayoutMismatch, "expected " + std::to_string(ensemble.rounds.size()) + " round outputs, got " + std::to_string(round_outputs.size()));
    }
    check_layout(round_outputs, ensemble.rounds.size(), ensemble.classes);
    std::vector<double> alphas;
    for (const auto &r : ensemble.rounds) alphas.push_back(r.alpha);
    const double total = exact_sum(alphas);
    if (!(total > 0.0)) {
        throw Error(ErrorCode::NoRoundsRetained, "no round carries positive weight");
    }
    if (ensemble.vote == BoostVote::score) {
        for (double &a : alphas) a /= total;
        return mixture(round_outputs, alphas);
    }
    std::vector<double> scores(ensemble.classes, 0.0);
    for (std::size_t t = 0; t < round_outputs.size(); ++t) {
        scores[decision_label(round_outputs[t])] += alphas[t];
    }
    for (double &s : scores) s /= total;
    return ProbVector::from_normalized(std::move(scores));
}

ProbVector adaboost_predict(const BoostEnsemble &ensemble, const FeatureVector &features) {
    std::vector<ProbVector> outputs;
    for (const auto &r : ensemble.rounds) {
        if (!r.model) {
            throw Error(ErrorCode::ConfigError, "round " + std::to_string(r.t) + " has no built-in model; use its prediction files");
        }
        outputs.push_back(predict_builtin(*r.model, features));
    }
    return adaboost_combine(ensemble, outputs);
}

BuiltinRoundLearner::BuiltinRoundLearner(const Dataset &dataset, const FeatureTable &features, std::vector<std::string> ids, LearnerConfig config) :
    dataset_(dataset),
    features_(features),
    ids_(std::move(ids)),
    config_(std::move(config)) {}

std::vector<ProbVector> BuiltinRoundLearner::fit_round(std::size_t t, const SampleWeights &weights) {
    LearnerConfig config = config_;
    config.seed = derive_seed(config_.seed, t);
    auto model = fit_builtin(dataset_, features_, ids_, weights, config);
    std::vector<ProbVector> preds;
    preds.reserve(weights.ids.size());
    for (const auto &id : weights.ids) preds.push_back(predict_builtin(model, features_.at(id)));
    if (models_.size() < t) models_.resize(t);
    models_[t - 1] = std::move(model);
    return preds;
}

std::optional<LinearModel> BuiltinRoundLearner::model(std::size_t t) const {
    if (t == 0 || t > models_.size()) return std::nullopt;
    return models_[t - 1];
}

ExternalRoundLearner::ExternalRoundLearner(std::filesystem::path dir, std::vector<std::string> ids) :
    dir_(std::move(dir)),
    ids_(std::move(ids)) {}

std::vector<ProbVector> ExternalRoundLearner::fit_round(std::size_t t, const SampleWeights &weights) {
    emit_round_weights(dir_, t, weights);
    const auto path = round_predictions_path(dir_, t, Split::train);
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::AwaitingExternal, "round " + std::to_string(t) + " weights written; waiting for " + path.string());
    }
    const auto set = read_predictions_file(path, "round_" + std::to_string(t), Split::train, weights.ids);
    return set.rows();
}

std::filesystem::path round_predictions_path(const std::filesystem::path &dir, std::size_t round, Split split) {
    return round_dir(dir, round) / ("preds_" + std::string(to_string(split)) + ".jsonl");
}

json to_json(const BoostEnsemble &ensemble) {
    json rounds = json::array();
    for (const auto &r : ensemble.rounds) {
        json round = {{"t", r.t}, {"model_id", r.model_id}, {"epsilon", r.epsilon}, {"alpha", r.alpha}, {"z", r.z}};
        round["model"] = r.model ? to_json(*r.model) : json(nullptr);
        rounds.push_back(std::move(round));
    }
    return json{
        {"schema_version", kEnsembleSchemaVersion},
        {"variant", "boosting"},
        {"boost_variant", std::string(to_string(ensemble.variant))},
        {"vote", std::string(to_string(ensemble.vote))},
        {"classes", ensemble.classes},
        {"rounds", std::move(rounds)},
    };
}

BoostEnsemble boost_from_json(const json &doc) {
    return parse_or_malformed<BoostEnsemble>("boosted ensemble", [&] {
        check_header(doc, "boosting");
        BoostEnsemble e;
        e.variant = doc.at("boost_variant").get<std::string>() == "samme" ? BoostVariant::samme : BoostVariant::binary_adaboost;
        e.vote = parse_boost_vote(doc.at("vote").get<std::string>());
        e.classes = doc.at("classes").get<std::size_t>();
        for (const auto &r : doc.at("rounds")) {
            BoostRound round;
            round.t = r.at("t").get<std::size_t>();
            round.model_id = r.at("model_id").get<std::string>();
            round.epsilon = r.at("epsilon").get<double>();
            round.alpha = r.at("alpha").get<double>();
            round.z = r.at("z").get<double>();
            if (!r.at("model").is_null()) round.model = linear_model_from_json(r.at("model"));
            e.rounds.push_back(std::move(round));
        }
        return e;
    });
}

// --- stacking ----------------------------------------------------------------

std::vector<double> stack_row(std::span<const ProbVector> base_row) {
    std::vector<double> row;
    for (const auto &p : base_row) row.insert(row.end(), p.begin(), p.end());
    return row;
}

MetaRows stack_rows(std::span<const PredictionSet> sets, std::span<const std::string> ids) {
    check_coverage(sets, ids);
    MetaRows rows;
    rows.reserve(ids.size());
    for (const auto &id : ids) rows.push_back(stack_row(member_row(sets, id)));
    return rows;
}

StackingModel stacking_fit(std::span<const PredictionSet> sets, std::span<const std::string> ids, std::span<const Label> labels, MetaKind kind, const MetaConfig &config) {
    if (sets.size() < 2) {
        throw Error(ErrorCode::ConfigError, "stacking needs at least two base models");
    }
    if (labels.size() != ids.size()) {
        throw Error(ErrorCode::LengthMismatch, "ids and labels differ in length");
    }
    StackingModel model;
    const auto rows = stack_rows(sets, ids);
    for (const auto &s : sets) model.base_ids.push_back(s.model_id());
    model.classes = sets.front().classes();
    model.meta = meta_fit(kind, rows, labels, model.classes, config);
    return model;
}

ProbVector stacking_predict(const StackingModel &model, std::span<const ProbVector> base_row) {
    check_layout(base_row, model.base_ids.size(), model.classes);
    return meta_predict(model.meta, stack_row(base_row));
}

json to_json(const StackingModel &model) {
    return json{
        {"schema_version", kEnsembleSchemaVersion},
        {"variant", "stacking"},
        {"base_ids", model.base_ids},
        {"classes", model.classes},
        {"meta", to_json(model.meta)},
    };
}

StackingModel stacking_from_json(const json &doc) {
    return parse_or_malformed<StackingModel>("stacking model", [&] {
        check_header(doc, "stacking");
        StackingModel m;
        m.base_ids = doc.at("base_ids").get<std::vector<std::string>>();
        m.classes = doc.at("classes").get<std::size_t>();
        m.meta = meta_model_from_json(doc.at("meta"));
        return m;
    });
}

// --- dynamic gated stacking --------------------------------------------------

std::string_view to_string(Routing routing) noexcept { return routing == Routing::soft ? "soft" : "hard"; }

Routing parse_routing(std::string_view text) {
    if (text == "hard") return Routing::hard;
    if (text == "soft") return Routing::soft;
    throw Error(ErrorCode::ConfigError, "unknown routing '" + std::string(text) + "'");
}

ProbVector dgs_target(std::span<const ProbVector> base_row, Label truth) {
    check_members(base_row);
    std::vector<double> target(base_row.size(), 0.0);
    std::size_t correct = 0;
    for (std::size_t j = 0; j < base_row.size(); ++j) {
        if (decision_label(base_row[j]) == truth) {
            target[j] = 1.0;
            ++correct;
        }
    }
    if (correct == 0) return ProbVector::uniform(base_row.size());
    for (double &t : target) t /= static_cast<double>(correct);
    return ProbVector::from_normalized(std::move(target));
}

std::vector<double> gate_input(const FeatureVector &features, std::span<const ProbVector> base_row, std::uint32_t feature_dims) {
    const auto folded = fold(features, feature_dims);
    std::vector<double> row(feature_dims, 0.0);
    for (const auto &e : folded.entries) {
        row[e.index] = folded.norm > 0.0 ? e.value / folded.norm : 0.0;
    }
    for (const auto &p : base_row) row.insert(row.end(), p.begin(), p.end());
    return row;
}

GateModel dgs_fit(std::span<const PredictionSet> sets, std::span<const std::string> ids, std::span<const Label> labels, std::span<const FeatureVector> features, const GateConfig &config) {
    if (sets.size() < 2) {
        throw Error(ErrorCode::ConfigError, "gated stacking needs at least two base models");
    }
    if (labels.size() != ids.size() || features.size() != ids.size()) {
        throw Error(ErrorCode::CoverageMismatch, "labels and features must align with the gate's training ids");
    }
    check_coverage(sets, ids);
    MetaRows rows;
    std::vector<ProbVector> targets;
    rows.reserve(ids.size());
    targets.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto base = member_row(sets, ids[i]);
        rows.push_back(gate_input(features[i], base, config.feature_dims));
        targets.push_back(dgs_target(base, labels[i]));
    }
    GateModel model;
    for (const auto &s : sets) model.base_ids.push_back(s.model_id());
    model.classes = sets.front().classes();
    model.routing = config.routing;
    model.feature_dims = config.feature_dims;
    model.gate = meta_fit_soft(config.kind, rows, targets, config.meta);
    return model;
}

ProbVector gate_scores(const GateModel &model, const FeatureVector &features, std::span<const ProbVector> base_row) {
    check_layout(base_row, model.base_ids.size(), model.classes);
    return meta_predict(model.gate, gate_input(features, base_row, model.feature_dims));
}

ProbVector route(Routing routing, const ProbVector &gate, std::span<const ProbVector> base_row) {
    if (gate.size() != base_row.size()) {
        throw Error(ErrorCode::LayoutMismatch, "gate scores " + std::to_string(gate.size()) + " experts, row has " + std::to_string(base_row.size()));
    }
    if (routing == Routing::hard) {
        return base_row[argmax_label(gate)];
    }
    return mixture(base_row, gate.values());
}

ProbVector dgs_predict(const GateModel &model, const FeatureVector &features, std::span<const ProbVector> base_row) {
    return route(model.routing, gate_scores(model, features, base_row), base_row);
}

json to_json(const GateModel &model) {
    return json{
        {"schema_version", kEnsembleSchemaVersion},
        {"variant", "dgs"},
        {"base_ids", model.base_ids},
        {"classes", model.classes},
        {"routing", std::string(to_string(model.routing))},
        {"feature_dims", model.feature_dims},
        {"gate", to_json(model.gate)},
    };
}

GateModel gate_from_json(const json &doc) {
    return parse_or_malformed<GateModel>("gate model", [&] {
        check_header(doc, "dgs");
        GateModel m;
        m.base_ids = doc.at("base_ids").get<std::vector<std::string>>();
        m.classes = doc.at("classes").get<std::size_t>();
        m.routing = parse_routing(doc.at("routing").get<std::string>());
        m.feature_dims = doc.at("feature_dims").get<std::uint32_t>();
        m.gate = meta_model_from_json(doc.at("gate"));
        return m;
    });
}

}  // namespace vulforge
