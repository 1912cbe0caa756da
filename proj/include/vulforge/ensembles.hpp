#pragma once

#include "vulforge/codefeat.hpp"
#include "vulforge/core.hpp"
#include "vulforge/ingest.hpp"
#include "vulforge/io.hpp"
#include "vulforge/learners.hpp"
#include "vulforge/metamodels.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vulforge {

/// Version tag written into every ensemble.json.
inline constexpr int kEnsembleSchemaVersion = 1;

// --- shared helpers ----------------------------------------------------------

/// Checks that every set contains each of `ids` and that all sets share K.
/// Throws CoverageMismatch or MemberKMismatch.
void check_coverage(std::span<const PredictionSet> sets, std::span<const std::string> ids);

/// The M member rows for one id, in set order.
std::vector<ProbVector> member_row(std::span<const PredictionSet> sets, const std::string &id);

// --- bagging -----------------------------------------------------------------

enum class VoteMode { hard, soft };

std::string_view to_string(VoteMode mode) noexcept;
VoteMode parse_vote_mode(std::string_view text);

/// One-hot of the majority decision label. Ties go to the class with the
/// larger summed probability, then to the lowest index.
ProbVector hard_vote(std::span<const ProbVector> members);

/// Entrywise mean of the member rows.
ProbVector soft_vote(std::span<const ProbVector> members);

ProbVector bagging_combine(VoteMode mode, std::span<const ProbVector> members);

struct BaggingEnsemble {
    VoteMode mode = VoteMode::soft;
    std::uint64_t seed = 0;
    std::vector<std::string> member_ids;
    /// Empty in external mode, where members are prediction files.
    std::vector<LinearModel> members;
};

/// Trains one built-in learner per bootstrap draw. Member m trains with
/// learner seed derive_seed(config.seed, m); members train concurrently and
/// the result does not depend on `workers`.
BaggingEnsemble bagging_fit(const Dataset &dataset, const FeatureTable &features, const BootstrapPlan &plan, const LearnerConfig &config, VoteMode mode, std::size_t workers = 1);

ProbVector bagging_predict(const BaggingEnsemble &ensemble, const FeatureVector &features);

/// Combines member prediction sets id by id, in `ids` order.
PredictionSet combine_sets(VoteMode mode, std::span<const PredictionSet> sets, std::span<const std::string> ids, const std::string &model_id, Split split);

json to_json(const BaggingEnsemble &ensemble);
BaggingEnsemble bagging_from_json(const json &doc);

// --- boosting ----------------------------------------------------------------

enum class BoostVariant { binary_adaboost, samme };
/// label: each round votes alpha for its decision label. score: each round
/// adds alpha times its whole probability row.
enum class BoostVote { label, score };

std::string_view to_string(BoostVariant variant) noexcept;
std::string_view to_string(BoostVote vote) noexcept;
BoostVote parse_boost_vote(std::string_view text);

/// A zero training error is clamped to this before computing alpha.
inline constexpr double kMinBoostError = 1e-10;

struct BoostRound {
    std::size_t t = 0;
    std::string model_id;
    double epsilon = 0.0;
    double alpha = 0.0;
    /// Sum of the unnormalized updated weights.
    double z = 1.0;
    /// Present for built-in rounds.
    std::optional<LinearModel> model;
};

struct BoostEnsemble {
    BoostVariant variant = BoostVariant::binary_adaboost;
    BoostVote vote = BoostVote::label;
    std::size_t classes = 2;
    std::vector<BoostRound> rounds;
};

struct BoostConfig {
    std::size_t rounds = 10;
    /// Use SAMME coefficients even for K = 2.
    bool force_samme = false;
    BoostVote vote = BoostVote::label;
};

/// Supplies the weak learner for each round.
class RoundLearner {
  public:
    virtual ~RoundLearner() = default;
    /// Trains round t (1-based) under `weights` and returns the round's
    /// predictions on the training ids, in the order of weights.ids.
    virtual std::vector<ProbVector> fit_round(std::size_t t, const SampleWeights &weights) = 0;
    /// The trained model of round t, if the learner keeps one.
    virtual std::optional<LinearModel> model(std::size_t /*t*/) const { return std::nullopt; }
};

struct BoostFit {
    BoostEnsemble ensemble;
    /// weights[t-1] is the distribution round t trained under.
    std::vector<SampleWeights> weights;
    /// Why training ended: "rounds", "perfect" or "degenerate".
    std::string stop_reason;
};

double binary_alpha(double epsilon);
double samme_alpha(double epsilon, std::size_t classes);

/// Applies one reweighting step. Binary: w * exp(alpha) on misses and
/// w * exp(-alpha) on hits; SAMME: w * exp(alpha) on misses only. Returns
/// the normalized weights and stores the normalizer in `z`.
std::vector<double> boost_update(std::span<const double> weights, const std::vector<bool> &missed, double alpha, BoostVariant variant, double &z);

/// Runs AdaBoost over `ids` with true labels `truth`. Stops early, dropping
/// the offending round, when epsilon reaches 0.5 (binary) or 1 - 1/K (SAMME).
/// A round with zero error is kept with epsilon clamped to kMinBoostError and
/// ends training. Throws NoRoundsRetained or ConfigError.
BoostFit adaboost_fit(std::span<const std::string> ids, std::span<const Label> truth, std::size_t classes, RoundLearner &learner, const BoostConfig &config);

/// Normalized weighted vote over the round outputs (one per round, in order).
ProbVector adaboost_combine(const BoostEnsemble &ensemble, std::span<const ProbVector> round_outputs);

/// adaboost_combine over the built-in models of each round.
ProbVector adaboost_predict(const BoostEnsemble &ensemble, const FeatureVector &features);

/// Built-in weak learner: trains on `ids` of the dataset. Round t uses learner
/// seed derive_seed(config.seed, t).
class BuiltinRoundLearner : public RoundLearner {
  public:
    BuiltinRoundLearner(const Dataset &dataset, const FeatureTable &features, std::vector<std::string> ids, LearnerConfig config);
    std::vector<ProbVector> fit_round(std::size_t t, const SampleWeights &weights) override;
    std::optional<LinearModel> model(std::size_t t) const override;

  private:
    const Dataset &dataset_;
    const FeatureTable &features_;
    std::vector<std::string> ids_;
    LearnerConfig config_;
    std::vector<LinearModel> models_;
};

/// External weak learner: emits boost/round_<t>/weights.jsonl under `dir` and
/// reads boost/round_<t>/preds_train.jsonl. Throws AwaitingExternal when the
/// round's predictions are not there yet.
class ExternalRoundLearner : public RoundLearner {
  public:
    ExternalRoundLearner(std::filesystem::path dir, std::vector<std::string> ids);
    std::vector<ProbVector> fit_round(std::size_t t, const SampleWeights &weights) override;

  private:
    std::filesystem::path dir_;
    std::vector<std::string> ids_;
};

/// `<dir>/boost/round_<t>/preds_<split>.jsonl`.
std::filesystem::path round_predictions_path(const std::filesystem::path &dir, std::size_t round, Split split);

json to_json(const BoostEnsemble &ensemble);
BoostEnsemble boost_from_json(const json &doc);

// --- stacking ----------------------------------------------------------------

struct StackingModel {
    std::vector<std::string> base_ids;
    std::size_t classes = 0;
    MetaModel meta;
};

/// [phi_1(x) .. phi_M(x)] flattened.
std::vector<double> stack_row(std::span<const ProbVector> base_row);

/// One stacked row per id. Throws CoverageMismatch, MemberKMismatch.
MetaRows stack_rows(std::span<const PredictionSet> sets, std::span<const std::string> ids);

/// Trains the meta-model on the stacked base predictions of `ids` (normally
/// the validation split). Needs M >= 2. Throws CoverageMismatch, ConfigError.
StackingModel stacking_fit(std::span<const PredictionSet> sets, std::span<const std::string> ids, std::span<const Label> labels, MetaKind kind, const MetaConfig &config);

/// Throws LayoutMismatch when the row does not have M entries of width K.
ProbVector stacking_predict(const StackingModel &model, std::span<const ProbVector> base_row);

json to_json(const StackingModel &model);
StackingModel stacking_from_json(const json &doc);

// --- dynamic gated stacking --------------------------------------------------

enum class Routing { hard, soft };

std::string_view to_string(Routing routing) noexcept;
Routing parse_routing(std::string_view text);

struct GateConfig {
    MetaKind kind = MetaKind::lr;
    Routing routing = Routing::hard;
    /// Width the code features are folded to before entering the gate.
    std::uint32_t feature_dims = 4096;
    MetaConfig meta;
};

struct GateModel {
    std::vector<std::string> base_ids;
    std::size_t classes = 0;
    Routing routing = Routing::hard;
    std::uint32_t feature_dims = 4096;
    MetaModel gate;
};

/// Uniform over the experts whose decision label equals `truth`, or uniform
/// over all experts when none is right.
ProbVector dgs_target(std::span<const ProbVector> base_row, Label truth);

/// Unit-length folded code features followed by the flattened base rows.
std::vector<double> gate_input(const FeatureVector &features, std::span<const ProbVector> base_row, std::uint32_t feature_dims);

/// Trains the gate on `ids` (normally validation) with the base models frozen.
/// `features` is aligned with `ids`. Throws CoverageMismatch, ConfigError.
GateModel dgs_fit(std::span<const PredictionSet> sets, std::span<const std::string> ids, std::span<const Label> labels, std::span<const FeatureVector> features, const GateConfig &config);

/// The gate's distribution over experts.
ProbVector gate_scores(const GateModel &model, const FeatureVector &features, std::span<const ProbVector> base_row);

/// Hard: the row of the top-scoring expert (lowest index on ties), verbatim.
/// Soft: mixture of the rows under the gate scores.
ProbVector route(Routing routing, const ProbVector &gate, std::span<const ProbVector> base_row);

/// Throws LayoutMismatch.
ProbVector dgs_predict(const GateModel &model, const FeatureVector &features, std::span<const ProbVector> base_row);

json to_json(const GateModel &model);
GateModel gate_from_json(const json &doc);

}  // namespace vulforge
