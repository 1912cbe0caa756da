#pragma once

#include "vulforge/codefeat.hpp"
#include "vulforge/core.hpp"
#include "vulforge/ingest.hpp"
#include "vulforge/io.hpp"
#include "vulforge/softmax.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace vulforge {

/// A distribution over training samples: non-negative, summing to 1.
struct SampleWeights {
    std::vector<std::string> ids;
    std::vector<double> weights;

    /// 1/N for each id.
    static SampleWeights uniform(std::vector<std::string> ids);
    /// Divides raw non-negative masses by their sum.
    static SampleWeights normalized(std::vector<std::string> ids, std::vector<double> masses);
    /// Multiplicity / N for each distinct id, in order of first appearance.
    static SampleWeights from_draw(std::span<const std::string> draw);

    /// Throws WeightCoverageMismatch on duplicate ids, negative weights or a
    /// sum away from 1 by more than kInternalTolerance.
    void validate() const;
};

/// How boosting hands its sample distribution to the learner.
enum class WeightMode { loss, resample };

std::string_view to_string(WeightMode mode) noexcept;
WeightMode parse_weight_mode(std::string_view text);

struct LearnerConfig {
    FeatureConfig features;
    double learning_rate = 0.5;
    std::size_t epochs = 5;
    std::size_t batch_size = 4;
    double l2 = 1e-6;
    /// Scale each feature vector to unit L2 length before training/scoring.
    bool normalize = true;
    Optimizer optimizer = Optimizer::adagrad;
    std::uint64_t seed = 0;
    WeightMode weight_mode = WeightMode::loss;
};

json to_json(const LearnerConfig &config);
LearnerConfig learner_config_from_json(const json &doc);

/// Feature vectors for every sample of a dataset.
class FeatureTable {
  public:
    FeatureTable() = default;
    static FeatureTable build(const Dataset &dataset, const FeatureConfig &config, std::size_t workers = 1);

    [[nodiscard]] std::uint32_t dims() const noexcept { return dims_; }
    /// Throws UnknownSample.
    [[nodiscard]] const FeatureVector &at(const std::string &id) const;

  private:
    std::uint32_t dims_ = 0;
    std::unordered_map<std::string, FeatureVector> vectors_;
};

/// Trained built-in learner: weighted softmax regression over hashed n-grams.
struct LinearModel {
    SoftmaxModel softmax;
    LearnerConfig config;

    [[nodiscard]] std::uint32_t dims() const noexcept { return config.features.dims; }
    [[nodiscard]] std::size_t classes() const noexcept { return softmax.classes(); }

    friend bool operator==(const LinearModel &a, const LinearModel &b) { return a.softmax == b.softmax; }
};

json to_json(const LinearModel &model);
LinearModel linear_model_from_json(const json &doc);

/// The sparse row the linear model sees for a feature vector.
std::vector<SparseEntry> model_row(const FeatureVector &features, bool normalize);

/// Fits on explicit feature vectors. weights must sum to 1.
LinearModel fit_linear(std::span<const FeatureVector> rows, std::span<const Label> labels, std::span<const double> weights, std::size_t classes, const LearnerConfig &config);

/// Fits on `ids` of a dataset under sample weights `w` (which must cover
/// exactly `ids`). Throws EmptyTrainingSet, WeightCoverageMismatch, ConfigError.
LinearModel fit_builtin(const Dataset &dataset, const FeatureTable &features, std::span<const std::string> ids, const SampleWeights &w, const LearnerConfig &config);

/// softmax(W f + b). Throws DimensionMismatch when f.dims differs.
ProbVector predict_builtin(const LinearModel &model, const FeatureVector &features);

PredictionSet predict_split(const LinearModel &model, const FeatureTable &features, std::span<const std::string> ids, const std::string &model_id, Split split);

// --- external-model file protocol -------------------------------------------

std::filesystem::path predictions_path(const std::filesystem::path &dir, const std::string &model_id, Split split);
std::filesystem::path round_dir(const std::filesystem::path &dir, std::size_t round);

/// One {"id","probs"} object per line, in the set's row order.
std::string predictions_to_jsonl(const PredictionSet &set);
void write_predictions(const std::filesystem::path &dir, const PredictionSet &set);

/// Reads a predictions file and checks it covers `split_ids` exactly once.
/// Rows come back in `split_ids` order. Throws MissingSample, UnknownSample,
/// MalformedProbVector, MalformedRecord, DuplicateId, IoError.
PredictionSet read_predictions_file(const std::filesystem::path &path, const std::string &model_id, Split split, std::span<const std::string> split_ids);

/// read_predictions_file on `<dir>/preds/<model_id>/<split>.jsonl`.
PredictionSet ingest_predictions(const std::filesystem::path &dir, const std::string &model_id, Split split, std::span<const std::string> split_ids);

/// Writes `<dir>/boost/round_<t>/weights.jsonl` (rounds start at 1). Round t
/// requires round t-1 to exist, and a round that already has a successor can
/// only be re-emitted byte-identically; otherwise ProtocolOrderError.
std::filesystem::path emit_round_weights(const std::filesystem::path &dir, std::size_t round, const SampleWeights &w);

SampleWeights read_round_weights(const std::filesystem::path &dir, std::size_t round);

}  // namespace vulforge
