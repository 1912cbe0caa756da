#pragma once

#include "vulforge/ensembles.hpp"
#include "vulforge/error.hpp"
#include "vulforge/ingest.hpp"
#include "vulforge/io.hpp"
#include "vulforge/learners.hpp"
#include "vulforge/metamodels.hpp"
#include "vulforge/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace vulforge {

inline constexpr int kArtifactSchemaVersion = 1;

/// Everything that determines an experiment's outputs. The output directory
/// and the worker count are deliberately left out: neither changes a byte.
struct ExperimentConfig {
    std::string dataset;
    Schema schema = Schema::binary;
    std::uint64_t seed = 0;

    std::size_t members = 5;
    std::size_t rounds = 10;
    VoteMode vote = VoteMode::soft;
    MetaKind meta = MetaKind::lr;
    Routing routing = Routing::hard;
    MetaKind gate = MetaKind::lr;
    std::uint32_t gate_dims = 4096;
    BoostVote boost_vote = BoostVote::label;
    bool force_samme = false;
    /// 0 trains the stacker on validation predictions; k > 1 on k-fold
    /// out-of-fold training predictions (built-in learners only).
    std::size_t oof_folds = 0;

    LearnerConfig learner;
    MetaConfig meta_config;

    bool external = false;
    std::string external_dir;

    // Analysis inputs.
    std::vector<std::string> models;
    std::string input;
    TieRule tie_rule = TieRule::average;
    std::size_t top_cwes = 10;
    std::vector<std::string> cwes;

    // `synth` writes a generated corpus to `dataset`.
    std::string synth_kind = "devign";
    double synth_scale = 1.0;
};

json to_json(const ExperimentConfig &config);
/// Unknown keys are a ConfigError.
ExperimentConfig experiment_config_from_json(const json &doc);
/// Checks value ranges. Throws ConfigError.
void validate(const ExperimentConfig &config);

/// FNV-1a of the canonical JSON echo, as 16 hex digits.
std::string config_hash(const ExperimentConfig &config);

enum class ExitCode : int {
    ok = 0,
    other = 1,
    config = 2,
    io = 3,
    protocol = 4,
    data = 5,
    verify = 6,
    awaiting = 7,
};

ExitCode exit_code_for(ErrorCode code) noexcept;

/// Text for the CLI help footer.
std::string exit_code_help();

/// An output directory with its manifest.
class Workspace {
  public:
    Workspace(std::filesystem::path root, const ExperimentConfig &config);

    [[nodiscard]] const std::filesystem::path &root() const noexcept { return root_; }
    [[nodiscard]] const std::string &hash() const noexcept { return hash_; }
    [[nodiscard]] const json &config_echo() const noexcept { return echo_; }

    /// Adds config_hash/config/schema_version and writes the document.
    void write_json(const std::string &rel, json doc);
    /// Prefixes `# config_hash=` and `# config=` comment lines.
    void write_csv(const std::string &rel, const std::string &body);
    /// Files whose format is fixed by an external protocol; tracked only in
    /// the manifest.
    void write_raw(const std::string &rel, const std::string &content);
    void write_predictions(const PredictionSet &set);

    /// Writes manifest.json (merged with any existing one).
    void commit();

    [[nodiscard]] const std::vector<std::string> &written() const noexcept { return written_; }

  private:
    void record(const std::string &rel, const std::string &content, const std::string &kind);

    std::filesystem::path root_;
    std::string hash_;
    json echo_;
    json entries_ = json::object();
    std::vector<std::string> written_;
};

struct RunOptions {
    std::filesystem::path out = "out";
    std::size_t workers = 1;
    /// Human-readable progress and summaries go here when set.
    std::ostream *log = nullptr;
};

/// Runs one subcommand (see command_names()). Throws
/// vulforge::Error; exit_code_for maps the code to the process status.
/// Returns the files written, relative to the output directory.
std::vector<std::string> run_command(const std::string &command, const ExperimentConfig &config, const RunOptions &options);

/// Names run_command accepts.
const std::vector<std::string> &command_names();

/// Recomputes every manifest digest and embedded config hash under `out`.
/// Returns the problems found (empty when the directory verifies).
std::vector<std::string> verify_outputs(const std::filesystem::path &out);

}  // namespace vulforge
