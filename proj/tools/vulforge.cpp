// vulforge: command-line front end for the ensemble engine.

#include "vulforge/experiment.hpp"

#include "CLI11.hpp"

#include <functional>
#include <iostream>

namespace {

using vulforge::ExperimentConfig;

/// Options registered on the app, applied on top of the config file only when
/// given on the command line.
class Overrides {
  public:
    template <typename T, typename Apply>
    CLI::Option *add(CLI::App &app, const std::string &name, const std::string &help, Apply apply) {
        auto value = std::make_shared<T>();
        auto *opt = app.add_option(name, *value, help);
        pending_.emplace_back(opt, [value, apply](ExperimentConfig &c) { apply(c, *value); });
        return opt;
    }

    CLI::Option *flag(CLI::App &app, const std::string &name, const std::string &help, std::function<void(ExperimentConfig &)> apply) {
        auto *opt = app.add_flag(name, help);
        pending_.emplace_back(opt, std::move(apply));
        return opt;
    }

    void apply(ExperimentConfig &config) const {
        for (const auto &[opt, fn] : pending_) {
            if (opt->count() > 0) fn(config);
        }
    }

  private:
    std::vector<std::pair<CLI::Option *, std::function<void(ExperimentConfig &)>>> pending_;
};

}  // namespace

int main(int argc, char **argv) {
    using namespace vulforge;

    CLI::App app{"vulforge: ensemble learning for vulnerability detection"};
    app.footer("\n" + exit_code_help());
    app.require_subcommand(1);

    std::string config_path;
    std::string out = "out";
    std::size_t workers = 1;
    app.add_option("--config", config_path, "JSON experiment config; flags override its values")->check(CLI::ExistingFile);
    app.add_option("--out", out, "Output directory")->capture_default_str();
    app.add_option("--workers", workers, "Worker threads (outputs do not depend on it)")->capture_default_str()->check(CLI::PositiveNumber);

    Overrides o;
    o.add<std::uint64_t>(app, "--seed", "Experiment seed", [](auto &c, auto v) { c.seed = v; });
    o.add<std::string>(app, "--external", "Directory with external model predictions (enables external mode)", [](auto &c, const auto &v) {
        c.external = true;
        c.external_dir = v;
    });
    o.add<std::string>(app, "--dataset", "Dataset JSONL", [](auto &c, const auto &v) { c.dataset = v; });
    o.add<std::string>(app, "--schema", "binary | multiclass", [](auto &c, const auto &v) { c.schema = parse_schema(v); });
    o.add<std::size_t>(app, "--members", "Bagging members", [](auto &c, auto v) { c.members = v; });
    o.add<std::size_t>(app, "--rounds", "Boosting rounds", [](auto &c, auto v) { c.rounds = v; });
    o.add<std::string>(app, "--mode", "Bagging vote: hard | soft", [](auto &c, const auto &v) { c.vote = parse_vote_mode(v); });
    o.add<std::string>(app, "--meta", "Stacking meta-model: lr | rf | svm | knn", [](auto &c, const auto &v) { c.meta = parse_meta_kind(v); });
    o.add<std::string>(app, "--routing", "Gate routing: hard | soft", [](auto &c, const auto &v) { c.routing = parse_routing(v); });
    o.add<std::string>(app, "--gate", "Gate model: lr | rf | svm | knn", [](auto &c, const auto &v) { c.gate = parse_meta_kind(v); });
    o.add<std::uint32_t>(app, "--gate-dims", "Folded feature width of the gate input", [](auto &c, auto v) { c.gate_dims = v; });
    o.add<std::string>(app, "--boost-vote", "Boosting vote: label | score", [](auto &c, const auto &v) { c.boost_vote = parse_boost_vote(v); });
    o.flag(app, "--samme", "Use SAMME even for two classes", [](auto &c) { c.force_samme = true; });
    o.add<std::size_t>(app, "--oof-folds", "Train the stacker on k-fold out-of-fold predictions", [](auto &c, auto v) { c.oof_folds = v; });
    o.add<std::uint32_t>(app, "--dims", "Hashed feature dimensions", [](auto &c, auto v) { c.learner.features.dims = v; });
    o.add<std::vector<unsigned>>(app, "--orders", "Token n-gram orders", [](auto &c, const auto &v) { c.learner.features.ngram_orders = v; });
    o.add<double>(app, "--lr", "Learner step size", [](auto &c, auto v) { c.learner.learning_rate = v; });
    o.add<std::size_t>(app, "--epochs", "Learner epochs", [](auto &c, auto v) { c.learner.epochs = v; });
    o.add<std::size_t>(app, "--batch", "Learner batch size", [](auto &c, auto v) { c.learner.batch_size = v; });
    o.add<double>(app, "--l2", "Learner L2 penalty", [](auto &c, auto v) { c.learner.l2 = v; });
    o.add<std::string>(app, "--weight-mode", "Boosting weights: loss | resample", [](auto &c, const auto &v) { c.learner.weight_mode = parse_weight_mode(v); });
    o.add<std::size_t>(app, "--trees", "Random forest size", [](auto &c, auto v) { c.meta_config.trees = v; });
    o.add<std::size_t>(app, "--k", "kNN neighbours", [](auto &c, auto v) { c.meta_config.k = v; });
    o.add<std::vector<std::string>>(app, "--models", "Model ids to analyse", [](auto &c, const auto &v) { c.models = v; });
    o.add<std::string>(app, "--input", "Score table CSV for rank", [](auto &c, const auto &v) { c.input = v; });
    o.add<std::string>(app, "--tie-rule", "average | competition", [](auto &c, const auto &v) { c.tie_rule = parse_tie_rule(v); });
    o.add<std::size_t>(app, "--top", "Number of most frequent CWEs", [](auto &c, auto v) { c.top_cwes = v; });
    o.add<std::vector<std::string>>(app, "--cwe", "Explicit CWE list", [](auto &c, const auto &v) { c.cwes = v; });
    o.add<std::string>(app, "--kind", "synth corpus: devign | reveal | bigvul | separable", [](auto &c, const auto &v) { c.synth_kind = v; });
    o.add<double>(app, "--scale", "synth size multiplier", [](auto &c, auto v) { c.synth_scale = v; });

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"split", "Stratified 80/10/10 split"},
        {"featurize", "Token n-gram hashed features"},
        {"train-base", "Train bootstrap members and write their predictions"},
        {"bag", "Combine members by hard or soft vote"},
        {"boost", "AdaBoost / SAMME over the training split"},
        {"stack", "Meta-model over member probabilities"},
        {"dgs", "Dynamic gated stacking"},
        {"eval", "Metrics for every method with test predictions"},
        {"rank", "Average ranks from a score table"},
        {"overlap", "Correctly classified overlap regions"},
        {"divergence", "Samples the members disagree on"},
        {"cwe-subsets", "Per-CWE subsets of a multiclass dataset"},
        {"verify", "Check digests and config hashes of an output directory"},
        {"synth", "Write a synthetic corpus to --dataset"},
    };
    for (const auto &[name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::config);
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        ExperimentConfig config;
        if (!config_path.empty()) {
            json doc;
            try {
                doc = json::parse(read_text(config_path));
            } catch (const json::parse_error &e) {
                throw Error(ErrorCode::ConfigError, config_path + ": " + e.what());
            }
            config = experiment_config_from_json(doc);
        }
        o.apply(config);
        RunOptions options{out, workers, &std::cout};
        const auto written = run_command(command, config, options);
        for (const auto &rel : written) std::cout << "wrote " << (std::filesystem::path(out) / rel).string() << '\n';
        return 0;
    } catch (const Error &e) {
        std::cerr << "vulforge " << command << ": " << e.what() << '\n';
        return static_cast<int>(exit_code_for(e.code()));
    } catch (const std::exception &e) {
        std::cerr << "vulforge " << command << ": " << e.what() << '\n';
        return static_cast<int>(ExitCode::other);
    }
}
