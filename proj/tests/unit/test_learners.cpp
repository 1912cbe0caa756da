#include "doctest.h"
#include "oracles.hpp"
#include "tempdir.hpp"
#include "thrown.hpp"

#include "vulforge/learners.hpp"
#include "vulforge/synth.hpp"

#include <cmath>
#include <fstream>
#include <random>

using namespace vulforge;

namespace {

struct DenseFixture {
    SparseMatrix rows;
    std::vector<double> targets;
    std::vector<double> weights;
    std::size_t classes;
};

/// Random dense rows with entries in [-1, 1] scaled to unit length, one-hot
/// targets and random normalized weights.
DenseFixture dense_fixture(std::mt19937_64 &gen, std::size_t n, std::size_t width, std::size_t k) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DenseFixture f{SparseMatrix(width), {}, {}, k};
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(width);
        double sq = 0.0;
        for (auto &v : x) {
            v = u(gen);
            sq += v * v;
        }
        for (auto &v : x) v /= std::sqrt(sq);
        f.rows.add_dense_row(x);
        const std::size_t y = gen() % k;
        for (std::size_t c = 0; c < k; ++c) f.targets.push_back(c == y ? 1.0 : 0.0);
        f.weights.push_back(0.5 + 0.5 * (u(gen) + 1.0));
        total += f.weights.back();
    }
    for (auto &w : f.weights) w /= total;
    return f;
}

std::vector<std::string> ids_of(const Dataset &d) {
    std::vector<std::string> out;
    for (const auto &s : d.samples()) out.push_back(s.id);
    return out;
}

LearnerConfig small_config() {
    LearnerConfig c;
    c.features.dims = 1U << 12;
    c.seed = 3;
    return c;
}

void write_file(const std::filesystem::path &p, const std::string &text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("softmax prediction examples") {
    const SoftmaxModel zero(2, 3);
    const std::vector<SparseEntry> row = {{0, 1.0}, {2, -4.0}};
    const auto p = zero.predict(row);
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);

    const SoftmaxModel biased(2, 3, std::vector<double>(6, 0.0), {0.0, std::log(3.0)});
    const auto q = biased.predict(row);
    CHECK(q[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(q[1] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("softmax shapes are validated") {
    CHECK(thrown([] { SoftmaxModel(2, 3, std::vector<double>(5, 0.0), {0.0, 0.0}); }) == ErrorCode::WidthMismatch);
    CHECK(thrown([] { SoftmaxModel(2, 1, {0.0, NAN}, {0.0, 0.0}); }) == ErrorCode::ConfigError);
}

TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 gen(21);
    std::normal_distribution<double> g(0.0, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 2 + trial % 3;
        const auto f = dense_fixture(gen, 20, 6, k);
        std::vector<double> w(k * 6);
        std::vector<double> b(k);
        for (auto &x : w) x = g(gen);
        for (auto &x : b) x = g(gen);
        const double l2 = 1e-2;
        const SoftmaxProblem problem{f.rows, f.targets, f.weights};

        std::vector<double> gw;
        std::vector<double> gb;
        softmax_gradient(SoftmaxModel(k, 6, w, b), problem, l2, gw, gb);

        std::vector<double> params(w);
        params.insert(params.end(), b.begin(), b.end());
        const auto objective = [&](const std::vector<double> &p) {
            return softmax_objective(SoftmaxModel(k, 6, {p.begin(), p.begin() + static_cast<std::ptrdiff_t>(k * 6)}, {p.begin() + static_cast<std::ptrdiff_t>(k * 6), p.end()}), problem, l2);
        };
        auto analytic = gw;
        analytic.insert(analytic.end(), gb.begin(), gb.end());
        CHECK(oracle::relative_error(analytic, oracle::finite_difference(objective, params)) < 1e-6);
    }
}

TEST_CASE("full-batch loss decreases every epoch below the stability bound") {
    // Unit-length rows and weights summing to one bound the Hessian of the
    // objective by 1 + l2, so any step under 2 / (1 + l2) is stable.
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto f = dense_fixture(gen, 40, 5, 2 + trial % 3);
        SoftmaxConfig cfg;
        cfg.batch_size = 0;
        cfg.epochs = 60;
        cfg.learning_rate = 0.9;
        cfg.l2 = 1e-3;
        cfg.optimizer = Optimizer::sgd;
        std::vector<double> history;
        const SoftmaxProblem problem{f.rows, f.targets, f.weights};
        const auto model = train_softmax(problem, f.classes, cfg, &history);
        REQUIRE(history.size() == 60);
        const double start = softmax_objective(SoftmaxModel(f.classes, 5), problem, cfg.l2);
        CHECK(history.front() < start);
        for (std::size_t e = 1; e < history.size(); ++e) CHECK(history[e] <= history[e - 1] + 1e-6);
        CHECK(history.back() == softmax_objective(model, problem, cfg.l2));
    }
}

TEST_CASE("trainer settings are validated") {
    std::mt19937_64 gen(1);
    const auto f = dense_fixture(gen, 5, 3, 2);
    const SoftmaxProblem problem{f.rows, f.targets, f.weights};
    SoftmaxConfig zero_epochs;
    zero_epochs.epochs = 0;
    CHECK(thrown([&] { (void)train_softmax(problem, 2, zero_epochs); }) == ErrorCode::ConfigError);
    SoftmaxConfig bad_rate;
    bad_rate.learning_rate = 0.0;
    CHECK(thrown([&] { (void)train_softmax(problem, 2, bad_rate); }) == ErrorCode::ConfigError);
    SoftmaxConfig unstable_l2;
    unstable_l2.learning_rate = 2.0;
    unstable_l2.l2 = 0.5;
    CHECK(thrown([&] { (void)train_softmax(problem, 2, unstable_l2); }) == ErrorCode::ConfigError);
    CHECK(parse_optimizer(to_string(Optimizer::adagrad)) == Optimizer::adagrad);
    CHECK(parse_optimizer(to_string(Optimizer::sgd)) == Optimizer::sgd);
    CHECK(thrown([] { (void)parse_optimizer("adam"); }) == ErrorCode::ConfigError);
}

TEST_CASE("training is deterministic given the seed") {
    std::mt19937_64 gen(4);
    const auto f = dense_fixture(gen, 50, 4, 3);
    const SoftmaxProblem problem{f.rows, f.targets, f.weights};
    for (auto opt : {Optimizer::sgd, Optimizer::adagrad}) {
        SoftmaxConfig cfg;
        cfg.epochs = 5;
        cfg.optimizer = opt;
        cfg.seed = 9;
        const auto a = train_softmax(problem, 3, cfg);
        CHECK(train_softmax(problem, 3, cfg) == a);
        cfg.seed = 10;
        CHECK_FALSE(train_softmax(problem, 3, cfg) == a);
    }
}

TEST_CASE("separable 200-point set is fitted") {
    const auto d = separable_corpus(200, 5);
    const auto cfg = small_config();
    const auto table = FeatureTable::build(d, cfg.features);
    const auto ids = ids_of(d);
    const auto model = fit_builtin(d, table, ids, SampleWeights::uniform(ids), cfg);
    std::size_t right = 0;
    for (const auto &id : ids) right += decision_label(predict_builtin(model, table.at(id))) == d.label(id);
    CHECK(static_cast<double>(right) / static_cast<double>(ids.size()) >= 0.99);
}

TEST_CASE("all weight on one sample") {
    const auto d = synth_binary("one", 60, 40, 2);
    const auto cfg = small_config();
    const auto table = FeatureTable::build(d, cfg.features);
    const auto ids = ids_of(d);
    for (std::size_t target : {0UL, 7UL, 55UL}) {
        std::vector<double> mass(ids.size(), 0.0);
        mass[target] = 1.0;
        const auto model = fit_builtin(d, table, ids, SampleWeights::normalized(ids, mass), cfg);
        const Label y = d.label(ids[target]);
        CHECK(predict_builtin(model, table.at(ids[target]))[y] >= 0.9);
    }
}

TEST_CASE("weight scale does not matter") {
    const auto d = synth_binary("scale", 40, 30, 6);
    const auto cfg = small_config();
    const auto table = FeatureTable::build(d, cfg.features);
    const auto ids = ids_of(d);
    const auto a = fit_builtin(d, table, ids, SampleWeights::uniform(ids), cfg);
    const auto b = fit_builtin(d, table, ids, SampleWeights::normalized(ids, std::vector<double>(ids.size(), 7.0)), cfg);
    CHECK(a == b);
}

TEST_CASE("fit_builtin errors") {
    const auto d = synth_binary("err", 20, 20, 1);
    auto cfg = small_config();
    const auto table = FeatureTable::build(d, cfg.features);
    const auto ids = ids_of(d);
    const std::vector<std::string> none;
    CHECK(thrown([&] { (void)fit_builtin(d, table, none, SampleWeights::uniform({}), cfg); }) == ErrorCode::EmptyTrainingSet);
    const std::vector<std::string> fewer(ids.begin(), ids.begin() + 10);
    CHECK(thrown([&] { (void)fit_builtin(d, table, ids, SampleWeights::uniform(fewer), cfg); }) == ErrorCode::WeightCoverageMismatch);
    cfg.epochs = 0;
    CHECK(thrown([&] { (void)fit_builtin(d, table, ids, SampleWeights::uniform(ids), cfg); }) == ErrorCode::ConfigError);

    const auto model = fit_builtin(d, table, ids, SampleWeights::uniform(ids), small_config());
    const auto narrow = featurize(tokenize("int x;"), {1U << 8, {1, 2}});
    CHECK(thrown([&] { (void)predict_builtin(model, narrow); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("sample weights") {
    const std::vector<std::string> draw = {"a", "b", "a", "c", "a", "b"};
    const auto w = SampleWeights::from_draw(draw);
    CHECK(w.ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(w.weights == std::vector<double>{0.5, 2.0 / 6.0, 1.0 / 6.0});
    CHECK_NOTHROW(w.validate());

    SampleWeights dup{{"a", "a"}, {0.5, 0.5}};
    CHECK(thrown([&] { dup.validate(); }) == ErrorCode::WeightCoverageMismatch);
    SampleWeights neg{{"a", "b"}, {1.5, -0.5}};
    CHECK(thrown([&] { neg.validate(); }) == ErrorCode::WeightCoverageMismatch);
    SampleWeights short_sum{{"a", "b"}, {0.5, 0.4}};
    CHECK(thrown([&] { short_sum.validate(); }) == ErrorCode::WeightCoverageMismatch);
}

TEST_CASE("model and config JSON round trips") {
    const auto d = synth_binary("json", 30, 30, 3);
    auto cfg = small_config();
    cfg.optimizer = Optimizer::sgd;
    cfg.weight_mode = WeightMode::resample;
    cfg.features.ngram_orders = {1, 3};
    CHECK(to_json(learner_config_from_json(to_json(cfg))) == to_json(cfg));
    const auto table = FeatureTable::build(d, cfg.features);
    const auto ids = ids_of(d);
    const auto model = fit_builtin(d, table, ids, SampleWeights::uniform(ids), cfg);
    const auto back = linear_model_from_json(json::parse(to_json(model).dump()));
    CHECK(back == model);
    CHECK(to_json(back.config) == to_json(cfg));
    CHECK(thrown([] { (void)learner_config_from_json(json{{"optimizer", "lbfgs"}}); }) == ErrorCode::ConfigError);
}

TEST_CASE("round weight files") {
    TempDir dir("weights");
    const auto w = SampleWeights::uniform({"a", "b", "c", "d"});
    CHECK(thrown([&] { (void)emit_round_weights(dir.path(), 2, w); }) == ErrorCode::ProtocolOrderError);
    const auto path = emit_round_weights(dir.path(), 1, w);
    CHECK(path == dir.path() / "boost" / "round_1" / "weights.jsonl");
    const auto text = read_text(path);
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n';
    CHECK(lines == 4);
    for (const auto &line : {R"({"id":"a","weight":0.25})", R"({"id":"d","weight":0.25})"}) CHECK(text.find(line) != std::string::npos);

    CHECK(read_round_weights(dir.path(), 1).weights == w.weights);
    CHECK(emit_round_weights(dir.path(), 1, w) == path);
    CHECK(read_text(path) == text);

    (void)emit_round_weights(dir.path(), 2, SampleWeights::normalized({"a", "b", "c", "d"}, {1, 1, 1, 5}));
    CHECK(thrown([&] { (void)emit_round_weights(dir.path(), 1, SampleWeights::normalized({"a", "b", "c", "d"}, {1, 2, 3, 4})); }) == ErrorCode::ProtocolOrderError);
    CHECK_NOTHROW((void)emit_round_weights(dir.path(), 1, w));
}

TEST_CASE("prediction ingestion") {
    TempDir dir("preds");
    const std::vector<std::string> split_ids = {"x", "y", "z"};
    PredictionSet set("ext", Split::test);
    set.add("x", ProbVector::from_normalized({0.25, 0.75}));
    set.add("y", ProbVector::from_normalized({1.0, 0.0}));
    set.add("z", ProbVector::from_normalized({0.5, 0.5}));
    write_predictions(dir.path(), set);
    CHECK(ingest_predictions(dir.path(), "ext", Split::test, split_ids) == set);

    const auto p = dir / "bad.jsonl";
    write_file(p, "{\"id\":\"x\",\"probs\":[0.3,0.7]}\n{\"id\":\"y\",\"probs\":[0.6,0.4]}\n");
    CHECK(thrown([&] { (void)read_predictions_file(p, "m", Split::test, split_ids); }) == ErrorCode::MissingSample);
    write_file(p, "{\"id\":\"x\",\"probs\":[0.7,0.7]}\n{\"id\":\"y\",\"probs\":[0.6,0.4]}\n{\"id\":\"z\",\"probs\":[0.6,0.4]}\n");
    CHECK(thrown([&] { (void)read_predictions_file(p, "m", Split::test, split_ids); }) == ErrorCode::MalformedProbVector);
    write_file(p, "{\"id\":\"x\",\"probs\":[0.3,0.7]}\n{\"id\":\"y\",\"probs\":[0.6,0.4]}\n{\"id\":\"z\",\"probs\":[0.6,0.4]}\n{\"id\":\"q\",\"probs\":[0.6,0.4]}\n");
    CHECK(thrown([&] { (void)read_predictions_file(p, "m", Split::test, split_ids); }) == ErrorCode::UnknownSample);
    write_file(p, "{\"id\":\"x\",\"probs\":[0.3,0.7]}\n{\"id\":\"x\",\"probs\":[0.3,0.7]}\n{\"id\":\"y\",\"probs\":[0.6,0.4]}\n{\"id\":\"z\",\"probs\":[0.6,0.4]}\n");
    CHECK(thrown([&] { (void)read_predictions_file(p, "m", Split::test, split_ids); }) == ErrorCode::DuplicateId);
    write_file(p, "{\"id\":\"z\",\"probs\":[0.6,0.4]}\n{\"id\":\"x\",\"probs\":[0.3333333,0.6666667]}\n{\"id\":\"y\",\"probs\":[0.6,0.4]}\n");
    const auto ordered = read_predictions_file(p, "m", Split::test, split_ids);
    CHECK(ordered.ids() == split_ids);
    CHECK(thrown([&] { (void)read_predictions_file(dir / "absent.jsonl", "m", Split::test, split_ids); }) == ErrorCode::IoError);
}
