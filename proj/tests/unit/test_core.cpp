#include "doctest.h"
#include "oracles.hpp"
#include "thrown.hpp"

#include "vulforge/core.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace vulforge;

TEST_CASE("argmax_label examples") {
    CHECK(argmax_label(ProbVector::from_normalized({0.2, 0.8})) == 1);
    CHECK(argmax_label(ProbVector::from_normalized({0.5, 0.5})) == 0);
    CHECK(argmax_label(ProbVector::from_normalized({0.1, 0.1, 0.8})) == 2);
    CHECK(thrown([] { (void)argmax_label(std::span<const double>{}); }) == ErrorCode::InvalidProbVector);
}

TEST_CASE("validate_prob_vector examples") {
    const std::vector<double> ok = {0.4, 0.6};
    const auto p = validate_prob_vector(ok);
    CHECK(p.size() == 2);
    CHECK(p[0] + p[1] == 1.0);

    const std::vector<double> over = {0.5, 0.6};
    CHECK(thrown([&] { (void)validate_prob_vector(over); }) == ErrorCode::SumOutOfTolerance);

    const std::vector<double> vertex = {1.0, 0.0};
    const auto v = validate_prob_vector(vertex);
    CHECK(v[0] == 1.0);
    CHECK(v[1] == 0.0);

    const std::vector<double> negative = {1.1, -0.1};
    CHECK(thrown([&] { (void)validate_prob_vector(negative); }) == ErrorCode::NegativeEntry);

    const std::vector<double> rounded = {0.3333333, 0.3333333, 0.3333334};
    CHECK_NOTHROW((void)validate_prob_vector(rounded));
    const std::vector<double> loose = {0.333, 0.333, 0.333};
    CHECK(thrown([&] { (void)validate_prob_vector(loose); }) == ErrorCode::SumOutOfTolerance);
}

TEST_CASE("validation is idempotent on random rows") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t k = 2 + gen() % 6;
        std::vector<double> raw(k);
        for (auto &x : raw) x = u(gen);
        const double s = std::accumulate(raw.begin(), raw.end(), 0.0);
        for (auto &x : raw) x /= s;
        const auto once = validate_prob_vector(raw);
        const auto twice = validate_prob_vector(once.values());
        REQUIRE(once == twice);
    }
}

TEST_CASE("argmax is permutation-covariant and scale-invariant") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + gen() % 6;
        std::vector<double> raw(k);
        for (auto &x : raw) x = u(gen);
        const Label best = argmax_label(raw);

        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), gen);
        std::vector<double> permuted(k);
        for (std::size_t i = 0; i < k; ++i) permuted[perm[i]] = raw[i];
        CHECK(argmax_label(permuted) == perm[best]);

        std::vector<double> scaled(raw);
        const double c = 0.1 + 10.0 * u(gen);
        for (auto &x : scaled) x *= c;
        CHECK(argmax_label(scaled) == best);
    }
}

TEST_CASE("binary decisions use the 0.5 threshold, wider K uses argmax") {
    CHECK(decision_label(ProbVector::from_normalized({0.5, 0.5})) == 1);
    CHECK(decision_label(ProbVector::from_normalized({0.5000001, 0.4999999})) == 0);
    CHECK(decision_label(ProbVector::from_normalized({0.25, 0.75})) == 1);
    CHECK(decision_label(ProbVector::from_normalized({0.4, 0.4, 0.2})) == 0);
    CHECK(decision_label(ProbVector::from_normalized({0.2, 0.4, 0.4})) == 1);
}

TEST_CASE("exact_sum matches integer arithmetic on dyadic values") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + gen() % 40;
        std::vector<double> values;
        std::int64_t total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto num = static_cast<std::int64_t>(gen() % oracle::kDenominator) - oracle::kDenominator / 2;
            total += num;
            values.push_back(static_cast<double>(num) / static_cast<double>(oracle::kDenominator));
        }
        const double expected = static_cast<double>(total) / static_cast<double>(oracle::kDenominator);
        CHECK(exact_sum(values) == expected);
        std::shuffle(values.begin(), values.end(), gen);
        CHECK(exact_sum(values) == expected);
    }
    const std::vector<double> cancel = {1e100, 1.0, -1e100};
    CHECK(exact_sum(cancel) == 1.0);
}

TEST_CASE("exact_dot is exact on representable products") {
    const std::vector<double> a = {1e16, 1.0, -1e16};
    const std::vector<double> b = {1.0, 0.5, 1.0};
    CHECK(exact_dot(a, b) == 0.5);
}

TEST_CASE("uniform mixture is the correctly rounded mean in any order") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + gen() % 4;
        const std::size_t m = 1 + gen() % 7;
        std::vector<oracle::DyadicRow> dyadic;
        std::vector<ProbVector> rows;
        for (std::size_t j = 0; j < m; ++j) {
            dyadic.push_back(oracle::random_row(gen, k));
            rows.push_back(ProbVector::from_normalized(dyadic.back().as_doubles()));
        }
        const std::vector<double> weights(m, 1.0 / static_cast<double>(m));
        const auto mixed = mixture(rows, weights);
        const auto expected = oracle::soft_mean(dyadic);
        for (std::size_t c = 0; c < k; ++c) REQUIRE(mixed[c] == expected[c]);
        std::shuffle(rows.begin(), rows.end(), gen);
        CHECK(mixture(rows, weights) == mixed);
    }
}

TEST_CASE("mixture rejects rows of different K") {
    const std::vector<ProbVector> rows = {ProbVector::uniform(2), ProbVector::uniform(3)};
    const std::vector<double> w = {0.5, 0.5};
    CHECK(thrown([&] { (void)mixture(rows, w); }) == ErrorCode::MemberKMismatch);
}

TEST_CASE("ProbVector constructors") {
    const auto hot = ProbVector::one_hot(3, 2);
    CHECK(hot[2] == 1.0);
    CHECK(hot[0] == 0.0);
    CHECK(thrown([] { (void)ProbVector::one_hot(2, 2); }) == ErrorCode::InvalidProbVector);
    const auto u = ProbVector::uniform(4);
    for (double p : u) CHECK(p == 0.25);
    CHECK(thrown([] { (void)ProbVector::from_normalized({0.7, 0.7}); }) == ErrorCode::InvalidProbVector);
    CHECK(thrown([] { (void)ProbVector::from_normalized({}); }) == ErrorCode::InvalidProbVector);
}

TEST_CASE("PredictionSet invariants") {
    PredictionSet set("m", Split::val);
    set.add("a", ProbVector::uniform(2));
    set.add("b", ProbVector::one_hot(2, 1));
    CHECK(set.size() == 2);
    CHECK(set.classes() == 2);
    CHECK(set.at("b")[1] == 1.0);
    CHECK(set.ids() == std::vector<std::string>{"a", "b"});
    CHECK(thrown([&] { set.add("a", ProbVector::uniform(2)); }) == ErrorCode::DuplicateId);
    CHECK(thrown([&] { set.add("c", ProbVector::uniform(3)); }) == ErrorCode::MalformedProbVector);
    CHECK(thrown([&] { (void)set.at("zz"); }) == ErrorCode::UnknownSample);
}

TEST_CASE("split names round-trip") {
    for (auto s : {Split::train, Split::val, Split::test}) CHECK(parse_split(to_string(s)) == s);
    CHECK(thrown([] { (void)parse_split("dev"); }) == ErrorCode::ConfigError);
}
