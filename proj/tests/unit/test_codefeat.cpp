#include "doctest.h"
#include "thrown.hpp"

#include "vulforge/codefeat.hpp"

#include <cmath>
#include <map>
#include <random>

using namespace vulforge;

namespace {

std::uint64_t fnv1a(const std::string &bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<Token> toks(std::initializer_list<const char *> texts) {
    std::vector<Token> out;
    for (const char *t : texts) out.push_back({TokenKind::identifier, t});
    return out;
}

}  // namespace

TEST_CASE("lexing examples") {
    const std::vector<Token> decl = {
        {TokenKind::keyword, "int"}, {TokenKind::identifier, "x"}, {TokenKind::op, "="}, {TokenKind::number, "<num>"}, {TokenKind::punct, ";"},
    };
    CHECK(tokenize("int x = 42;") == decl);

    const std::vector<Token> sum = {{TokenKind::identifier, "a"}, {TokenKind::op, "+"}, {TokenKind::identifier, "b"}};
    CHECK(tokenize("/* c */ a+b") == sum);

    const auto str = tokenize(R"("s\"t")");
    REQUIRE(str.size() == 1);
    CHECK(str[0] == Token{TokenKind::string, "<str>"});
}

TEST_CASE("maximal munch on operators") {
    const auto t = tokenize("a<<=b->c>>d");
    REQUIRE(t.size() == 7);
    CHECK(t[1].text == "<<=");
    CHECK(t[3].text == "->");
    CHECK(t[5].text == ">>");
}

TEST_CASE("literals and comments") {
    const auto t = tokenize("c = 'x'; // tail\nf(0x1F, 1.5e3);");
    std::vector<std::string> texts;
    for (const auto &k : t) texts.push_back(k.text);
    CHECK(texts == std::vector<std::string>{"c", "=", "<chr>", ";", "f", "(", "<num>", ",", "<num>", ")", ";"});
    const auto with_comments = lex("a // note\n");
    REQUIRE(with_comments.size() == 2);
    CHECK(with_comments[1].kind == TokenKind::comment);
}

TEST_CASE("lexing never fails on arbitrary bytes") {
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 500; ++trial) {
        std::string bytes(gen() % 200, '\0');
        for (auto &c : bytes) c = static_cast<char>(gen() & 0xFF);
        CHECK_NOTHROW((void)lex(bytes));
    }
    CHECK_NOTHROW((void)lex("\"unterminated"));
    CHECK_NOTHROW((void)lex("/* open"));
}

TEST_CASE("ngram hash is FNV-1a over 0x1F-joined lexemes") {
    const auto one = toks({"memcpy"});
    CHECK(ngram_hash(one) == fnv1a("memcpy"));
    const auto two = toks({"memcpy", "("});
    CHECK(ngram_hash(two) == fnv1a(std::string("memcpy") + '\x1F' + "("));
    // Published FNV-1a 64 test vectors.
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("featurize examples") {
    FeatureConfig unigrams{1U << 10, {1}};
    const auto empty = featurize({}, unigrams);
    CHECK(empty.entries.empty());
    CHECK(empty.norm == 0.0);

    const auto single = featurize(toks({"a"}), unigrams);
    REQUIRE(single.entries.size() == 1);
    CHECK(single.entries[0].value == 1.0);
    CHECK(single.norm == 1.0);

    const auto aba = featurize(toks({"a", "b", "a"}), unigrams);
    const auto da = static_cast<std::uint32_t>(fnv1a("a") % unigrams.dims);
    const auto db = static_cast<std::uint32_t>(fnv1a("b") % unigrams.dims);
    CHECK(aba.count(da) == 2.0);
    CHECK(aba.count(db) == 1.0);
    CHECK(aba.norm == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
}

TEST_CASE("featurize against a map-based oracle") {
    std::mt19937_64 gen(2);
    const std::vector<std::string> vocab = {"if", "(", ")", "x", "y", "memcpy", ";", "{", "}", "<num>"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Token> tokens;
        const std::size_t n = gen() % 30;
        for (std::size_t i = 0; i < n; ++i) tokens.push_back({TokenKind::identifier, vocab[gen() % vocab.size()]});
        const FeatureConfig cfg{1U << (4 + gen() % 8), {1, 2, 3}};
        std::map<std::uint32_t, double> want;
        for (unsigned order : cfg.ngram_orders) {
            for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
                std::string joined;
                for (std::size_t j = 0; j < order; ++j) {
                    if (j) joined += '\x1F';
                    joined += tokens[i + j].text;
                }
                want[static_cast<std::uint32_t>(fnv1a(joined) % cfg.dims)] += 1.0;
            }
        }
        const auto got = featurize(tokens, cfg);
        REQUIRE(got.entries.size() == want.size());
        double sq = 0.0;
        std::size_t at = 0;
        for (const auto &[dim, count] : want) {
            CHECK(got.entries[at].index == dim);
            CHECK(got.entries[at].value == count);
            sq += count * count;
            ++at;
        }
        CHECK(got.norm == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
    }
}

TEST_CASE("collisions add counts") {
    // With two dimensions every n-gram lands on 0 or 1.
    const auto v = featurize(toks({"a", "b", "c", "d", "e"}), {2, {1}});
    double total = 0.0;
    for (const auto &e : v.entries) total += e.value;
    CHECK(total == 5.0);
}

TEST_CASE("featurize is deterministic and ignores comments") {
    const FeatureConfig cfg;
    const std::string code = "int f(char *s) { strcpy(buf, s); return 0; }";
    const auto a = featurize(tokenize(code), cfg);
    CHECK(featurize(tokenize(code), cfg) == a);
    CHECK(featurize(tokenize(code + " /* trailing note */"), cfg) == a);
    CHECK(featurize(tokenize(code + " // line note"), cfg) == a);
}

TEST_CASE("dims must be a power of two") {
    CHECK(thrown([] { (void)featurize(toks({"a"}), {1000, {1}}); }) == ErrorCode::ConfigError);
}

TEST_CASE("folding commutes with hashing") {
    const auto tokens = tokenize("while (p != NULL) { p = p->next; count++; } memcpy(dst, src, n);");
    const auto wide = featurize(tokens, {1U << 16, {1, 2}});
    for (std::uint32_t d : {2U, 64U, 4096U}) CHECK(fold(wide, d) == featurize(tokens, {d, {1, 2}}));
}
