#include "vulforge/synth.hpp"

#include "vulforge/error.hpp"
#include "vulforge/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace vulforge {

namespace {

constexpr std::array<const char *, 14> kFiller = {
    "int i = 0;",
    "size_t total = 0;",
    "for (i = 0; i < len; i++) { total += src[i]; }",
    "if (src == NULL) { return -1; }",
    "log_debug(\"step\", i);",
    "count = count + 1;",
    "while (node != NULL) { node = node->next; }",
    "flags |= FLAG_READY;",
    "ctx->state = STATE_IDLE;",
    "result = compute_hash(src, len);",
    "switch (mode) { case 1: mode = 2; break; default: break; }",
    "unlock(&ctx->lock);",
    "value = table[index % TABLE_SIZE];",
    "ret = check_header(hdr);",
};

constexpr std::array<const char *, 4> kRisky = {
    "strcpy(buf, src);",
    "gets(line);",
    "sprintf(buf, \"%s\", src);",
    "memcpy(dst, src, len);",
};

constexpr std::array<const char *, 4> kGuarded = {
    "strncpy(buf, src, sizeof(buf) - 1);",
    "fgets(line, sizeof(line), stdin);",
    "snprintf(buf, sizeof(buf), \"%s\", src);",
    "if (len < sizeof(dst)) { memcpy(dst, src, len); }",
};

// Callee names only; the separable corpus gives both pools the same arguments.
constexpr std::array<const char *, 4> kRiskyCalls = {"strcpy", "sprintf", "gets", "memcpy"};
constexpr std::array<const char *, 4> kGuardedCalls = {"strlcpy", "snprintf", "fgets", "memcpy_s"};

// 43 CWE ids in the order of a typical frequency ranking.
constexpr std::array<int, 43> kCweIds = {
    119, 20, 399, 125, 264, 200, 189, 416, 476, 362, 190, 787, 284, 254, 415,
    772, 17, 400, 310, 703, 835, 22, 401, 134, 59, 74, 287, 674, 369, 352,
    617, 682, 732, 79, 834, 19, 843, 311, 611, 269, 120, 404, 909,
};

template <std::size_t N>
const char *pick(Rng &rng, const std::array<const char *, N> &pool) {
    return pool[rng.uniform_index(N)];
}

std::string render(std::size_t serial, const std::vector<std::string> &statements) {
    std::string code = "int fn_" + std::to_string(serial) + "(char *src, size_t len) {\n    char buf[64];\n";
    for (const auto &s : statements) {
        code += "    ";
        code += s;
        code += '\n';
    }
    code += "    return 0;\n}\n";
    return code;
}

/// Filler plus `extra` statements inserted at random positions.
std::vector<std::string> body(Rng &rng, std::size_t filler, const std::vector<std::string> &extra) {
    std::vector<std::string> statements;
    for (std::size_t i = 0; i < filler; ++i) statements.emplace_back(pick(rng, kFiller));
    for (const auto &e : extra) {
        const auto pos = rng.uniform_index(statements.size() + 1);
        statements.insert(statements.begin() + static_cast<std::ptrdiff_t>(pos), e);
    }
    return statements;
}

std::size_t scaled(std::size_t count, double scale) {
    return std::max<std::size_t>(10, static_cast<std::size_t>(std::llround(static_cast<double>(count) * scale)));
}

std::string cwe_name(std::size_t c) { return "CWE-" + std::to_string(kCweIds.at(c)); }

/// Probability row that puts `confidence` on `label` (binary).
ProbVector binary_row(Label label, double confidence) {
    return label == 1 ? ProbVector::from_normalized({1.0 - confidence, confidence}) : ProbVector::from_normalized({confidence, 1.0 - confidence});
}

}  // namespace

Dataset synth_binary(const std::string &name, std::size_t negatives, std::size_t positives, std::uint64_t seed, const SynthOptions &options) {
    Rng rng(seed);
    std::vector<Label> labels(negatives, 0);
    labels.insert(labels.end(), positives, 1);
    rng.shuffle(std::span<Label>(labels));
    std::vector<Sample> samples;
    samples.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool agrees = rng.bernoulli(options.signal);
        const bool risky = (labels[i] == 1) == agrees;
        std::vector<std::string> extra = {risky ? pick(rng, kRisky) : pick(rng, kGuarded)};
        Sample s;
        s.id = name + "_" + std::to_string(i);
        s.code = render(i, body(rng, options.filler, extra));
        s.label = labels[i];
        samples.push_back(std::move(s));
    }
    return Dataset(name, Schema::binary, {"non-vulnerable", "vulnerable"}, std::move(samples));
}

std::vector<std::size_t> cwe_profile(std::size_t total, std::size_t cwes, std::size_t min_count) {
    if (cwes == 0 || cwes > kCweIds.size() || total < cwes * min_count) {
        throw Error(ErrorCode::ConfigError, "cannot spread " + std::to_string(total) + " samples over " + std::to_string(cwes) + " CWEs");
    }
    double harmonic = 0.0;
    for (std::size_t c = 0; c < cwes; ++c) harmonic += 1.0 / static_cast<double>(c + 1);
    std::vector<std::size_t> counts(cwes);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < cwes; ++c) {
        const double share = static_cast<double>(total) / (harmonic * static_cast<double>(c + 1));
        counts[c] = std::max(min_count, static_cast<std::size_t>(share));
        assigned += counts[c];
    }
    // Settle the rounding difference on the largest classes.
    for (std::size_t c = 0; assigned != total; c = (c + 1) % cwes) {
        if (assigned < total) {
            ++counts[c];
            ++assigned;
        } else if (counts[c] > min_count) {
            --counts[c];
            --assigned;
        }
    }
    return counts;
}

Dataset synth_paired(const std::string &name, const std::vector<std::size_t> &vulnerable, std::uint64_t seed, const SynthOptions &options) {
    if (vulnerable.empty() || vulnerable.size() > kCweIds.size()) {
        throw Error(ErrorCode::ConfigError, "need between 1 and " + std::to_string(kCweIds.size()) + " CWE classes");
    }
    // Class numbers follow the sorted CWE names, as ingest assigns them.
    std::vector<std::string> names;
    for (std::size_t c = 0; c < vulnerable.size(); ++c) names.push_back(cwe_name(c));
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());

    Rng rng(seed);
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < vulnerable.size(); ++c) order.insert(order.end(), vulnerable[c], c);
    rng.shuffle(std::span<std::size_t>(order));

    std::vector<Sample> samples;
    samples.reserve(order.size() * 2);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t c = order[i];
        const std::size_t shown = rng.bernoulli(options.signal) ? c : rng.uniform_index(vulnerable.size());
        const std::string sink = "sink_" + std::to_string(kCweIds[shown]) + "(buf, len);";
        const auto filler = body(rng, options.filler, {});
        const std::string pair = name + "_pair_" + std::to_string(i);

        auto vuln_body = filler;
        vuln_body.insert(vuln_body.begin() + static_cast<std::ptrdiff_t>(rng.uniform_index(vuln_body.size() + 1)), sink);
        vuln_body.insert(vuln_body.begin() + static_cast<std::ptrdiff_t>(rng.uniform_index(vuln_body.size() + 1)), pick(rng, kRisky));
        auto fixed_body = filler;
        fixed_body.insert(fixed_body.begin() + static_cast<std::ptrdiff_t>(rng.uniform_index(fixed_body.size() + 1)), pick(rng, kGuarded));

        Sample v;
        v.id = name + "_v" + std::to_string(i);
        v.code = render(2 * i, vuln_body);
        v.label = static_cast<Label>(1 + (std::lower_bound(sorted.begin(), sorted.end(), names[c]) - sorted.begin()));
        v.cwe = names[c];
        v.pair_id = pair;
        Sample f;
        f.id = name + "_f" + std::to_string(i);
        f.code = render(2 * i + 1, fixed_body);
        f.label = 0;
        f.pair_id = pair;
        samples.push_back(std::move(v));
        samples.push_back(std::move(f));
    }
    std::vector<std::string> class_names = {"non-vulnerable"};
    class_names.insert(class_names.end(), sorted.begin(), sorted.end());
    return Dataset(name, Schema::multiclass, std::move(class_names), std::move(samples));
}

Dataset devign_like(std::uint64_t seed, double scale) {
    return synth_binary("devign", scaled(14858, scale), scaled(12460, scale), seed);
}

Dataset reveal_like(std::uint64_t seed, double scale) {
    return synth_binary("reveal", scaled(20494, scale), scaled(2240, scale), seed);
}

Dataset bigvul_like(std::uint64_t seed, double scale) {
    const std::size_t total = std::max<std::size_t>(43 * 12, static_cast<std::size_t>(std::llround(8636.0 * scale)));
    return synth_paired("bigvul", cwe_profile(total, 43), seed);
}

Dataset separable_corpus(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Sample> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t risky = 0;
        std::size_t guarded = 0;
        do {
            risky = rng.uniform_index(4);
            guarded = rng.uniform_index(4);
        } while (risky == guarded);
        std::vector<std::string> extra;
        for (std::size_t r = 0; r < risky; ++r) extra.push_back(std::string(pick(rng, kRiskyCalls)) + "(dst, src, len);");
        for (std::size_t g = 0; g < guarded; ++g) extra.push_back(std::string(pick(rng, kGuardedCalls)) + "(dst, src, len);");
        Sample s;
        s.id = "sep_" + std::to_string(i);
        s.code = render(i, body(rng, 6, extra));
        s.label = risky > guarded ? 1 : 0;
        samples.push_back(std::move(s));
    }
    return Dataset("separable", Schema::binary, {"non-vulnerable", "vulnerable"}, std::move(samples));
}

std::string sentinel_token(std::size_t expert) { return "tau_route_" + std::to_string(expert); }

ExpertCorpus planted_routing_corpus(std::size_t n, std::size_t experts, std::uint64_t seed) {
    if (experts < 2) {
        throw Error(ErrorCode::ConfigError, "need at least two experts");
    }
    Rng rng(seed);
    std::vector<Sample> samples;
    std::vector<std::size_t> owner(n);
    for (std::size_t i = 0; i < n; ++i) {
        owner[i] = rng.uniform_index(experts);
        Sample s;
        s.id = "route_" + std::to_string(i);
        s.label = rng.bernoulli(0.5) ? 1 : 0;
        s.code = render(i, body(rng, 8, {sentinel_token(owner[i]) + "(ctx);", pick(rng, rng.bernoulli(0.5) ? kRisky : kGuarded)}));
        samples.push_back(std::move(s));
    }
    ExpertCorpus corpus;
    corpus.dataset = Dataset("routing", Schema::binary, {"non-vulnerable", "vulnerable"}, std::move(samples));
    for (std::size_t j = 0; j < experts; ++j) {
        PredictionSet set("expert_" + std::to_string(j), Split::test);
        for (std::size_t i = 0; i < n; ++i) {
            const auto &s = corpus.dataset.samples()[i];
            const Label said = owner[i] == j ? s.label : 1 - s.label;
            set.add(s.id, binary_row(said, rng.uniform(0.6, 0.9)));
        }
        corpus.experts.push_back(std::move(set));
    }
    return corpus;
}

ExpertCorpus complementary_corpus(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Sample> samples;
    std::vector<bool> bit(n);
    for (std::size_t i = 0; i < n; ++i) {
        bit[i] = rng.bernoulli(0.5);
        Sample s;
        s.id = "comp_" + std::to_string(i);
        s.label = rng.bernoulli(0.5) ? 1 : 0;
        s.code = render(i, body(rng, 4, {}));
        samples.push_back(std::move(s));
    }
    ExpertCorpus corpus;
    corpus.dataset = Dataset("complementary", Schema::binary, {"non-vulnerable", "vulnerable"}, std::move(samples));
    for (std::size_t j = 0; j < 2; ++j) {
        PredictionSet set(j == 0 ? "expert_a" : "expert_b", Split::test);
        for (std::size_t i = 0; i < n; ++i) {
            const auto &s = corpus.dataset.samples()[i];
            const bool right = bit[i] == (j == 0);
            const Label said = right ? s.label : 1 - s.label;
            set.add(s.id, binary_row(said, right ? rng.uniform(0.85, 0.95) : rng.uniform(0.55, 0.65)));
        }
        corpus.experts.push_back(std::move(set));
    }
    return corpus;
}

}  // namespace vulforge
