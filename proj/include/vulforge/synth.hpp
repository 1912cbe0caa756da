#pragma once

#include "vulforge/core.hpp"
#include "vulforge/ingest.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vulforge {

// Synthetic corpora for tests, demos and the `synth` subcommand. Functions are
// small C-like bodies: filler statements plus label-bearing calls.

struct SynthOptions {
    /// Probability that a sample's indicative call agrees with its label.
    double signal = 0.8;
    /// Filler statements per function.
    std::size_t filler = 8;
};

/// Binary corpus with `negatives` label-0 and `positives` label-1 samples in
/// shuffled order.
Dataset synth_binary(const std::string &name, std::size_t negatives, std::size_t positives, std::uint64_t seed, const SynthOptions &options = {});

/// Per-CWE vulnerable counts for a BigVul-like corpus: a 1/rank profile over
/// `cwes` classes, each at least `min_count`, summing to `total`.
std::vector<std::size_t> cwe_profile(std::size_t total, std::size_t cwes, std::size_t min_count = 12);

/// Multi-class corpus: `vulnerable[c]` functions for each of the CWE classes,
/// each paired (via pair_id) with a fixed non-vulnerable version.
Dataset synth_paired(const std::string &name, const std::vector<std::size_t> &vulnerable, std::uint64_t seed, const SynthOptions &options = {});

/// Corpora with the class balance of the three benchmark datasets. `scale`
/// multiplies every class count (at least 10 per class).
Dataset devign_like(std::uint64_t seed, double scale = 1.0);
Dataset reveal_like(std::uint64_t seed, double scale = 1.0);
Dataset bigvul_like(std::uint64_t seed, double scale = 1.0);

/// Binary corpus where a function is vulnerable iff it holds more risky calls
/// than guarded ones; the two kinds share arguments and differ only in the
/// callee. Linearly separable on unigram counts.
Dataset separable_corpus(std::size_t n, std::uint64_t seed);

/// A corpus together with synthetic expert predictions over all of its ids.
struct ExpertCorpus {
    Dataset dataset;
    std::vector<PredictionSet> experts;
};

/// Every function holds exactly one sentinel call tau_j; expert j is right
/// exactly on the functions holding tau_j. Right and wrong answers carry the
/// same confidence range, so only the code reveals the right expert.
ExpertCorpus planted_routing_corpus(std::size_t n, std::size_t experts, std::uint64_t seed);

/// The sentinel identifier of expert j.
std::string sentinel_token(std::size_t expert);

/// Two experts; a hidden bit decides which one is right. The right expert is
/// confident (0.85-0.95), the wrong one hesitant (0.55-0.65).
ExpertCorpus complementary_corpus(std::size_t n, std::uint64_t seed);

}  // namespace vulforge
