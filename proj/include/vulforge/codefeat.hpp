#pragma once

#include "vulforge/sparse.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vulforge {

enum class TokenKind { keyword, identifier, number, string, character, op, punct, comment };

std::string_view to_string(TokenKind kind) noexcept;

struct Token {
    TokenKind kind;
    /// Normalized lexeme: literals collapse to "<num>", "<str>", "<chr>".
    std::string text;

    friend bool operator==(const Token &, const Token &) = default;
};

/// Maximal-munch lexer for C-like source, comments included. Total: any byte
/// sequence lexes; bytes that start no token become punct tokens (a whole UTF-8
/// sequence at a time).
std::vector<Token> lex(std::string_view code);

/// lex() with comment tokens removed.
std::vector<Token> tokenize(std::string_view code);

struct FeatureConfig {
    /// Hash width; must be a power of two.
    std::uint32_t dims = 1U << 18;
    std::vector<unsigned> ngram_orders = {1, 2};
};

/// Sparse hashed n-gram counts. Entries are sorted by dimension, all counts are
/// positive, and norm caches the L2 length.
struct FeatureVector {
    std::uint32_t dims = 0;
    std::vector<SparseEntry> entries;
    double norm = 0.0;

    [[nodiscard]] double count(std::uint32_t dim) const;

    friend bool operator==(const FeatureVector &, const FeatureVector &) = default;
};

/// Hash of one n-gram: FNV-1a 64 over the lexemes joined by 0x1F.
std::uint64_t ngram_hash(std::span<const Token> gram);

/// Each n-gram of each configured order adds 1 at ngram_hash mod dims. Counts
/// of colliding n-grams add up. Throws ConfigError if dims is not a power of two.
FeatureVector featurize(std::span<const Token> tokens, const FeatureConfig &config);

/// Same vector as featurizing with a narrower power-of-two width; folding
/// commutes with the mod-power-of-two hashing.
FeatureVector fold(const FeatureVector &features, std::uint32_t dims);

}  // namespace vulforge
