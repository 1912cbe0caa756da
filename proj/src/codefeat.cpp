#include "vulforge/codefeat.hpp"

#include "vulforge/error.hpp"
#include "vulforge/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace vulforge {

std::string_view to_string(TokenKind kind) noexcept {
    switch (kind) {
        case TokenKind::keyword: return "keyword";
        case TokenKind::identifier: return "identifier";
        case TokenKind::number: return "number";
        case TokenKind::string: return "string";
        case TokenKind::character: return "char";
        case TokenKind::op: return "operator";
        case TokenKind::punct: return "punct";
        case TokenKind::comment: return "comment";
    }
    return "punct";
}

namespace {

const std::unordered_set<std::string_view> &keywords() {
    static const std::unordered_set<std::string_view> table = {
        "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else", "enum", "extern",
        "float", "for", "goto", "if", "inline", "int", "long", "register", "restrict", "return", "short", "signed",
        "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void", "volatile", "while",
        "_Bool", "_Complex", "_Imaginary", "_Alignas", "_Alignof", "_Atomic", "_Noreturn", "_Static_assert",
        "_Thread_local", "bool", "true", "false", "class", "namespace", "template", "typename", "this", "new",
        "delete", "public", "private", "protected", "virtual", "operator", "friend", "using", "try", "catch",
        "throw", "nullptr", "constexpr", "static_cast", "reinterpret_cast", "const_cast", "dynamic_cast",
        "explicit", "mutable", "noexcept", "override", "final", "decltype", "NULL",
    };
    return table;
}

// Longest operators first so the scan below is maximal munch.
constexpr std::array<std::string_view, 26> kOperators = {
    "<<=", ">>=", "...", "->*",
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "^=", "|=", "::", ".*", "##",
};
constexpr std::string_view kSingleOperators = "+-*/%=<>!~&|^?:.";

bool is_ident_start(unsigned char c) { return std::isalpha(c) || c == '_'; }
bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_'; }
bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

/// End of a quoted literal starting at `open` (the quote). Stops after the
/// closing quote, before a raw newline, or at end of input.
std::size_t quoted_end(std::string_view code, std::size_t open) {
    const char quote = code[open];
    std::size_t i = open + 1;
    while (i < code.size()) {
        const char c = code[i];
        if (c == '\\') {
            i += 2;
            continue;
        }
        if (c == quote) return i + 1;
        if (c == '\n') return i;
        ++i;
    }
    return code.size();
}

bool is_literal_prefix(std::string_view word) { return word == "L" || word == "u" || word == "U" || word == "u8"; }

}  // namespace

std::vector<Token> lex(std::string_view code) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    const std::size_t n = code.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(code[i]);
        if (is_space(c)) {
            ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && code[i + 1] == '/') {
            std::size_t end = code.find('\n', i);
            if (end == std::string_view::npos) end = n;
            tokens.push_back({TokenKind::comment, std::string(code.substr(i, end - i))});
            i = end;
            continue;
        }
        if (c == '/' && i + 1 < n && code[i + 1] == '*') {
            std::size_t end = code.find("*/", i + 2);
            end = end == std::string_view::npos ? n : end + 2;
            tokens.push_back({TokenKind::comment, std::string(code.substr(i, end - i))});
            i = end;
            continue;
        }
        if (is_ident_start(c)) {
            std::size_t j = i + 1;
            while (j < n && is_ident_char(static_cast<unsigned char>(code[j]))) ++j;
            const std::string_view word = code.substr(i, j - i);
            if (j < n && (code[j] == '"' || code[j] == '\'') && is_literal_prefix(word)) {
                const bool str = code[j] == '"';
                tokens.push_back({str ? TokenKind::string : TokenKind::character, str ? "<str>" : "<chr>"});
                i = quoted_end(code, j);
                continue;
            }
            tokens.push_back({keywords().contains(word) ? TokenKind::keyword : TokenKind::identifier, std::string(word)});
            i = j;
            continue;
        }
        if (std::isdigit(c) || (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(code[i + 1])))) {
            std::size_t j = i + 1;
            while (j < n) {
                const auto d = static_cast<unsigned char>(code[j]);
                if (is_ident_char(d) || d == '.') {
                    ++j;
                } else if ((d == '+' || d == '-') && std::strchr("eEpP", code[j - 1]) != nullptr) {
                    ++j;
                } else {
                    break;
                }
            }
            tokens.push_back({TokenKind::number, "<num>"});
            i = j;
            continue;
        }
        if (c == '"') {
            tokens.push_back({TokenKind::string, "<str>"});
            i = quoted_end(code, i);
            continue;
        }
        if (c == '\'') {
            tokens.push_back({TokenKind::character, "<chr>"});
            i = quoted_end(code, i);
            continue;
        }
        bool matched = false;
        for (const auto op : kOperators) {
            if (code.substr(i, op.size()) == op) {
                tokens.push_back({op == "##" ? TokenKind::punct : TokenKind::op, std::string(op)});
                i += op.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (kSingleOperators.find(static_cast<char>(c)) != std::string_view::npos) {
            tokens.push_back({TokenKind::op, std::string(1, static_cast<char>(c))});
            ++i;
            continue;
        }
        // Punctuation and unknown bytes; keep a multi-byte UTF-8 sequence whole.
        std::size_t j = i + 1;
        if (c >= 0xC0) {
            while (j < n && (static_cast<unsigned char>(code[j]) & 0xC0) == 0x80) ++j;
        }
        tokens.push_back({TokenKind::punct, std::string(code.substr(i, j - i))});
        i = j;
    }
    return tokens;
}

std::vector<Token> tokenize(std::string_view code) {
    auto tokens = lex(code);
    std::erase_if(tokens, [](const Token &t) { return t.kind == TokenKind::comment; });
    return tokens;
}

double FeatureVector::count(std::uint32_t dim) const {
    const auto it = std::lower_bound(entries.begin(), entries.end(), dim, [](const SparseEntry &e, std::uint32_t d) { return e.index < d; });
    return it != entries.end() && it->index == dim ? it->value : 0.0;
}

std::uint64_t ngram_hash(std::span<const Token> gram) {
    std::uint64_t hash = fnv1a64("");
    bool first = true;
    for (const auto &token : gram) {
        if (!first) {
            hash ^= 0x1FU;
            hash *= 1099511628211ULL;
        }
        first = false;
        for (const char ch : token.text) {
            hash ^= static_cast<std::uint8_t>(ch);
            hash *= 1099511628211ULL;
        }
    }
    return hash;
}

namespace {

bool is_power_of_two(std::uint32_t x) { return x != 0 && (x & (x - 1)) == 0; }

FeatureVector finish(std::uint32_t dims, const std::unordered_map<std::uint32_t, double> &counts) {
    FeatureVector out;
    out.dims = dims;
    out.entries.reserve(counts.size());
    for (const auto &[dim, value] : counts) {
        out.entries.push_back({dim, value});
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const SparseEntry &a, const SparseEntry &b) { return a.index < b.index; });
    double sq = 0.0;
    for (const auto &e : out.entries) sq += e.value * e.value;
    out.norm = std::sqrt(sq);
    return out;
}

}  // namespace

FeatureVector featurize(std::span<const Token> tokens, const FeatureConfig &config) {
    if (!is_power_of_two(config.dims)) {
        throw Error(ErrorCode::ConfigError, "feature dims " + std::to_string(config.dims) + " is not a power of two");
    }
    const std::uint32_t mask = config.dims - 1;
    std::unordered_map<std::uint32_t, double> counts;
    for (const unsigned order : config.ngram_orders) {
        if (order == 0) {
            throw Error(ErrorCode::ConfigError, "n-gram order must be >= 1");
        }
        for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
            const auto dim = static_cast<std::uint32_t>(ngram_hash(tokens.subspan(i, order)) & mask);
            counts[dim] += 1.0;
        }
    }
    return finish(config.dims, counts);
}

FeatureVector fold(const FeatureVector &features, std::uint32_t dims) {
    if (!is_power_of_two(dims) || dims > features.dims) {
        throw Error(ErrorCode::ConfigError, "cannot fold width " + std::to_string(features.dims) + " into " + std::to_string(dims));
    }
    std::unordered_map<std::uint32_t, double> counts;
    for (const auto &e : features.entries) {
        counts[e.index & (dims - 1)] += e.value;
    }
    return finish(dims, counts);
}

}  // namespace vulforge
