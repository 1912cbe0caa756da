#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace vulforge {

using json = nlohmann::json;

/// 64-bit FNV-1a over raw bytes.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t hash = 14695981039346656037ULL;
    for (const char ch : bytes) {
        hash ^= static_cast<std::uint8_t>(ch);
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::string hex64(std::uint64_t value);

/// Writes through a sibling temp file and renames it into place, creating
/// parent directories as needed. Throws IoError.
void atomic_write(const std::filesystem::path &path, std::string_view content);

/// Throws IoError when the file cannot be read.
std::string read_text(const std::filesystem::path &path);

/// Non-blank lines paired with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> read_lines(const std::filesystem::path &path);

/// Deterministic serialization used for every artifact: sorted keys, two-space
/// indent, trailing newline.
std::string dump_json(const json &value);

}  // namespace vulforge
