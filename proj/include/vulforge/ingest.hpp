#pragma once

#include "vulforge/core.hpp"
#include "vulforge/io.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vulforge {

struct Sample {
    std::string id;
    std::string code;
    Label label = 0;
    std::optional<std::string> cwe;
    /// Links a vulnerable function to its fixed (non-vulnerable) version.
    std::optional<std::string> pair_id;
};

enum class Schema { binary, multiclass };

std::string_view to_string(Schema schema) noexcept;
Schema parse_schema(std::string_view text);

/// Labeled corpus of code functions. Ids are unique and every label is below
/// classes(). Class names are "non-vulnerable"/"vulnerable" for binary
/// corpora and "non-vulnerable" followed by the CWE ids for multi-class ones.
class Dataset {
  public:
    Dataset() = default;
    /// Throws DuplicateId, UnknownLabel or ConfigError.
    Dataset(std::string name, Schema schema, std::vector<std::string> class_names, std::vector<Sample> samples);

    [[nodiscard]] const std::string &name() const noexcept { return name_; }
    [[nodiscard]] Schema schema() const noexcept { return schema_; }
    [[nodiscard]] std::size_t classes() const noexcept { return class_names_.size(); }
    [[nodiscard]] const std::vector<std::string> &class_names() const noexcept { return class_names_; }
    [[nodiscard]] const std::vector<Sample> &samples() const noexcept { return samples_; }
    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples_.empty(); }

    [[nodiscard]] std::optional<std::size_t> position(const std::string &id) const;
    /// Throws UnknownSample.
    [[nodiscard]] const Sample &sample(const std::string &id) const;
    [[nodiscard]] Label label(const std::string &id) const { return sample(id).label; }
    [[nodiscard]] std::vector<std::size_t> class_counts() const;

    [[nodiscard]] const std::vector<std::string> &warnings() const noexcept { return warnings_; }
    void add_warning(std::string message) { warnings_.push_back(std::move(message)); }

  private:
    std::string name_;
    Schema schema_ = Schema::binary;
    std::vector<std::string> class_names_;
    std::vector<Sample> samples_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> warnings_;
};

/// Parses `dataset.jsonl` records: {"id", "code", "label", "cwe", "pair_id"}.
/// Binary corpora take label 0/1. Multi-class corpora treat label >= 1 as
/// "vulnerable" and derive the class from the record's CWE (classes are the
/// sorted distinct CWEs, numbered from 1).
Dataset parse_dataset(std::istream &in, Schema schema, std::string name);
Dataset load_dataset(const std::filesystem::path &path, Schema schema);
std::string dataset_to_jsonl(const Dataset &dataset);

struct SplitIndices {
    std::uint64_t seed = 0;
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;

    [[nodiscard]] const std::vector<std::string> &ids(Split split) const noexcept;

    friend bool operator==(const SplitIndices &, const SplitIndices &) = default;
};

/// Stratified 8:1:1 partition. Every per-class cell count is the floor or
/// ceiling of its exact share and each split total is within one sample of its
/// exact share (controlled rounding). Within a class, membership is decided by
/// a seeded shuffle; output lists follow dataset order. Throws ClassTooSmall
/// for any represented class with fewer than 10 samples.
SplitIndices stratified_split(const Dataset &dataset, std::uint64_t seed);

json splits_to_json(const SplitIndices &split);
SplitIndices splits_from_json(const json &doc);

struct BootstrapPlan {
    std::uint64_t seed = 0;
    /// One draw per member; each has |train| ids with the train split's exact
    /// per-class counts, grouped by class.
    std::vector<std::vector<std::string>> draws;

    [[nodiscard]] std::size_t member_count() const noexcept { return draws.size(); }
};

BootstrapPlan bootstrap(const Dataset &dataset, const SplitIndices &split, std::size_t members, std::uint64_t seed);

/// Binary corpus of every sample of `cwe` plus the fixed version paired with
/// each. Throws UnknownCwe or UnpairedSample.
Dataset cwe_subset(const Dataset &dataset, std::string_view cwe);

/// The n CWE classes with the most vulnerable samples (count desc, name asc).
std::vector<std::string> top_cwes(const Dataset &dataset, std::size_t n);

}  // namespace vulforge
