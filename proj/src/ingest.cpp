#include "vulforge/ingest.hpp"

#include "vulforge/error.hpp"
#include "vulforge/random.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

namespace vulforge {

std::string_view to_string(Schema schema) noexcept { return schema == Schema::binary ? "binary" : "multiclass"; }

Schema parse_schema(std::string_view text) {
    if (text == "binary") return Schema::binary;
    if (text == "multiclass") return Schema::multiclass;
    throw Error(ErrorCode::ConfigError, "unknown schema '" + std::string(text) + "'");
}

Dataset::Dataset(std::string name, Schema schema, std::vector<std::string> class_names, std::vector<Sample> samples) :
    name_(std::move(name)),
    schema_(schema),
    class_names_(std::move(class_names)),
    samples_(std::move(samples)) {
    if (class_names_.size() < 2 && !samples_.empty()) {
        throw Error(ErrorCode::ConfigError, "a dataset needs at least two classes");
    }
    index_.reserve(samples_.size());
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const Sample &s = samples_[i];
        if (s.id.empty()) {
            throw Error(ErrorCode::MalformedRecord, "empty sample id at position " + std::to_string(i));
        }
        if (s.label >= class_names_.size()) {
            throw Error(ErrorCode::UnknownLabel, "sample '" + s.id + "' has label " + std::to_string(s.label));
        }
        if (!index_.emplace(s.id, i).second) {
            throw Error(ErrorCode::DuplicateId, "sample id '" + s.id + "'");
        }
    }
}

std::optional<std::size_t> Dataset::position(const std::string &id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

const Sample &Dataset::sample(const std::string &id) const {
    const auto pos = position(id);
    if (!pos) {
        throw Error(ErrorCode::UnknownSample, "sample '" + id + "' not in dataset " + name_);
    }
    return samples_[*pos];
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(classes(), 0);
    for (const auto &s : samples_) {
        ++counts[s.label];
    }
    return counts;
}

namespace {

struct RawRecord {
    std::size_t line = 0;
    Sample sample;
    std::int64_t raw_label = 0;
};

std::optional<std::string> optional_string(const json &record, const char *key, std::size_t line) {
    const auto it = record.find(key);
    if (it == record.end() || it->is_null()) {
        return std::nullopt;
    }
    if (!it->is_string()) {
        throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": '" + key + "' must be a string or null");
    }
    return it->get<std::string>();
}

RawRecord parse_record(const std::string &text, std::size_t line) {
    json record;
    try {
        record = json::parse(text);
    } catch (const json::parse_error &e) {
        throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": " + e.what());
    }
    const auto fail = [line](const std::string &why) {
        return Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": " + why);
    };
    if (!record.is_object()) throw fail("record is not an object");
    if (!record.contains("id") || !record["id"].is_string()) throw fail("missing string 'id'");
    if (!record.contains("code") || !record["code"].is_string()) throw fail("missing string 'code'");
    if (!record.contains("label") || !record["label"].is_number_integer()) throw fail("missing integer 'label'");

    RawRecord out;
    out.line = line;
    out.sample.id = record["id"].get<std::string>();
    out.sample.code = record["code"].get<std::string>();
    out.raw_label = record["label"].get<std::int64_t>();
    out.sample.cwe = optional_string(record, "cwe", line);
    out.sample.pair_id = optional_string(record, "pair_id", line);
    if (out.sample.id.empty()) throw fail("empty 'id'");
    return out;
}

}  // namespace

Dataset parse_dataset(std::istream &in, Schema schema, std::string name) {
    std::vector<RawRecord> records;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.find_first_not_of(" \t") == std::string::npos) continue;
        records.push_back(parse_record(text, line));
    }

    std::vector<std::string> class_names = {"non-vulnerable"};
    std::map<std::string, Label> cwe_class;
    if (schema == Schema::binary) {
        class_names.emplace_back("vulnerable");
        for (auto &r : records) {
            if (r.raw_label != 0 && r.raw_label != 1) {
                throw Error(ErrorCode::UnknownLabel, "line " + std::to_string(r.line) + ": binary label " + std::to_string(r.raw_label));
            }
            r.sample.label = static_cast<Label>(r.raw_label);
        }
    } else {
        std::set<std::string> cwes;
        for (const auto &r : records) {
            if (r.raw_label < 0) {
                throw Error(ErrorCode::UnknownLabel, "line " + std::to_string(r.line) + ": label " + std::to_string(r.raw_label));
            }
            if (r.raw_label >= 1) {
                if (!r.sample.cwe || r.sample.cwe->empty()) {
                    throw Error(ErrorCode::UnknownLabel, "line " + std::to_string(r.line) + ": vulnerable record without a CWE");
                }
                cwes.insert(*r.sample.cwe);
            }
        }
        for (const auto &cwe : cwes) {
            cwe_class.emplace(cwe, static_cast<Label>(class_names.size()));
            class_names.push_back(cwe);
        }
        for (auto &r : records) {
            r.sample.label = r.raw_label == 0 ? 0U : cwe_class.at(*r.sample.cwe);
        }
    }

    std::vector<Sample> samples;
    samples.reserve(records.size());
    for (auto &r : records) {
        samples.push_back(std::move(r.sample));
    }
    if (samples.empty() && class_names.size() < 2) {
        class_names.emplace_back("vulnerable");
    }
    Dataset dataset(std::move(name), schema, std::move(class_names), std::move(samples));
    if (dataset.empty()) {
        dataset.add_warning("dataset is empty");
    }
    return dataset;
}

Dataset load_dataset(const std::filesystem::path &path, Schema schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    return parse_dataset(in, schema, path.stem().string());
}

std::string dataset_to_jsonl(const Dataset &dataset) {
    std::string out;
    for (const auto &s : dataset.samples()) {
        json record;
        record["id"] = s.id;
        record["code"] = s.code;
        record["label"] = s.label == 0 ? 0 : 1;
        record["cwe"] = s.cwe ? json(*s.cwe) : json(nullptr);
        record["pair_id"] = s.pair_id ? json(*s.pair_id) : json(nullptr);
        out += record.dump();
        out += '\n';
    }
    return out;
}

const std::vector<std::string> &SplitIndices::ids(Split split) const noexcept {
    switch (split) {
        case Split::train: return train;
        case Split::val: return val;
        case Split::test: return test;
    }
    return test;
}

namespace {

constexpr std::array<std::size_t, 3> kRatioTenths = {8, 1, 1};

/// Edmonds-Karp over a small dense capacity matrix.
std::size_t max_flow(std::vector<std::vector<std::int64_t>> &cap, std::size_t source, std::size_t sink) {
    const std::size_t n = cap.size();
    std::size_t total = 0;
    while (true) {
        std::vector<std::size_t> parent(n, n);
        parent[source] = source;
        std::queue<std::size_t> frontier;
        frontier.push(source);
        while (!frontier.empty() && parent[sink] == n) {
            const std::size_t u = frontier.front();
            frontier.pop();
            for (std::size_t v = 0; v < n; ++v) {
                if (parent[v] == n && cap[u][v] > 0) {
                    parent[v] = u;
                    frontier.push(v);
                }
            }
        }
        if (parent[sink] == n) {
            return total;
        }
        for (std::size_t v = sink; v != source; v = parent[v]) {
            --cap[parent[v]][v];
            ++cap[v][parent[v]];
        }
        ++total;
    }
}

/// Rounds the class x split table of exact shares n_c * ratio_j so that every
/// cell and every column total is a floor or ceiling of its exact value while
/// rows still sum to n_c.
std::vector<std::array<std::size_t, 3>> apportion(const std::vector<std::size_t> &counts) {
    const std::size_t classes = counts.size();
    std::vector<std::array<std::size_t, 3>> cells(classes);
    std::vector<std::array<bool, 3>> fractional(classes);
    std::vector<std::size_t> residual(classes);
    std::array<std::size_t, 3> column_floor_sum = {0, 0, 0};
    const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t assigned = 0;
        for (std::size_t j = 0; j < 3; ++j) {
            cells[c][j] = counts[c] * kRatioTenths[j] / 10;
            fractional[c][j] = (counts[c] * kRatioTenths[j]) % 10 != 0;
            assigned += cells[c][j];
            column_floor_sum[j] += cells[c][j];
        }
        residual[c] = counts[c] - assigned;
    }

    // Candidate column totals: floor/ceil of each exact column share, summing
    // to the grand total, nearest first.
    struct Candidate {
        std::array<std::size_t, 3> totals;
        std::size_t distance;
    };
    std::vector<Candidate> candidates;
    for (unsigned mask = 0; mask < 8; ++mask) {
        Candidate cand{};
        std::size_t sum = 0;
        bool ok = true;
        for (std::size_t j = 0; j < 3; ++j) {
            const std::size_t tenths = total * kRatioTenths[j];
            const bool up = (mask >> j) & 1U;
            if (up && tenths % 10 == 0) {
                ok = false;
                break;
            }
            cand.totals[j] = tenths / 10 + (up ? 1 : 0);
            const std::size_t scaled = cand.totals[j] * 10;
            cand.distance += scaled > tenths ? scaled - tenths : tenths - scaled;
            sum += cand.totals[j];
        }
        if (ok && sum == total) {
            candidates.push_back(cand);
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate &a, const Candidate &b) { return a.distance < b.distance; });

    const std::size_t residual_sum = std::accumulate(residual.begin(), residual.end(), std::size_t{0});
    for (const auto &cand : candidates) {
        bool feasible = true;
        std::array<std::size_t, 3> demand{};
        for (std::size_t j = 0; j < 3; ++j) {
            if (cand.totals[j] < column_floor_sum[j]) {
                feasible = false;
                break;
            }
            demand[j] = cand.totals[j] - column_floor_sum[j];
        }
        if (!feasible) continue;
        // nodes: 0 source, 1..classes, classes+1..classes+3 columns, classes+4 sink
        const std::size_t source = 0;
        const std::size_t sink = classes + 4;
        std::vector<std::vector<std::int64_t>> cap(classes + 5, std::vector<std::int64_t>(classes + 5, 0));
        for (std::size_t c = 0; c < classes; ++c) {
            cap[source][1 + c] = static_cast<std::int64_t>(residual[c]);
            for (std::size_t j = 0; j < 3; ++j) {
                if (fractional[c][j]) cap[1 + c][classes + 1 + j] = 1;
            }
        }
        for (std::size_t j = 0; j < 3; ++j) {
            cap[classes + 1 + j][sink] = static_cast<std::int64_t>(demand[j]);
        }
        const auto original = cap;
        if (max_flow(cap, source, sink) != residual_sum) continue;
        for (std::size_t c = 0; c < classes; ++c) {
            for (std::size_t j = 0; j < 3; ++j) {
                const std::size_t u = 1 + c;
                const std::size_t v = classes + 1 + j;
                if (original[u][v] == 1 && cap[u][v] == 0) {
                    ++cells[c][j];
                }
            }
        }
        return cells;
    }
    throw Error(ErrorCode::ConfigError, "no controlled rounding exists for the split table");
}

}  // namespace

SplitIndices stratified_split(const Dataset &dataset, std::uint64_t seed) {
    const std::size_t classes = dataset.classes();
    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        members[dataset.samples()[i].label].push_back(i);
    }
    bool any = false;
    for (std::size_t c = 0; c < classes; ++c) {
        if (members[c].empty()) continue;
        any = true;
        if (members[c].size() < 10) {
            throw Error(ErrorCode::ClassTooSmall, "class " + std::to_string(c) + " (" + dataset.class_names()[c] + ") has " + std::to_string(members[c].size()) + " samples; need >= 10");
        }
    }
    if (!any) {
        throw Error(ErrorCode::ClassTooSmall, "dataset " + dataset.name() + " has no samples");
    }

    std::vector<std::size_t> counts(classes);
    for (std::size_t c = 0; c < classes; ++c) counts[c] = members[c].size();
    const auto cells = apportion(counts);

    std::vector<std::uint8_t> assignment(dataset.size(), 0);
    for (std::size_t c = 0; c < classes; ++c) {
        Rng rng(derive_seed(seed, c));
        rng.shuffle(std::span<std::size_t>(members[c]));
        for (std::size_t k = 0; k < members[c].size(); ++k) {
            const std::uint8_t part = k < cells[c][0] ? 0 : (k < cells[c][0] + cells[c][1] ? 1 : 2);
            assignment[members[c][k]] = part;
        }
    }
    SplitIndices split;
    split.seed = seed;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto &id = dataset.samples()[i].id;
        switch (assignment[i]) {
            case 0: split.train.push_back(id); break;
            case 1: split.val.push_back(id); break;
            default: split.test.push_back(id); break;
        }
    }
    return split;
}

json splits_to_json(const SplitIndices &split) {
    json doc;
    doc["seed"] = split.seed;
    doc["train"] = split.train;
    doc["val"] = split.val;
    doc["test"] = split.test;
    return doc;
}

SplitIndices splits_from_json(const json &doc) {
    try {
        SplitIndices split;
        split.seed = doc.at("seed").get<std::uint64_t>();
        split.train = doc.at("train").get<std::vector<std::string>>();
        split.val = doc.at("val").get<std::vector<std::string>>();
        split.test = doc.at("test").get<std::vector<std::string>>();
        return split;
    } catch (const json::exception &e) {
        throw Error(ErrorCode::MalformedRecord, std::string("splits.json: ") + e.what());
    }
}

BootstrapPlan bootstrap(const Dataset &dataset, const SplitIndices &split, std::size_t members, std::uint64_t seed) {
    if (members == 0) {
        throw Error(ErrorCode::ConfigError, "bootstrap needs at least one member");
    }
    std::vector<std::vector<const std::string *>> by_class(dataset.classes());
    for (const auto &id : split.train) {
        by_class[dataset.label(id)].push_back(&id);
    }
    BootstrapPlan plan;
    plan.seed = seed;
    plan.draws.resize(members);
    for (std::size_t m = 0; m < members; ++m) {
        Rng rng(derive_seed(seed, m));
        auto &draw = plan.draws[m];
        draw.reserve(split.train.size());
        for (const auto &pool : by_class) {
            for (std::size_t k = 0; k < pool.size(); ++k) {
                draw.push_back(*pool[rng.uniform_index(pool.size())]);
            }
        }
    }
    return plan;
}

Dataset cwe_subset(const Dataset &dataset, std::string_view cwe) {
    const auto &names = dataset.class_names();
    const auto found = std::find(names.begin() + 1, names.end(), cwe);
    if (dataset.schema() != Schema::multiclass || found == names.end()) {
        throw Error(ErrorCode::UnknownCwe, std::string(cwe));
    }
    const auto cls = static_cast<Label>(found - names.begin());

    std::unordered_map<std::string, std::size_t> fixed_by_pair;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto &s = dataset.samples()[i];
        if (s.label == 0 && s.pair_id) {
            if (!fixed_by_pair.emplace(*s.pair_id, i).second) {
                throw Error(ErrorCode::DuplicateId, "pair id '" + *s.pair_id + "' used by two non-vulnerable samples");
            }
        }
    }
    std::vector<bool> keep(dataset.size(), false);
    std::vector<bool> vulnerable(dataset.size(), false);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto &s = dataset.samples()[i];
        if (s.label != cls) continue;
        if (!s.pair_id) {
            throw Error(ErrorCode::UnpairedSample, "sample '" + s.id + "' has no pair_id");
        }
        const auto it = fixed_by_pair.find(*s.pair_id);
        if (it == fixed_by_pair.end()) {
            throw Error(ErrorCode::UnpairedSample, "sample '" + s.id + "' has no fixed counterpart");
        }
        keep[i] = vulnerable[i] = true;
        keep[it->second] = true;
    }
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (!keep[i]) continue;
        Sample s = dataset.samples()[i];
        s.label = vulnerable[i] ? 1U : 0U;
        samples.push_back(std::move(s));
    }
    return Dataset(dataset.name() + "/" + std::string(cwe), Schema::binary, {"non-vulnerable", "vulnerable"}, std::move(samples));
}

std::vector<std::string> top_cwes(const Dataset &dataset, std::size_t n) {
    const auto counts = dataset.class_counts();
    std::vector<std::size_t> order;
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] > 0) order.push_back(c);
    }
    const auto &names = dataset.class_names();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (counts[a] != counts[b]) return counts[a] > counts[b];
        return names[a] < names[b];
    });
    order.resize(std::min(order.size(), n));
    std::vector<std::string> out;
    for (auto c : order) out.push_back(names[c]);
    return out;
}

}  // namespace vulforge
