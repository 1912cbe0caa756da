#include "vulforge/metrics.hpp"

#include "vulforge/error.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace vulforge {

double safe_ratio(double num, double den) noexcept { return den == 0.0 ? 0.0 : num / den; }

double f1_from_pr(double precision, double recall) noexcept {
    return safe_ratio(2.0 * precision * recall, precision + recall);
}

namespace {

void check_lengths(std::span<const Label> preds, std::span<const Label> truth) {
    if (preds.size() != truth.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(preds.size()) + " predictions vs " + std::to_string(truth.size()) + " labels");
    }
    if (preds.empty()) {
        throw Error(ErrorCode::LengthMismatch, "no labels to score");
    }
}

MetricsReport confusion_report(std::span<const Label> preds, std::span<const Label> truth, std::size_t classes) {
    check_lengths(preds, truth);
    MetricsReport r;
    r.classes = classes;
    r.total = preds.size();
    r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] >= classes || truth[i] >= classes) {
            throw Error(ErrorCode::UnknownLabel, "label outside 0.." + std::to_string(classes - 1));
        }
        ++r.confusion[truth[i]][preds[i]];
    }
    std::size_t correct = 0;
    for (std::size_t c = 0; c < classes; ++c) correct += r.confusion[c][c];
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
    return r;
}

void fill_binary(MetricsReport &r) {
    r.tn = r.confusion[0][0];
    r.fp = r.confusion[0][1];
    r.fn = r.confusion[1][0];
    r.tp = r.confusion[1][1];
    r.precision = safe_ratio(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fp));
    r.recall = safe_ratio(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fn));
    r.f1 = f1_from_pr(r.precision, r.recall);
}

void fill_weighted(MetricsReport &r) {
    const std::size_t k = r.classes;
    r.class_weights.assign(k, 0.0);
    r.class_precision.assign(k, 0.0);
    r.class_recall.assign(k, 0.0);
    r.class_f1.assign(k, 0.0);
    double support_total = 0.0;
    double wp = 0.0;
    double wr = 0.0;
    double wf = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t predicted = 0;
        std::size_t support = 0;
        for (std::size_t o = 0; o < k; ++o) {
            predicted += r.confusion[o][c];
            support += r.confusion[c][o];
        }
        const double hit = static_cast<double>(r.confusion[c][c]);
        r.class_weights[c] = static_cast<double>(support);
        r.class_precision[c] = safe_ratio(hit, static_cast<double>(predicted));
        r.class_recall[c] = safe_ratio(hit, static_cast<double>(support));
        r.class_f1[c] = f1_from_pr(r.class_precision[c], r.class_recall[c]);
        support_total += r.class_weights[c];
        wp += r.class_weights[c] * r.class_precision[c];
        wr += r.class_weights[c] * r.class_recall[c];
        wf += r.class_weights[c] * r.class_f1[c];
    }
    r.w_precision = safe_ratio(wp, support_total);
    r.w_recall = safe_ratio(wr, support_total);
    r.w_f1 = safe_ratio(wf, support_total);
}

}  // namespace

MetricsReport binary_metrics(std::span<const Label> preds, std::span<const Label> truth) {
    auto r = confusion_report(preds, truth, 2);
    fill_binary(r);
    return r;
}

MetricsReport weighted_metrics(std::span<const Label> preds, std::span<const Label> truth, std::size_t classes) {
    if (classes < 2) {
        throw Error(ErrorCode::ConfigError, "metrics need K >= 2");
    }
    auto r = confusion_report(preds, truth, classes);
    if (classes == 2) fill_binary(r);
    fill_weighted(r);
    return r;
}

json to_json(const MetricsReport &r) {
    json doc = {
        {"classes", r.classes},
        {"total", r.total},
        {"accuracy", r.accuracy},
        {"confusion", r.confusion},
        {"zero_division", "0"},
    };
    if (r.classes == 2) {
        doc["tp"] = r.tp;
        doc["tn"] = r.tn;
        doc["fp"] = r.fp;
        doc["fn"] = r.fn;
        doc["precision"] = r.precision;
        doc["recall"] = r.recall;
        doc["f1"] = r.f1;
    }
    if (!r.class_weights.empty()) {
        doc["class_weights"] = r.class_weights;
        doc["w_precision"] = r.w_precision;
        doc["w_recall"] = r.w_recall;
        doc["w_f1"] = r.w_f1;
    }
    return doc;
}

// --- rank tables -------------------------------------------------------------

std::string_view to_string(TieRule rule) noexcept { return rule == TieRule::competition ? "competition" : "average"; }

TieRule parse_tie_rule(std::string_view text) {
    if (text == "average") return TieRule::average;
    if (text == "competition") return TieRule::competition;
    throw Error(ErrorCode::ConfigError, "unknown tie rule '" + std::string(text) + "'");
}

std::vector<double> rank_scores(std::span<const double> scores, TieRule rule) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<double> ranks(scores.size());
    std::size_t start = 0;
    while (start < order.size()) {
        std::size_t end = start + 1;
        while (end < order.size() && scores[order[end]] == scores[order[start]]) ++end;
        // Positions start+1 .. end share one rank.
        const double shared = rule == TieRule::average ? (static_cast<double>(start + 1) + static_cast<double>(end)) / 2.0 : static_cast<double>(start + 1);
        for (std::size_t i = start; i < end; ++i) ranks[order[i]] = shared;
        start = end;
    }
    return ranks;
}

RankTable average_rank(const ScoreCube &cube, TieRule rule) {
    if (cube.instances.empty()) {
        throw Error(ErrorCode::LengthMismatch, "rank table needs at least one instance");
    }
    if (cube.values.size() != cube.metrics.size()) {
        throw Error(ErrorCode::LengthMismatch, "score cube metric count mismatch");
    }
    RankTable table;
    table.methods = cube.methods;
    table.instances = cube.instances;
    table.metrics = cube.metrics;
    table.tie_rule = rule;
    const std::size_t methods = cube.methods.size();
    for (const auto &per_metric : cube.values) {
        if (per_metric.size() != cube.instances.size()) {
            throw Error(ErrorCode::LengthMismatch, "score cube instance count mismatch");
        }
        std::vector<std::vector<double>> ranks;
        std::vector<double> sums(methods, 0.0);
        for (const auto &scores : per_metric) {
            if (scores.size() != methods) {
                throw Error(ErrorCode::LengthMismatch, "score cube method count mismatch");
            }
            ranks.push_back(rank_scores(scores, rule));
            for (std::size_t m = 0; m < methods; ++m) sums[m] += ranks.back()[m];
        }
        for (double &s : sums) s /= static_cast<double>(cube.instances.size());
        table.ranks.push_back(std::move(ranks));
        table.average.push_back(std::move(sums));
    }
    return table;
}

// --- divergence and overlap --------------------------------------------------

DivergenceReport divergence(std::span<const PredictionSet> sets, std::span<const std::string> ids, std::span<const Label> truth, std::span<const PredictionSet> extra) {
    if (sets.size() < 2) {
        throw Error(ErrorCode::ConfigError, "divergence needs at least two prediction sets");
    }
    if (ids.size() != truth.size()) {
        throw Error(ErrorCode::LengthMismatch, "ids and labels differ in length");
    }
    const auto covers = [&](const PredictionSet &set) {
        for (const auto &id : ids) {
            if (!set.contains(id)) {
                throw Error(ErrorCode::CoverageMismatch, "'" + set.model_id() + "' has no prediction for '" + id + "'");
            }
        }
    };
    for (const auto &s : sets) covers(s);
    for (const auto &s : extra) covers(s);

    DivergenceReport report;
    report.total = ids.size();
    std::vector<std::size_t> divergent;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Label first = decision_label(sets.front().at(ids[i]));
        const bool differs = std::any_of(sets.begin() + 1, sets.end(), [&](const PredictionSet &s) { return decision_label(s.at(ids[i])) != first; });
        if (differs) divergent.push_back(i);
    }
    std::sort(divergent.begin(), divergent.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    for (auto i : divergent) report.divergent_ids.push_back(ids[i]);

    const auto proportion = [&](const PredictionSet &set) {
        std::size_t correct = 0;
        for (auto i : divergent) {
            if (decision_label(set.at(ids[i])) == truth[i]) ++correct;
        }
        return safe_ratio(static_cast<double>(correct), static_cast<double>(divergent.size()));
    };
    for (const auto &s : sets) {
        report.methods.push_back(s.model_id());
        report.correct_proportion.push_back(proportion(s));
    }
    for (const auto &s : extra) {
        report.methods.push_back(s.model_id());
        report.correct_proportion.push_back(proportion(s));
    }
    return report;
}

std::vector<std::size_t> overlap_regions(std::span<const std::set<std::string>> sets) {
    if (sets.empty()) {
        throw Error(ErrorCode::ConfigError, "overlap needs at least one set");
    }
    if (sets.size() > 6) {
        throw Error(ErrorCode::TooManySets, std::to_string(sets.size()) + " sets; at most 6 are supported");
    }
    std::unordered_map<std::string, std::uint32_t> membership;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (const auto &id : sets[i]) membership[id] |= 1U << i;
    }
    std::vector<std::size_t> counts(std::size_t{1} << sets.size(), 0);
    for (const auto &[id, mask] : membership) ++counts[mask];
    return counts;
}

std::string region_name(std::uint32_t mask, std::size_t sets) {
    std::string name(sets, '0');
    for (std::size_t i = 0; i < sets; ++i) {
        if (mask & (1U << i)) name[sets - 1 - i] = '1';
    }
    return name;
}

}  // namespace vulforge
