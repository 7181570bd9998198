#include "kglp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "kglp/parallel.hpp"
#include "kglp/rng.hpp"

namespace kglp {

namespace {

std::vector<EntityId> candidate_entities(const KnowledgeGraph& kg, const TypeConstraints& constraints,
                                         const Triple& t, CorruptSide side, bool filtered) {
    const auto& pool = side == CorruptSide::object
                           ? constraints.objects.at(static_cast<std::size_t>(t.relation))
                           : constraints.subjects.at(static_cast<std::size_t>(t.relation));
    const EntityId truth = side == CorruptSide::object ? t.object : t.subject;
    std::vector<EntityId> candidates;
    candidates.reserve(pool.size() + 1);
    for (const EntityId e : pool) {
        if (e == truth) continue;
        Triple c = t;
        (side == CorruptSide::object ? c.object : c.subject) = e;
        if (filtered && kg.contains(c)) continue;
        candidates.push_back(e);
    }
    candidates.push_back(truth);  // the truth always competes
    return candidates;
}

}  // namespace

double rank_entities(const TripleScorer& scorer, const KnowledgeGraph& kg,
                     const TypeConstraints& constraints, const Triple& t, CorruptSide side,
                     bool filtered) {
    const EntityId truth = side == CorruptSide::object ? t.object : t.subject;
    const double true_score = scorer(t);
    double better = 0;
    double tied = 0;
    for (const EntityId e : candidate_entities(kg, constraints, t, side, filtered)) {
        if (e == truth) continue;
        Triple c = t;
        (side == CorruptSide::object ? c.object : c.subject) = e;
        const double s = scorer(c);
        if (s > true_score) {
            ++better;
        } else if (s == true_score) {
            ++tied;
        }
    }
    return better + 1.0 + tied / 2.0;
}

RankingReport evaluate_ranking(const TripleScorer& scorer, const KnowledgeGraph& kg,
                               const TypeConstraints& constraints, std::span<const Triple> test,
                               bool filtered, int threads) {
    RankingReport report;
    report.filtered = filtered;
    report.ranks.resize(test.size());

    struct PerTriple {
        double object_rank = 0, subject_rank = 0;
        double true_score = 0;
        std::vector<double> corruption_scores;
    };
    std::vector<PerTriple> rows(test.size());

    parallel_for(test.size(), threads, [&](std::size_t idx) {
        const Triple& t = test[idx];
        PerTriple& row = rows[idx];
        row.true_score = scorer(t);
        for (const CorruptSide side : {CorruptSide::object, CorruptSide::subject}) {
            const EntityId truth = side == CorruptSide::object ? t.object : t.subject;
            double better = 0, tied = 0;
            for (const EntityId e : candidate_entities(kg, constraints, t, side, filtered)) {
                if (e == truth) continue;
                Triple c = t;
                (side == CorruptSide::object ? c.object : c.subject) = e;
                const double s = scorer(c);
                row.corruption_scores.push_back(s);
                if (s > row.true_score) {
                    ++better;
                } else if (s == row.true_score) {
                    ++tied;
                }
            }
            (side == CorruptSide::object ? row.object_rank : row.subject_rank) =
                better + 1.0 + tied / 2.0;
        }
    });

    std::vector<double> ranks;
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t idx = 0; idx < test.size(); ++idx) {
        const PerTriple& row = rows[idx];
        report.ranks[idx] = {test[idx], row.object_rank, row.subject_rank};
        ranks.push_back(row.object_rank);
        ranks.push_back(row.subject_rank);
        scores.push_back(row.true_score);
        labels.push_back(1);
        for (const double s : row.corruption_scores) {
            scores.push_back(s);
            labels.push_back(0);
        }
        report.num_candidates += row.corruption_scores.size();
    }
    if (!test.empty()) {
        report.mrr = mrr(ranks);
        if (report.num_candidates > 0) {
            report.auc_roc = auc_roc(scores, labels);
            report.auc_pr = auc_pr(scores, labels);
        }
    }
    return report;
}

namespace {

void check_two_classes(std::span<const int> labels) {
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
        throw DataError("metric needs both classes");
    }
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size() || scores.empty()) throw DataError("bad metric input");
    check_two_classes(labels);
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Rank-sum with average ranks for ties; exact in doubles (half-integers).
    double positive_rank_sum = 0.0;
    std::size_t n_pos = 0;
    std::size_t at = 0;
    while (at < n) {
        std::size_t end = at + 1;
        while (end < n && scores[order[end]] == scores[order[at]]) ++end;
        const double avg_rank = (static_cast<double>(at + 1) + static_cast<double>(end)) / 2.0;
        for (std::size_t p = at; p < end; ++p) {
            if (labels[order[p]] == 1) {
                positive_rank_sum += avg_rank;
                ++n_pos;
            }
        }
        at = end;
    }
    const double n_neg = static_cast<double>(n - n_pos);
    const double np = static_cast<double>(n_pos);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg);
}

double auc_pr(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size() || scores.empty()) throw DataError("bad metric input");
    check_two_classes(labels);
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const double total_pos =
        static_cast<double>(std::count(labels.begin(), labels.end(), 1));

    // Thresholds at distinct scores; trapezoids between consecutive
    // (recall, precision) points, anchored at recall 0 with the first group's
    // precision.
    double area = 0.0;
    double tp = 0.0, fp = 0.0;
    double prev_recall = 0.0;
    double prev_precision = 1.0;
    bool first = true;
    std::size_t at = 0;
    while (at < n) {
        std::size_t end = at + 1;
        while (end < n && scores[order[end]] == scores[order[at]]) ++end;
        for (std::size_t p = at; p < end; ++p) {
            if (labels[order[p]] == 1) {
                ++tp;
            } else {
                ++fp;
            }
        }
        const double recall = tp / total_pos;
        const double precision = tp / (tp + fp);
        if (first) {
            prev_precision = precision;  // anchor (0, p_first)
            first = false;
        }
        area += (recall - prev_recall) * (precision + prev_precision) / 2.0;
        prev_recall = recall;
        prev_precision = precision;
        at = end;
    }
    return area;
}

double mrr(std::span<const double> ranks) {
    if (ranks.empty()) throw DataError("mrr needs at least one rank");
    double sum = 0.0;
    for (const double r : ranks) {
        if (r < 1.0) throw DataError("ranks must be >= 1");
        sum += 1.0 / r;
    }
    return sum / static_cast<double>(ranks.size());
}

CrossValidationReport cross_validate(
    std::size_t n_configs, std::span<const Triple> positives, int folds, std::uint64_t seed,
    const std::function<double(std::size_t, std::span<const Triple>, std::span<const Triple>)>&
        fit_and_score) {
    if (n_configs == 0) throw DataError("empty hyperparameter grid");
    if (folds < 2) throw DataError("cross-validation needs >= 2 folds");
    if (positives.size() < static_cast<std::size_t>(folds)) {
        throw DataError("not enough positives for the requested folds");
    }

    Rng rng(derive_seed(seed, "cross-validate"));
    std::vector<Triple> shuffled(positives.begin(), positives.end());
    rng.shuffle(shuffled);

    std::vector<std::pair<std::size_t, std::size_t>> fold_bounds;
    const std::size_t base = shuffled.size() / static_cast<std::size_t>(folds);
    const std::size_t extra = shuffled.size() % static_cast<std::size_t>(folds);
    std::size_t begin = 0;
    for (int f = 0; f < folds; ++f) {
        const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
        fold_bounds.emplace_back(begin, begin + size);
        begin += size;
    }

    CrossValidationReport report;
    report.fold_metrics.assign(n_configs, std::vector<double>(static_cast<std::size_t>(folds), 0.0));
    report.mean_metric.assign(n_configs, 0.0);
    for (std::size_t c = 0; c < n_configs; ++c) {
        for (int f = 0; f < folds; ++f) {
            const auto [lo, hi] = fold_bounds[static_cast<std::size_t>(f)];
            std::vector<Triple> train;
            train.reserve(shuffled.size() - (hi - lo));
            train.insert(train.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(lo));
            train.insert(train.end(), shuffled.begin() + static_cast<std::ptrdiff_t>(hi), shuffled.end());
            const std::span<const Triple> valid(shuffled.data() + lo, hi - lo);
            report.fold_metrics[c][static_cast<std::size_t>(f)] = fit_and_score(c, train, valid);
        }
        const auto& row = report.fold_metrics[c];
        report.mean_metric[c] =
            std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(folds);
    }
    report.best_config = static_cast<std::size_t>(
        std::max_element(report.mean_metric.begin(), report.mean_metric.end()) -
        report.mean_metric.begin());
    return report;
}

void write_ranking_report_json(const RankingReport& report, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "kglp-ranking-report";
    j["version"] = 1;
    j["filtered"] = report.filtered;
    j["num_test_triples"] = report.ranks.size();
    j["num_candidates"] = report.num_candidates;
    j["mrr"] = report.mrr;
    j["auc_roc"] = report.auc_roc;
    j["auc_pr"] = report.auc_pr;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write ranking report: " + path.string());
    out << j.dump(2) << '\n';
}

void write_cross_validation_tsv(const CrossValidationReport& report,
                                std::span<const std::string> config_names,
                                const std::filesystem::path& path) {
    if (config_names.size() != report.fold_metrics.size()) {
        throw DataError("config name count mismatch");
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write cross-validation report: " + path.string());
    out << "config\tfold\tmetric\n";
    for (std::size_t c = 0; c < report.fold_metrics.size(); ++c) {
        for (std::size_t f = 0; f < report.fold_metrics[c].size(); ++f) {
            out << config_names[c] << '\t' << f << '\t' << report.fold_metrics[c][f] << '\n';
        }
        out << config_names[c] << "\tmean\t" << report.mean_metric[c] << '\n';
    }
}

void write_cross_validation_json(const CrossValidationReport& report,
                                 std::span<const std::string> config_names,
                                 const std::filesystem::path& path) {
    if (config_names.size() != report.fold_metrics.size()) {
        throw DataError("config name count mismatch");
    }
    nlohmann::json j;
    j["format"] = "kglp-cross-validation";
    j["version"] = 1;
    j["best_config"] = config_names[report.best_config];
    nlohmann::json configs = nlohmann::json::array();
    for (std::size_t c = 0; c < report.fold_metrics.size(); ++c) {
        configs.push_back({{"name", config_names[c]},
                           {"folds", report.fold_metrics[c]},
                           {"mean", report.mean_metric[c]}});
    }
    j["configs"] = configs;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write cross-validation report: " + path.string());
    out << j.dump(2) << '\n';
}

void write_ranking_report_tsv(const RankingReport& report, const KnowledgeGraph& kg,
                              const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write ranking report: " + path.string());
    out << "subject\trelation\tobject\tobject_rank\tsubject_rank\n";
    for (const RankEntry& e : report.ranks) {
        out << kg.entities().name(e.triple.subject) << '\t' << kg.relations().name(e.triple.relation)
            << '\t' << kg.entities().name(e.triple.object) << '\t' << e.object_rank << '\t'
            << e.subject_rank << '\n';
    }
}

}  // namespace kglp
