#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "kglp/graph.hpp"
#include "kglp/types.hpp"

namespace kglp {

using TripleScorer = std::function<double(const Triple&)>;

enum class CorruptSide { subject, object };

/// Rank of the true entity among all type-admissible corruptions of one slot,
/// by descending score. Filtered mode drops corruptions that are known
/// positives of the graph. Ties take the mid-rank, so the rank can be
/// half-integral. The true entity is always a candidate.
double rank_entities(const TripleScorer& scorer, const KnowledgeGraph& kg,
                     const TypeConstraints& constraints, const Triple& t, CorruptSide side,
                     bool filtered);

struct RankEntry {
    Triple triple;
    double object_rank = 0.0;
    double subject_rank = 0.0;
};

struct RankingReport {
    std::vector<RankEntry> ranks;
    double mrr = 0.0;
    double auc_roc = 0.0;
    double auc_pr = 0.0;
    bool filtered = true;
    std::size_t num_candidates = 0;  // scored corruption candidates across both sides
};

/// Filtered entity ranking over both slots of every test triple plus pooled
/// threshold metrics: the test scores (label 1) against every scored
/// corruption candidate (label 0).
RankingReport evaluate_ranking(const TripleScorer& scorer, const KnowledgeGraph& kg,
                               const TypeConstraints& constraints, std::span<const Triple> test,
                               bool filtered, int threads = 1);

/// Probability that a random positive outscores a random negative, ties
/// counted half. Exact (rank-sum computation). Throws DataError on
/// single-class input.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

/// Area under the precision-recall staircase by trapezoidal interpolation
/// between distinct-score thresholds, anchored at recall 0 with the precision
/// of the top-scoring group. Throws DataError on single-class input.
double auc_pr(std::span<const double> scores, std::span<const int> labels);

/// Mean reciprocal rank; ranks must be >= 1.
double mrr(std::span<const double> ranks);

struct CrossValidationReport {
    std::size_t best_config = 0;
    std::vector<std::vector<double>> fold_metrics;  // [config][fold]
    std::vector<double> mean_metric;                // per config
};

/// Deterministic k-fold selection: positives are permuted by the seed and
/// chunked into folds; `fit_and_score` returns the validation metric
/// (maximized) for one config on one (train, valid) split.
CrossValidationReport cross_validate(
    std::size_t n_configs, std::span<const Triple> positives, int folds, std::uint64_t seed,
    const std::function<double(std::size_t config, std::span<const Triple> train,
                               std::span<const Triple> valid)>& fit_and_score);

void write_ranking_report_json(const RankingReport& report, const std::filesystem::path& path);
void write_ranking_report_tsv(const RankingReport& report, const KnowledgeGraph& kg,
                              const std::filesystem::path& path);

/// Flat table, one row per (config, fold), plus per-config means.
void write_cross_validation_tsv(const CrossValidationReport& report,
                                std::span<const std::string> config_names,
                                const std::filesystem::path& path);
void write_cross_validation_json(const CrossValidationReport& report,
                                 std::span<const std::string> config_names,
                                 const std::filesystem::path& path);

}  // namespace kglp
