#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kglp/graph.hpp"
#include "kglp/types.hpp"

namespace kglp {

// --- uni-relational similarity indices -----------------------------------------

enum class SimilarityKind { common_neighbors, adamic_adar, preferential_attachment, katz, local_katz };

struct SimilaritySpec {
    SimilarityKind kind = SimilarityKind::common_neighbors;
    double beta = 0.1;   // katz / local_katz decay
    int max_length = 2;  // local_katz truncation, >= 1
};

struct SimilarityFlags {
    /// Common neighbors of degree 1 whose Adamic-Adar term (1/log 1) is
    /// undefined; they contribute 0 by convention.
    int degenerate_adamic_adar_terms = 0;
};

/// Similarity of entities i and j in the graph restricted to relation k and
/// treated as undirected. Katz sums beta^len over vertex-distinct paths,
/// truncated at max_length for local_katz and at term < 1e-12 otherwise.
double similarity(const KnowledgeGraph& kg, RelationId k, EntityId i, EntityId j,
                  const SimilaritySpec& spec, SimilarityFlags* flags = nullptr);

// --- path ranking --------------------------------------------------------------

struct PathStep {
    RelationId relation = 0;
    Direction direction = Direction::forward;

    auto operator<=>(const PathStep&) const = default;
};

/// Sequence of typed, directed steps; length >= 1.
struct PathType {
    std::vector<PathStep> steps;

    auto operator<=>(const PathType&) const = default;
};

std::string path_type_name(const KnowledgeGraph& kg, const PathType& t);

/// All path types of length <= max_length realized between at least one
/// observed (subject, object) pair of relation k. The target relation's own
/// single forward step is excluded (it restates the label). When more than
/// `budget` types exist a seeded uniform subsample is returned. Output is
/// canonically ordered (length, then steps).
std::vector<PathType> enumerate_path_types(const KnowledgeGraph& kg, RelationId k, int max_length,
                                           std::size_t budget, std::uint64_t seed);

/// Probability that a uniform random walk from i following the step types of t
/// ends at j. Dead ends absorb their probability mass, so for fixed i and t the
/// values sum to at most 1 over destinations.
double path_probability(const KnowledgeGraph& kg, EntityId i, EntityId j, const PathType& t);

/// Feature vector [P(path) : path in path_types] for the candidate triple
/// (i, k, j). Entries lie in [0, 1].
Eigen::VectorXd pra_features(const KnowledgeGraph& kg, EntityId i, EntityId j, RelationId k,
                             std::span<const PathType> path_types);

struct PraModel {
    RelationId relation = 0;
    std::vector<PathType> path_types;
    Eigen::VectorXd weights;
    double bias = 0.0;
};

double pra_score(const KnowledgeGraph& kg, const PraModel& model, EntityId i, EntityId j);

struct FitPraOptions {
    double l1_strength = 1e-3;
    double tol = 1e-8;
    int max_iters = 20000;
    int max_path_length = 2;
    std::size_t budget = 2000;
    std::uint64_t seed = 0;
    /// Intercept of the logistic model. Disabled by combination models whose
    /// score form has no constant term.
    bool include_bias = true;
};

struct PraFit {
    PraModel model;
    /// L1-regularized objective after each proximal step; non-increasing.
    std::vector<double> objective;
};

/// L1-regularized logistic regression over path-probability features via
/// proximal gradient descent with a fixed step from a Lipschitz bound.
/// Zero-weight paths are pruned from the returned model. Throws DataError on
/// empty or single-class data.
PraFit fit_pra(const KnowledgeGraph& kg, RelationId k, std::span<const Triple> positives,
               std::span<const Triple> negatives, const FitPraOptions& options);

/// As above with a caller-supplied path-type list (kept fixed, no enumeration).
PraFit fit_pra(const KnowledgeGraph& kg, RelationId k, std::span<const Triple> positives,
               std::span<const Triple> negatives, std::vector<PathType> path_types,
               const FitPraOptions& options);

struct PraRule {
    double weight = 0.0;
    std::string text;
};

/// Nonzero-weight paths rendered as Horn clauses, ordered by weight
/// descending. Inverse steps swap their arguments.
std::vector<PraRule> pra_rules(const PraModel& model, const KnowledgeGraph& kg);

void write_rules(std::span<const PraRule> rules, const std::filesystem::path& path);

/// JSON serialization: relation name, path types as relation names plus
/// directions, weights, bias.
void save_pra_model(const PraModel& model, const KnowledgeGraph& kg,
                    const std::filesystem::path& path);
PraModel load_pra_model(const KnowledgeGraph& kg, const std::filesystem::path& path);

}  // namespace kglp
