#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "kglp/graphfeat.hpp"
#include "kglp/latent.hpp"
#include "kglp/sampling.hpp"

namespace kglp {

// --- additive relational effects ------------------------------------------------

/// Bilinear model plus per-relation path-feature model. The bilinear relation
/// matrices play the role of the first weight block (vec(W_k) against the
/// tensor-product features); the path weights are the second.
struct AreModel {
    LatentModel latent;  // kind rescal; rank 0 disables the latent term
    std::vector<std::optional<PraModel>> pra;  // per relation

    bool latent_enabled() const { return latent.config.h_entity > 0; }
};

/// Sum of the bilinear score and the path-feature score. A relation without a
/// fitted path model contributes 0 from that term; `missing_pra` reports it.
double are_score(const KnowledgeGraph& kg, const AreModel& model, const Triple& t,
                 bool* missing_pra = nullptr);

struct AreFitOptions {
    int rank = 8;  // 0 trains the path models alone
    double learning_rate = 0.05;
    double lambda = 1e-4;
    int max_rounds = 50;
    double tol = 1e-5;
    bool use_pra = true;  // false trains the latent part alone
    double l1_strength = 1e-3;
    int max_path_length = 2;
    std::size_t budget = 2000;
    std::uint64_t seed = 0;
};

struct AreFit {
    AreModel model;
    std::vector<double> loss;  // mean joint log-loss per alternation round
    bool diverged = false;
};

/// Alternating optimization: per round, refit the path weights by offset
/// logistic regression against the latent scores, then run one SGD epoch on
/// the latent part against the path scores. Stops when the joint loss change
/// falls below tol; three consecutive increases abort with the trace. The
/// path component carries no intercept (the combined score has no constant
/// term), unlike the standalone path-ranking fit.
AreFit fit_are(const KnowledgeGraph& kg, const LabeledTripleSet& data, const AreFitOptions& options);

void save_are(const AreModel& model, const KnowledgeGraph& kg, const std::filesystem::path& dir);
AreModel load_are(const KnowledgeGraph& kg, const std::filesystem::path& dir);

// --- additive neighborhood model -------------------------------------------------

/// Latent subject/object slot representations with per-(relation, entity)
/// weights plus observed co-occurring relations between the same pair. The
/// neighborhood feature for (i, j, k) reads y_ijk' for every k' != k from the
/// graph.
struct AdditiveModel {
    Eigen::MatrixXd subject_repr;  // N_e x d
    Eigen::MatrixXd object_repr;   // N_e x d
    std::unordered_map<std::uint64_t, Eigen::VectorXd> subject_weights;  // (k, object) -> w
    std::unordered_map<std::uint64_t, Eigen::VectorXd> object_weights;   // (k, subject) -> w
    Eigen::MatrixXd neighborhood_weights;  // N_r x N_r, diagonal unused

    static std::uint64_t slot_key(RelationId k, EntityId e) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k)) << 32) |
               static_cast<std::uint32_t>(e);
    }
};

/// [y_ijk' : k' != k], length N_r - 1, ordered by k' ascending.
Eigen::VectorXd phi_neighborhood(const KnowledgeGraph& kg, EntityId i, EntityId j, RelationId k);

double additive_score(const AdditiveModel& model, const Triple& t, const KnowledgeGraph& kg);

// --- stacking ---------------------------------------------------------------------

struct StackedModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
};

/// Logistic fusion over base-model scores. The rows must come from data
/// disjoint from the base models' training split. Throws DataError on fewer
/// than two base scorers or single-class labels.
StackedModel fit_stacker(const Eigen::MatrixXd& base_scores, const Eigen::VectorXi& labels);

double stacked_score(const StackedModel& model, const Eigen::VectorXd& base_scores);

void save_stacked(const StackedModel& model, std::span<const std::string> base_files,
                  const std::filesystem::path& path);
StackedModel load_stacked(const std::filesystem::path& path, std::vector<std::string>* base_files);

// --- calibration -------------------------------------------------------------------

/// Sigmoid map s -> sigma(a s + b) fitted by maximum likelihood.
struct PlattCalibrator {
    double scale = 1.0;   // a
    double offset = 0.0;  // b
    /// Set when perfectly separable data drove |a| to the 1e3 cap.
    bool capped = false;

    double operator()(double score) const { return sigmoid(scale * score + offset); }
};

PlattCalibrator platt_calibrate(std::span<const double> scores, std::span<const int> labels);

}  // namespace kglp
