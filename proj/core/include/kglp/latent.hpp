#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "kglp/loss.hpp"
#include "kglp/types.hpp"

namespace kglp {

enum class ModelKind { rescal, e_mlp, er_mlp, ntn, se, transe };
enum class Nonlinearity { tanh, identity };
enum class TranseDistance { squared_euclidean, l1 };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

/// Dimensions and options for one latent model. Only the fields used by the
/// chosen kind matter; they must be positive there.
struct ModelConfig {
    ModelKind kind = ModelKind::rescal;
    int h_entity = 0;    // latent features per entity (all kinds)
    int h_relation = 0;  // relation embedding size (er_mlp)
    int h_additive = 0;  // additive hidden layer (e_mlp, ntn) / projection rows (se)
    int h_bilinear = 0;  // bilinear slices (ntn)
    int h_combined = 0;  // combined hidden layer (er_mlp)
    Nonlinearity g = Nonlinearity::tanh;
    TranseDistance distance = TranseDistance::squared_euclidean;
};

/// Bilinear model: f = e_i' W_k e_j. One shared row per entity across all
/// relations and both argument slots.
struct RescalParams {
    Eigen::MatrixXd entities;                      // N_e x H_e
    std::vector<Eigen::MatrixXd> relation_weights; // per relation, H_e x H_e
};

/// Additive hidden layer over the concatenated pair: f = w_k' g(A_k' [e_i; e_j]).
struct EmlpParams {
    Eigen::MatrixXd entities;                 // N_e x H_e
    std::vector<Eigen::MatrixXd> pair_maps;   // per relation, 2H_e x H_a
    std::vector<Eigen::VectorXd> out_weights; // per relation, H_a
};

/// MLP over the embedded triple with one global output vector:
/// f = w' g(C' [e_i; e_j; r_k]).
struct ErmlpParams {
    Eigen::MatrixXd entities;   // N_e x H_e
    Eigen::MatrixXd relations;  // N_r x H_r
    Eigen::MatrixXd triple_map; // (2H_e + H_r) x H_c
    Eigen::VectorXd out_weights; // H_c, shared across relations
};

/// Additive plus bilinear hidden layers: f = w_k' g([h_a; h_b]).
struct NtnParams {
    Eigen::MatrixXd entities;                              // N_e x H_e
    std::vector<Eigen::MatrixXd> pair_maps;                // per relation, 2H_e x H_a
    std::vector<std::vector<Eigen::MatrixXd>> bilinear;    // per relation, H_b slices of H_e x H_e
    std::vector<Eigen::VectorXd> out_weights;              // per relation, H_a + H_b
};

/// Structured embeddings: f = -|A_k^s e_i - A_k^o e_j|_1.
struct SeParams {
    Eigen::MatrixXd entities;                  // N_e x H_e
    std::vector<Eigen::MatrixXd> subject_maps; // per relation, H_a x H_e
    std::vector<Eigen::MatrixXd> object_maps;  // per relation, H_a x H_e
};

/// Translation model: f = -d(e_i + r_k, e_j).
struct TranseParams {
    Eigen::MatrixXd entities;  // N_e x H_e
    Eigen::MatrixXd relations; // N_r x H_e
    TranseDistance distance = TranseDistance::squared_euclidean;
};

struct LatentModel {
    ModelConfig config;
    std::variant<RescalParams, EmlpParams, ErmlpParams, NtnParams, SeParams, TranseParams> params;

    int num_entities() const;
    int num_relations() const;
};

/// Seeded Gaussian(0, 1/sqrt(H_e)) initialization; TransE entity rows are
/// normalized to unit norm. Identical seeds give bit-identical parameters.
LatentModel init_model(const ModelConfig& cfg, int n_entities, int n_relations, std::uint64_t seed);

double score(const LatentModel& model, const Triple& t);

/// TransE score computed through the additive/bilinear layer decomposition
/// f = -(2 h_a - 2 h_b + |r_k|^2) - |e_i|^2 - |e_j|^2 with
/// h_a = r_k'(e_i - e_j), h_b = e_i'e_j. Requires unit-norm entity rows and
/// squared Euclidean distance; equals score() to numerical tolerance and
/// induces the same candidate ordering.
double transe_score_via_layers(const TranseParams& params, const Triple& t);

/// Number of free parameters for a model of the given shape. Matches the
/// materialized scalar count of init_model exactly.
long long param_count(const ModelConfig& cfg, long long n_entities, long long n_relations);

/// Exact NTN encoding of a bilinear model: H_a = 0, one indicator slice per
/// (a, b) feature pair, w_k = vec(W_k), identity nonlinearity. Scores match
/// the source model on every triple.
LatentModel ntn_from_rescal(const LatentModel& rescal);

/// Rows of the relation embedding closest to relation k in squared Euclidean
/// distance, ascending, ties broken by id, k itself excluded. Returns at most
/// `top` items.
std::vector<std::pair<RelationId, double>> nearest_relations(const ErmlpParams& params, RelationId k,
                                                             int top);

// --- gradients ----------------------------------------------------------------

/// Score and its derivative with respect to every parameter the triple
/// touches. Entity-row derivatives are reported per slot; callers accumulate
/// when subject == object.
struct ScoreGradient {
    double value = 0.0;
    Eigen::VectorXd d_subject; // d f / d e_i
    Eigen::VectorXd d_object;  // d f / d e_j

    Eigen::MatrixXd d_relation_matrix;       // rescal: d f / d W_k
    Eigen::MatrixXd d_pair_map;              // e_mlp / ntn: d f / d A_k
    Eigen::VectorXd d_out_weights;           // e_mlp / ntn / er_mlp: d f / d w
    std::vector<Eigen::MatrixXd> d_bilinear; // ntn: d f / d B_k^l
    Eigen::MatrixXd d_triple_map;            // er_mlp: d f / d C
    Eigen::VectorXd d_relation_vector;       // er_mlp / transe: d f / d r_k
    Eigen::MatrixXd d_subject_map;           // se: d f / d A_k^s
    Eigen::MatrixXd d_object_map;            // se: d f / d A_k^o
};

ScoreGradient score_with_gradient(const LatentModel& model, const Triple& t);

/// In-place SGD update on the blocks touched by t:
///   theta -= learning_rate * (scale * d score/d theta + weight_decay * theta).
void apply_example_update(LatentModel& model, const Triple& t, const ScoreGradient& sg,
                          double scale, double learning_rate, double weight_decay);

/// Model-shaped gradient of the per-example loss: zeros everywhere except the
/// parameter blocks touched by the example.
LatentModel gradient(const LatentModel& model, const Triple& t, LossKind loss, int label);

/// Model-shaped gradient of the pairwise margin ranking loss for one
/// (positive, negative) pair.
LatentModel gradient(const LatentModel& model, const Triple& positive, const Triple& negative,
                     double margin);

/// All parameters flattened into one vector, in a fixed deterministic order.
Eigen::VectorXd flatten_parameters(const LatentModel& model);
void assign_parameters(LatentModel& model, const Eigen::VectorXd& values);

// --- serialization -------------------------------------------------------------

/// Container file: JSON header {kind, dims, seed, version, matrices} followed
/// by named row-major little-endian float64 matrices. The loader validates
/// dimensions against the header.
void save_model(const LatentModel& model, const std::filesystem::path& path,
                std::uint64_t seed = 0);
LatentModel load_model(const std::filesystem::path& path);

}  // namespace kglp
