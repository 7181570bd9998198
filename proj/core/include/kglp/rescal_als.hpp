#pragma once

#include <cstdint>
#include <vector>

#include "kglp/graph.hpp"
#include "kglp/latent.hpp"

namespace kglp {

struct AlsOptions {
    int rank = 4;
    double lambda_entities = 0.0;  // ridge on E
    double lambda_relations = 0.0; // ridge on each W_k
    int max_iters = 30;
    std::uint64_t seed = 0;
    /// Stop early when the relative loss improvement of a full iteration falls
    /// below this; 0 runs all iterations.
    double stop_tol = 0.0;
    /// Record the loss after every half-update (entity step and each relation
    /// step). When false, once per iteration.
    bool trace_half_updates = true;
    int threads = 1;
};

struct AlsTracePoint {
    int iteration = 0;
    char stage = 'I';  // 'I' init, 'E' entity step, 'W' relation step
    double loss = 0.0;
};

struct AlsResult {
    LatentModel model;
    std::vector<AlsTracePoint> trace;
    double final_loss = 0.0;
    /// Set when a rank-deficient unregularized system was resolved by a
    /// pseudo-inverse.
    bool used_pseudo_inverse = false;
};

/// Alternating least squares for the bilinear model under the squared
/// reconstruction loss with ridge terms
///   sum_k |Y_k - E W_k E'|_F^2 + lambda_e |E|_F^2 + lambda_w sum_k |W_k|_F^2.
/// The relation step solves each slice exactly through the SVD of E; the
/// entity step takes the normal-equation direction and applies an exact
/// quartic line search, so the recorded loss never increases. Per-iteration
/// cost is O(nnz * H + N_e * H^2 + N_r * H^3).
AlsResult fit_rescal_als(const std::vector<SparseSlice>& slices, const AlsOptions& options);

AlsResult fit_rescal_als(const KnowledgeGraph& kg, const AlsOptions& options);

/// The regularized objective above at the given parameters, computed without
/// materializing dense reconstructions.
double rescal_als_loss(const std::vector<SparseSlice>& slices, const RescalParams& params,
                       double lambda_entities, double lambda_relations);

}  // namespace kglp
