#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kglp/graph.hpp"
#include "kglp/latent.hpp"
#include "kglp/loss.hpp"
#include "kglp/sampling.hpp"

namespace kglp {

enum class NegativeRegime { perturbation, lcwa, cwa };

std::string negative_regime_name(NegativeRegime r);
NegativeRegime negative_regime_from_name(const std::string& name);

struct TrainConfig {
    LossKind loss = LossKind::margin_ranking;
    double learning_rate = 0.01;
    int epochs = 100;
    double lambda = 0.0;  // L2 strength, applied only to touched blocks
    NegativeRegime regime = NegativeRegime::perturbation;
    double margin = 1.0;
    std::uint64_t seed = 0;
};

struct TrainResult {
    LatentModel model;
    std::vector<double> epoch_loss;  // mean per-example loss per epoch
    /// True when a non-finite loss aborted training; `model` then holds the
    /// last finite epoch checkpoint.
    bool aborted_non_finite = false;
};

/// Plain stochastic gradient descent: per positive, one regime-matched
/// negative, a gradient step on the chosen loss plus sparse L2 on the touched
/// parameter blocks. Deterministic trace given the seed.
TrainResult sgd_train(const LatentModel& init, const KnowledgeGraph& kg,
                      std::span<const Triple> positives, const TypeConstraints& constraints,
                      const TrainConfig& cfg);

/// One seeded epoch of log-loss SGD over pre-labeled examples with a fixed
/// additive score offset per example (the graph-feature component of a
/// combined model). Returns the mean loss at the pre-update parameters.
double sgd_epoch_log_loss(LatentModel& model, std::span<const LabeledTriple> examples,
                          std::span<const double> offsets, double learning_rate, double lambda,
                          std::uint64_t seed);

void write_loss_trace_csv(std::span<const double> losses, const std::filesystem::path& path);

}  // namespace kglp
