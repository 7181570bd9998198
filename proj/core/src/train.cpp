#include "kglp/train.hpp"

#include <cmath>
#include <fstream>

#include "kglp/rng.hpp"

namespace kglp {

std::string negative_regime_name(NegativeRegime r) {
    switch (r) {
        case NegativeRegime::perturbation: return "perturbation";
        case NegativeRegime::lcwa: return "lcwa";
        case NegativeRegime::cwa: return "cwa";
    }
    return "unknown";
}

NegativeRegime negative_regime_from_name(const std::string& name) {
    if (name == "perturbation") return NegativeRegime::perturbation;
    if (name == "lcwa") return NegativeRegime::lcwa;
    if (name == "cwa") return NegativeRegime::cwa;
    throw DataError("unknown negative regime: " + name);
}

namespace {

// One negative per positive. Perturbation picks uniformly between the
// admissible subject- and object-corruption; the other regimes draw from
// their own pools. Returns false when the regime yields nothing.
bool draw_negative(const KnowledgeGraph& kg, const TypeConstraints& constraints,
                   const NegativeRegime regime, const Triple& positive, std::uint64_t step_seed,
                   Triple& out) {
    switch (regime) {
        case NegativeRegime::perturbation: {
            const auto candidates = perturb_negatives(kg, positive, 1, constraints, step_seed);
            if (candidates.empty()) return false;
            Rng rng(derive_seed(step_seed, "pick-side"));
            out = candidates[rng.uniform_index(candidates.size())].triple;
            return true;
        }
        case NegativeRegime::lcwa: {
            const auto pool = lcwa_negatives(kg, positive.subject, positive.relation, constraints);
            if (pool.empty()) return false;
            Rng rng(derive_seed(step_seed, "pick-lcwa"));
            out = pool[rng.uniform_index(pool.size())];
            return true;
        }
        case NegativeRegime::cwa: {
            const auto pool = cwa_negatives(kg, constraints, 1, step_seed);
            if (pool.empty()) return false;
            out = pool.front();
            return true;
        }
    }
    return false;
}

}  // namespace

TrainResult sgd_train(const LatentModel& init, const KnowledgeGraph& kg,
                      std::span<const Triple> positives, const TypeConstraints& constraints,
                      const TrainConfig& cfg) {
    if (cfg.learning_rate < 0 || cfg.epochs < 0 || cfg.lambda < 0) {
        throw DataError("invalid train config");
    }
    TrainResult result;
    result.model = init;
    if (positives.empty()) return result;

    const double lr = cfg.learning_rate;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const LatentModel checkpoint = result.model;
        Rng order_rng(derive_seed(cfg.seed, "sgd-order", static_cast<std::uint64_t>(epoch)));
        const auto order = order_rng.permutation(positives.size());

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        bool bad = false;
        for (std::size_t step = 0; step < order.size(); ++step) {
            const Triple& pos = positives[order[step]];
            const std::uint64_t step_seed =
                derive_seed(cfg.seed, "sgd-neg",
                            (static_cast<std::uint64_t>(epoch) << 32) | static_cast<std::uint64_t>(step));
            Triple neg;
            const bool has_neg = draw_negative(kg, constraints, cfg.regime, pos, step_seed, neg);

            if (cfg.loss == LossKind::margin_ranking) {
                if (!has_neg) continue;
                const ScoreGradient sp = score_with_gradient(result.model, pos);
                const ScoreGradient sn = score_with_gradient(result.model, neg);
                const double loss = margin_ranking_loss(sp.value, sn.value, cfg.margin);
                loss_sum += loss;
                ++loss_count;
                if (!std::isfinite(loss)) {
                    bad = true;
                    break;
                }
                if (lr != 0.0 && loss > 0.0) {
                    apply_example_update(result.model, pos, sp, -1.0, lr, cfg.lambda);
                    apply_example_update(result.model, neg, sn, +1.0, lr, 0.0);
                }
            } else {
                auto labeled_step = [&](const Triple& t, int label) {
                    const ScoreGradient sg = score_with_gradient(result.model, t);
                    const double p = sigmoid(sg.value);
                    const double loss =
                        cfg.loss == LossKind::log_loss ? log_loss(p, label) : squared_loss(p, label);
                    loss_sum += loss;
                    ++loss_count;
                    if (!std::isfinite(loss)) {
                        bad = true;
                        return;
                    }
                    const double dloss_df =
                        cfg.loss == LossKind::log_loss
                            ? p - static_cast<double>(label)
                            : 2.0 * (p - static_cast<double>(label)) * p * (1.0 - p);
                    if (lr != 0.0) {
                        apply_example_update(result.model, t, sg, dloss_df, lr, cfg.lambda);
                    }
                };
                labeled_step(pos, 1);
                if (bad) break;
                if (has_neg) labeled_step(neg, 0);
                if (bad) break;
            }
        }

        if (bad) {
            result.model = checkpoint;
            result.aborted_non_finite = true;
            break;
        }
        result.epoch_loss.push_back(loss_count > 0 ? loss_sum / static_cast<double>(loss_count)
                                                   : 0.0);
    }
    return result;
}

double sgd_epoch_log_loss(LatentModel& model, std::span<const LabeledTriple> examples,
                          std::span<const double> offsets, double learning_rate, double lambda,
                          std::uint64_t seed) {
    if (offsets.size() != examples.size()) throw DataError("offset length mismatch");
    Rng order_rng(derive_seed(seed, "are-order"));
    const auto order = order_rng.permutation(examples.size());
    double loss_sum = 0.0;
    for (const std::size_t idx : order) {
        const LabeledTriple& ex = examples[idx];
        const ScoreGradient sg = score_with_gradient(model, ex.triple);
        const double p = sigmoid(sg.value + offsets[idx]);
        loss_sum += log_loss(p, ex.label);
        if (learning_rate != 0.0) {
            apply_example_update(model, ex.triple, sg, p - static_cast<double>(ex.label),
                                 learning_rate, lambda);
        }
    }
    return examples.empty() ? 0.0 : loss_sum / static_cast<double>(examples.size());
}

void write_loss_trace_csv(std::span<const double> losses, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write loss trace: " + path.string());
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e) {
        out << e << ',' << losses[e] << '\n';
    }
}

}  // namespace kglp
