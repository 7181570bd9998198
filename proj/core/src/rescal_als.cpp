#include "kglp/rescal_als.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>

#include "kglp/parallel.hpp"
#include "kglp/rng.hpp"

namespace kglp {

namespace {

// <A W1 B', C W2 D'>_F through Gram matrices: trace((A'C) W2 (D'B) W1').
double factored_inner(const Eigen::MatrixXd& gram_ac, const Eigen::MatrixXd& w1,
                      const Eigen::MatrixXd& gram_db, const Eigen::MatrixXd& w2) {
    return (gram_ac * w2 * gram_db * w1.transpose()).trace();
}

// sum over nonzeros of Y of L.row(i) . R.row(j).
double nonzero_inner(const SparseSlice& y, const Eigen::MatrixXd& left, const Eigen::MatrixXd& right) {
    double sum = 0.0;
    for (int col = 0; col < y.outerSize(); ++col) {
        for (SparseSlice::InnerIterator it(y, col); it; ++it) {
            sum += left.row(it.row()).dot(right.row(it.col()));
        }
    }
    return sum;
}

// |Y - E W E'|_F^2 for one slice, O(nnz H + N H^2 + H^3).
double slice_data_loss(const SparseSlice& y, const Eigen::MatrixXd& entities,
                       const Eigen::MatrixXd& w, const Eigen::MatrixXd& gram) {
    const Eigen::MatrixXd ew = entities * w;
    const double cross = nonzero_inner(y, ew, entities);
    const double quad = (gram * w * gram * w.transpose()).trace();
    return static_cast<double>(y.nonZeros()) - 2.0 * cross + quad;
}

// Real roots of c3 x^3 + c2 x^2 + c1 x + c0, degree-reduced as needed.
std::vector<double> real_roots_cubic(double c3, double c2, double c1, double c0) {
    constexpr double kTiny = 1e-14;
    std::vector<double> roots;
    if (std::abs(c3) < kTiny) {
        if (std::abs(c2) < kTiny) {
            if (std::abs(c1) >= kTiny) roots.push_back(-c0 / c1);
            return roots;
        }
        const double disc = c1 * c1 - 4.0 * c2 * c0;
        if (disc >= 0.0) {
            const double s = std::sqrt(disc);
            roots.push_back((-c1 + s) / (2.0 * c2));
            roots.push_back((-c1 - s) / (2.0 * c2));
        }
        return roots;
    }
    Eigen::Matrix3d companion = Eigen::Matrix3d::Zero();
    companion(0, 2) = -c0 / c3;
    companion(1, 2) = -c1 / c3;
    companion(2, 2) = -c2 / c3;
    companion(1, 0) = 1.0;
    companion(2, 1) = 1.0;
    const Eigen::EigenSolver<Eigen::Matrix3d> solver(companion);
    for (int i = 0; i < 3; ++i) {
        const auto ev = solver.eigenvalues()[i];
        if (std::abs(ev.imag()) < 1e-9 * (1.0 + std::abs(ev.real()))) roots.push_back(ev.real());
    }
    return roots;
}

double eval_quartic(const double c[5], double t) {
    return (((c[4] * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0];
}

}  // namespace

double rescal_als_loss(const std::vector<SparseSlice>& slices, const RescalParams& params,
                       double lambda_entities, double lambda_relations) {
    const Eigen::MatrixXd gram = params.entities.transpose() * params.entities;
    double loss = lambda_entities * params.entities.squaredNorm();
    for (std::size_t k = 0; k < slices.size(); ++k) {
        loss += slice_data_loss(slices[k], params.entities, params.relation_weights[k], gram);
        loss += lambda_relations * params.relation_weights[k].squaredNorm();
    }
    return loss;
}

namespace {

struct AlsState {
    const std::vector<SparseSlice>& slices;
    AlsOptions opts;
    Eigen::MatrixXd entities;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<double> slice_losses;  // data terms, cached per slice
    bool used_pseudo_inverse = false;

    double total_loss() const {
        double loss = opts.lambda_entities * entities.squaredNorm();
        for (std::size_t k = 0; k < weights.size(); ++k) {
            loss += slice_losses[k] + opts.lambda_relations * weights[k].squaredNorm();
        }
        return loss;
    }

    void refresh_slice_losses() {
        const Eigen::MatrixXd gram = entities.transpose() * entities;
        for (std::size_t k = 0; k < slices.size(); ++k) {
            slice_losses[k] = slice_data_loss(slices[k], entities, weights[k], gram);
        }
    }

    // Exact per-slice minimizer of |Y_k - E W E'|^2 + lambda_w |W|^2 given the
    // economy SVD of E. With lambda_w = 0 zero singular directions fall back to
    // the pseudo-inverse solution.
    void update_weight(std::size_t k, const Eigen::MatrixXd& u, const Eigen::VectorXd& s,
                       const Eigen::MatrixXd& v) {
        const Eigen::MatrixXd projected = u.transpose() * (slices[k] * u).eval();
        Eigen::MatrixXd z(s.size(), s.size());
        for (Eigen::Index a = 0; a < s.size(); ++a) {
            for (Eigen::Index b = 0; b < s.size(); ++b) {
                const double denom = s[a] * s[a] * s[b] * s[b] + opts.lambda_relations;
                z(a, b) = denom > 0.0 ? s[a] * s[b] * projected(a, b) / denom : 0.0;
            }
        }
        weights[k] = v * z * v.transpose();
    }

    void relation_step(int iteration, std::vector<AlsTracePoint>& trace) {
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(entities,
                                                    Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::MatrixXd u = svd.matrixU();
        const Eigen::VectorXd s = svd.singularValues();
        const Eigen::MatrixXd v = svd.matrixV();
        if (opts.lambda_relations == 0.0 && s.size() > 0 &&
            s[s.size() - 1] <= 1e-12 * std::max(1.0, s[0])) {
            used_pseudo_inverse = true;
        }
        const Eigen::MatrixXd gram = entities.transpose() * entities;
        const bool sequential_trace = opts.trace_half_updates && opts.threads <= 1;
        if (sequential_trace) {
            for (std::size_t k = 0; k < slices.size(); ++k) {
                update_weight(k, u, s, v);
                slice_losses[k] = slice_data_loss(slices[k], entities, weights[k], gram);
                trace.push_back({iteration, 'W', total_loss()});
            }
        } else {
            parallel_for(slices.size(), opts.threads, [&](std::size_t k) {
                update_weight(k, u, s, v);
                slice_losses[k] = slice_data_loss(slices[k], entities, weights[k], gram);
            });
            trace.push_back({iteration, 'W', total_loss()});
        }
    }

    void entity_step(int iteration, std::vector<AlsTracePoint>& trace) {
        const auto h = static_cast<Eigen::Index>(opts.rank);
        const Eigen::MatrixXd gram = entities.transpose() * entities;
        Eigen::MatrixXd lhs = opts.lambda_entities * Eigen::MatrixXd::Identity(h, h);
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(entities.rows(), h);
        for (std::size_t k = 0; k < slices.size(); ++k) {
            const Eigen::MatrixXd& w = weights[k];
            lhs += w * gram * w.transpose() + w.transpose() * gram * w;
            rhs += slices[k] * (entities * w.transpose()) +
                   slices[k].transpose() * (entities * w);
        }
        Eigen::MatrixXd candidate;
        if (opts.lambda_entities > 0.0) {
            candidate = lhs.ldlt().solve(rhs.transpose()).transpose();
        } else {
            const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(lhs);
            if (cod.rank() < h) used_pseudo_inverse = true;
            candidate = cod.solve(rhs.transpose()).transpose();
        }

        // Exact line search along candidate - entities: the objective is a
        // quartic in the step size, minimized in closed form. Guarantees the
        // entity half-update never increases the loss.
        const Eigen::MatrixXd delta = candidate - entities;
        const Eigen::MatrixXd gram_ee = gram;
        const Eigen::MatrixXd gram_ed = entities.transpose() * delta;
        const Eigen::MatrixXd gram_de = gram_ed.transpose();
        const Eigen::MatrixXd gram_dd = delta.transpose() * delta;

        double c[5] = {0, 0, 0, 0, 0};
        c[0] += opts.lambda_entities * entities.squaredNorm();
        c[1] += 2.0 * opts.lambda_entities * gram_ed.trace();
        c[2] += opts.lambda_entities * delta.squaredNorm();
        for (std::size_t k = 0; k < slices.size(); ++k) {
            const Eigen::MatrixXd& w = weights[k];
            c[0] += opts.lambda_relations * w.squaredNorm();

            const Eigen::MatrixXd ew = entities * w;
            const Eigen::MatrixXd dw = delta * w;
            const double y_dot_p =
                nonzero_inner(slices[k], dw, entities) + nonzero_inner(slices[k], ew, delta);
            const double y_dot_q = nonzero_inner(slices[k], dw, delta);
            const double f_dot_p = factored_inner(gram_ed, w, gram_ee, w) +
                                   factored_inner(gram_ee, w, gram_de, w);
            const double f_dot_q = factored_inner(gram_ed, w, gram_de, w);
            const double p_sq = factored_inner(gram_dd, w, gram_ee, w) +
                                2.0 * factored_inner(gram_de, w, gram_de, w) +
                                factored_inner(gram_ee, w, gram_dd, w);
            const double p_dot_q = factored_inner(gram_dd, w, gram_de, w) +
                                   factored_inner(gram_ed, w, gram_dd, w);
            const double q_sq = factored_inner(gram_dd, w, gram_dd, w);

            c[0] += slice_losses[k];
            c[1] += -2.0 * (y_dot_p - f_dot_p);
            c[2] += p_sq - 2.0 * (y_dot_q - f_dot_q);
            c[3] += 2.0 * p_dot_q;
            c[4] += q_sq;
        }

        double best_t = 0.0;
        double best_loss = eval_quartic(c, 0.0);
        auto consider = [&](double t) {
            if (!std::isfinite(t)) return;
            const double value = eval_quartic(c, t);
            if (value < best_loss) {
                best_loss = value;
                best_t = t;
            }
        };
        consider(1.0);
        for (const double root : real_roots_cubic(4.0 * c[4], 3.0 * c[3], 2.0 * c[2], c[1])) {
            consider(root);
        }

        if (best_t != 0.0) {
            entities += best_t * delta;
            refresh_slice_losses();
        }
        trace.push_back({iteration, 'E', total_loss()});
    }
};

}  // namespace

AlsResult fit_rescal_als(const std::vector<SparseSlice>& slices, const AlsOptions& options) {
    if (options.rank < 1) throw DataError("als rank must be >= 1");
    if (slices.empty()) throw DataError("als needs at least one relation slice");
    const Eigen::Index n = slices.front().rows();
    for (const auto& y : slices) {
        if (y.rows() != n || y.cols() != n) throw DataError("als slices must be square and equal-sized");
    }

    AlsState state{slices, options, {}, {}, {}, false};
    Rng rng(derive_seed(options.seed, "rescal-als"));
    const double sigma = 1.0 / std::sqrt(static_cast<double>(options.rank));
    state.entities = Eigen::MatrixXd::NullaryExpr(n, options.rank,
                                                  [&](Eigen::Index, Eigen::Index) { return sigma * rng.normal(); });
    state.weights.assign(slices.size(), Eigen::MatrixXd::Zero(options.rank, options.rank));
    state.slice_losses.assign(slices.size(), 0.0);
    state.refresh_slice_losses();

    std::vector<AlsTracePoint> trace;
    trace.push_back({0, 'I', state.total_loss()});
    state.relation_step(0, trace);

    for (int it = 1; it <= options.max_iters; ++it) {
        const double before = state.total_loss();
        state.entity_step(it, trace);
        state.relation_step(it, trace);
        const double after = state.total_loss();
        if (options.stop_tol > 0.0 && before - after <= options.stop_tol * std::max(1.0, before)) {
            break;
        }
    }

    AlsResult result;
    ModelConfig cfg;
    cfg.kind = ModelKind::rescal;
    cfg.h_entity = options.rank;
    result.model.config = cfg;
    RescalParams params;
    params.entities = std::move(state.entities);
    params.relation_weights = std::move(state.weights);
    result.model.params = std::move(params);
    result.trace = std::move(trace);
    result.final_loss = result.trace.back().loss;
    result.used_pseudo_inverse = state.used_pseudo_inverse;
    return result;
}

AlsResult fit_rescal_als(const KnowledgeGraph& kg, const AlsOptions& options) {
    std::vector<SparseSlice> slices;
    slices.reserve(static_cast<std::size_t>(kg.num_relations()));
    for (RelationId k = 0; k < kg.num_relations(); ++k) slices.push_back(kg.slice(k));
    return fit_rescal_als(slices, options);
}

}  // namespace kglp
