#include "logistic.hpp"

#include <cmath>

#include "kglp/loss.hpp"
#include "kglp/types.hpp"

namespace kglp::detail {

namespace {

double objective_value(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                       const Eigen::VectorXd& offsets, const Eigen::VectorXd& w, double bias,
                       double l1) {
    const Eigen::VectorXd z = x * w + Eigen::VectorXd::Constant(x.rows(), bias) + offsets;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        // log(1 + exp(-y z)) in a stable form
        const double m = y[i] == 1 ? z[i] : -z[i];
        loss += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    }
    return loss + l1 * w.lpNorm<1>();
}

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

}  // namespace

LogisticFit fit_logistic_l1(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels,
                            const Eigen::VectorXd& offsets, const LogisticOptions& options) {
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    if (n == 0 || labels.size() != n) throw DataError("logistic fit needs labeled rows");
    if (offsets.size() != n) throw DataError("offset length mismatch");
    const auto n_pos = (labels.array() == 1).count();
    if (n_pos == 0 || n_pos == n) throw DataError("logistic fit needs both classes");

    // Lipschitz bound on the smooth part. Treat the bias as an all-ones column.
    Eigen::MatrixXd design(n, d + (options.include_bias ? 1 : 0));
    design.leftCols(d) = features;
    if (options.include_bias) design.col(d).setOnes();
    const Eigen::MatrixXd gram = design.transpose() * design;
    const double lipschitz =
        std::max(gram.cwiseAbs().rowwise().sum().maxCoeff() / 4.0, 1e-12);
    const double step = 1.0 / lipschitz;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double bias = 0.0;
    LogisticFit fit;
    fit.objective.push_back(objective_value(features, labels, offsets, w, bias, options.l1));

    for (int it = 0; it < options.max_iters; ++it) {
        const Eigen::VectorXd z =
            features * w + Eigen::VectorXd::Constant(n, bias) + offsets;
        Eigen::VectorXd residual(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            residual[i] = sigmoid(z[i]) - static_cast<double>(labels[i]);
        }
        const Eigen::VectorXd grad_w = features.transpose() * residual;
        for (Eigen::Index j = 0; j < d; ++j) {
            w[j] = soft_threshold(w[j] - step * grad_w[j], step * options.l1);
        }
        if (options.include_bias) bias -= step * residual.sum();

        const double value = objective_value(features, labels, offsets, w, bias, options.l1);
        const double previous = fit.objective.back();
        fit.objective.push_back(value);
        if (std::abs(previous - value) < options.tol) break;
    }

    fit.weights = std::move(w);
    fit.bias = bias;
    return fit;
}

}  // namespace kglp::detail
