#pragma once

#include <Eigen/Dense>

#include <vector>

namespace kglp::detail {

struct LogisticOptions {
    double l1 = 0.0;
    double tol = 1e-8;
    int max_iters = 20000;
    bool include_bias = true;
};

struct LogisticFit {
    Eigen::VectorXd weights;
    double bias = 0.0;
    std::vector<double> objective;  // after each proximal step
};

/// Minimizes sum_i logloss(sigmoid(x_i.w + bias + offset_i), y_i) + l1 |w|_1
/// by ISTA with a fixed step 1/L, L from the infinity-norm bound on the
/// spectral radius of X'X / 4. The bias is never penalized. Monotone descent
/// holds for any step <= 1/L.
LogisticFit fit_logistic_l1(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels,
                            const Eigen::VectorXd& offsets, const LogisticOptions& options);

}  // namespace kglp::detail
