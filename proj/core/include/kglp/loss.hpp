#pragma once

#include <algorithm>
#include <cmath>

namespace kglp {

enum class LossKind { log_loss, squared_loss, margin_ranking };

inline double sigmoid(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// -log Ber(y | p). Probabilities at exactly 0 or 1 are clamped to
/// [1e-12, 1 - 1e-12]; `clamped` reports when that happened.
inline double log_loss(double p, int y, bool* clamped = nullptr) {
    constexpr double kEps = 1e-12;
    if (clamped) *clamped = (p <= 0.0 || p >= 1.0);
    p = std::clamp(p, kEps, 1.0 - kEps);
    return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

inline double squared_loss(double p, int y) {
    const double d = p - static_cast<double>(y);
    return d * d;
}

/// max(margin + f_neg - f_pos, 0); zero iff f_pos >= f_neg + margin.
inline double margin_ranking_loss(double f_pos, double f_neg, double margin = 1.0) {
    return std::max(margin + f_neg - f_pos, 0.0);
}

}  // namespace kglp
