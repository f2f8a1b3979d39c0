#pragma once

#include <cmath>
#include <stdexcept>

namespace bbm {

inline constexpr double kSqrt2 = 1.4142135623730951;

// Standard normal CDF. Absolute error well below 1e-12 (erfc-backed).
inline double normal_cdf(double z) {
    if (!std::isfinite(z))
        throw std::invalid_argument("normal_cdf: non-finite input");
    return 0.5 * std::erfc(-z / kSqrt2);
}

// Gaussian density with mean 0 and variance t.
inline double gaussian_density(double t, double x) {
    if (!(t > 0.0))
        throw std::invalid_argument("gaussian_density: t must be > 0");
    return std::exp(-x * x / (2.0 * t)) / std::sqrt(2.0 * M_PI * t);
}

// Front centering m_t = sqrt(2) t - (3 / (2 sqrt(2))) log t.
inline double centering(double t) {
    if (!(t > 0.0))
        throw std::invalid_argument("centering: t must be > 0");
    return kSqrt2 * t - 1.5 / kSqrt2 * std::log(t);
}

// Parameters of the localization envelope min(s, t-s)^alpha.
struct EnvelopeParams {
    double t;
    double alpha;
    double s;
};

inline void validate(const EnvelopeParams& p) {
    if (!(p.alpha > 0.0 && p.alpha <= 0.5))
        throw std::invalid_argument("envelope: alpha must lie in (0, 1/2]");
    if (!(p.s >= 0.0 && p.s <= p.t))
        throw std::invalid_argument("envelope: s must lie in [0, t]");
}

inline double envelope(const EnvelopeParams& p) {
    validate(p);
    return std::pow(std::min(p.s, p.t - p.s), p.alpha);
}

inline double envelope(double t, double alpha, double s) {
    return envelope(EnvelopeParams{t, alpha, s});
}

} // namespace bbm
