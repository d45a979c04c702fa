#include "adb/theory.hpp"

#include <cmath>
#include <numbers>

#include "adb/errors.hpp"
#include "adb/rng.hpp"
#include "adb/stats.hpp"

namespace adb::theory {

double alpha() { return std::sqrt(2.0 / std::numbers::pi); }

std::vector<double> half_normal_sample(double k, int n, std::uint64_t seed) {
    if (!(k > 0.0)) throw InputError("half_normal_sample: k must be positive");
    if (n < 1) throw InputError("half_normal_sample: n must be >= 1");
    SplitMix64 rng(seed);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (auto& v : out) v = std::fabs(rng.next_normal()) * k;
    return out;
}

double raw_moment(int n, double k) {
    if (!(k > 0.0)) throw InputError("raw_moment: k must be positive");
    switch (n) {
        case 1: return alpha() * k;
        case 2: return k * k;
        case 3: return 2.0 * alpha() * k * k * k;
        case 4: return 3.0 * k * k * k * k;
        default: throw InputError("raw_moment: order must be in {1, 2, 3, 4}");
    }
}

double cov_TU(double k, double delta) {
    if (!(k > 0.0)) throw InputError("cov_TU: k must be positive");
    return 2.0 * k * k * k * (k - alpha() * delta);
}

double rho_TU(double k, double delta) {
    if (!(k > 0.0)) throw InputError("rho_TU: k must be positive");
    const double a = alpha();
    const double denom_arg =
        k * k - 2.0 * a * delta * k + (2.0 - 4.0 / std::numbers::pi) * delta * delta;
    if (!(denom_arg > 0.0))
        throw DomainError("rho_TU: non-positive denominator argument");
    return (k - a * delta) / std::sqrt(denom_arg);
}

double rho_limit_small_k() {
    return -alpha() / std::sqrt(2.0 - 4.0 / std::numbers::pi);
}

double mc_rho(double k, double delta, int n, std::uint64_t seed) {
    if (n < 10000) throw InputError("mc_rho: need n >= 10^4 samples");
    const std::vector<double> bias = half_normal_sample(k, n, seed);
    std::vector<double> t_vals(bias.size());
    std::vector<double> u_vals(bias.size());
    for (std::size_t i = 0; i < bias.size(); ++i) {
        const ErrorComponents ec = ErrorComponents::from_bias(bias[i], delta);
        t_vals[i] = ec.t_val;
        u_vals[i] = ec.u_val;
    }
    try {
        return stats::pearson(t_vals, u_vals);
    } catch (const EstimationError&) {
        throw EstimationError("mc_rho: degenerate sample variance");
    }
}

bool negative_regime(double k, double delta) {
    if (!(k > 0.0)) throw InputError("negative_regime: k must be positive");
    return k < alpha() * delta;
}

}  // namespace adb::theory
