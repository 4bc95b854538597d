#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fbe/errors.hpp"
#include "fbe/random.hpp"
#include "fbe/transform.hpp"

namespace fbe {

using CodeVector = VectorX<std::int8_t>;

/**
 * One-bit r-th order Sigma-Delta quantizer driven by the sparse filter
 * h = sum_j d_j delta^{n_j}, with n_j = sigma (j-1)^2 + 1 and Lagrange weights
 * d_j = prod_{i != j} n_i / (n_i - n_j). For r = 1 the filter is a single unit
 * tap at lag 1 and the scheme is the greedy first-order recursion.
 *
 * Ties quantize to +1.
 */
struct QuantizerSpec {
    int order = 1;
    int sigma = 6;
    double mu = 0.95;
    std::vector<Index> positions;   // n_j, strictly increasing, n_1 = 1
    std::vector<double> weights;    // d_j

    Index max_lag() const { return positions.empty() ? 0 : positions.back(); }
    double filter_l1() const {
        double s = 0.0;
        for (double d : weights) s += std::abs(d);
        return s;
    }
    bool operator==(const QuantizerSpec&) const = default;
};

inline constexpr double kDefaultMu = 0.95;

inline QuantizerSpec build_quantizer(int r, int sigma, double mu, bool allow_unsafe_sigma = false) {
    if (r < 1) throw ParameterError("quantizer order must be >= 1");
    if (sigma < 1) throw ParameterError("sigma must be positive");
    if (sigma < 6 && !allow_unsafe_sigma)
        throw ParameterError("sigma must be >= 6 (got " + std::to_string(sigma) +
                             "); smaller spacings are not known to be stable");
    if (!(mu > 0.0 && mu < 1.0)) throw ParameterError("mu must lie in (0, 1)");

    QuantizerSpec spec;
    spec.order = r;
    spec.sigma = sigma;
    spec.mu = mu;
    spec.positions.resize(static_cast<std::size_t>(r));
    for (int j = 0; j < r; ++j) {
        const long double pos = static_cast<long double>(sigma) * j * j + 1;
        if (pos > static_cast<long double>(std::numeric_limits<Index>::max() / 2))
            throw CapacityError("filter tap position overflows the index type");
        spec.positions[static_cast<std::size_t>(j)] = static_cast<Index>(pos);
    }
    spec.weights.resize(static_cast<std::size_t>(r));
    for (int j = 0; j < r; ++j) {
        long double d = 1.0L;
        const auto nj = static_cast<long double>(spec.positions[static_cast<std::size_t>(j)]);
        for (int i = 0; i < r; ++i) {
            if (i == j) continue;
            const auto ni = static_cast<long double>(spec.positions[static_cast<std::size_t>(i)]);
            d *= ni / (ni - nj);
        }
        spec.weights[static_cast<std::size_t>(j)] = static_cast<double>(d);
    }
    return spec;
}

template <typename Scalar = double>
struct QuantizationResult {
    CodeVector code;           // entries in {-1, +1}
    VectorX<Scalar> state_w;   // filter-domain state w_i = (h*w)_i + y_i - q_i
    bool amplitude_violation = false;
};

/// Runs q_i = sign((h*w)_i + y_i), w_i = (h*w)_i + y_i - q_i from zero state.
/// amplitude_violation is set (not thrown) when |y|_inf > spec.mu.
template <typename Derived>
QuantizationResult<typename Derived::Scalar> quantize(const QuantizerSpec& spec,
                                                      const Eigen::MatrixBase<Derived>& y) {
    using Scalar = typename Derived::Scalar;
    if (spec.order < 1 || spec.positions.size() != static_cast<std::size_t>(spec.order) ||
        spec.weights.size() != spec.positions.size())
        throw ParameterError("malformed quantizer spec");
    require_finite(y, "quantizer input");

    const Index m = y.size();
    QuantizationResult<Scalar> out;
    out.code.resize(m);
    out.state_w.resize(m);
    const std::size_t taps = spec.positions.size();
    for (Index i = 0; i < m; ++i) {
        Scalar a(0);
        for (std::size_t j = 0; j < taps; ++j) {
            const Index lag = spec.positions[j];
            if (i - lag < 0) break;  // positions increase, later taps reach further back
            a += static_cast<Scalar>(spec.weights[j]) * out.state_w(i - lag);
        }
        const Scalar t = a + y(i);
        const std::int8_t q = t >= Scalar(0) ? 1 : -1;
        out.code(i) = q;
        out.state_w(i) = t - static_cast<Scalar>(q);
    }
    out.amplitude_violation = m > 0 && static_cast<double>(y.cwiseAbs().maxCoeff()) > spec.mu;
    return out;
}

/// Binomial coefficient C(r, j) as a double (r is a small quantizer order).
inline double binomial(int r, int j) {
    double c = 1.0;
    for (int i = 1; i <= j; ++i) c = c * (r - j + i) / i;
    return c;
}

/// State u with P^r u = y - q, via u_i = sum_{j=1}^r (-1)^{j-1} C(r,j) u_{i-j} + y_i - q_i
/// and zero initial conditions.
template <typename DerivedY>
VectorX<typename DerivedY::Scalar> reconstruct_state_u(int r, const Eigen::MatrixBase<DerivedY>& y,
                                                       const CodeVector& q) {
    using Scalar = typename DerivedY::Scalar;
    if (r < 1) throw ParameterError("order must be >= 1");
    if (y.size() != q.size())
        throw ShapeError("reconstruct_state_u: y has length " + std::to_string(y.size()) +
                         " but q has length " + std::to_string(q.size()));
    std::vector<Scalar> coeff(static_cast<std::size_t>(r) + 1);
    for (int j = 1; j <= r; ++j) coeff[static_cast<std::size_t>(j)] = ((j % 2) ? 1 : -1) * binomial(r, j);

    const Index m = y.size();
    VectorX<Scalar> u(m);
    for (Index i = 0; i < m; ++i) {
        Scalar acc = y(i) - static_cast<Scalar>(q(i));
        for (int j = 1; j <= r && i - j >= 0; ++j) acc += coeff[static_cast<std::size_t>(j)] * u(i - j);
        u(i) = acc;
    }
    return u;
}

struct StabilityRow {
    int r = 0;
    Index m = 0;
    double max_u_inf = 0.0;
};

/// Quantizes `trials` i.i.d. Uniform[-amplitude, amplitude] inputs for every
/// length in m_list and records the largest reconstructed |u|_inf. Trial t at
/// length m draws from the stream derive_seed(seed, {stability, r, m, t}).
inline std::vector<StabilityRow> stability_scan(const QuantizerSpec& spec, const std::vector<Index>& m_list,
                                                int trials, double amplitude, std::uint64_t seed) {
    if (!(amplitude >= 0.0) || amplitude > spec.mu)
        throw ParameterError("stability amplitude must lie in [0, mu]");
    if (trials < 0) throw ParameterError("trials must be nonnegative");
    std::vector<StabilityRow> table;
    if (trials == 0) return table;
    for (Index m : m_list) {
        if (m < 1) throw ParameterError("sequence lengths must be positive");
        std::vector<double> per_trial(static_cast<std::size_t>(trials), 0.0);
#pragma omp parallel for schedule(dynamic)
        for (int t = 0; t < trials; ++t) {
            RandomEngine rng(derive_seed(seed, {stream::kStability, static_cast<std::uint64_t>(spec.order),
                                                static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(t)}));
            std::uniform_real_distribution<double> dist(-amplitude, amplitude);
            VectorX<double> y(m);
            for (Index i = 0; i < m; ++i) y(i) = dist(rng);
            const auto res = quantize(spec, y);
            per_trial[static_cast<std::size_t>(t)] =
                reconstruct_state_u(spec.order, y, res.code).cwiseAbs().maxCoeff();
        }
        table.push_back({spec.order, m, *std::max_element(per_trial.begin(), per_trial.end())});
    }
    return table;
}

}  // namespace fbe
