#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fbe/codestore.hpp"
#include "fbe/pipeline.hpp"

namespace fbe {

enum class Generator { SignFlat, Gaussian };

Generator parse_generator(const std::string& s);

/**
 * Synthetic well-spread points. Point j draws from its own stream
 * derive_seed(seed, {data, j}).
 *
 *  signflat: x_i = +-rho / sqrt(n) with rho ~ U(0, 1], so |x|_inf sqrt(n) = |x|_2.
 *  gaussian: i.i.d. N(0, 1) coordinates normalized to unit length.
 */
Dataset synth_wellspread(Index n, Index k, Generator generator, std::uint64_t seed);

/// Mean of |estimate - truth| / truth over entries with truth > 0.
double mape(const std::vector<double>& estimates, const std::vector<double>& truths);

/// Largest lt such that r*lt - r + 1 = m / p, or with snap the smallest valid
/// lambda >= m / p. Throws ParameterError for invalid cells.
std::int64_t lambda_tilde_for(Index m, Index p, int r, bool snap);

struct MapeBenchConfig {
    Index n = 1024;
    Index k = 50;
    std::vector<Index> p_list{64};
    std::vector<Index> m_list;
    std::vector<int> r_list{1, 2};
    int sigma = 6;
    double mu = kDefaultMu;
    int trials = 3;
    std::uint64_t seed = 0;
    Generator generator = Generator::SignFlat;
    Method method = Method::Sparse;
    /// Radius of the ball the data are scaled into.
    double kappa = 1.0;
    std::optional<double> sparsity;
    bool snap_m = false;
    bool unquantized_reference = true;
    bool record_timing = true;
};

struct MapeBenchResult {
    std::vector<CurveRow> rows;
    /// For every (r, nominal m), the p with the smallest MAPE.
    struct Best {
        int r;
        Index m;
        Index p;
        double mape;
    };
    std::vector<Best> best_p;
};

/// Grid of MAPE cells. The trial-t dataset comes from derive_seed(seed, {data, t})
/// and each cell's model from derive_seed(seed, {r, p, m, t}), so cells are
/// independent of evaluation order. Rows with r = 0 are the unquantized
/// condensed projection |V~ A (x - y)|_1 (first-order kernel).
MapeBenchResult run_mape_bench(const MapeBenchConfig& cfg);

/// Validates the grid without running it.
void validate_mape_grid(const MapeBenchConfig& cfg);

struct StabilityBenchConfig {
    std::vector<int> r_list{1, 2, 3};
    int sigma = 6;
    double mu = kDefaultMu;
    double amplitude = 0.3;
    std::vector<Index> m_list;
    int trials = 100;
    std::uint64_t seed = 0;
};

std::vector<StabilityRow> run_stability_bench(const StabilityBenchConfig& cfg);

}  // namespace fbe
