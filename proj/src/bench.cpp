#include "fbe/bench.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace fbe {

Generator parse_generator(const std::string& s) {
    if (s == "signflat") return Generator::SignFlat;
    if (s == "gaussian") return Generator::Gaussian;
    throw ParameterError("unknown generator '" + s + "' (expected signflat or gaussian)");
}

Dataset synth_wellspread(Index n, Index k, Generator generator, std::uint64_t seed) {
    if (n < 1 || k < 1) throw ParameterError("synth_wellspread needs n >= 1 and k >= 1");
    RowMatrix x(k, n);
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    for (Index j = 0; j < k; ++j) {
        RandomEngine rng(derive_seed(seed, {stream::kData, static_cast<std::uint64_t>(j)}));
        if (generator == Generator::SignFlat) {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            const double rho = 1.0 - u(rng);  // (0, 1]
            const double a = rho * inv_sqrt_n;
            for (Index i = 0; i < n; ++i) x(j, i) = (rng() >> 63) ? -a : a;
        } else {
            std::normal_distribution<double> g(0.0, 1.0);
            for (Index i = 0; i < n; ++i) x(j, i) = g(rng);
            const double norm = x.row(j).norm();
            if (norm > 0.0) x.row(j) /= norm;
        }
    }
    return unscaled_dataset(std::move(x));
}

double mape(const std::vector<double>& estimates, const std::vector<double>& truths) {
    if (estimates.size() != truths.size()) throw ShapeError("mape: estimate and truth counts differ");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (!(truths[i] > 0.0)) continue;
        sum += std::abs(estimates[i] - truths[i]) / truths[i];
        ++count;
    }
    return count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(count);
}

std::int64_t lambda_tilde_for(Index m, Index p, int r, bool snap) {
    if (m < 1 || p < 1 || r < 1) throw ParameterError("m, p and r must be positive");
    if (m % p != 0)
        throw ParameterError("m = " + std::to_string(m) + " is not divisible by p = " + std::to_string(p));
    const Index lambda = m / p;
    const Index num = lambda + r - 1;
    if (num % r == 0) return num / r;
    if (!snap)
        throw ParameterError("m/p = " + std::to_string(lambda) + " is not of the form r*lt - r + 1 for r = " +
                             std::to_string(r));
    return num / r + 1;
}

void validate_mape_grid(const MapeBenchConfig& cfg) {
    if (cfg.n < 1) throw ParameterError("n must be positive");
    if (cfg.k < 2) throw ParameterError("k must be at least 2");
    if (cfg.trials < 1) throw ParameterError("trials must be at least 1");
    if (cfg.p_list.empty() || cfg.r_list.empty()) throw ParameterError("p-list and r-list must be nonempty");
    if (!(cfg.kappa > 0.0)) throw ParameterError("kappa must be positive");
    (void)build_quantizer(1, cfg.sigma, cfg.mu);
    for (int r : cfg.r_list)
        for (Index p : cfg.p_list)
            for (Index m : cfg.m_list) (void)lambda_tilde_for(m, p, r, cfg.snap_m);
}

namespace {

using Clock = std::chrono::steady_clock;

struct Cell {
    int r;        // 0 for the unquantized reference
    Index p;
    Index m;      // nominal
    std::int64_t lambda_tilde;
    int trial;
};

struct TrialData {
    Dataset data;
    std::vector<double> truths;  // i < j, row-major pair order
};

std::vector<double> pair_truths(const Dataset& d) {
    std::vector<double> t;
    const Index k = d.k();
    t.reserve(static_cast<std::size_t>(k * (k - 1) / 2));
    for (Index i = 0; i < k; ++i)
        for (Index j = i + 1; j < k; ++j) t.push_back((d.vectors.row(i) - d.vectors.row(j)).norm());
    return t;
}

ModelParams cell_params(const MapeBenchConfig& cfg, const Cell& c) {
    ModelParams mp;
    mp.method = cfg.method;
    mp.n = cfg.n;
    mp.p = c.p;
    mp.r = c.r == 0 ? 1 : c.r;
    mp.lambda_tilde = c.lambda_tilde;
    mp.sigma = cfg.sigma;
    mp.mu = cfg.mu;
    mp.sparsity = cfg.sparsity;
    mp.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(c.r), static_cast<std::uint64_t>(c.p),
                                     static_cast<std::uint64_t>(c.m), static_cast<std::uint64_t>(c.trial)});
    return mp;
}

double run_cell(const MapeBenchConfig& cfg, const Cell& c, const TrialData& td) {
    const EmbeddingModel model = build_model(cell_params(cfg, c));
    const Index k = td.data.k();
    std::vector<double> est;
    est.reserve(td.truths.size());
    if (c.r == 0) {
        std::vector<VectorX<double>> images(static_cast<std::size_t>(k));
        for (Index i = 0; i < k; ++i)
            images[static_cast<std::size_t>(i)] =
                condense_real(model.condensation, model.project(td.data.vectors.row(i).transpose()));
        for (Index i = 0; i < k; ++i)
            for (Index j = i + 1; j < k; ++j)
                est.push_back((images[static_cast<std::size_t>(i)] - images[static_cast<std::size_t>(j)]).lpNorm<1>());
    } else {
        const EmbedOutput out = embed_dataset(model, td.data);
        for (Index i = 0; i < k; ++i)
            for (Index j = i + 1; j < k; ++j)
                est.push_back(estimate_distance(model, out.condensed[static_cast<std::size_t>(i)],
                                                out.condensed[static_cast<std::size_t>(j)]));
    }
    return mape(est, td.truths);
}

}  // namespace

MapeBenchResult run_mape_bench(const MapeBenchConfig& cfg) {
    validate_mape_grid(cfg);

    std::vector<TrialData> trials(static_cast<std::size_t>(cfg.trials));
    for (int t = 0; t < cfg.trials; ++t) {
        auto& td = trials[static_cast<std::size_t>(t)];
        const Dataset raw = synth_wellspread(cfg.n, cfg.k, cfg.generator,
                                             derive_seed(cfg.seed, {stream::kData, static_cast<std::uint64_t>(t)}));
        td.data = scale_dataset(raw.vectors, cfg.kappa);
        td.truths = pair_truths(td.data);
    }

    // Cell groups: one per (r, p, m); each expands to `trials` work items.
    std::vector<Cell> groups;
    for (int r : cfg.r_list)
        for (Index p : cfg.p_list)
            for (Index m : cfg.m_list) groups.push_back({r, p, m, lambda_tilde_for(m, p, r, cfg.snap_m), 0});
    if (cfg.unquantized_reference)
        for (Index p : cfg.p_list)
            for (Index m : cfg.m_list) groups.push_back({0, p, m, lambda_tilde_for(m, p, 1, false), 0});

    const auto items = static_cast<Index>(groups.size() * trials.size());
    std::vector<double> values(static_cast<std::size_t>(items), 0.0);
    std::vector<double> millis(static_cast<std::size_t>(items), 0.0);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (Index w = 0; w < items; ++w) {
        try {
            Cell c = groups[static_cast<std::size_t>(w) / trials.size()];
            c.trial = static_cast<int>(static_cast<std::size_t>(w) % trials.size());
            const auto start = Clock::now();
            values[static_cast<std::size_t>(w)] = run_cell(cfg, c, trials[static_cast<std::size_t>(c.trial)]);
            millis[static_cast<std::size_t>(w)] =
                std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    MapeBenchResult result;
    std::map<std::pair<int, Index>, MapeBenchResult::Best> best;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        double sum = 0.0, ms = 0.0;
        for (std::size_t t = 0; t < trials.size(); ++t) {
            sum += values[g * trials.size() + t];
            ms += millis[g * trials.size() + t];
        }
        const Cell& c = groups[g];
        CurveRow row;
        row.r = c.r;
        row.p = c.p;
        const int r_eff = c.r == 0 ? 1 : c.r;
        row.m = c.p * (static_cast<Index>(r_eff) * (c.lambda_tilde - 1) + 1);
        row.mape = sum / static_cast<double>(trials.size());
        row.wall_ms = cfg.record_timing ? ms / static_cast<double>(trials.size()) : 0.0;
        result.rows.push_back(row);
        if (c.r > 0) {
            const auto key = std::make_pair(c.r, c.m);
            auto it = best.find(key);
            if (it == best.end() || row.mape < it->second.mape) best[key] = {c.r, c.m, c.p, row.mape};
        }
    }
    for (const auto& [key, b] : best) result.best_p.push_back(b);
    return result;
}

std::vector<StabilityRow> run_stability_bench(const StabilityBenchConfig& cfg) {
    if (cfg.amplitude > cfg.mu)
        throw ParameterError("amplitude " + format_double(cfg.amplitude) + " exceeds mu = " + format_double(cfg.mu));
    std::vector<StabilityRow> rows;
    for (int r : cfg.r_list) {
        const QuantizerSpec spec = build_quantizer(r, cfg.sigma, cfg.mu);
        auto part = stability_scan(spec, cfg.m_list, cfg.trials, cfg.amplitude, cfg.seed);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    return rows;
}

}  // namespace fbe
