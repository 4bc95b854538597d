// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fbe/bench.hpp"
#include "fbe/codestore.hpp"
#include "fbe/pipeline.hpp"

using namespace fbe;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 0;

struct Outcome {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------

MatrixX<double> hadamard_by_parity(Index n) {
    MatrixX<double> h(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            int parity = 0;
            for (Index b = i & j; b; b >>= 1) parity ^= static_cast<int>(b & 1);
            h(i, j) = (parity ? -1.0 : 1.0) / std::sqrt(static_cast<double>(n));
        }
    return h;
}

MatrixX<double> dense_from_csr(const SparseGaussianMatrix<double>& a) {
    MatrixX<double> d = MatrixX<double>::Zero(a.rows(), a.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index k = a.row_offsets()(i); k < a.row_offsets()(i + 1); ++k) d(i, a.col_indices()(k)) = a.values()(k);
    return d;
}

Outcome transforms_oracle() {
    std::mt19937_64 rng(kSeed);
    std::normal_distribution<double> g;
    double fwht_err = 0.0;
    for (Index n = 2; n <= 64; n *= 2) {
        const MatrixX<double> h = hadamard_by_parity(n);
        for (int t = 0; t < 10; ++t) {
            VectorX<double> x(n);
            for (Index i = 0; i < n; ++i) x(i) = g(rng);
            fwht_err = std::max(fwht_err, (fwht(x) - h * x).cwiseAbs().maxCoeff());
        }
    }
    double rel = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Index m = 1 + static_cast<Index>(rng() % 64), n = 1 + static_cast<Index>(rng() % 64);
        const double s = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
        const auto a = SparseGaussianMatrix<double>::generate(m, n, s, rng());
        VectorX<double> x(n);
        for (Index i = 0; i < n; ++i) x(i) = g(rng);
        const VectorX<double> ref = dense_from_csr(a) * x;
        rel = std::max(rel, (sparse_matvec(a, x) - ref).norm() / std::max(ref.norm(), 1e-300));
    }
    return {fwht_err <= 1e-12 && rel <= 1e-12,
            "fwht max-abs err " + fmt("%.2e", fwht_err) + ", sparse_matvec max rel err " + fmt("%.2e", rel)};
}

// ---------------------------------------------------------------------------

Outcome difference_identity() {
    const Index m = 4096;
    double worst = 0.0;
    for (int r = 1; r <= 3; ++r) {
        const auto spec = build_quantizer(r, 6, kDefaultMu);
        for (int t = 0; t < 100; ++t) {
            RandomEngine rng(derive_seed(kSeed, {stream::kData, static_cast<std::uint64_t>(r),
                                                 static_cast<std::uint64_t>(t)}));
            std::uniform_real_distribution<double> u(-0.3, 0.3);
            VectorX<double> y(m);
            for (Index i = 0; i < m; ++i) y(i) = u(rng);
            const auto res = quantize(spec, y);
            VectorX<double> d = reconstruct_state_u(r, y, res.code);
            for (int k = 0; k < r; ++k)
                for (Index i = m - 1; i > 0; --i) d(i) -= d(i - 1);
            worst = std::max(worst, (d - (y - res.code.cast<double>())).cwiseAbs().maxCoeff());
        }
    }
    return {worst <= 1e-9 * m, "max residual " + fmt("%.2e", worst) + " (limit " + fmt("%.2e", 1e-9 * m) + ")"};
}

// ---------------------------------------------------------------------------

Outcome stability() {
    const std::vector<Index> ms{1 << 10, 1 << 12, 1 << 14};
    bool pass = true;
    std::string detail;
    for (int r = 1; r <= 3; ++r) {
        const auto rows = stability_scan(build_quantizer(r, 6, kDefaultMu), ms, 100, 0.3, kSeed);
        detail += "r=" + std::to_string(r) + " max|u|";
        for (const auto& row : rows) {
            detail += " " + fmt("%.4f", row.max_u_inf);
            const double ratio = row.max_u_inf / rows[0].max_u_inf;
            if (ratio > 1.05) pass = false;
        }
        detail += " (worst ratio " +
                  fmt("%.3f", std::max(rows[1].max_u_inf, rows[2].max_u_inf) / rows[0].max_u_inf) + "); ";
    }
    // Greedy bound at full amplitude.
    const auto greedy = stability_scan(build_quantizer(1, 6, 0.999), ms, 100, 0.999, kSeed);
    double greedy_max = 0.0;
    for (const auto& row : greedy) greedy_max = std::max(greedy_max, row.max_u_inf);
    if (greedy_max > 1.0) pass = false;
    detail += "r=1 |y|<=0.999 max|u| " + fmt("%.6f", greedy_max);
    return {pass, detail};
}

// ---------------------------------------------------------------------------
// Criteria 4 and 5 share one grid: p = 16, n = 1024, signflat data scaled into
// the radius-0.5 ball, mu = 0.5, s = 0.1, lambda in {4, ..., 64} (rounded up to
// the next valid length for r = 2), 100 points per cell.

struct DecayGrid {
    double slope[3] = {0, 0, 0};
    std::vector<double> lambdas[3], errors[3];
    Index points = 0, checked = 0, chain_failures = 0;
};

DecayGrid run_decay_grid() {
    const Index n = 1024, p = 16, k = 100;
    const double mu = 0.5;
    const Dataset raw = synth_wellspread(n, k, Generator::SignFlat, derive_seed(kSeed, {stream::kData}));
    const Dataset data = scale_dataset(raw.vectors, mu);
    DecayGrid grid;
    for (int r : {1, 2}) {
        for (Index lam : {4, 8, 16, 32, 64}) {
            ModelParams mp;
            mp.n = n;
            mp.p = p;
            mp.r = r;
            mp.lambda_tilde = lambda_tilde_for(lam * p, p, r, true);
            mp.mu = mu;
            mp.sparsity = 0.1;
            mp.seed = derive_seed(kSeed, {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(lam)});
            const EmbeddingModel model = build_model(mp);
            const double bound = operator_bound(model.condensation);
            double sum = 0.0;
            for (Index j = 0; j < k; ++j) {
                const auto pt = embed_point(model, data.vectors.row(j).transpose());
                const VectorX<double> e = pt.quantized.code.cast<double>() - pt.projection;
                const double err = condense_real(model.condensation, e).lpNorm<1>();
                sum += err;
                ++grid.points;
                if (!pt.quantized.amplitude_violation) {
                    ++grid.checked;
                    const double u = reconstruct_state_u(r, pt.projection, pt.quantized.code).cwiseAbs().maxCoeff();
                    if (!(err <= bound * u)) ++grid.chain_failures;
                }
            }
            grid.lambdas[r].push_back(static_cast<double>(model.condensation.lambda));
            grid.errors[r].push_back(sum / static_cast<double>(k));
        }
        const auto& x = grid.lambdas[r];
        const auto& y = grid.errors[r];
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            mx += std::log(x[i]) / static_cast<double>(x.size());
            my += std::log(y[i]) / static_cast<double>(x.size());
        }
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
            sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
        }
        grid.slope[r] = sxy / sxx;
    }
    return grid;
}

Outcome decay(const DecayGrid& g) {
    bool pass = true;
    std::string detail;
    for (int r : {1, 2}) {
        const double limit = -(r - 0.5) + 0.15;
        pass = pass && g.slope[r] <= limit;
        detail += "r=" + std::to_string(r) + " slope " + fmt("%.4f", g.slope[r]) + " (limit " + fmt("%.2f", limit) +
                  ", errors";
        for (double e : g.errors[r]) detail += " " + fmt("%.4g", e);
        detail += "); ";
    }
    return {pass, detail};
}

Outcome chain(const DecayGrid& g) {
    return {g.points == 1000 && g.checked > 0 && g.chain_failures == 0,
            std::to_string(g.points) + " points, " + std::to_string(g.checked) + " without amplitude violation, " +
                std::to_string(g.chain_failures) + " failures"};
}

// ---------------------------------------------------------------------------

Outcome jl_distortion() {
    const Index n = 1024, p = 512;
    ModelParams mp;
    mp.n = n;
    mp.p = p;
    mp.r = 1;
    mp.lambda_tilde = 8;
    mp.seed = derive_seed(kSeed, {6});
    const EmbeddingModel model = build_model(mp);
    const Dataset data = synth_wellspread(n, 200, Generator::SignFlat, derive_seed(kSeed, {stream::kData, 6}));
    std::vector<double> rel;
    for (Index j = 0; j < 100; ++j) {
        const VectorX<double> d = (data.vectors.row(2 * j) - data.vectors.row(2 * j + 1)).transpose();
        const double est = condense_real(model.condensation, model.project(d)).lpNorm<1>();
        rel.push_back(std::abs(est - d.norm()) / d.norm());
    }
    std::vector<double> sorted = rel;
    std::sort(sorted.begin(), sorted.end());
    const double median = 0.5 * (sorted[49] + sorted[50]);
    const auto within = std::count_if(rel.begin(), rel.end(), [](double v) { return v <= 0.25; });
    return {median <= 0.15 && within >= 90, "median rel distortion " + fmt("%.4f", median) + ", " +
                                                std::to_string(within) + "/100 within 0.25 (s = " +
                                                fmt("%.4g", model.sparsity) + ", m = " + std::to_string(model.m) + ")"};
}

// ---------------------------------------------------------------------------

Outcome mape_curve() {
    MapeBenchConfig cfg;
    cfg.n = 1024;
    cfg.k = 50;
    cfg.p_list = {64};
    cfg.m_list = {256, 512, 1024, 2048, 4096};
    cfg.r_list = {1, 2};
    cfg.trials = 3;
    cfg.seed = kSeed;
    cfg.snap_m = true;
    cfg.record_timing = false;
    const auto res = run_mape_bench(cfg);
    std::vector<double> r1, r2;
    for (const auto& row : res.rows) {
        if (row.r == 1) r1.push_back(row.mape);
        if (row.r == 2) r2.push_back(row.mape);
    }
    bool monotone = true;
    for (std::size_t i = 1; i < r1.size(); ++i) monotone = monotone && r1[i] <= r1[i - 1] * 1.05;
    const bool flat = std::abs(r1[4] - r1[3]) <= 0.2 * std::max(r1[3], r1[4]);
    const bool ordered = r2[4] <= r1[4];
    const bool small = r2[4] < 0.15;
    std::string detail = "r=1";
    for (double v : r1) detail += " " + fmt("%.4f", v);
    detail += "; r=2";
    for (double v : r2) detail += " " + fmt("%.4f", v);
    detail += std::string("; non-increasing ") + (monotone ? "yes" : "no") + ", flattens " + (flat ? "yes" : "no") +
              ", r2<=r1 " + (ordered ? "yes" : "no") + ", r2<0.15 " + (small ? "yes" : "no");
    return {monotone && flat && ordered && small, detail};
}

// ---------------------------------------------------------------------------

Outcome storage(const fs::path& dir) {
    const Index k = 10000;
    const auto spec = build_condensation(2, 33, 64);
    std::mt19937_64 rng(kSeed);
    CodeFile codes{spec.m, {}};
    std::vector<CondensedCode> condensed;
    for (Index j = 0; j < k; ++j) {
        CodeVector q(spec.m);
        for (Index i = 0; i < spec.m; ++i) q(i) = (rng() >> 63) ? 1 : -1;
        codes.codes.emplace_back(q);
        condensed.push_back(condense(spec, q));
    }
    const std::string cpath = (dir / "codes.bin").string(), dpath = (dir / "cond.bin").string();
    write_codes(cpath, codes);
    write_condensed(dpath, condensed_file(spec, condensed));
    const auto want_c = kCodesHeaderBytes + static_cast<std::uintmax_t>(k) * ((spec.m + 7) / 8);
    const int w = static_cast<int>(std::ceil(std::log2(std::pow(33.0, 2) + 1))) + 1;
    const auto want_d = kCondensedHeaderBytes + static_cast<std::uintmax_t>(k) * ((spec.p * w + 7) / 8);
    const bool sizes = fs::file_size(cpath) == want_c && fs::file_size(dpath) == want_d && spec.bit_width == w;
    const auto back_c = read_codes(cpath);
    const auto back_d = read_condensed(dpath);
    bool exact = back_c.codes.size() == codes.codes.size() && back_d.codes.size() == condensed.size();
    for (std::size_t j = 0; exact && j < codes.codes.size(); ++j)
        exact = back_c.codes[j] == codes.codes[j] && back_d.codes[j] == condensed[j];
    return {sizes && exact, "codes " + std::to_string(fs::file_size(cpath)) + " B (expected " +
                                std::to_string(want_c) + "), condensed " + std::to_string(fs::file_size(dpath)) +
                                " B (expected " + std::to_string(want_d) + ", bit_width " + std::to_string(w) +
                                "), round trip " + (exact ? "bit-exact" : "MISMATCH")};
}

// ---------------------------------------------------------------------------

Outcome baseline() {
    const Index n = 64, m = 4096;
    std::mt19937_64 rng(kSeed);
    std::normal_distribution<double> g;
    VectorX<double> x(n);
    for (Index i = 0; i < n; ++i) x(i) = g(rng);
    VectorX<double> e1 = VectorX<double>::Zero(n), e2 = VectorX<double>::Zero(n);
    e1(0) = 1.0;
    e2(1) = 1.0;
    double same = 0.0, anti = 1.0, worst_orth = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const SignBaseline b(seed, m, n);
        const auto qx = b.embed(x);
        same = std::max(same, hamming_angular_distance(qx, b.embed(x)));
        anti = std::min(anti, hamming_angular_distance(qx, b.embed(VectorX<double>(-x))));
        worst_orth = std::max(worst_orth, std::abs(hamming_angular_distance(b.embed(e1), b.embed(e2)) - 0.5));
    }
    return {same == 0.0 && anti == 1.0 && worst_orth <= 0.05,
            "identical " + fmt("%g", same) + ", antipodal " + fmt("%g", anti) + ", orthogonal max |d - 0.5| " +
                fmt("%.4f", worst_orth) + " over 50 seeds"};
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const fs::path& dir) {
    const std::string cli = FBE_CLI_PATH;
    auto run_all = [&](const fs::path& out) {
        fs::create_directories(out);
        const auto q = [&](const std::string& name) { return (out / name).string(); };
        const std::vector<std::string> cmds{
            "synth --n 256 --k 12 --seed 3 --out " + q("x.bin"),
            "embed --input " + q("x.bin") + " --p 16 --lambda-tilde 5 --r 2 --seed 9 --out-model " + q("m.bin") +
                " --out-codes " + q("c.bin") + " --out-condensed " + q("d.bin"),
            "embed --input " + q("x.bin") + " --method fjlt --p 16 --lambda-tilde 8 --r 1 --seed 9 " +
                "--explicit-matrix --out-model " + q("mf.bin") + " --out-codes " + q("cf.bin") +
                " --out-condensed " + q("df.bin"),
            "query --model " + q("m.bin") + " --condensed " + q("d.bin") + " --all-pairs --out " + q("pairs.csv"),
            "bench mape --n 128 --k 10 --p 8 --m-list 64,128 --r-list 1,2 --snap-m --trials 2 --seed 4 "
            "--no-timing --out " + q("curve.csv"),
            "bench stability --m-list 256,1024 --trials 10 --seed 4 --out " + q("stab.csv"),
        };
        for (const auto& c : cmds) {
            const std::string full = cli + " " + c + " >/dev/null 2>&1";
            const int status = std::system(full.c_str());
            if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return "command failed: " + c;
        }
        return std::string();
    };
    const fs::path a = dir / "run_a", b = dir / "run_b";
    for (const auto& p : {a, b})
        if (auto err = run_all(p); !err.empty()) return {false, err};
    int files = 0, differ = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        ++files;
        if (slurp(entry.path()) != slurp(b / entry.path().filename())) ++differ;
    }
    return {files == 10 && differ == 0,
            std::to_string(files) + " artifacts from 6 commands, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main() {
    const fs::path dir = fs::temp_directory_path() / ("fbe_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);

    struct Criterion {
        int id;
        const char* name;
        double time_limit;  // seconds, 0 for none
        std::function<Outcome()> run;
    };
    DecayGrid grid;
    const std::vector<Criterion> criteria{
        {1, "transform oracle equivalence", 5, transforms_oracle},
        {2, "sigma-delta difference identity", 10, difference_identity},
        {3, "quantizer stability", 60, stability},
        {4, "quantization-term decay",
         60,
         [&] {
             grid = run_decay_grid();
             return decay(grid);
         }},
        {5, "end-to-end error chain", 0, [&] { return chain(grid); }},
        {6, "JL distortion", 30, jl_distortion},
        {7, "MAPE curve shape", 300, mape_curve},
        {8, "storage layout", 0, [&] { return storage(dir); }},
        {9, "sign baseline sanity", 0, baseline},
        {10, "CLI determinism", 0, [&] { return determinism(dir); }},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o{false, ""};
        const auto t0 = Clock::now();
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = seconds_since(t0);
        if (c.time_limit > 0 && secs > c.time_limit) {
            o.pass = false;
            o.detail += "; exceeded time limit";
        }
        failures += !o.pass;
        std::printf("criterion %2d %s: %s [%.2fs] %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, secs,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    fs::remove_all(dir);
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
