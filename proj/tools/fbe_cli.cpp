// fbe: command-line front end for embedding, distance queries and benchmarks.
//
// Exit codes: 0 success, 1 internal error, 2 usage/format error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fbe/bench.hpp"
#include "fbe/codestore.hpp"
#include "fbe/pipeline.hpp"

namespace {

using fbe::Index;

struct EmbedArgs {
    std::string input, method = "sparse", out_model, out_codes, out_condensed;
    Index p = 0;
    std::int64_t lambda_tilde = 0;
    int r = 1, sigma = 6;
    double mu = fbe::kDefaultMu, kappa = 1.0, wellspread_const = 1.0;
    std::optional<double> sparsity;
    std::uint64_t seed = 0;
    bool no_scale = false, explicit_matrix = false, unsafe_sigma = false;
};

struct QueryArgs {
    std::string model, condensed, out;
    std::vector<Index> pair;
    bool all_pairs = false, original_units = false;
};

struct MapeArgs {
    fbe::MapeBenchConfig cfg;
    std::vector<Index> p_list;
    std::string generator = "signflat", method = "sparse", out;
    std::optional<double> sparsity;
    bool no_reference = false, no_timing = false;
};

struct StabilityArgs {
    fbe::StabilityBenchConfig cfg;
    std::string out;
};

struct SynthArgs {
    Index n = 0, k = 0;
    std::string generator = "signflat", out;
    std::uint64_t seed = 0;
};

int run_embed(const EmbedArgs& a) {
    const auto start = std::chrono::steady_clock::now();
    fbe::Dataset raw = fbe::read_vectors(a.input);
    const fbe::Dataset data = a.no_scale ? raw : fbe::scale_dataset(raw.vectors, a.kappa);

    fbe::ModelParams mp;
    mp.method = fbe::parse_method(a.method);
    mp.n = data.n();
    mp.p = a.p;
    mp.r = a.r;
    mp.lambda_tilde = a.lambda_tilde;
    mp.sigma = a.sigma;
    mp.mu = a.mu;
    mp.seed = a.seed;
    mp.sparsity = a.sparsity;
    mp.wellspread_const = a.wellspread_const;
    mp.allow_unsafe_sigma = a.unsafe_sigma;
    fbe::EmbeddingModel model = fbe::build_model(mp);
    model.data_scale = data.scale_applied;

    const fbe::EmbedOutput out = fbe::embed_dataset(model, data);
    fbe::write_model(a.out_model, model, a.explicit_matrix);
    fbe::write_codes(a.out_codes, {model.m, out.codes});
    fbe::write_condensed(a.out_condensed, fbe::condensed_file(model.condensation, out.condensed));
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    const auto& d = out.diagnostics;
    std::printf("points            %lld\n", static_cast<long long>(data.k()));
    std::printf("method            %s (n=%lld, n_pad=%lld, sparsity=%.6g)\n", fbe::to_string(model.method),
                static_cast<long long>(model.n), static_cast<long long>(model.n_pad), model.sparsity);
    std::printf("m                 %lld (p=%lld, lambda=%lld, r=%d)\n", static_cast<long long>(model.m),
                static_cast<long long>(model.p), static_cast<long long>(model.condensation.lambda), model.r);
    std::printf("data scale        %.17g\n", model.data_scale);
    std::printf("bits per point    %lld condensed (p*bit_width, bit_width=%d) vs %lld code bits\n",
                static_cast<long long>(model.p * model.condensation.bit_width), model.condensation.bit_width,
                static_cast<long long>(model.m));
    std::printf("amplitude viol.   %lld\n", static_cast<long long>(d.amplitude_violations));
    if (model.method == fbe::Method::Sparse)
        std::printf("not well spread   %lld (%.4f)\n", static_cast<long long>(d.wellspread_failures),
                    d.wellspread_failure_fraction);
    std::printf("implied eps       %.4f\n", d.implied_eps);
    std::printf("wall time         %.3f ms\n", ms);
    for (const auto& w : d.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    return 0;
}

int run_query(const QueryArgs& a) {
    const fbe::EmbeddingModel model = fbe::read_model(a.model);
    const fbe::CondensedFile file = fbe::read_condensed(a.condensed);
    const double unit = a.original_units ? 1.0 / model.data_scale : 1.0;
    const auto k = static_cast<Index>(file.codes.size());

    if (!a.pair.empty()) {
        const Index i = a.pair[0], j = a.pair[1];
        if (i < 0 || j < 0 || i >= k || j >= k)
            throw fbe::ParameterError("pair index out of range (k = " + std::to_string(k) + ")");
        const double est = fbe::estimate_distance(model, file.codes[static_cast<std::size_t>(i)],
                                                  file.codes[static_cast<std::size_t>(j)]) * unit;
        if (!a.out.empty()) fbe::write_pairs(a.out, {{i, j, est}});
        std::printf("%s\n", fbe::format_double(est).c_str());
        return 0;
    }
    std::vector<fbe::PairEstimate> rows;
    rows.reserve(static_cast<std::size_t>(k * (k - 1) / 2));
    for (Index i = 0; i < k; ++i)
        for (Index j = i + 1; j < k; ++j)
            rows.push_back({i, j,
                            fbe::estimate_distance(model, file.codes[static_cast<std::size_t>(i)],
                                                   file.codes[static_cast<std::size_t>(j)]) * unit});
    if (a.out.empty()) {
        std::printf("i,j,estimate\n");
        for (const auto& r : rows)
            std::printf("%lld,%lld,%s\n", static_cast<long long>(r.i), static_cast<long long>(r.j),
                        fbe::format_double(r.estimate).c_str());
    } else {
        fbe::write_pairs(a.out, rows);
        std::printf("wrote %zu pair estimates to %s\n", rows.size(), a.out.c_str());
    }
    return 0;
}

int run_mape(MapeArgs a) {
    auto& cfg = a.cfg;
    if (!a.p_list.empty()) cfg.p_list = a.p_list;
    cfg.generator = fbe::parse_generator(a.generator);
    cfg.method = fbe::parse_method(a.method);
    cfg.sparsity = a.sparsity;
    cfg.unquantized_reference = !a.no_reference;
    cfg.record_timing = !a.no_timing;
    const fbe::MapeBenchResult res = fbe::run_mape_bench(cfg);
    fbe::write_curve(a.out, res.rows);
    for (const auto& b : res.best_p)
        std::printf("r=%d m=%lld best p=%lld mape=%.6f\n", b.r, static_cast<long long>(b.m),
                    static_cast<long long>(b.p), b.mape);
    std::printf("wrote %zu rows to %s\n", res.rows.size(), a.out.c_str());
    return 0;
}

int run_stability(const StabilityArgs& a) {
    const auto rows = fbe::run_stability_bench(a.cfg);
    fbe::write_stability(a.out, rows);
    for (const auto& r : rows)
        std::printf("r=%d m=%lld max|u|=%.6f\n", r.r, static_cast<long long>(r.m), r.max_u_inf);
    return 0;
}

int run_synth(const SynthArgs& a) {
    const fbe::Dataset d = fbe::synth_wellspread(a.n, a.k, fbe::parse_generator(a.generator), a.seed);
    fbe::write_vectors(a.out, d.vectors);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sigma-Delta binary embedding with condensed l1 distance recovery"};
    app.require_subcommand(1);

    EmbedArgs ea;
    auto* embed = app.add_subcommand("embed", "embed a dataset into binary and condensed codes");
    embed->add_option("--input", ea.input, "CSQV or CSV vectors")->required();
    embed->add_option("--method", ea.method, "sparse or fjlt")->check(CLI::IsMember({"sparse", "fjlt"}));
    embed->add_option("--p", ea.p, "condensed length")->required();
    embed->add_option("--lambda-tilde", ea.lambda_tilde, "kernel width; lambda = r*lt - r + 1")->required();
    embed->add_option("--r", ea.r, "quantizer order");
    embed->add_option("--sigma", ea.sigma, "filter spacing (>= 6)");
    embed->add_option("--mu", ea.mu, "amplitude budget in (0,1)");
    embed->add_option("--seed", ea.seed, "model seed");
    embed->add_option("--out-model", ea.out_model)->required();
    embed->add_option("--out-codes", ea.out_codes)->required();
    embed->add_option("--out-condensed", ea.out_condensed)->required();
    embed->add_option("--kappa", ea.kappa, "radius the data are scaled into (default 1)");
    embed->add_flag("--no-scale", ea.no_scale, "embed the raw vectors without scaling");
    embed->add_option("--sparsity", ea.sparsity, "override the recommended sparsity");
    embed->add_option("--wellspread-const", ea.wellspread_const, "c_w in |x|_inf <= c_w n^-1/2 |x|_2");
    embed->add_flag("--explicit-matrix", ea.explicit_matrix, "store the matrix verbatim in the model file");
    embed->add_flag("--unsafe-sigma", ea.unsafe_sigma, "permit sigma < 6");

    QueryArgs qa;
    auto* query = app.add_subcommand("query", "estimate distances from condensed codes");
    query->add_option("--model", qa.model)->required();
    query->add_option("--condensed", qa.condensed)->required();
    auto* pair = query->add_option("--pair", qa.pair, "two code indices")->expected(2);
    auto* all = query->add_flag("--all-pairs", qa.all_pairs, "emit every pair i < j as CSV");
    pair->excludes(all);
    query->add_flag("--original-units", qa.original_units, "undo the dataset scaling");
    query->add_option("--out", qa.out, "output CSV");

    auto* bench = app.add_subcommand("bench", "benchmarks");
    bench->require_subcommand(1);

    MapeArgs ma;
    auto* mape = bench->add_subcommand("mape", "MAPE of distance estimates over an (r, p, m) grid");
    mape->add_option("--n", ma.cfg.n)->required();
    mape->add_option("--k", ma.cfg.k)->required();
    mape->add_option("--p,--p-list", ma.p_list, "condensed length(s)")->delimiter(',')->required();
    mape->add_option("--m-list", ma.cfg.m_list, "code lengths")->delimiter(',');
    mape->add_option("--r-list", ma.cfg.r_list, "quantizer orders")->delimiter(',');
    mape->add_option("--trials", ma.cfg.trials);
    mape->add_option("--generator", ma.generator)->check(CLI::IsMember({"signflat", "gaussian"}));
    mape->add_option("--seed", ma.cfg.seed);
    mape->add_option("--out", ma.out)->required();
    mape->add_option("--sigma", ma.cfg.sigma);
    mape->add_option("--mu", ma.cfg.mu);
    mape->add_option("--method", ma.method)->check(CLI::IsMember({"sparse", "fjlt"}));
    mape->add_option("--kappa", ma.cfg.kappa, "radius the data are scaled into (default 1)");
    mape->add_option("--sparsity", ma.sparsity, "override the recommended sparsity");
    mape->add_flag("--snap-m", ma.cfg.snap_m, "round lambda up to the nearest valid length for each r");
    mape->add_flag("--no-reference", ma.no_reference, "skip the unquantized reference rows (r = 0)");
    mape->add_flag("--no-timing", ma.no_timing, "write wall_ms = 0");

    StabilityArgs sa;
    auto* stab = bench->add_subcommand("stability", "max |u|_inf of the quantizer state across lengths");
    stab->add_option("--r-list", sa.cfg.r_list)->delimiter(',');
    stab->add_option("--sigma", sa.cfg.sigma);
    stab->add_option("--mu", sa.cfg.mu);
    stab->add_option("--amplitude", sa.cfg.amplitude);
    stab->add_option("--m-list", sa.cfg.m_list)->delimiter(',');
    stab->add_option("--trials", sa.cfg.trials);
    stab->add_option("--seed", sa.cfg.seed);
    stab->add_option("--out", sa.out)->required();

    SynthArgs ya;
    auto* synth = app.add_subcommand("synth", "write a synthetic well-spread dataset (CSQV)");
    synth->add_option("--n", ya.n)->required();
    synth->add_option("--k", ya.k)->required();
    synth->add_option("--generator", ya.generator)->check(CLI::IsMember({"signflat", "gaussian"}));
    synth->add_option("--seed", ya.seed);
    synth->add_option("--out", ya.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*embed) return run_embed(ea);
        if (*query) {
            if (qa.pair.empty() && !qa.all_pairs) throw fbe::ParameterError("query needs --pair I J or --all-pairs");
            return run_query(qa);
        }
        if (*mape) return run_mape(ma);
        if (*stab) return run_stability(sa);
        if (*synth) return run_synth(ya);
    } catch (const fbe::IoError& e) {
        std::fprintf(stderr, "%s: %s\n", e.kind(), e.what());
        return 1;
    } catch (const fbe::Error& e) {
        std::fprintf(stderr, "%s: %s\n", e.kind(), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 1;
}
