#include "fbe/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <sstream>

namespace fbe {

const char* to_string(Method m) { return m == Method::Fjlt ? "fjlt" : "sparse"; }

Method parse_method(const std::string& s) {
    if (s == "sparse") return Method::Sparse;
    if (s == "fjlt") return Method::Fjlt;
    throw ParameterError("unknown method '" + s + "' (expected sparse or fjlt)");
}

double implied_eps(Index p) {
    if (p < 1) throw ParameterError("p must be positive");
    return std::min(0.49, 1.0 / std::sqrt(static_cast<double>(p)));
}

VectorX<double> EmbeddingModel::project(const Eigen::Ref<const VectorX<double>>& x) const {
    if (x.size() != n)
        throw ShapeError("input has dimension " + std::to_string(x.size()) + ", model expects " + std::to_string(n));
    require_finite(x, "embedding input");
    VectorX<double> y(m);
    if (method == Method::Sparse) {
        matrix.multiply_into(x, y);
        return y;
    }
    VectorX<double> padded = VectorX<double>::Zero(n_pad);
    const auto& s = diagonal.signs();
    for (Index i = 0; i < n; ++i) padded(i) = s(i) * x(i);
    fwht_inplace(padded);
    matrix.multiply_into(padded, y);
    return y;
}

EmbeddingModel build_model(const ModelParams& params) {
    if (params.n < 1) throw ParameterError("input dimension must be positive");
    if (!(params.wellspread_const > 0.0)) throw ParameterError("wellspread constant must be positive");

    ModelFields f;
    f.method = params.method;
    f.n = params.n;
    f.n_pad = params.method == Method::Fjlt ? next_power_of_two(params.n) : params.n;
    f.p = params.p;
    f.r = params.r;
    f.lambda_tilde = params.lambda_tilde;
    f.sigma = params.sigma;
    f.mu = params.mu;
    f.wellspread_const = params.wellspread_const;
    f.matrix_seed = derive_seed(params.seed, {stream::kMatrix});
    f.diagonal_seed = derive_seed(params.seed, {stream::kDiagonal});

    // Validate the quantizer and condensation before sizing anything.
    (void)build_quantizer(params.r, params.sigma, params.mu, params.allow_unsafe_sigma);
    const CondensationSpec cond = build_condensation(params.r, params.lambda_tilde, params.p);
    f.m = cond.m;

    if (params.sparsity) {
        f.sparsity = *params.sparsity;
    } else {
        f.sparsity = recommended_sparsity(f.n_pad, implied_eps(params.p), kernel_flatness(cond),
                                          params.wellspread_const, params.method == Method::Fjlt,
                                          params.sparsity_options);
    }
    return assemble_model(std::move(f));
}

EmbeddingModel assemble_model(ModelFields f) {
    if (f.n < 1 || f.m < 1 || f.p < 1 || f.n_pad < 1) throw ParameterError("model dimensions must be positive");
    if (f.method == Method::Sparse && f.n_pad != f.n) throw ParameterError("sparse models require n_pad == n");
    if (f.method == Method::Fjlt && f.n_pad != next_power_of_two(f.n))
        throw ParameterError("fjlt models require n_pad = next power of two >= n");
    if (!(f.sparsity > 0.0 && f.sparsity <= 1.0)) throw ParameterError("sparsity must lie in (0, 1]");
    if (!(f.wellspread_const > 0.0)) throw ParameterError("wellspread constant must be positive");
    if (!(f.data_scale > 0.0) || !std::isfinite(f.data_scale)) throw ParameterError("data scale must be positive");

    EmbeddingModel model;
    model.method = f.method;
    model.n = f.n;
    model.n_pad = f.n_pad;
    model.m = f.m;
    model.p = f.p;
    model.r = f.r;
    model.lambda_tilde = f.lambda_tilde;
    // A persisted sigma below 6 was an explicit choice at build time.
    model.quantizer = build_quantizer(f.r, f.sigma, f.mu, /*allow_unsafe_sigma=*/true);
    model.condensation = build_condensation(f.r, f.lambda_tilde, f.p);
    if (model.condensation.m != f.m)
        throw ParameterError("m = " + std::to_string(f.m) + " is not lambda * p = " +
                             std::to_string(model.condensation.m));
    model.matrix_seed = f.matrix_seed;
    model.diagonal_seed = f.diagonal_seed;
    model.sparsity = f.sparsity;
    model.wellspread_const = f.wellspread_const;
    model.data_scale = f.data_scale;

    if (f.explicit_matrix) {
        if (f.explicit_matrix->rows() != f.m || f.explicit_matrix->cols() != f.n_pad)
            throw ParameterError("explicit matrix has the wrong shape");
        model.matrix = std::move(*f.explicit_matrix);
    } else {
        model.matrix = SparseGaussianMatrix<double>::generate(f.m, f.n_pad, f.sparsity, f.matrix_seed);
    }
    if (f.method == Method::Fjlt) {
        if (f.explicit_diagonal) {
            if (f.explicit_diagonal->dim() != f.n_pad) throw ParameterError("explicit diagonal has the wrong size");
            model.diagonal = std::move(*f.explicit_diagonal);
        } else {
            model.diagonal = RandomSignDiagonal::generate(f.n_pad, f.diagonal_seed);
        }
    }
    return model;
}

// ---------------------------------------------------------------------------

double kappa_bound(double mu, double beta, Index m) {
    if (!(mu > 0.0 && mu <= 1.0)) throw ParameterError("mu must lie in (0, 1]");
    if (!(beta > 0.0)) throw ParameterError("beta must be positive");
    if (m < 1) throw ParameterError("m must be positive");
    return mu / (2.0 * std::sqrt(beta + std::log(2.0 * static_cast<double>(m))));
}

Dataset scale_dataset(const RowMatrix& raw, double kappa) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ParameterError("kappa must be positive");
    if (!raw.allFinite()) throw InputError("dataset contains non-finite values");
    const double max_norm = raw.rows() == 0 ? 0.0 : raw.rowwise().norm().maxCoeff();
    if (!(max_norm > 0.0)) throw DegenerateInputError("dataset has no nonzero vector to scale");
    Dataset d;
    d.scale_applied = kappa / max_norm;
    d.vectors = raw * d.scale_applied;
    d.kappa = kappa;
    return d;
}

Dataset unscaled_dataset(RowMatrix raw) {
    if (!raw.allFinite()) throw InputError("dataset contains non-finite values");
    Dataset d;
    d.kappa = raw.rows() == 0 ? 0.0 : raw.rowwise().norm().maxCoeff();
    d.vectors = std::move(raw);
    d.scale_applied = 1.0;
    return d;
}

EmbeddedPoint embed_point(const EmbeddingModel& model, const Eigen::Ref<const VectorX<double>>& x) {
    EmbeddedPoint pt;
    pt.projection = model.project(x);
    pt.quantized = quantize(model.quantizer, pt.projection);
    pt.condensed = condense(model.condensation, pt.quantized.code);
    pt.well_spread = is_well_spread(x, model.wellspread_const);
    return pt;
}

EmbedOutput embed_dataset(const EmbeddingModel& model, const Dataset& data) {
    if (data.n() != model.n && data.k() > 0)
        throw ShapeError("dataset dimension " + std::to_string(data.n()) + " != model dimension " +
                         std::to_string(model.n));
    const Index k = data.k();
    EmbedOutput out;
    out.codes.resize(static_cast<std::size_t>(k));
    out.condensed.resize(static_cast<std::size_t>(k));
    std::vector<char> violation(static_cast<std::size_t>(k), 0), spread(static_cast<std::size_t>(k), 1);

    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (Index j = 0; j < k; ++j) {
        try {
            EmbeddedPoint pt = embed_point(model, data.vectors.row(j).transpose());
            const auto idx = static_cast<std::size_t>(j);
            out.codes[idx] = BinaryCode(pt.quantized.code);
            out.condensed[idx] = std::move(pt.condensed);
            violation[idx] = pt.quantized.amplitude_violation;
            spread[idx] = pt.well_spread;
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    auto& diag = out.diagnostics;
    diag.amplitude_violation.assign(violation.begin(), violation.end());
    diag.amplitude_violations = std::count(violation.begin(), violation.end(), 1);
    diag.implied_eps = implied_eps(model.p);
    if (model.method == Method::Sparse) {
        diag.wellspread_failures = std::count(spread.begin(), spread.end(), 0);
        diag.wellspread_failure_fraction = k == 0 ? 0.0 : static_cast<double>(diag.wellspread_failures) / k;
    }
    if (diag.amplitude_violations > 0) {
        std::ostringstream os;
        os << diag.amplitude_violations << " of " << k << " points exceed the amplitude budget mu = "
           << model.quantizer.mu << "; the stability guarantee does not cover them";
        diag.warnings.push_back(os.str());
    }
    if (diag.wellspread_failures > 0) {
        std::ostringstream os;
        os << diag.wellspread_failures << " of " << k << " points are not well spread (c_w = "
           << model.wellspread_const << "); consider --method fjlt";
        diag.warnings.push_back(os.str());
    }
    return out;
}

double estimate_distance(const EmbeddingModel& model, const CondensedCode& a, const CondensedCode& b) {
    const auto& c = model.condensation;
    for (const CondensedCode* code : {&a, &b})
        if (code->size() != c.p || code->bit_width != c.bit_width || code->norm_factor != c.norm_factor)
            throw IncompatibleError("condensed code was not produced by this model");
    return l1_distance(a, b);
}

// ---------------------------------------------------------------------------

SignBaseline::SignBaseline(std::uint64_t seed, Index m, Index n) {
    if (m < 1 || n < 1) throw ParameterError("baseline dimensions must be positive");
    RandomEngine rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    g_.resize(m, n);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) g_(i, j) = normal(rng);
}

BinaryCode SignBaseline::embed(const Eigen::Ref<const VectorX<double>>& x) const {
    if (x.size() != g_.cols()) throw ShapeError("baseline input has the wrong dimension");
    require_finite(x, "baseline input");
    const double norm = x.norm();
    if (!(norm > 0.0)) throw InputError("sign baseline needs a nonzero vector");
    const VectorX<double> gx = g_ * (x / norm);
    CodeVector q(gx.size());
    for (Index i = 0; i < gx.size(); ++i) q(i) = gx(i) >= 0.0 ? 1 : -1;
    return BinaryCode(q);
}

BinaryCode sign_msq_baseline_embed(std::uint64_t seed, Index m, const Eigen::Ref<const VectorX<double>>& x) {
    return SignBaseline(seed, m, x.size()).embed(x);
}

double hamming_angular_distance(const BinaryCode& a, const BinaryCode& b) {
    if (a.size() != b.size()) throw ShapeError("codes have different lengths");
    if (a.size() == 0) return 0.0;
    std::int64_t diff = 0;
    const auto& x = a.bytes();
    const auto& y = b.bytes();
    for (std::size_t i = 0; i < x.size(); ++i) diff += std::popcount(static_cast<unsigned>(x[i] ^ y[i]));
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

}  // namespace fbe
