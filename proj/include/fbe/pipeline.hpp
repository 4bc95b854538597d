#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fbe/condenser.hpp"
#include "fbe/sigma_delta.hpp"
#include "fbe/transform.hpp"

namespace fbe {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Method : std::uint8_t { Sparse = 0, Fjlt = 1 };

const char* to_string(Method m);
Method parse_method(const std::string& s);

inline constexpr std::uint32_t kModelVersion = 1;

/// User-facing knobs for assembling a model. The quantizer order r is shared by
/// the quantizer and the condensation kernel; m = (r*lt - r + 1) * p.
struct ModelParams {
    Method method = Method::Sparse;
    Index n = 0;
    Index p = 1;
    int r = 1;
    std::int64_t lambda_tilde = 1;
    int sigma = 6;
    double mu = kDefaultMu;
    std::uint64_t seed = 0;
    /// Overrides the recommended sparsity when set.
    std::optional<double> sparsity;
    double wellspread_const = 1.0;
    SparsityOptions sparsity_options;
    bool allow_unsafe_sigma = false;
};

/**
 * Reproducible description of the two embedding maps
 *   sparse: x -> Q(A x),   fjlt: x -> Q(A H D x),
 * together with the condensation used for distance recovery.
 *
 * The random matrix and diagonal are regenerated from their seeds, or adopted
 * verbatim when loaded from an explicit-matrix model file.
 */
struct EmbeddingModel {
    Method method = Method::Sparse;
    Index n = 0;
    Index n_pad = 0;
    Index m = 0;
    Index p = 0;
    int r = 1;
    std::int64_t lambda_tilde = 1;
    QuantizerSpec quantizer;
    CondensationSpec condensation;
    std::uint64_t matrix_seed = 0;
    std::uint64_t diagonal_seed = 0;
    double sparsity = 1.0;
    double wellspread_const = 1.0;
    /// Multiplier that was applied to the raw data before embedding.
    double data_scale = 1.0;
    std::uint32_t version = kModelVersion;

    SparseGaussianMatrix<double> matrix;   // m x n_pad
    RandomSignDiagonal diagonal;           // n_pad, fjlt only

    /// A x or A H D x.
    VectorX<double> project(const Eigen::Ref<const VectorX<double>>& x) const;
};

/// The epsilon ~ p^{-1/2} heuristic for the JL distortion at condensed length p.
double implied_eps(Index p);

EmbeddingModel build_model(const ModelParams& params);

/// Raw fields as persisted; validates every cross-field invariant.
struct ModelFields {
    Method method = Method::Sparse;
    Index n = 0, n_pad = 0, m = 0, p = 0;
    int r = 1;
    std::int64_t lambda_tilde = 1;
    int sigma = 6;
    double mu = kDefaultMu, sparsity = 1.0, wellspread_const = 1.0, data_scale = 1.0;
    std::uint64_t matrix_seed = 0, diagonal_seed = 0;
    std::optional<SparseGaussianMatrix<double>> explicit_matrix;
    std::optional<RandomSignDiagonal> explicit_diagonal;
};

/// Throws ParameterError on any inconsistency (m != lambda p, r mismatch, ...).
EmbeddingModel assemble_model(ModelFields fields);

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct Dataset {
    RowMatrix vectors;        // k x n
    double scale_applied = 1.0;
    double kappa = 0.0;

    Index k() const { return vectors.rows(); }
    Index n() const { return vectors.cols(); }
};

/// mu / (2 sqrt(beta + ln(2m))): radius that keeps |A x|_inf <= mu w.h.p.
double kappa_bound(double mu, double beta, Index m);

/// Scales every row by kappa / max_j |x_j|_2 so the set fits B_2^n(kappa).
Dataset scale_dataset(const RowMatrix& raw, double kappa);

/// Wraps unscaled data (multiplier 1, kappa = max norm).
Dataset unscaled_dataset(RowMatrix raw);

// ---------------------------------------------------------------------------
// Embedding and queries
// ---------------------------------------------------------------------------

struct EmbeddedPoint {
    VectorX<double> projection;           // A x or Phi x
    QuantizationResult<double> quantized;
    CondensedCode condensed;
    bool well_spread = true;
};

EmbeddedPoint embed_point(const EmbeddingModel& model, const Eigen::Ref<const VectorX<double>>& x);

struct EmbedDiagnostics {
    std::vector<bool> amplitude_violation;
    Index amplitude_violations = 0;
    Index wellspread_failures = 0;
    double wellspread_failure_fraction = 0.0;
    double implied_eps = 0.0;
    std::vector<std::string> warnings;
};

struct EmbedOutput {
    std::vector<BinaryCode> codes;
    std::vector<CondensedCode> condensed;
    EmbedDiagnostics diagnostics;
};

/// Projects, quantizes and condenses every row. Points are independent and are
/// processed in parallel when OpenMP is available; results do not depend on it.
EmbedOutput embed_dataset(const EmbeddingModel& model, const Dataset& data);

/// l1 pseudometric between two condensed codes of this model.
double estimate_distance(const EmbeddingModel& model, const CondensedCode& a, const CondensedCode& b);

// ---------------------------------------------------------------------------
// Memoryless sign baseline
// ---------------------------------------------------------------------------

/// q = sign(G x) with G an m x n standard Gaussian drawn row-major from
/// std::mt19937_64(seed). Zero quantizes to +1.
class SignBaseline {
public:
    SignBaseline(std::uint64_t seed, Index m, Index n);
    BinaryCode embed(const Eigen::Ref<const VectorX<double>>& x) const;
    const MatrixX<double>& matrix() const { return g_; }

private:
    MatrixX<double> g_;
};

BinaryCode sign_msq_baseline_embed(std::uint64_t seed, Index m, const Eigen::Ref<const VectorX<double>>& x);

/// Fraction of differing bits, (1/2m) |qa - qb|_1.
double hamming_angular_distance(const BinaryCode& a, const BinaryCode& b);

}  // namespace fbe
