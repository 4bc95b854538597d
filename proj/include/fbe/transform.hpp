#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fbe/errors.hpp"
#include "fbe/random.hpp"

namespace fbe {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

inline Index next_power_of_two(Index n) {
    if (n < 1) throw ParameterError("dimension must be positive");
    Index p = 1;
    while (p < n) {
        if (p > std::numeric_limits<Index>::max() / 2)
            throw CapacityError("padded dimension overflows the index type");
        p <<= 1;
    }
    return p;
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
    if (!x.allFinite()) throw InputError(std::string(what) + " contains non-finite values");
}

// ---------------------------------------------------------------------------
// Sparse Gaussian projection
// ---------------------------------------------------------------------------

/**
 * Random m x n matrix whose entries are independently zero with probability
 * 1 - s and N(0, 1/s) otherwise, stored in compressed row form.
 *
 * Sampling visits entries in row-major order on one std::mt19937_64 stream
 * seeded with `seed`. Each entry consumes one uniform draw in [0, 1); when it
 * falls below s, a standard normal draw (redrawn on an exact zero) is scaled by
 * 1/sqrt(s). The stream layout is part of the reproducibility contract: the
 * same (rows, cols, sparsity, seed) regenerate bit-identical entries.
 */
template <typename Scalar = double>
class SparseGaussianMatrix {
public:
    using Vector = VectorX<Scalar>;
    using IndexVector = VectorX<Index>;

    SparseGaussianMatrix() = default;

    static SparseGaussianMatrix generate(Index rows, Index cols, double sparsity,
                                         std::uint64_t seed) {
        if (rows < 1 || cols < 1) throw ParameterError("matrix dimensions must be positive");
        if (!(sparsity > 0.0 && sparsity <= 1.0))
            throw ParameterError("sparsity must lie in (0, 1], got " + std::to_string(sparsity));
        if (rows > std::numeric_limits<Index>::max() / cols)
            throw CapacityError("rows * cols overflows the index type");

        RandomEngine rng(seed);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double scale = 1.0 / std::sqrt(sparsity);

        std::vector<Index> offsets;
        std::vector<Index> indices;
        std::vector<Scalar> values;
        offsets.reserve(static_cast<std::size_t>(rows) + 1);
        const double expected = sparsity * static_cast<double>(rows) * static_cast<double>(cols);
        indices.reserve(static_cast<std::size_t>(expected * 1.1) + 16);
        values.reserve(indices.capacity());

        offsets.push_back(0);
        for (Index i = 0; i < rows; ++i) {
            for (Index j = 0; j < cols; ++j) {
                if (uniform(rng) >= sparsity) continue;
                double g = 0.0;
                while (g == 0.0) g = normal(rng);
                indices.push_back(j);
                values.push_back(static_cast<Scalar>(g * scale));
            }
            offsets.push_back(static_cast<Index>(indices.size()));
        }

        SparseGaussianMatrix a;
        a.rows_ = rows;
        a.cols_ = cols;
        a.sparsity_ = sparsity;
        a.seed_ = seed;
        a.offsets_ = Eigen::Map<const IndexVector>(offsets.data(), static_cast<Index>(offsets.size()));
        a.indices_ = Eigen::Map<const IndexVector>(indices.data(), static_cast<Index>(indices.size()));
        a.values_ = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
        return a;
    }

    /// Adopts explicit CSR arrays (e.g. read back from disk) after checking
    /// every structural invariant. Violations raise ParameterError.
    static SparseGaussianMatrix from_parts(Index rows, Index cols, double sparsity,
                                           std::uint64_t seed, IndexVector offsets,
                                           IndexVector indices, Vector values) {
        if (rows < 1 || cols < 1) throw ParameterError("matrix dimensions must be positive");
        if (!(sparsity > 0.0 && sparsity <= 1.0)) throw ParameterError("sparsity must lie in (0, 1]");
        if (offsets.size() != rows + 1) throw ParameterError("row_offsets must have rows + 1 entries");
        if (offsets(0) != 0) throw ParameterError("row_offsets[0] must be 0");
        if (indices.size() != values.size() || offsets(rows) != values.size())
            throw ParameterError("row_offsets[m] must equal the stored-value count");
        for (Index i = 0; i < rows; ++i) {
            if (offsets(i + 1) < offsets(i)) throw ParameterError("row_offsets must be nondecreasing");
            for (Index k = offsets(i); k < offsets(i + 1); ++k) {
                if (indices(k) < 0 || indices(k) >= cols)
                    throw ParameterError("column index out of range");
                if (k > offsets(i) && indices(k) <= indices(k - 1))
                    throw ParameterError("column indices must increase within a row");
                if (!std::isfinite(static_cast<double>(values(k))) || values(k) == Scalar(0))
                    throw ParameterError("stored values must be finite and nonzero");
            }
        }
        SparseGaussianMatrix a;
        a.rows_ = rows;
        a.cols_ = cols;
        a.sparsity_ = sparsity;
        a.seed_ = seed;
        a.offsets_ = std::move(offsets);
        a.indices_ = std::move(indices);
        a.values_ = std::move(values);
        return a;
    }

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    double sparsity() const { return sparsity_; }
    std::uint64_t seed() const { return seed_; }
    Index nonZeros() const { return values_.size(); }

    const IndexVector& row_offsets() const { return offsets_; }
    const IndexVector& col_indices() const { return indices_; }
    const Vector& values() const { return values_; }

    MatrixX<Scalar> toDense() const {
        MatrixX<Scalar> dense = MatrixX<Scalar>::Zero(rows_, cols_);
        for (Index i = 0; i < rows_; ++i)
            for (Index k = offsets_(i); k < offsets_(i + 1); ++k) dense(i, indices_(k)) = values_(k);
        return dense;
    }

    /// Row-wise CSR product into a caller-owned buffer; no checks.
    template <typename In, typename Out>
    void multiply_into(const Eigen::MatrixBase<In>& x, Eigen::MatrixBase<Out>& y) const {
        for (Index i = 0; i < rows_; ++i) {
            Scalar acc(0);
            for (Index k = offsets_(i); k < offsets_(i + 1); ++k) acc += values_(k) * x(indices_(k));
            y(i) = acc;
        }
    }

    bool operator==(const SparseGaussianMatrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && sparsity_ == o.sparsity_ &&
               seed_ == o.seed_ && offsets_ == o.offsets_ && indices_ == o.indices_ &&
               values_ == o.values_;
    }

private:
    Index rows_ = 0;
    Index cols_ = 0;
    double sparsity_ = 1.0;
    std::uint64_t seed_ = 0;
    IndexVector offsets_;
    IndexVector indices_;
    Vector values_;
};

template <typename Scalar, typename Derived>
VectorX<Scalar> sparse_matvec(const SparseGaussianMatrix<Scalar>& a,
                              const Eigen::MatrixBase<Derived>& x) {
    if (x.size() != a.cols())
        throw ShapeError("sparse_matvec: input length " + std::to_string(x.size()) +
                         " != matrix cols " + std::to_string(a.cols()));
    require_finite(x, "sparse_matvec input");
    VectorX<Scalar> y(a.rows());
    a.multiply_into(x, y);
    return y;
}

template <typename Scalar, typename Derived>
VectorX<Scalar> operator*(const SparseGaussianMatrix<Scalar>& a, const Eigen::MatrixBase<Derived>& x) {
    return sparse_matvec(a, x);
}

// ---------------------------------------------------------------------------
// Walsh-Hadamard transform
// ---------------------------------------------------------------------------

/// In-place normalized Walsh-Hadamard transform, H_ij = n^{-1/2} (-1)^<i,j>.
/// Natural (Hadamard) ordering, radix-2 butterflies, O(n log n).
template <typename Derived>
void fwht_inplace(Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    const Index n = x.size();
    if (!is_power_of_two(n))
        throw ShapeError("fwht length must be a power of two, got " + std::to_string(n));
    for (Index h = 1; h < n; h <<= 1) {
        for (Index i = 0; i < n; i += 2 * h) {
            for (Index j = i; j < i + h; ++j) {
                const Scalar a = x(j);
                const Scalar b = x(j + h);
                x(j) = a + b;
                x(j + h) = a - b;
            }
        }
    }
    x *= Scalar(1) / std::sqrt(static_cast<Scalar>(n));
}

template <typename Derived>
void fwht_inplace(Eigen::MatrixBase<Derived>&& x) {
    fwht_inplace(x);
}

template <typename Derived>
VectorX<typename Derived::Scalar> fwht(const Eigen::MatrixBase<Derived>& x) {
    VectorX<typename Derived::Scalar> y = x;
    fwht_inplace(y);
    return y;
}

/// Dense normalized Hadamard matrix of order n (tests and small oracles only).
template <typename Scalar = double>
MatrixX<Scalar> hadamard_matrix(Index n) {
    if (!is_power_of_two(n)) throw ShapeError("Hadamard order must be a power of two");
    MatrixX<Scalar> h(n, n);
    const Scalar norm = Scalar(1) / std::sqrt(static_cast<Scalar>(n));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            h(i, j) = (__builtin_popcountll(static_cast<unsigned long long>(i & j)) & 1) ? -norm : norm;
    return h;
}

// ---------------------------------------------------------------------------
// Random sign diagonal and the composed FJLT
// ---------------------------------------------------------------------------

/// Diagonal of independent fair signs. Entry i is +1 when the top bit of the
/// i-th draw from std::mt19937_64(seed) is clear, -1 otherwise.
class RandomSignDiagonal {
public:
    using SignVector = VectorX<std::int8_t>;

    RandomSignDiagonal() = default;

    static RandomSignDiagonal generate(Index dim, std::uint64_t seed) {
        if (dim < 1) throw ParameterError("diagonal dimension must be positive");
        RandomEngine rng(seed);
        RandomSignDiagonal d;
        d.seed_ = seed;
        d.signs_.resize(dim);
        for (Index i = 0; i < dim; ++i) d.signs_(i) = (rng() >> 63) ? std::int8_t(-1) : std::int8_t(1);
        return d;
    }

    static RandomSignDiagonal from_signs(SignVector signs, std::uint64_t seed) {
        if (signs.size() < 1) throw ParameterError("diagonal dimension must be positive");
        for (Index i = 0; i < signs.size(); ++i)
            if (signs(i) != 1 && signs(i) != -1) throw ParameterError("diagonal entries must be +1 or -1");
        RandomSignDiagonal d;
        d.seed_ = seed;
        d.signs_ = std::move(signs);
        return d;
    }

    Index dim() const { return signs_.size(); }
    std::uint64_t seed() const { return seed_; }
    const SignVector& signs() const { return signs_; }

    bool operator==(const RandomSignDiagonal& o) const { return seed_ == o.seed_ && signs_ == o.signs_; }

private:
    std::uint64_t seed_ = 0;
    SignVector signs_;
};

/// Phi = A H D acting on zero-padded inputs; A is m x n_pad.
template <typename Scalar = double>
class FjltOperator {
public:
    FjltOperator() = default;

    FjltOperator(SparseGaussianMatrix<Scalar> matrix, RandomSignDiagonal diagonal, Index input_dim)
        : matrix_(std::move(matrix)), diagonal_(std::move(diagonal)), input_dim_(input_dim) {
        if (input_dim_ < 1) throw ParameterError("FJLT input dimension must be positive");
        const Index pad = next_power_of_two(input_dim_);
        if (matrix_.cols() != pad || diagonal_.dim() != pad)
            throw ShapeError("FJLT matrix cols and diagonal dim must equal the padded dimension " +
                             std::to_string(pad));
    }

    static FjltOperator generate(Index m, Index n, double sparsity, std::uint64_t matrix_seed,
                                 std::uint64_t diagonal_seed) {
        const Index pad = next_power_of_two(n);
        return FjltOperator(SparseGaussianMatrix<Scalar>::generate(m, pad, sparsity, matrix_seed),
                            RandomSignDiagonal::generate(pad, diagonal_seed), n);
    }

    Index rows() const { return matrix_.rows(); }
    Index input_dim() const { return input_dim_; }
    Index padded_dim() const { return matrix_.cols(); }
    const SparseGaussianMatrix<Scalar>& matrix() const { return matrix_; }
    const RandomSignDiagonal& diagonal() const { return diagonal_; }

    /// H D x for the zero-padded x.
    template <typename Derived>
    VectorX<Scalar> spread(const Eigen::MatrixBase<Derived>& x) const {
        if (x.size() != input_dim_)
            throw ShapeError("FJLT input length " + std::to_string(x.size()) + " != " +
                             std::to_string(input_dim_));
        require_finite(x, "FJLT input");
        VectorX<Scalar> padded = VectorX<Scalar>::Zero(padded_dim());
        const auto& s = diagonal_.signs();
        for (Index i = 0; i < input_dim_; ++i) padded(i) = static_cast<Scalar>(s(i)) * x(i);
        fwht_inplace(padded);
        return padded;
    }

    MatrixX<Scalar> toDense() const {
        MatrixX<Scalar> hd = hadamard_matrix<Scalar>(padded_dim());
        for (Index j = 0; j < padded_dim(); ++j) hd.col(j) *= static_cast<Scalar>(diagonal_.signs()(j));
        return (matrix_.toDense() * hd).leftCols(input_dim_);
    }

private:
    SparseGaussianMatrix<Scalar> matrix_;
    RandomSignDiagonal diagonal_;
    Index input_dim_ = 0;
};

template <typename Scalar, typename Derived>
VectorX<Scalar> apply_fjlt(const FjltOperator<Scalar>& op, const Eigen::MatrixBase<Derived>& x) {
    VectorX<Scalar> spread = op.spread(x);
    VectorX<Scalar> y(op.rows());
    op.matrix().multiply_into(spread, y);
    return y;
}

// ---------------------------------------------------------------------------
// Sparsity and spreading helpers
// ---------------------------------------------------------------------------

enum class LogBase { Natural, Binary };

struct SparsityOptions {
    /// Multiplier in s = constant * c_w^2 * ratio / (eps * n).
    double constant = 2.0;
    /// Base of the extra log(n) factor applied in FJLT mode.
    LogBase log_base = LogBase::Natural;
};

/// Sparsity level for the projection, clamped to 1:
/// s = min(1, C c_w^2 (|v|_inf / |v|_2)^2 / (eps n)) times log(n) for the FJLT.
inline double recommended_sparsity(Index n, double eps, double v_inf_over_v2_sq,
                                   double wellspread_const, bool fjlt_mode,
                                   const SparsityOptions& opts = {}) {
    if (n < 1) throw ParameterError("n must be positive");
    if (!(eps > 0.0 && eps < 0.5)) throw ParameterError("eps must lie in (0, 1/2)");
    if (!(v_inf_over_v2_sq > 0.0) || !(wellspread_const > 0.0) || !(opts.constant > 0.0))
        throw ParameterError("sparsity inputs must be positive");
    const double nd = static_cast<double>(n);
    double s = opts.constant * wellspread_const * wellspread_const * v_inf_over_v2_sq / (eps * nd);
    if (fjlt_mode) s *= (opts.log_base == LogBase::Natural) ? std::log(nd) : std::log2(nd);
    if (!(s > 0.0)) {
        // n = 1 in FJLT mode makes log(n) = 0; fall back to a dense matrix.
        return 1.0;
    }
    return std::min(1.0, s);
}

/// True when |x|_inf <= c_w n^{-1/2} |x|_2 (with a 1e-12 relative slack for
/// round-off on exactly flat vectors).
template <typename Derived>
bool is_well_spread(const Eigen::MatrixBase<Derived>& x, double wellspread_const) {
    const double n = static_cast<double>(x.size());
    if (x.size() == 0) return true;
    const double inf = static_cast<double>(x.cwiseAbs().maxCoeff());
    const double two = static_cast<double>(x.norm());
    return inf * std::sqrt(n) <= wellspread_const * two * (1.0 + 1e-12);
}

/// Hoeffding/union-bound level t with P(|HDx|_inf > t |x|_2) <= failure_prob,
/// t = sqrt(2 ln(2n / failure_prob) / n) = Theta(sqrt(log n / n)).
inline double hadamard_spread_bound(Index n, double failure_prob) {
    if (n < 1 || !(failure_prob > 0.0 && failure_prob < 1.0))
        throw ParameterError("hadamard_spread_bound: need n >= 1 and failure_prob in (0,1)");
    const double nd = static_cast<double>(n);
    return std::sqrt(2.0 * std::log(2.0 * nd / failure_prob) / nd);
}

}  // namespace fbe
