#include <doctest.h>

#include <cmath>
#include <random>

#include "fbe/transform.hpp"

using namespace fbe;

namespace {

VectorX<double> random_vector(Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    VectorX<double> x(n);
    for (Index i = 0; i < n; ++i) x(i) = g(rng);
    return x;
}

// Entry-by-entry Hadamard matrix from the bitwise-parity definition, built
// independently of hadamard_matrix().
MatrixX<double> hadamard_oracle(Index n) {
    MatrixX<double> h(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            int parity = 0;
            for (Index b = i & j; b; b >>= 1) parity ^= static_cast<int>(b & 1);
            h(i, j) = (parity ? -1.0 : 1.0) / std::sqrt(static_cast<double>(n));
        }
    return h;
}

}  // namespace

TEST_CASE("sparse gaussian: full density stores every entry") {
    auto a = SparseGaussianMatrix<double>::generate(4, 8, 1.0, 1);
    CHECK(a.nonZeros() == 32);
    CHECK(a.row_offsets()(0) == 0);
    CHECK(a.row_offsets()(4) == 32);
}

TEST_CASE("sparse gaussian: stored count concentrates around s*m*n") {
    auto a = SparseGaussianMatrix<double>::generate(100, 100, 0.1, 7);
    // 3 sigma of Binomial(10000, 0.1) is 90.
    CHECK(std::abs(a.nonZeros() - 1000) <= 90);
}

TEST_CASE("sparse gaussian: parameter and capacity errors") {
    CHECK_THROWS_AS(SparseGaussianMatrix<double>::generate(4, 8, 0.0, 1), ParameterError);
    CHECK_THROWS_AS(SparseGaussianMatrix<double>::generate(4, 8, 1.5, 1), ParameterError);
    CHECK_THROWS_AS(SparseGaussianMatrix<double>::generate(0, 8, 0.5, 1), ParameterError);
    const Index big = Index{1} << 40;
    CHECK_THROWS_AS(SparseGaussianMatrix<double>::generate(big, big, 0.5, 1), CapacityError);
}

TEST_CASE("sparse gaussian: structural invariants and determinism") {
    for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
        auto a = SparseGaussianMatrix<double>::generate(37, 53, 0.3, seed);
        const auto& off = a.row_offsets();
        const auto& idx = a.col_indices();
        const auto& val = a.values();
        REQUIRE(off.size() == 38);
        CHECK(off(0) == 0);
        CHECK(off(37) == val.size());
        CHECK(idx.size() == val.size());
        for (Index i = 0; i < 37; ++i) {
            CHECK(off(i + 1) >= off(i));
            for (Index k = off(i); k < off(i + 1); ++k) {
                CHECK(idx(k) >= 0);
                CHECK(idx(k) < 53);
                if (k > off(i)) CHECK(idx(k) > idx(k - 1));
                CHECK(std::isfinite(val(k)));
                CHECK(val(k) != 0.0);
            }
        }
        CHECK(a == SparseGaussianMatrix<double>::generate(37, 53, 0.3, seed));
    }
    CHECK_FALSE(SparseGaussianMatrix<double>::generate(10, 10, 0.5, 1) ==
                SparseGaussianMatrix<double>::generate(10, 10, 0.5, 2));
}

TEST_CASE("sparse gaussian: nonzero values have variance close to 1/s") {
    const double s = 0.25;
    auto a = SparseGaussianMatrix<double>::generate(400, 400, s, 3);
    const auto& v = a.values();
    const double mean = v.mean();
    const double var = (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
    // ~40000 samples: standard error of the variance is about 4/sqrt(2e4) * 1/s.
    CHECK(std::abs(mean) < 0.05);
    CHECK(var == doctest::Approx(1.0 / s).epsilon(0.05));
}

TEST_CASE("sparse gaussian: from_parts rejects broken CSR") {
    auto a = SparseGaussianMatrix<double>::generate(3, 4, 1.0, 5);
    auto offsets = a.row_offsets();
    auto indices = a.col_indices();
    auto values = a.values();
    CHECK_NOTHROW(SparseGaussianMatrix<double>::from_parts(3, 4, 1.0, 5, offsets, indices, values));
    auto bad_idx = indices;
    bad_idx(1) = bad_idx(0);
    CHECK_THROWS_AS(SparseGaussianMatrix<double>::from_parts(3, 4, 1.0, 5, offsets, bad_idx, values), ParameterError);
    auto bad_val = values;
    bad_val(2) = 0.0;
    CHECK_THROWS_AS(SparseGaussianMatrix<double>::from_parts(3, 4, 1.0, 5, offsets, indices, bad_val), ParameterError);
    auto bad_off = offsets;
    bad_off(3) = 11;
    CHECK_THROWS_AS(SparseGaussianMatrix<double>::from_parts(3, 4, 1.0, 5, bad_off, indices, values), ParameterError);
}

TEST_CASE("sparse_matvec: dense 2x2 selects the first column") {
    auto a = SparseGaussianMatrix<double>::generate(2, 2, 1.0, 11);
    const MatrixX<double> d = a.toDense();
    VectorX<double> x(2);
    x << 1.0, 0.0;
    const VectorX<double> y = sparse_matvec(a, x);
    CHECK(y(0) == d(0, 0));
    CHECK(y(1) == d(1, 0));
}

TEST_CASE("sparse_matvec: matches the dense product on random instances") {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 100; ++t) {
        const Index m = 1 + static_cast<Index>(rng() % 64);
        const Index n = 1 + static_cast<Index>(rng() % 64);
        const double s = 0.05 + 0.95 * std::uniform_real_distribution<double>(0, 1)(rng);
        auto a = SparseGaussianMatrix<double>::generate(m, n, s, rng());
        const VectorX<double> x = random_vector(n, rng());
        const VectorX<double> y = sparse_matvec(a, x);
        const VectorX<double> ref = a.toDense() * x;
        CHECK((y - ref).norm() <= 1e-12 * std::max(1.0, ref.norm()));
    }
}

TEST_CASE("sparse_matvec: shape and input errors") {
    auto a = SparseGaussianMatrix<double>::generate(8, 16, 0.5, 1);
    CHECK_THROWS_AS(sparse_matvec(a, VectorX<double>::Zero(15)), ShapeError);
    VectorX<double> x = VectorX<double>::Zero(16);
    x(3) = std::nan("");
    CHECK_THROWS_AS(sparse_matvec(a, x), InputError);
}

TEST_CASE("fwht: small closed forms") {
    VectorX<double> x(2);
    x << 1.0, 0.0;
    fwht_inplace(x);
    CHECK(x(0) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(x(1) == doctest::Approx(1.0 / std::sqrt(2.0)));

    VectorX<double> ones = VectorX<double>::Ones(4);
    fwht_inplace(ones);
    CHECK(ones(0) == doctest::Approx(2.0));
    CHECK(std::abs(ones(1)) < 1e-15);
    CHECK(std::abs(ones(2)) < 1e-15);
    CHECK(std::abs(ones(3)) < 1e-15);
}

TEST_CASE("fwht: equals the explicit matrix, is an involution and preserves norm") {
    for (Index n = 1; n <= 64; n *= 2) {
        const MatrixX<double> h = hadamard_oracle(n);
        CHECK((h - hadamard_matrix<double>(n)).cwiseAbs().maxCoeff() == 0.0);
        for (int t = 0; t < 5; ++t) {
            const VectorX<double> x = random_vector(n, 100 * static_cast<std::uint64_t>(n) + t);
            const VectorX<double> hx = fwht(x);
            CHECK((hx - h * x).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK((fwht(hx) - x).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK(std::abs(hx.norm() - x.norm()) <= 1e-12 * std::max(1.0, x.norm()));
        }
    }
}

TEST_CASE("fwht: works on vector blocks and rejects non powers of two") {
    VectorX<double> x = random_vector(16, 9);
    VectorX<double> expect = x;
    expect.head(8) = fwht(VectorX<double>(x.head(8)));
    fwht_inplace(x.head(8));
    CHECK((x - expect).cwiseAbs().maxCoeff() == 0.0);
    VectorX<double> bad = VectorX<double>::Ones(6);
    CHECK_THROWS_AS(fwht_inplace(bad), ShapeError);
}

TEST_CASE("fwht: float instantiation") {
    VectorX<float> x = VectorX<float>::Ones(8);
    fwht_inplace(x);
    CHECK(x(0) == doctest::Approx(std::sqrt(8.0f)));
}

TEST_CASE("random sign diagonal: entries are +-1 and seed deterministic") {
    auto d = RandomSignDiagonal::generate(1000, 42);
    int plus = 0;
    for (Index i = 0; i < d.dim(); ++i) {
        CHECK((d.signs()(i) == 1 || d.signs()(i) == -1));
        plus += d.signs()(i) == 1;
    }
    CHECK(std::abs(plus - 500) < 80);
    CHECK(d == RandomSignDiagonal::generate(1000, 42));
    CHECK_THROWS_AS(RandomSignDiagonal::from_signs(RandomSignDiagonal::SignVector::Zero(3), 0), ParameterError);
}

TEST_CASE("fjlt: zero in, zero out") {
    auto op = FjltOperator<double>::generate(12, 20, 0.5, 1, 2);
    CHECK(op.padded_dim() == 32);
    const VectorX<double> y = apply_fjlt(op, VectorX<double>::Zero(20));
    CHECK(y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fjlt: agrees with the materialized A H D") {
    for (Index n : {16, 13, 1, 33}) {
        auto op = FjltOperator<double>::generate(10, n, 0.6, 5 + static_cast<std::uint64_t>(n), 77);
        // Oracle: pad, sign, multiply by the explicit Hadamard matrix, then by dense A.
        const Index pad = op.padded_dim();
        MatrixX<double> dsign = MatrixX<double>::Zero(pad, n);
        for (Index i = 0; i < n; ++i) dsign(i, i) = op.diagonal().signs()(i);
        const MatrixX<double> phi = op.matrix().toDense() * hadamard_oracle(pad) * dsign;
        const VectorX<double> x = random_vector(n, 31);
        CHECK((apply_fjlt(op, x) - phi * x).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((op.toDense() - phi).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("fjlt: shape checks") {
    auto op = FjltOperator<double>::generate(4, 16, 0.5, 1, 2);
    CHECK_THROWS_AS(apply_fjlt(op, VectorX<double>::Zero(15)), ShapeError);
    CHECK_THROWS_AS(FjltOperator<double>(SparseGaussianMatrix<double>::generate(4, 8, 1.0, 1),
                                         RandomSignDiagonal::generate(16, 1), 16),
                    ShapeError);
}

TEST_CASE("fjlt: H D x is spread out for most random unit vectors") {
    const Index n = 1024;
    const double delta = 0.05;
    const double bound = hadamard_spread_bound(n, delta);
    // Theta(sqrt(log n / n)) with a moderate constant.
    CHECK(bound / std::sqrt(std::log(static_cast<double>(n)) / n) < 2.0);
    auto op = FjltOperator<double>::generate(1, n, 1.0, 3, 4);
    std::mt19937_64 rng(8);
    int ok = 0;
    for (int t = 0; t < 1000; ++t) {
        // Mix spiky and dense vectors: spiky ones are what the transform is for.
        VectorX<double> x = VectorX<double>::Zero(n);
        if (t % 2 == 0) {
            for (int j = 0; j < 3; ++j) x(static_cast<Index>(rng() % n)) = std::normal_distribution<double>()(rng);
            if (x.norm() == 0.0) x(0) = 1.0;
        } else {
            x = random_vector(n, rng());
        }
        x.normalize();
        ok += op.spread(x).cwiseAbs().maxCoeff() <= bound;
    }
    CHECK(ok >= 950);
}

TEST_CASE("recommended sparsity") {
    // 2 * (1/256) / (0.1 * 16384)
    CHECK(recommended_sparsity(16384, 0.1, 1.0 / 256, 1.0, false) == doctest::Approx(4.76837158203125e-6));
    CHECK(recommended_sparsity(16, 0.1, 1.0, 1.0, false) == 1.0);
    const double base = recommended_sparsity(4096, 0.2, 1.0 / 64, 1.0, false);
    CHECK(recommended_sparsity(4096, 0.2, 1.0 / 64, 1.0, true) == doctest::Approx(base * std::log(4096.0)));
    SparsityOptions binary;
    binary.log_base = LogBase::Binary;
    CHECK(recommended_sparsity(4096, 0.2, 1.0 / 64, 1.0, true, binary) == doctest::Approx(base * 12.0));
    SparsityOptions doubled;
    doubled.constant = 4.0;
    CHECK(recommended_sparsity(4096, 0.2, 1.0 / 64, 1.0, false, doubled) == doctest::Approx(2.0 * base));
    CHECK_THROWS_AS(recommended_sparsity(16, 0.5, 1.0, 1.0, false), ParameterError);
}

TEST_CASE("sparse projection preserves norms in l1 (norm concentration)") {
    const Index n = 1024, m = 4096;
    const double s = recommended_sparsity(n, 0.2, 1.0, 1.0, false);
    auto a = SparseGaussianMatrix<double>::generate(m, n, s, 12345);
    std::mt19937_64 rng(6);
    int within = 0;
    for (int t = 0; t < 200; ++t) {
        VectorX<double> x(n);
        for (Index i = 0; i < n; ++i) x(i) = (rng() >> 63) ? -1.0 : 1.0;
        x /= std::sqrt(static_cast<double>(n));
        const double stat = std::sqrt(M_PI / 2.0) / m * sparse_matvec(a, x).lpNorm<1>();
        within += std::abs(stat - 1.0) <= 0.2;
    }
    CHECK(within >= 190);
}

TEST_CASE("well-spread check") {
    VectorX<double> flat = VectorX<double>::Constant(64, -0.125);
    CHECK(is_well_spread(flat, 1.0));
    VectorX<double> spike = VectorX<double>::Zero(64);
    spike(3) = 1.0;
    CHECK_FALSE(is_well_spread(spike, 1.0));
    CHECK(is_well_spread(spike, 8.0));
}
