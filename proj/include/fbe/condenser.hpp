#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "fbe/errors.hpp"
#include "fbe/sigma_delta.hpp"
#include "fbe/transform.hpp"

namespace fbe {

using IntVector = VectorX<std::int64_t>;

/**
 * Condensation operator V = I_p (x) v, where v holds the coefficients of
 * (1 + z + ... + z^{lt-1})^r and has length lambda = r*lt - r + 1. The
 * normalized operator is norm_factor * V with norm_factor = sqrt(pi/2) / (p |v|_2).
 *
 * Codes are condensed in integer arithmetic; norm_factor is applied once per
 * distance query. bit_width = ceil(log2(lt^r + 1)) + 1 holds every entry of V q
 * for q in {-1,+1}^m in two's complement.
 */
struct CondensationSpec {
    int r = 1;
    std::int64_t lambda_tilde = 1;
    std::int64_t lambda = 1;
    std::int64_t p = 1;
    std::int64_t m = 1;
    IntVector kernel;
    std::int64_t kernel_sum = 1;  // lt^r
    double kernel_norm = 1.0;     // |v|_2
    double norm_factor = 1.0;
    int bit_width = 2;

    bool operator==(const CondensationSpec& o) const {
        return r == o.r && lambda_tilde == o.lambda_tilde && p == o.p && kernel == o.kernel &&
               norm_factor == o.norm_factor && bit_width == o.bit_width;
    }
};

namespace detail {
inline bool mul_overflows(std::int64_t a, std::int64_t b) {
    return a != 0 && b > std::numeric_limits<std::int64_t>::max() / a;
}
}  // namespace detail

/// Packed bits needed for a signed value in [-bound, bound].
inline int signed_bit_width(std::int64_t bound) {
    int bits = 0;
    for (std::uint64_t v = static_cast<std::uint64_t>(bound); v != 0; v >>= 1) ++bits;
    return bits + 1;
}

inline CondensationSpec build_condensation(int r, std::int64_t lambda_tilde, std::int64_t p) {
    if (r < 1 || lambda_tilde < 1 || p < 1)
        throw ParameterError("condensation parameters r, lambda_tilde, p must all be >= 1");

    CondensationSpec spec;
    spec.r = r;
    spec.lambda_tilde = lambda_tilde;
    spec.p = p;

    // lt^r bounds every kernel coefficient and every condensed entry. Distance
    // scans sum p differences of up to 2 lt^r, which must stay exact in int64.
    std::int64_t total = 1;
    for (int i = 0; i < r; ++i) {
        if (detail::mul_overflows(total, lambda_tilde))
            throw CapacityError("lambda_tilde^r overflows 64-bit integers");
        total *= lambda_tilde;
    }
    if (detail::mul_overflows(total, 2) || detail::mul_overflows(2 * total, p))
        throw CapacityError("p * 2 * lambda_tilde^r overflows 64-bit integers");
    spec.kernel_sum = total;

    if (detail::mul_overflows(r, lambda_tilde - 1)) throw CapacityError("lambda overflows");
    spec.lambda = static_cast<std::int64_t>(r) * (lambda_tilde - 1) + 1;
    if (detail::mul_overflows(spec.lambda, p)) throw CapacityError("m = lambda * p overflows");
    spec.m = spec.lambda * p;

    IntVector v = IntVector::Ones(1);
    for (int k = 0; k < r; ++k) {
        IntVector next = IntVector::Zero(v.size() + lambda_tilde - 1);
        for (Index i = 0; i < v.size(); ++i)
            for (std::int64_t j = 0; j < lambda_tilde; ++j) next(i + j) += v(i);
        v = std::move(next);
    }
    spec.kernel = std::move(v);

    long double sq = 0.0L;
    for (Index i = 0; i < spec.kernel.size(); ++i) sq += static_cast<long double>(spec.kernel(i)) * spec.kernel(i);
    spec.kernel_norm = static_cast<double>(std::sqrt(sq));
    spec.norm_factor = std::sqrt(std::numbers::pi / 2.0) / (static_cast<double>(p) * spec.kernel_norm);
    spec.bit_width = signed_bit_width(total);
    return spec;
}

/// (|v|_inf / |v|_2)^2 for the kernel, the ratio that enters the sparsity level.
inline double kernel_flatness(const CondensationSpec& spec) {
    const double inf = static_cast<double>(spec.kernel.maxCoeff());
    return (inf / spec.kernel_norm) * (inf / spec.kernel_norm);
}

/// Upper bound sqrt(pi/2) (8r)^{r+1} lambda^{-r+1/2} on |norm_factor V P^r|_{inf,1}.
inline double operator_bound(const CondensationSpec& spec) {
    const double r = spec.r;
    return std::sqrt(std::numbers::pi / 2.0) * std::pow(8.0 * r, r + 1.0) *
           std::pow(static_cast<double>(spec.lambda), -r + 0.5);
}

// ---------------------------------------------------------------------------
// Codes
// ---------------------------------------------------------------------------

/// m-bit +-1 sequence, bit i of byte i/8 (LSB first); 1 encodes +1. Pad bits are zero.
class BinaryCode {
public:
    BinaryCode() = default;

    explicit BinaryCode(const CodeVector& signs) : length_(signs.size()), bytes_(byte_count(signs.size()), 0) {
        for (Index i = 0; i < length_; ++i) {
            if (signs(i) == 1)
                bytes_[static_cast<std::size_t>(i >> 3)] |= static_cast<std::uint8_t>(1u << (i & 7));
            else if (signs(i) != -1)
                throw InputError("binary code entries must be +1 or -1");
        }
    }

    static BinaryCode from_bytes(Index length, std::vector<std::uint8_t> bytes) {
        if (length < 0 || bytes.size() != byte_count(length))
            throw CorruptionError("binary code record has " + std::to_string(bytes.size()) +
                                  " bytes, expected " + std::to_string(byte_count(length)));
        if (length % 8 != 0 && !bytes.empty()) {
            const auto mask = static_cast<std::uint8_t>(0xFFu << (length % 8));
            if (bytes.back() & mask) throw CorruptionError("binary code pad bits are not zero");
        }
        BinaryCode c;
        c.length_ = length;
        c.bytes_ = std::move(bytes);
        return c;
    }

    static std::size_t byte_count(Index length) { return static_cast<std::size_t>((length + 7) / 8); }

    Index size() const { return length_; }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

    int operator()(Index i) const { return (bytes_[static_cast<std::size_t>(i >> 3)] >> (i & 7)) & 1 ? 1 : -1; }

    CodeVector signs() const {
        CodeVector s(length_);
        for (Index i = 0; i < length_; ++i) s(i) = static_cast<std::int8_t>((*this)(i));
        return s;
    }

    bool operator==(const BinaryCode&) const = default;

private:
    Index length_ = 0;
    std::vector<std::uint8_t> bytes_;
};

/// Unnormalized condensed sketch V q with the spec's shared normalization.
struct CondensedCode {
    IntVector entries;
    int bit_width = 2;
    double norm_factor = 1.0;

    Index size() const { return entries.size(); }
    bool operator==(const CondensedCode& o) const {
        return entries == o.entries && bit_width == o.bit_width && norm_factor == o.norm_factor;
    }
};

/// entries[b] = sum_k v_k q_{b lambda + k}, integer arithmetic only.
inline CondensedCode condense(const CondensationSpec& spec, const CodeVector& q) {
    if (q.size() != spec.m)
        throw ShapeError("condense: code length " + std::to_string(q.size()) + " != m = " + std::to_string(spec.m));
    CondensedCode out;
    out.bit_width = spec.bit_width;
    out.norm_factor = spec.norm_factor;
    out.entries.resize(spec.p);
    const Index lambda = spec.lambda;
    for (Index b = 0; b < spec.p; ++b) {
        std::int64_t acc = 0;
        const Index base = b * lambda;
        for (Index k = 0; k < lambda; ++k) acc += spec.kernel(k) * static_cast<std::int64_t>(q(base + k));
        out.entries(b) = acc;
    }
    return out;
}

inline CondensedCode condense(const CondensationSpec& spec, const BinaryCode& q) {
    if (q.size() != spec.m)
        throw ShapeError("condense: code length " + std::to_string(q.size()) + " != m = " + std::to_string(spec.m));
    // sum_k v_k q_k = 2 * sum_{q_k = +1} v_k - sum_k v_k
    CondensedCode out;
    out.bit_width = spec.bit_width;
    out.norm_factor = spec.norm_factor;
    out.entries.resize(spec.p);
    const Index lambda = spec.lambda;
    for (Index b = 0; b < spec.p; ++b) {
        std::int64_t positive = 0;
        const Index base = b * lambda;
        for (Index k = 0; k < lambda; ++k)
            if (q(base + k) > 0) positive += spec.kernel(k);
        out.entries(b) = 2 * positive - spec.kernel_sum;
    }
    return out;
}

/// norm_factor * V y for a real sequence y (unquantized reference path).
template <typename Derived>
VectorX<double> condense_real(const CondensationSpec& spec, const Eigen::MatrixBase<Derived>& y) {
    if (y.size() != spec.m)
        throw ShapeError("condense_real: length " + std::to_string(y.size()) + " != m = " + std::to_string(spec.m));
    const VectorX<double> v = spec.kernel.cast<double>();
    VectorX<double> out(spec.p);
    for (Index b = 0; b < spec.p; ++b)
        out(b) = spec.norm_factor * v.dot(y.segment(b * spec.lambda, spec.lambda).template cast<double>());
    return out;
}

inline void require_compatible(const CondensedCode& a, const CondensedCode& b) {
    if (a.size() != b.size() || a.bit_width != b.bit_width || a.norm_factor != b.norm_factor)
        throw IncompatibleError("condensed codes come from different condensation specs");
}

/// Integer l1 scan of the entry differences.
inline std::int64_t l1_distance_raw(const CondensedCode& a, const CondensedCode& b) {
    require_compatible(a, b);
    return (a.entries - b.entries).cwiseAbs().sum();
}

/// norm_factor * |a - b|_1, the pseudometric estimate of |x - y|_2.
inline double l1_distance(const CondensedCode& a, const CondensedCode& b) {
    return a.norm_factor * static_cast<double>(l1_distance_raw(a, b));
}

// ---------------------------------------------------------------------------
// Fixed-width packing
// ---------------------------------------------------------------------------

inline std::size_t packed_size(Index p, int bit_width) {
    return static_cast<std::size_t>((p * bit_width + 7) / 8);
}

/// Two's-complement, bit_width bits per entry, entry i at stream bits
/// [i*w, (i+1)*w), stream bit j stored in byte j/8 at position j%8.
inline std::vector<std::uint8_t> pack_condensed(const CondensedCode& code) {
    const int w = code.bit_width;
    if (w < 1 || w > 64) throw CapacityError("bit_width must lie in [1, 64]");
    const std::int64_t hi = w == 64 ? std::numeric_limits<std::int64_t>::max() : (std::int64_t{1} << (w - 1)) - 1;
    const std::int64_t lo = w == 64 ? std::numeric_limits<std::int64_t>::min() : -(std::int64_t{1} << (w - 1));
    std::vector<std::uint8_t> out(packed_size(code.size(), w), 0);
    std::size_t bit = 0;
    for (Index i = 0; i < code.size(); ++i) {
        const std::int64_t e = code.entries(i);
        if (e < lo || e > hi)
            throw CapacityError("condensed entry " + std::to_string(e) + " does not fit in " + std::to_string(w) +
                                " bits");
        const auto u = static_cast<std::uint64_t>(e);
        for (int k = 0; k < w; ++k, ++bit)
            if ((u >> k) & 1u) out[bit >> 3] |= static_cast<std::uint8_t>(1u << (bit & 7));
    }
    return out;
}

inline CondensedCode unpack_condensed(const std::vector<std::uint8_t>& bytes, Index p, int bit_width,
                                      double norm_factor) {
    if (bit_width < 1 || bit_width > 64) throw CapacityError("bit_width must lie in [1, 64]");
    if (p < 0 || bytes.size() != packed_size(p, bit_width))
        throw CorruptionError("condensed record has " + std::to_string(bytes.size()) + " bytes, expected " +
                              std::to_string(packed_size(p, bit_width)));
    CondensedCode code;
    code.bit_width = bit_width;
    code.norm_factor = norm_factor;
    code.entries.resize(p);
    std::size_t bit = 0;
    for (Index i = 0; i < p; ++i) {
        std::uint64_t u = 0;
        for (int k = 0; k < bit_width; ++k, ++bit)
            if ((bytes[bit >> 3] >> (bit & 7)) & 1u) u |= std::uint64_t{1} << k;
        if (bit_width < 64 && ((u >> (bit_width - 1)) & 1u)) u |= ~std::uint64_t{0} << bit_width;
        code.entries(i) = static_cast<std::int64_t>(u);
    }
    for (; bit < bytes.size() * 8; ++bit)
        if ((bytes[bit >> 3] >> (bit & 7)) & 1u) throw CorruptionError("condensed record pad bits are not zero");
    return code;
}

}  // namespace fbe
