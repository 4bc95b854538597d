#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbe/condenser.hpp"
#include "fbe/pipeline.hpp"

namespace fbe {

// All binary formats are little-endian regardless of host and start with a
// 4-byte magic and a u32 version (currently 1).
//
//   CSQV  u64 k, u64 n, k*n f64 row-major
//   CSQM  u8 method, u64 n, n_pad, m, p, u32 r, lambda_tilde, sigma,
//         f64 mu, sparsity, wellspread_const, u64 matrix_seed, diagonal_seed,
//         f64 data_scale, u8 explicit flag
//         [flag: u64 nnz, (m+1) u64 row_offsets, nnz u64 col_indices,
//                nnz f64 values, fjlt only: n_pad i8 signs]
//   CSQC  u64 k, u64 m, k records of ceil(m/8) bytes
//   CSQD  u64 k, u64 p, u32 bit_width, f64 norm_factor,
//         k records of ceil(p*bit_width/8) bytes
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kCodesHeaderBytes = 24;
inline constexpr std::size_t kCondensedHeaderBytes = 36;

void write_vectors(const std::string& path, const RowMatrix& vectors);
/// Reads CSQV binary or comma-separated text (one vector per line).
Dataset read_vectors(const std::string& path);
RowMatrix parse_vectors_csv(const std::string& text);

void write_model(const std::string& path, const EmbeddingModel& model, bool explicit_matrix = false);
EmbeddingModel read_model(const std::string& path);

struct CodeFile {
    Index m = 0;
    std::vector<BinaryCode> codes;
};
void write_codes(const std::string& path, const CodeFile& file);
CodeFile read_codes(const std::string& path);

struct CondensedFile {
    Index p = 0;
    int bit_width = 2;
    double norm_factor = 1.0;
    std::vector<CondensedCode> codes;
};
CondensedFile condensed_file(const CondensationSpec& spec, std::vector<CondensedCode> codes);
void write_condensed(const std::string& path, const CondensedFile& file);
CondensedFile read_condensed(const std::string& path);

// ---------------------------------------------------------------------------
// Text outputs
// ---------------------------------------------------------------------------

struct CurveRow {
    Index m = 0;
    Index p = 0;
    int r = 0;  // 0 marks the unquantized reference row
    double mape = 0.0;
    double wall_ms = 0.0;
};

/// CSV "m,p,r,mape,wall_ms", rows ordered by (r, p, m).
void write_curve(const std::string& path, std::vector<CurveRow> rows);
std::vector<CurveRow> read_curve(const std::string& path);

/// CSV "r,m,max_u_inf".
void write_stability(const std::string& path, const std::vector<StabilityRow>& rows);

struct PairEstimate {
    Index i = 0;
    Index j = 0;
    double estimate = 0.0;
};
/// CSV "i,j,estimate".
void write_pairs(const std::string& path, const std::vector<PairEstimate>& rows);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace fbe
