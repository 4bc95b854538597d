#include "fbe/codestore.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <tuple>

namespace fbe {
namespace {

constexpr char kMagicVectors[4] = {'C', 'S', 'Q', 'V'};
constexpr char kMagicModel[4] = {'C', 'S', 'Q', 'M'};
constexpr char kMagicCodes[4] = {'C', 'S', 'Q', 'C'};
constexpr char kMagicCondensed[4] = {'C', 'S', 'Q', 'D'};

class ByteWriter {
public:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void magic(const char (&m)[4]) { raw(m, 4); }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const std::vector<std::uint8_t>& v) { buf_.insert(buf_.end(), v.begin(), v.end()); }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + path + "' for writing");
        out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw IoError("write to '" + path + "' failed");
    }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<std::uint8_t> data, std::string path)
        : data_(std::move(data)), path_(std::move(path)) {}

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t size() const { return data_.size(); }

    void need(std::size_t n) const {
        if (remaining() < n) throw CorruptionError("'" + path_ + "' is truncated");
    }
    void expect_magic(const char (&m)[4]) {
        if (data_.size() < 4 || std::memcmp(data_.data(), m, 4) != 0)
            throw FormatError("'" + path_ + "' does not start with magic " + std::string(m, 4));
        pos_ = 4;
        need(4);
        const std::uint32_t version = u32();
        if (version != kFormatVersion)
            throw FormatError("'" + path_ + "' has unsupported version " + std::to_string(version));
    }
    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::vector<std::uint8_t> bytes(std::size_t n) {
        need(n);
        std::vector<std::uint8_t> v(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                    data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return v;
    }
    void expect_end() const {
        if (remaining() != 0) throw CorruptionError("'" + path_ + "' has trailing bytes");
    }

private:
    std::vector<std::uint8_t> data_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Index checked_index(std::uint64_t v, const std::string& what) {
    if (v > static_cast<std::uint64_t>(std::numeric_limits<Index>::max()))
        throw FormatError(what + " does not fit the index type");
    return static_cast<Index>(v);
}

/// Guards multiplications of header counts before they size allocations.
std::size_t checked_product(std::uint64_t a, std::uint64_t b, const std::string& path) {
    if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a)
        throw CorruptionError("'" + path + "' declares an impossible payload size");
    return static_cast<std::size_t>(a * b);
}

void save_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + path + "' failed");
}

std::string_view trim(std::string_view s) {
    const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (!s.empty() && ws(s.front())) s.remove_prefix(1);
    while (!s.empty() && ws(s.back())) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view s, std::size_t line) {
    s = trim(s);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError("line " + std::to_string(line) + ": '" + std::string(s) + "' is not a number");
    return v;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        lines.push_back(text.substr(0, nl));
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    while (true) {
        const auto c = line.find(',');
        fields.push_back(line.substr(0, c));
        if (c == std::string_view::npos) break;
        line.remove_prefix(c + 1);
    }
    return fields;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Vectors
// ---------------------------------------------------------------------------

void write_vectors(const std::string& path, const RowMatrix& vectors) {
    if (!vectors.allFinite()) throw InputError("vectors must be finite");
    ByteWriter w;
    w.magic(kMagicVectors);
    w.u32(kFormatVersion);
    w.u64(static_cast<std::uint64_t>(vectors.rows()));
    w.u64(static_cast<std::uint64_t>(vectors.cols()));
    for (Index i = 0; i < vectors.rows(); ++i)
        for (Index j = 0; j < vectors.cols(); ++j) w.f64(vectors(i, j));
    w.save(path);
}

RowMatrix parse_vectors_csv(const std::string& text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw FormatError("no vectors in CSV input");
    std::vector<std::vector<double>> rows;
    rows.reserve(lines.size());
    for (std::size_t l = 0; l < lines.size(); ++l) {
        if (trim(lines[l]).empty()) throw FormatError("line " + std::to_string(l + 1) + " is empty");
        std::vector<double> row;
        for (auto f : split_fields(lines[l])) row.push_back(parse_double(f, l + 1));
        if (!rows.empty() && row.size() != rows.front().size())
            throw FormatError("line " + std::to_string(l + 1) + " has " + std::to_string(row.size()) +
                              " values, expected " + std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    RowMatrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    if (!m.allFinite()) throw FormatError("CSV contains non-finite values");
    return m;
}

Dataset read_vectors(const std::string& path) {
    auto data = slurp(path);
    if (data.empty()) throw FormatError("'" + path + "' is empty");
    if (data.size() >= 4 && std::memcmp(data.data(), kMagicVectors, 4) == 0) {
        ByteReader r(std::move(data), path);
        r.expect_magic(kMagicVectors);
        const std::uint64_t k = r.u64();
        const std::uint64_t n = r.u64();
        const std::size_t count = checked_product(k, n, path);
        if (count > r.remaining() / 8) throw CorruptionError("'" + path + "' is truncated");
        RowMatrix v(checked_index(k, "k"), checked_index(n, "n"));
        for (Index i = 0; i < v.rows(); ++i)
            for (Index j = 0; j < v.cols(); ++j) v(i, j) = r.f64();
        r.expect_end();
        return unscaled_dataset(std::move(v));
    }
    if (data.size() >= 3 && data[0] == 'C' && data[1] == 'S' && data[2] == 'Q')
        throw FormatError("'" + path + "' is not a vector file");
    return unscaled_dataset(parse_vectors_csv(std::string(data.begin(), data.end())));
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

void write_model(const std::string& path, const EmbeddingModel& model, bool explicit_matrix) {
    ByteWriter w;
    w.magic(kMagicModel);
    w.u32(kFormatVersion);
    w.u8(static_cast<std::uint8_t>(model.method));
    w.u64(static_cast<std::uint64_t>(model.n));
    w.u64(static_cast<std::uint64_t>(model.n_pad));
    w.u64(static_cast<std::uint64_t>(model.m));
    w.u64(static_cast<std::uint64_t>(model.p));
    w.u32(static_cast<std::uint32_t>(model.r));
    w.u32(static_cast<std::uint32_t>(model.lambda_tilde));
    w.u32(static_cast<std::uint32_t>(model.quantizer.sigma));
    w.f64(model.quantizer.mu);
    w.f64(model.sparsity);
    w.f64(model.wellspread_const);
    w.u64(model.matrix_seed);
    w.u64(model.diagonal_seed);
    w.f64(model.data_scale);
    w.u8(explicit_matrix ? 1 : 0);
    if (explicit_matrix) {
        const auto& a = model.matrix;
        w.u64(static_cast<std::uint64_t>(a.nonZeros()));
        for (Index i = 0; i < a.row_offsets().size(); ++i) w.u64(static_cast<std::uint64_t>(a.row_offsets()(i)));
        for (Index i = 0; i < a.col_indices().size(); ++i) w.u64(static_cast<std::uint64_t>(a.col_indices()(i)));
        for (Index i = 0; i < a.values().size(); ++i) w.f64(a.values()(i));
        if (model.method == Method::Fjlt)
            for (Index i = 0; i < model.diagonal.dim(); ++i) w.u8(static_cast<std::uint8_t>(model.diagonal.signs()(i)));
    }
    w.save(path);
}

EmbeddingModel read_model(const std::string& path) {
    ByteReader r(slurp(path), path);
    r.expect_magic(kMagicModel);
    ModelFields f;
    const std::uint8_t method = r.u8();
    if (method > 1) throw FormatError("'" + path + "' has unknown method byte " + std::to_string(method));
    f.method = static_cast<Method>(method);
    f.n = checked_index(r.u64(), "n");
    f.n_pad = checked_index(r.u64(), "n_pad");
    f.m = checked_index(r.u64(), "m");
    f.p = checked_index(r.u64(), "p");
    f.r = static_cast<int>(r.u32());
    f.lambda_tilde = r.u32();
    f.sigma = static_cast<int>(r.u32());
    f.mu = r.f64();
    f.sparsity = r.f64();
    f.wellspread_const = r.f64();
    f.matrix_seed = r.u64();
    f.diagonal_seed = r.u64();
    f.data_scale = r.f64();
    const std::uint8_t flag = r.u8();
    if (flag > 1) throw FormatError("'" + path + "' has an invalid explicit-matrix flag");
    if (f.r < 1 || f.p < 1 || f.lambda_tilde < 1 || f.m % f.p != 0)
        throw FormatError("'" + path + "': m = " + std::to_string(f.m) + " is not a multiple of p = " +
                          std::to_string(f.p));

    try {
        if (flag == 1) {
            const std::uint64_t nnz = r.u64();
            const std::size_t need = checked_product(static_cast<std::uint64_t>(f.m) + 1, 8, path) +
                                     checked_product(nnz, 16, path);
            if (need > r.remaining()) throw CorruptionError("'" + path + "' is truncated");
            VectorX<Index> offsets(f.m + 1);
            for (Index i = 0; i <= f.m; ++i) offsets(i) = checked_index(r.u64(), "row offset");
            VectorX<Index> indices(checked_index(nnz, "nnz"));
            for (Index i = 0; i < indices.size(); ++i) indices(i) = checked_index(r.u64(), "column index");
            VectorX<double> values(indices.size());
            for (Index i = 0; i < values.size(); ++i) values(i) = r.f64();
            f.explicit_matrix = SparseGaussianMatrix<double>::from_parts(f.m, f.n_pad, f.sparsity, f.matrix_seed,
                                                                         std::move(offsets), std::move(indices),
                                                                         std::move(values));
            if (f.method == Method::Fjlt) {
                r.need(static_cast<std::size_t>(f.n_pad));
                RandomSignDiagonal::SignVector signs(f.n_pad);
                for (Index i = 0; i < f.n_pad; ++i) signs(i) = static_cast<std::int8_t>(r.u8());
                f.explicit_diagonal = RandomSignDiagonal::from_signs(std::move(signs), f.diagonal_seed);
            }
        }
        r.expect_end();
        return assemble_model(std::move(f));
    } catch (const ParameterError& e) {
        throw FormatError("'" + path + "' violates a model invariant: " + e.what());
    } catch (const CapacityError& e) {
        throw FormatError("'" + path + "' violates a model invariant: " + e.what());
    } catch (const ShapeError& e) {
        throw FormatError("'" + path + "' violates a model invariant: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Codes
// ---------------------------------------------------------------------------

void write_codes(const std::string& path, const CodeFile& file) {
    ByteWriter w;
    w.magic(kMagicCodes);
    w.u32(kFormatVersion);
    w.u64(file.codes.size());
    w.u64(static_cast<std::uint64_t>(file.m));
    for (const auto& c : file.codes) {
        if (c.size() != file.m) throw ShapeError("all codes in a file must have length m");
        w.bytes(c.bytes());
    }
    w.save(path);
}

CodeFile read_codes(const std::string& path) {
    ByteReader r(slurp(path), path);
    r.expect_magic(kMagicCodes);
    const std::uint64_t k = r.u64();
    CodeFile file;
    file.m = checked_index(r.u64(), "m");
    const std::size_t record = BinaryCode::byte_count(file.m);
    if (checked_product(k, record, path) != r.remaining())
        throw CorruptionError("'" + path + "' payload is not k records of " + std::to_string(record) + " bytes");
    file.codes.reserve(k);
    for (std::uint64_t j = 0; j < k; ++j) file.codes.push_back(BinaryCode::from_bytes(file.m, r.bytes(record)));
    return file;
}

CondensedFile condensed_file(const CondensationSpec& spec, std::vector<CondensedCode> codes) {
    CondensedFile f;
    f.p = spec.p;
    f.bit_width = spec.bit_width;
    f.norm_factor = spec.norm_factor;
    f.codes = std::move(codes);
    return f;
}

void write_condensed(const std::string& path, const CondensedFile& file) {
    ByteWriter w;
    w.magic(kMagicCondensed);
    w.u32(kFormatVersion);
    w.u64(file.codes.size());
    w.u64(static_cast<std::uint64_t>(file.p));
    w.u32(static_cast<std::uint32_t>(file.bit_width));
    w.f64(file.norm_factor);
    for (const auto& c : file.codes) {
        if (c.size() != file.p || c.bit_width != file.bit_width || c.norm_factor != file.norm_factor)
            throw IncompatibleError("condensed code does not match the file header");
        w.bytes(pack_condensed(c));
    }
    w.save(path);
}

CondensedFile read_condensed(const std::string& path) {
    ByteReader r(slurp(path), path);
    r.expect_magic(kMagicCondensed);
    const std::uint64_t k = r.u64();
    CondensedFile file;
    file.p = checked_index(r.u64(), "p");
    const std::uint32_t width = r.u32();
    if (width < 1 || width > 64) throw FormatError("'" + path + "' has invalid bit_width " + std::to_string(width));
    file.bit_width = static_cast<int>(width);
    file.norm_factor = r.f64();
    if (file.p > 0 && static_cast<std::uint64_t>(file.p) > std::numeric_limits<std::size_t>::max() / 64)
        throw CorruptionError("'" + path + "' declares an impossible payload size");
    const std::size_t record = packed_size(file.p, file.bit_width);
    if (checked_product(k, record, path) != r.remaining())
        throw CorruptionError("'" + path + "' payload is not k records of " + std::to_string(record) + " bytes");
    file.codes.reserve(k);
    for (std::uint64_t j = 0; j < k; ++j)
        file.codes.push_back(unpack_condensed(r.bytes(record), file.p, file.bit_width, file.norm_factor));
    return file;
}

// ---------------------------------------------------------------------------
// Text outputs
// ---------------------------------------------------------------------------

void write_curve(const std::string& path, std::vector<CurveRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const CurveRow& a, const CurveRow& b) {
        return std::tie(a.r, a.p, a.m) < std::tie(b.r, b.p, b.m);
    });
    std::ostringstream os;
    os << "m,p,r,mape,wall_ms\n";
    for (const auto& row : rows)
        os << row.m << ',' << row.p << ',' << row.r << ',' << format_double(row.mape) << ','
           << format_double(row.wall_ms) << '\n';
    save_text(path, os.str());
}

std::vector<CurveRow> read_curve(const std::string& path) {
    const auto data = slurp(path);
    const auto lines = split_lines(std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
    if (lines.empty() || trim(lines.front()) != "m,p,r,mape,wall_ms")
        throw FormatError("'" + path + "' is not a curve file");
    std::vector<CurveRow> rows;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        const auto f = split_fields(lines[l]);
        if (f.size() != 5) throw FormatError("line " + std::to_string(l + 1) + " must have 5 fields");
        CurveRow row;
        row.m = static_cast<Index>(parse_double(f[0], l + 1));
        row.p = static_cast<Index>(parse_double(f[1], l + 1));
        row.r = static_cast<int>(parse_double(f[2], l + 1));
        row.mape = parse_double(f[3], l + 1);
        row.wall_ms = parse_double(f[4], l + 1);
        rows.push_back(row);
    }
    return rows;
}

void write_stability(const std::string& path, const std::vector<StabilityRow>& rows) {
    std::ostringstream os;
    os << "r,m,max_u_inf\n";
    for (const auto& row : rows) os << row.r << ',' << row.m << ',' << format_double(row.max_u_inf) << '\n';
    save_text(path, os.str());
}

void write_pairs(const std::string& path, const std::vector<PairEstimate>& rows) {
    std::ostringstream os;
    os << "i,j,estimate\n";
    for (const auto& row : rows) os << row.i << ',' << row.j << ',' << format_double(row.estimate) << '\n';
    save_text(path, os.str());
}

}  // namespace fbe
