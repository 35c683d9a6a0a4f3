#include "qwha/tensor_io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace qwha {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'D', 'P'};

void put_u8(std::ostream& out, std::uint8_t v) {
    out.put(static_cast<char>(v));
}

template <typename T>
void put_le(std::ostream& out, T v) {
    static_assert(std::is_unsigned_v<T>);
    char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    static_assert(std::is_unsigned_v<T>);
    char buf[sizeof(T)];
    in.read(buf, sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<T>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

void put_f64_le(std::ostream& out, double v) {
    put_le(out, std::bit_cast<std::uint64_t>(v));
}

void put_f32_le(std::ostream& out, float v) {
    put_le(out, std::bit_cast<std::uint32_t>(v));
}

void write_header(std::ostream& out, Dtype dtype, std::uint64_t rows, std::uint64_t cols) {
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, kSadpVersion);
    put_u8(out, static_cast<std::uint8_t>(dtype));
    put_le<std::uint64_t>(out, rows);
    put_le<std::uint64_t>(out, cols);
}

struct Header {
    Dtype dtype;
    std::uint64_t rows;
    std::uint64_t cols;
};

Header read_header(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("SADP: bad magic");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kSadpVersion)
        throw io_error("SADP: unsupported format version " + std::to_string(version));
    const auto code = get_le<std::uint8_t>(in);
    if (code > 2) throw io_error("SADP: unknown dtype code " + std::to_string(code));
    Header h;
    h.dtype = static_cast<Dtype>(code);
    h.rows = get_le<std::uint64_t>(in);
    h.cols = get_le<std::uint64_t>(in);
    if (!in) throw io_error("SADP: truncated header");
    return h;
}

std::size_t element_size(Dtype dtype) {
    return dtype == Dtype::f32 ? 4 : 8;
}

}  // namespace

void write_matrix_block(std::ostream& out, const Matrix& m, Dtype dtype) {
    if (dtype == Dtype::u64)
        throw validation_error("SADP: real matrices must use dtype f32 or f64");
    if (!all_finite(m))
        throw validation_error("SADP: refusing to write non-finite values");
    write_header(out, dtype, static_cast<std::uint64_t>(m.rows()),
                 static_cast<std::uint64_t>(m.cols()));
    const double* data = m.data();
    const std::size_t n = static_cast<std::size_t>(m.size());
    if (dtype == Dtype::f64) {
        for (std::size_t i = 0; i < n; ++i) put_f64_le(out, data[i]);
    } else {
        for (std::size_t i = 0; i < n; ++i) put_f32_le(out, static_cast<float>(data[i]));
    }
    if (!out) throw io_error("SADP: write failed");
}

Matrix read_matrix_block(std::istream& in) {
    const Header h = read_header(in);
    if (h.dtype == Dtype::u64)
        throw io_error("SADP: dtype u64 is not a real matrix payload");
    const Index rows = static_cast<Index>(h.rows);
    const Index cols = static_cast<Index>(h.cols);
    Matrix m(rows, cols);
    const std::size_t n = static_cast<std::size_t>(m.size());
    if (h.dtype == Dtype::f64) {
        for (std::size_t i = 0; i < n; ++i)
            m.data()[i] = std::bit_cast<double>(get_le<std::uint64_t>(in));
    } else {
        for (std::size_t i = 0; i < n; ++i)
            m.data()[i] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in)));
    }
    if (!in) throw io_error("SADP: truncated payload");
    if (!all_finite(m)) throw io_error("SADP: payload contains non-finite values");
    return m;
}

void write_index_block(std::ostream& out, const IndexMatrix& m) {
    write_header(out, Dtype::u64, static_cast<std::uint64_t>(m.rows()),
                 static_cast<std::uint64_t>(m.cols()));
    const std::size_t n = static_cast<std::size_t>(m.size());
    for (std::size_t i = 0; i < n; ++i) put_le<std::uint64_t>(out, m.data()[i]);
    if (!out) throw io_error("SADP: write failed");
}

IndexMatrix read_index_block(std::istream& in) {
    const Header h = read_header(in);
    if (h.dtype != Dtype::u64) throw io_error("SADP: expected a u64 index payload");
    IndexMatrix m(static_cast<Index>(h.rows), static_cast<Index>(h.cols));
    const std::size_t n = static_cast<std::size_t>(m.size());
    for (std::size_t i = 0; i < n; ++i) m.data()[i] = get_le<std::uint64_t>(in);
    if (!in) throw io_error("SADP: truncated payload");
    return m;
}

void write_matrix(const Matrix& m, const std::string& path, Dtype dtype) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    write_matrix_block(out, m, dtype);
    out.flush();
    if (!out) throw io_error("write failed: " + path);
}

Matrix read_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path);
    in.seekg(0, std::ios::end);
    const auto file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    if (file_size < kSadpHeaderSize) throw io_error("SADP: file too small: " + path);

    const Header h = read_header(in);
    const std::uint64_t expected =
        kSadpHeaderSize + h.rows * h.cols * element_size(h.dtype);
    if (file_size != expected)
        throw io_error("SADP: size mismatch in " + path + ": expected " +
                       std::to_string(expected) + " bytes, found " +
                       std::to_string(file_size));
    in.seekg(0, std::ios::beg);
    return read_matrix_block(in);
}

Matrix read_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::size_t pos = 0;
            double v;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw io_error("CSV: cannot parse '" + cell + "' in " + path);
            }
            while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos])))
                ++pos;
            if (pos != cell.size())
                throw io_error("CSV: trailing characters in '" + cell + "' in " + path);
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw io_error("CSV: ragged rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw io_error("CSV: empty file " + path);
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (!all_finite(m)) throw io_error("CSV: non-finite values in " + path);
    return m;
}

void write_csv_matrix(const Matrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    out.precision(17);
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << m(i, j);
        }
        out << '\n';
    }
    if (!out) throw io_error("write failed: " + path);
}

}  // namespace qwha
