#include "qwha/quantizer.hpp"

#include "qwha/threading.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace qwha {

void validate(const QuantConfig& cfg) {
    if (cfg.bits < 2 || cfg.bits > 8)
        throw validation_error("bit-width must be in [2, 8], got " +
                               std::to_string(cfg.bits));
    if (cfg.group_size < 1)
        throw validation_error("group size must be positive");
}

CodeMatrix apply_quantization(const Matrix& w, const Matrix& scales,
                              const Matrix& zero_points, const QuantConfig& cfg) {
    validate(cfg);
    const Index g = cfg.group_size;
    const Index n_groups = (w.cols() + g - 1) / g;
    if (scales.rows() != w.rows() || scales.cols() != n_groups ||
        zero_points.rows() != w.rows() || zero_points.cols() != n_groups)
        throw validation_error("apply_quantization: parameter shape mismatch");
    const double qmax = static_cast<double>((1 << cfg.bits) - 1);
    CodeMatrix codes(w.rows(), w.cols());
    for (Index i = 0; i < w.rows(); ++i) {
        for (Index j = 0; j < w.cols(); ++j) {
            const Index gi = j / g;
            double code = std::round(w(i, j) / scales(i, gi)) - zero_points(i, gi);
            code = std::min(std::max(code, 0.0), qmax);
            codes(i, j) = static_cast<std::uint8_t>(code);
        }
    }
    return codes;
}

QuantizedLayer quantize(const Matrix& w, const QuantConfig& cfg, int threads) {
    validate(cfg);
    if (!all_finite(w)) throw validation_error("quantize: non-finite weights");
    const Index rows = w.rows();
    const Index cols = w.cols();
    const Index g = cfg.group_size;
    const Index n_groups = (cols + g - 1) / g;
    const double qmax = static_cast<double>((1 << cfg.bits) - 1);

    QuantizedLayer out;
    out.config = cfg;
    out.codes.resize(rows, cols);
    out.scales.resize(rows, n_groups);
    out.zero_points.resize(rows, n_groups);

    parallel_for(rows, threads, [&](Index i) {
        for (Index gi = 0; gi < n_groups; ++gi) {
            const Index begin = gi * g;
            const Index len = std::min(g, cols - begin);
            double mn = w(i, begin);
            double mx = mn;
            for (Index j = begin + 1; j < begin + len; ++j) {
                mn = std::min(mn, w(i, j));
                mx = std::max(mx, w(i, j));
            }
            double s, z;
            if (mx == mn) {
                s = 1.0;
                z = std::round(mn);
            } else {
                s = (mx - mn) / qmax;
                z = std::round(mn / s);
            }
            out.scales(i, gi) = s;
            out.zero_points(i, gi) = z;
            for (Index j = begin; j < begin + len; ++j) {
                double code = std::round(w(i, j) / s) - z;
                code = std::min(std::max(code, 0.0), qmax);
                out.codes(i, j) = static_cast<std::uint8_t>(code);
            }
        }
    });
    return out;
}

Matrix dequantize(const QuantizedLayer& q) {
    const Index rows = q.rows();
    const Index cols = q.cols();
    const Index g = q.config.group_size;
    Matrix out(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            const Index gi = j / g;
            out(i, j) = (static_cast<double>(q.codes(i, j)) + q.zero_points(i, gi)) *
                        q.scales(i, gi);
        }
    }
    return out;
}

Matrix quant_error(const Matrix& w, const QuantizedLayer& q) {
    if (w.rows() != q.rows() || w.cols() != q.cols())
        throw validation_error("quant_error: shape mismatch");
    return w - dequantize(q);
}

namespace {

constexpr char kMagic[4] = {'S', 'A', 'D', 'Q'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T v) {
    char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    char buf[sizeof(T)];
    in.read(buf, sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<T>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

void put_f64_matrix(std::ostream& out, const Matrix& m) {
    for (Index i = 0; i < m.size(); ++i)
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m.data()[i]));
}

void get_f64_matrix(std::istream& in, Matrix& m) {
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = std::bit_cast<double>(get_le<std::uint64_t>(in));
}

}  // namespace

void write_quantized(const QuantizedLayer& q, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, kVersion);
    out.put(static_cast<char>(q.config.bits));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(q.config.group_size));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(q.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(q.cols()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(q.num_groups()));
    out.write(reinterpret_cast<const char*>(q.codes.data()),
              static_cast<std::streamsize>(q.codes.size()));
    put_f64_matrix(out, q.scales);
    put_f64_matrix(out, q.zero_points);
    out.flush();
    if (!out) throw io_error("write failed: " + path);
}

QuantizedLayer read_quantized(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("SADQ: bad magic in " + path);
    const auto version = get_le<std::uint32_t>(in);
    if (version != kVersion)
        throw io_error("SADQ: unsupported version " + std::to_string(version));
    QuantizedLayer q;
    q.config.bits = in.get();
    q.config.group_size = static_cast<Index>(get_le<std::uint64_t>(in));
    const auto rows = static_cast<Index>(get_le<std::uint64_t>(in));
    const auto cols = static_cast<Index>(get_le<std::uint64_t>(in));
    const auto n_groups = static_cast<Index>(get_le<std::uint64_t>(in));
    validate(q.config);
    const Index expected_groups = (cols + q.config.group_size - 1) / q.config.group_size;
    if (n_groups != expected_groups)
        throw io_error("SADQ: group count mismatch in " + path);
    q.codes.resize(rows, cols);
    in.read(reinterpret_cast<char*>(q.codes.data()),
            static_cast<std::streamsize>(q.codes.size()));
    q.scales.resize(rows, n_groups);
    q.zero_points.resize(rows, n_groups);
    get_f64_matrix(in, q.scales);
    get_f64_matrix(in, q.zero_points);
    if (!in) throw io_error("SADQ: truncated payload in " + path);
    const std::uint8_t code_max = static_cast<std::uint8_t>((1 << q.config.bits) - 1);
    if ((q.codes.array() > code_max).any())
        throw io_error("SADQ: code out of declared range in " + path);
    return q;
}

}  // namespace qwha
