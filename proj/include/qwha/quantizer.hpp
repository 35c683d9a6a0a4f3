#pragma once

#include "qwha/types.hpp"

#include <string>

namespace qwha {

// Group-wise uniform round-to-nearest quantization. Groups are contiguous
// runs of group_size columns within each output channel (row); the final
// group may be shorter when group_size does not divide d_in.
struct QuantConfig {
    int bits = 4;
    Index group_size = 64;
};

void validate(const QuantConfig& cfg);

using CodeMatrix =
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct QuantizedLayer {
    CodeMatrix codes;     // d_out x d_in, values in [0, 2^bits - 1]
    Matrix scales;        // d_out x n_groups, positive
    Matrix zero_points;   // d_out x n_groups, integer-valued
    QuantConfig config;

    Index rows() const { return codes.rows(); }
    Index cols() const { return codes.cols(); }
    Index num_groups() const { return scales.cols(); }
};

// Per group: s = (max - min) / (2^n - 1), z = round(min / s), and
// codes = clamp(round(w / s) - z, 0, 2^n - 1). A degenerate group
// (max == min) gets s = 1, z = round(min); every code collapses to the
// same value, which is documented behavior rather than an error.
// round() is round-half-away-from-zero.
QuantizedLayer quantize(const Matrix& w, const QuantConfig& cfg, int threads = 1);

// The code map alone, with caller-supplied per-group scales/zero-points
// (d_out x n_groups). quantize() derives the parameters and delegates here.
CodeMatrix apply_quantization(const Matrix& w, const Matrix& scales,
                              const Matrix& zero_points, const QuantConfig& cfg);

// W_Q = (codes + z) * s, applied per group.
Matrix dequantize(const QuantizedLayer& q);

// dW_Q = W_0 - W_Q
Matrix quant_error(const Matrix& w, const QuantizedLayer& q);

// "SADQ" container: header-tagged codes (u8) plus per-group scales and
// zero-points (f64), all little-endian.
void write_quantized(const QuantizedLayer& q, const std::string& path);
QuantizedLayer read_quantized(const std::string& path);

}  // namespace qwha
