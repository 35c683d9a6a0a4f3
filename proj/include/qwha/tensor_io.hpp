#pragma once

#include "qwha/types.hpp"

#include <iosfwd>
#include <string>

namespace qwha {

// SADP container: a fixed little-endian header followed by a row-major
// payload.
//
//   offset  size  field
//        0     4  magic, the ASCII bytes "SADP"
//        4     4  format version (u32), currently 1
//        8     1  dtype code (u8): 0 = f32, 1 = f64, 2 = u64
//        9     8  rows (u64)
//       17     8  cols (u64)
//       25     -  payload, rows*cols elements, row-major, little-endian
//
// Files written on any host are readable on any other. f32 payloads are
// widened to f64 on load; dtype 2 (u64) is reserved for index payloads
// embedded in adapter files and is rejected by read_matrix.
enum class Dtype : std::uint8_t { f32 = 0, f64 = 1, u64 = 2 };

inline constexpr std::uint32_t kSadpVersion = 1;
inline constexpr std::size_t kSadpHeaderSize = 25;

using IndexMatrix =
    Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void write_matrix(const Matrix& m, const std::string& path, Dtype dtype = Dtype::f64);
Matrix read_matrix(const std::string& path);

// Stream-level blocks, used standalone and as sections of adapter files.
void write_matrix_block(std::ostream& out, const Matrix& m, Dtype dtype);
Matrix read_matrix_block(std::istream& in);
void write_index_block(std::ostream& out, const IndexMatrix& m);
IndexMatrix read_index_block(std::istream& in);

// Small hand-written matrices: comma-separated values, one row per line,
// no header row.
Matrix read_csv_matrix(const std::string& path);
void write_csv_matrix(const Matrix& m, const std::string& path);

}  // namespace qwha
