#include "qwha/tensor_io.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>

using namespace qwha;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_SUITE("tensor_io") {

TEST_CASE("header layout: 1x1 f64 file is 25-byte header plus 8-byte payload") {
    test::TempDir tmp("io_header");
    Matrix m(1, 1);
    m(0, 0) = 0.0;
    write_matrix(m, tmp.path("one.sadp"));
    const std::string bytes = slurp(tmp.path("one.sadp"));
    CHECK(bytes.size() == kSadpHeaderSize + 8);
    CHECK(std::memcmp(bytes.data(), "SADP", 4) == 0);
    // version 1, little-endian
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);
    CHECK(static_cast<unsigned char>(bytes[5]) == 0);
    // dtype code f64
    CHECK(static_cast<unsigned char>(bytes[8]) == 1);
    // rows = cols = 1
    CHECK(static_cast<unsigned char>(bytes[9]) == 1);
    CHECK(static_cast<unsigned char>(bytes[17]) == 1);
}

TEST_CASE("2x3 zero matrix writes 48 zero payload bytes") {
    test::TempDir tmp("io_zeros");
    write_matrix(Matrix::Zero(2, 3), tmp.path("z.sadp"));
    const std::string bytes = slurp(tmp.path("z.sadp"));
    REQUIRE(bytes.size() == kSadpHeaderSize + 48);
    for (std::size_t i = kSadpHeaderSize; i < bytes.size(); ++i)
        CHECK(bytes[i] == '\0');
}

TEST_CASE("round trip reproduces a random 64x64 matrix bit-exactly") {
    test::TempDir tmp("io_roundtrip");
    const Matrix m = test::random_matrix(64, 64, 7);
    write_matrix(m, tmp.path("m.sadp"));
    const Matrix back = read_matrix(tmp.path("m.sadp"));
    REQUIRE(back.rows() == 64);
    REQUIRE(back.cols() == 64);
    for (Index i = 0; i < m.size(); ++i)
        CHECK(std::memcmp(&back.data()[i], &m.data()[i], sizeof(double)) == 0);
    // write-read-write produces identical bytes
    write_matrix(back, tmp.path("m2.sadp"));
    CHECK(slurp(tmp.path("m.sadp")) == slurp(tmp.path("m2.sadp")));
}

TEST_CASE("f32 interchange widens exactly representable values") {
    test::TempDir tmp("io_f32");
    Matrix m(1, 2);
    m << 1.5, -0.25;
    write_matrix(m, tmp.path("f32.sadp"), Dtype::f32);
    const Matrix back = read_matrix(tmp.path("f32.sadp"));
    CHECK(back(0, 0) == 1.5);
    CHECK(back(0, 1) == -0.25);
}

TEST_CASE("a hand-built little-endian file decodes on this host") {
    test::TempDir tmp("io_le");
    // header: SADP, version 1, dtype f64, 1x1; payload: 1.0
    const unsigned char bytes[] = {
        'S', 'A', 'D', 'P', 1, 0, 0, 0, 1,
        1, 0, 0, 0, 0, 0, 0, 0,
        1, 0, 0, 0, 0, 0, 0, 0,
        0, 0, 0, 0, 0, 0, 0xF0, 0x3F};
    std::ofstream out(tmp.path("le.sadp"), std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
    out.close();
    const Matrix m = read_matrix(tmp.path("le.sadp"));
    CHECK(m(0, 0) == 1.0);
}

TEST_CASE("bad magic is rejected") {
    test::TempDir tmp("io_magic");
    write_matrix(Matrix::Zero(1, 1), tmp.path("bad.sadp"));
    std::string bytes = slurp(tmp.path("bad.sadp"));
    bytes[0] = 'X';
    bytes[1] = 'X';
    bytes[2] = 'X';
    bytes[3] = 'X';
    std::ofstream(tmp.path("bad.sadp"), std::ios::binary) << bytes;
    CHECK_THROWS_AS(read_matrix(tmp.path("bad.sadp")), io_error);
}

TEST_CASE("truncated payload is a size mismatch") {
    test::TempDir tmp("io_trunc");
    write_matrix(test::random_matrix(4, 4, 3), tmp.path("t.sadp"));
    std::string bytes = slurp(tmp.path("t.sadp"));
    bytes.resize(bytes.size() - 5);
    std::ofstream(tmp.path("t.sadp"), std::ios::binary) << bytes;
    CHECK_THROWS_AS(read_matrix(tmp.path("t.sadp")), io_error);
}

TEST_CASE("version and dtype validation") {
    test::TempDir tmp("io_version");
    write_matrix(Matrix::Zero(1, 1), tmp.path("v.sadp"));
    std::string bytes = slurp(tmp.path("v.sadp"));
    bytes[4] = 9;
    std::ofstream(tmp.path("v.sadp"), std::ios::binary) << bytes;
    CHECK_THROWS_AS(read_matrix(tmp.path("v.sadp")), io_error);

    bytes = slurp(tmp.path("v.sadp"));
    bytes[4] = 1;
    bytes[8] = 7;  // unknown dtype
    std::ofstream(tmp.path("v.sadp"), std::ios::binary) << bytes;
    CHECK_THROWS_AS(read_matrix(tmp.path("v.sadp")), io_error);
}

TEST_CASE("non-finite values are rejected on write and on read") {
    test::TempDir tmp("io_nan");
    Matrix m(1, 1);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(write_matrix(m, tmp.path("nan.sadp")), validation_error);

    // NaN payload injected directly
    write_matrix(Matrix::Zero(1, 1), tmp.path("inj.sadp"));
    std::string bytes = slurp(tmp.path("inj.sadp"));
    const std::uint64_t nan_bits = 0x7FF8000000000000ULL;
    std::memcpy(bytes.data() + kSadpHeaderSize, &nan_bits, 8);
    std::ofstream(tmp.path("inj.sadp"), std::ios::binary) << bytes;
    CHECK_THROWS_AS(read_matrix(tmp.path("inj.sadp")), io_error);
}

TEST_CASE("missing file raises io_error") {
    CHECK_THROWS_AS(read_matrix("/nonexistent/q.sadp"), io_error);
}

TEST_CASE("csv loader parses hand-written matrices") {
    test::TempDir tmp("io_csv");
    std::ofstream(tmp.path("m.csv")) << "1,2,3\n4,-5,6.5\n";
    const Matrix m = read_csv_matrix(tmp.path("m.csv"));
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 3);
    CHECK(m(1, 1) == -5.0);
    CHECK(m(1, 2) == 6.5);

    std::ofstream(tmp.path("ragged.csv")) << "1,2\n3\n";
    CHECK_THROWS_AS(read_csv_matrix(tmp.path("ragged.csv")), io_error);
    std::ofstream(tmp.path("junk.csv")) << "1,abc\n";
    CHECK_THROWS_AS(read_csv_matrix(tmp.path("junk.csv")), io_error);
}

TEST_CASE("csv writer round-trips through the loader") {
    test::TempDir tmp("io_csvrt");
    const Matrix m = test::random_matrix(5, 3, 11);
    write_csv_matrix(m, tmp.path("rt.csv"));
    const Matrix back = read_csv_matrix(tmp.path("rt.csv"));
    CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);  // 17 digits is lossless
}

TEST_CASE("index blocks round-trip and are rejected by read_matrix") {
    test::TempDir tmp("io_idx");
    IndexMatrix e(2, 2);
    e << 0, 3, 7, 1;
    {
        std::ofstream out(tmp.path("e.sadp"), std::ios::binary);
        write_index_block(out, e);
    }
    {
        std::ifstream in(tmp.path("e.sadp"), std::ios::binary);
        const IndexMatrix back = read_index_block(in);
        CHECK(back == e);
    }
    CHECK_THROWS_AS(read_matrix(tmp.path("e.sadp")), io_error);
}

}  // TEST_SUITE
