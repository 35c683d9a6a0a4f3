#include "qwha/quantizer.hpp"

#include "qwha/synth.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

using namespace qwha;

TEST_SUITE("quantizer") {

TEST_CASE("code map with forced s=1, z=0 reproduces the hand example") {
    Matrix w(1, 4);
    w << -0.5, 0.4, 1.6, 3.7;
    Matrix s(1, 1), z(1, 1);
    s << 1.0;
    z << 0.0;
    const QuantConfig cfg{2, 4};
    const CodeMatrix codes = apply_quantization(w, s, z, cfg);
    CHECK(codes(0, 0) == 0);  // round(-0.5) = -1, clamped to 0
    CHECK(codes(0, 1) == 0);
    CHECK(codes(0, 2) == 2);
    CHECK(codes(0, 3) == 3);  // round(3.7) = 4, clamped to 3

    QuantizedLayer q;
    q.codes = codes;
    q.scales = s;
    q.zero_points = z;
    q.config = cfg;
    const Matrix deq = dequantize(q);
    CHECK(deq(0, 0) == 0.0);
    CHECK(deq(0, 1) == 0.0);
    CHECK(deq(0, 2) == 2.0);
    CHECK(deq(0, 3) == 3.0);
}

TEST_CASE("grid points quantize with zero error") {
    // weights sitting exactly on (k + z) * s reproduce themselves
    const double s = 0.25;
    Matrix w(1, 4);
    w << -0.5, -0.25, 0.0, 0.25;  // codes 0..3 with z = round(-0.5/0.25) = -2
    const QuantizedLayer q = quantize(w, QuantConfig{2, 4});
    CHECK(q.scales(0, 0) == doctest::Approx(s).epsilon(1e-15));
    CHECK(q.zero_points(0, 0) == -2.0);
    const Matrix err = quant_error(w, q);
    CHECK(err.cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("rounding is half-away-from-zero") {
    // -1.5/s with s=1 rounds to -2, not -1 (which half-to-even would give for 0.5)
    Matrix w(1, 2);
    w << 0.5, 2.5;
    Matrix s(1, 1), z(1, 1);
    s << 1.0;
    z << 0.0;
    const CodeMatrix codes = apply_quantization(w, s, z, QuantConfig{3, 2});
    CHECK(codes(0, 0) == 1);  // round(0.5) = 1 away from zero
    CHECK(codes(0, 1) == 3);  // round(2.5) = 3 away from zero
}

TEST_CASE("rounding bound holds for non-clamped entries") {
    const Matrix w = test::random_matrix(64, 64, 5) * 3.0;
    const QuantConfig cfg{4, 64};
    const QuantizedLayer q = quantize(w, cfg);
    const Matrix err = quant_error(w, q);
    const double qmax = 15.0;
    for (Index i = 0; i < 64; ++i) {
        for (Index j = 0; j < 64; ++j) {
            const double s = q.scales(i, 0);
            const double pre_clamp = std::round(w(i, j) / s) - q.zero_points(i, 0);
            if (pre_clamp >= 0.0 && pre_clamp <= qmax)
                CHECK(std::abs(err(i, j)) <= s / 2 + 1e-12);
        }
    }
}

TEST_CASE("dequantize applies (code + z) * s per group") {
    QuantizedLayer q;
    q.config = QuantConfig{2, 2};
    q.codes.resize(1, 4);
    q.codes << 1, 3, 0, 2;
    q.scales.resize(1, 2);
    q.scales << 0.5, 2.0;
    q.zero_points.resize(1, 2);
    q.zero_points << -1.0, 3.0;
    const Matrix deq = dequantize(q);
    CHECK(deq(0, 0) == 0.0);   // (1 - 1) * 0.5
    CHECK(deq(0, 1) == 1.0);   // (3 - 1) * 0.5
    CHECK(deq(0, 2) == 6.0);   // (0 + 3) * 2
    CHECK(deq(0, 3) == 10.0);  // (2 + 3) * 2
}

TEST_CASE("quantizing the dequantized layer reproduces the codes") {
    const Matrix w = test::random_matrix(16, 32, 9);
    const QuantConfig cfg{3, 8};
    const QuantizedLayer q = quantize(w, cfg);
    const CodeMatrix again = apply_quantization(dequantize(q), q.scales, q.zero_points, cfg);
    CHECK(again == q.codes);
}

TEST_CASE("degenerate group: constant weights collapse to one code") {
    Matrix w = Matrix::Constant(1, 4, 2.3);
    const QuantizedLayer q = quantize(w, QuantConfig{2, 4});
    CHECK(q.scales(0, 0) == 1.0);
    CHECK(q.zero_points(0, 0) == 2.0);
    for (Index j = 0; j < 4; ++j) CHECK(q.codes(0, j) == q.codes(0, 0));
}

TEST_CASE("short trailing group is allowed") {
    const Matrix w = test::random_matrix(2, 10, 3);
    const QuantizedLayer q = quantize(w, QuantConfig{4, 4});
    CHECK(q.num_groups() == 3);
    const Matrix err = quant_error(w, q);
    CHECK(err.cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("widening a group range never decreases the scale") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix w(1, 8);
        for (Index j = 0; j < 8; ++j) w(0, j) = rng.gaussian();
        const QuantizedLayer q1 = quantize(w, QuantConfig{4, 8});
        Matrix wider = w;
        wider(0, 0) = w.minCoeff() - std::abs(rng.gaussian());
        wider(0, 7) = w.maxCoeff() + std::abs(rng.gaussian());
        const QuantizedLayer q2 = quantize(wider, QuantConfig{4, 8});
        CHECK(q2.scales(0, 0) >= q1.scales(0, 0));
    }
}

TEST_CASE("spike channels carry heavier error than the median channel") {
    SynthConfig cfg;
    cfg.kind = SynthKind::HeavyTailedSpikes;
    cfg.rows = 64;
    cfg.cols = 64;
    cfg.spike_fraction = 0.01;
    cfg.spike_scale = 8.0;
    cfg.channel_fraction = 0.1;
    int wins = 0;
    const int trials = 10;
    for (int t = 0; t < trials; ++t) {
        cfg.seed = 100 + static_cast<std::uint64_t>(t);
        const Matrix w = synth_matrix(cfg);
        const Matrix err = quant_error(w, quantize(w, QuantConfig{2, 64}));
        std::vector<double> norms;
        for (Index i = 0; i < err.rows(); ++i) norms.push_back(err.row(i).norm());
        std::vector<double> sorted = norms;
        std::sort(sorted.begin(), sorted.end());
        const double median = sorted[sorted.size() / 2];
        const double top = sorted.back();
        if (top > 1.5 * median) ++wins;
    }
    CHECK(wins >= 8);
}

TEST_CASE("determinism across runs and thread counts") {
    const Matrix w = test::random_matrix(32, 128, 23);
    const QuantConfig cfg{4, 64};
    const QuantizedLayer a = quantize(w, cfg, 1);
    const QuantizedLayer b = quantize(w, cfg, 4);
    CHECK(a.codes == b.codes);
    CHECK(std::memcmp(a.scales.data(), b.scales.data(),
                      sizeof(double) * a.scales.size()) == 0);
    CHECK(std::memcmp(a.zero_points.data(), b.zero_points.data(),
                      sizeof(double) * a.zero_points.size()) == 0);
}

TEST_CASE("bit-width outside [2, 8] is rejected") {
    const Matrix w = Matrix::Zero(1, 4);
    CHECK_THROWS_AS(quantize(w, QuantConfig{1, 4}), validation_error);
    CHECK_THROWS_AS(quantize(w, QuantConfig{9, 4}), validation_error);
}

TEST_CASE("quantized layer file round-trips") {
    test::TempDir tmp("quant_io");
    const Matrix w = test::random_matrix(8, 20, 31);
    const QuantizedLayer q = quantize(w, QuantConfig{4, 8});
    write_quantized(q, tmp.path("q.sadq"));
    const QuantizedLayer back = read_quantized(tmp.path("q.sadq"));
    CHECK(back.codes == q.codes);
    CHECK(back.config.bits == q.config.bits);
    CHECK(back.config.group_size == q.config.group_size);
    CHECK((back.scales - q.scales).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.zero_points - q.zero_points).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(read_quantized(tmp.path("missing.sadq")), io_error);
}

}  // TEST_SUITE
