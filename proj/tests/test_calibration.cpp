#include "qwha/calibration.hpp"

#include "qwha/qwha_init.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace qwha;

namespace {

CalibrationFactor identity_factor(Index d) {
    CalibrationFactor f;
    f.r = Matrix::Identity(d, d);
    f.lambda_used = 0.0;
    f.sample_count = 1;
    return f;
}

}  // namespace

TEST_SUITE("calibration") {

TEST_CASE("orthonormal columns accumulate to the identity Gram") {
    const Index d = 6;
    GramAccumulator acc(d);
    acc.accumulate(Matrix::Identity(d, d));
    CHECK((acc.gram() - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(acc.sample_count() == d);
}

TEST_CASE("two accumulations equal one concatenated accumulation") {
    const Matrix x1 = test::random_matrix(5, 9, 41);
    const Matrix x2 = test::random_matrix(5, 4, 42);
    GramAccumulator split(5);
    split.accumulate(x1);
    split.accumulate(x2);
    Matrix joined(5, 13);
    joined << x1, x2;
    GramAccumulator whole(5);
    whole.accumulate(joined);
    CHECK((split.gram() - whole.gram()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(split.sample_count() == whole.sample_count());
}

TEST_CASE("gram stays symmetric and matches the direct product") {
    const Matrix x = test::random_matrix(8, 40, 43);
    GramAccumulator acc(8);
    acc.accumulate(x);
    const Matrix direct = x * x.transpose();
    CHECK((acc.gram() - acc.gram().transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((acc.gram() - direct).cwiseAbs().maxCoeff() <=
          1e-12 * direct.cwiseAbs().maxCoeff() + 1e-12);
}

TEST_CASE("dimension mismatch is rejected") {
    GramAccumulator acc(4);
    CHECK_THROWS_AS(acc.accumulate(Matrix::Zero(5, 2)), validation_error);
}

TEST_CASE("identity Gram factorizes to an orthogonal R with R R^T = I") {
    GramAccumulator acc(4);
    acc.accumulate(Matrix::Identity(4, 4));
    const CalibrationFactor f = factorize(acc);
    CHECK(f.lambda_used == 0.0);
    CHECK((f.r * f.r.transpose() - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("diagonal Gram diag(4, 9) gives singular values {2, 3}") {
    GramAccumulator acc(2);
    Matrix x(2, 2);
    x << 2.0, 0.0, 0.0, 3.0;
    acc.accumulate(x);
    const CalibrationFactor f = factorize(acc);
    Matrix expect(2, 2);
    expect << 4.0, 0.0, 0.0, 9.0;
    CHECK((f.r * f.r.transpose() - expect).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::JacobiSVD<Matrix> svd(f.r);
    CHECK(svd.singularValues()(0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(svd.singularValues()(1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("rank-deficient Gram gets the documented regularization") {
    GramAccumulator acc(4);
    acc.accumulate(test::random_matrix(4, 1, 44));  // one sample in four dims
    const double trace = acc.gram().trace();
    const CalibrationFactor f = factorize(acc);
    CHECK(f.lambda_used == doctest::Approx(1e-4 * trace / 4.0).epsilon(1e-12));
    // R R^T == gram + lambda I
    const Matrix expect = acc.gram() + f.lambda_used * Matrix::Identity(4, 4);
    CHECK((f.r * f.r.transpose() - expect).cwiseAbs().maxCoeff() <=
          1e-10 * expect.cwiseAbs().maxCoeff());
    Eigen::JacobiSVD<Matrix> svd(f.r);
    CHECK(svd.singularValues().minCoeff() > 0.0);
}

TEST_CASE("well-conditioned Gram is not regularized") {
    GramAccumulator acc(6);
    acc.accumulate(test::random_matrix(6, 64, 45));
    CHECK(factorize(acc).lambda_used == 0.0);
}

TEST_CASE("zero Gram and empty accumulator are errors") {
    GramAccumulator fresh(3);
    CHECK_THROWS_AS(factorize(fresh), validation_error);
    fresh.accumulate(Matrix::Zero(3, 5));
    CHECK_THROWS_AS(factorize(fresh), numeric_error);
}

TEST_CASE("reduced objective of the zero adapter is ||dW R||_F^2") {
    const Matrix dw = test::random_matrix(6, 8, 46);
    GramAccumulator acc(8);
    acc.accumulate(test::random_matrix(8, 32, 47));
    const CalibrationFactor r = factorize(acc);
    const SparseAdapter zero = scatter({}, {}, 6, 8);
    CHECK(reduced_objective(dw, zero, r) ==
          doctest::Approx((dw * r.r).squaredNorm()).epsilon(1e-12));
}

TEST_CASE("raw and reduced objectives agree on random instances") {
    // reduction identity: ||(dW - F H^{-1}) X||^2 == ||(dW - F H^{-1}) R||^2
    for (int trial = 0; trial < 5; ++trial) {
        const auto seed = static_cast<std::uint64_t>(500 + trial);
        const Matrix dw = test::random_matrix(32, 32, seed);
        const Matrix x = test::random_matrix(32, 256, seed + 1000);
        GramAccumulator acc(32);
        acc.accumulate(x);
        const CalibrationFactor r = factorize(acc);
        REQUIRE(r.lambda_used == 0.0);

        Rng rng(seed + 2000);
        std::vector<double> c;
        std::vector<std::pair<Index, Index>> e;
        for (Index i = 0; i < 64; ++i) {
            const auto row = static_cast<Index>(rng.bounded(32));
            const auto col = static_cast<Index>(rng.bounded(32));
            bool dup = false;
            for (const auto& known : e)
                if (known.first == row && known.second == col) dup = true;
            if (dup) continue;
            e.emplace_back(row, col);
            c.push_back(rng.gaussian());
        }
        const SparseAdapter a = scatter(c, e, 32, 32);
        const PlanPtr plan = get_plan(TransformKind::WHT, 32);
        const Matrix delta = materialize_delta(a, *plan);
        const double raw = ((dw - delta) * x).squaredNorm();
        const double reduced = reduced_objective(dw, a, r);
        CHECK(std::abs(raw - reduced) / raw <= 1e-6);
    }
}

TEST_CASE("||M R||_F^2 equals trace(M gram M^T)") {
    const Matrix m = test::random_matrix(5, 8, 48);
    GramAccumulator acc(8);
    acc.accumulate(test::random_matrix(8, 64, 49));
    const CalibrationFactor r = factorize(acc);
    const double lhs = (m * r.r).squaredNorm();
    const double rhs = (m * acc.gram() * m.transpose()).trace();
    CHECK(std::abs(lhs - rhs) / rhs <= 1e-8);
}

TEST_CASE("full-budget refinement drives the reduced objective to zero") {
    const Matrix dw = test::random_matrix(8, 8, 50);
    GramAccumulator acc(8);
    acc.accumulate(test::random_matrix(8, 32, 51));
    const CalibrationFactor r = factorize(acc);
    const PlanPtr plan = get_plan(TransformKind::WHT, 8);
    AllocConfig cfg;
    cfg.min_per_channel = 2;
    const InitResult init = initialize(dw, r, *plan, 64, cfg);
    CHECK(reduced_objective(dw, init.adapter, r) <= 1e-8);
}

TEST_CASE("calibration factor file round-trips with its sidecar") {
    test::TempDir tmp("calib_io");
    GramAccumulator acc(5);
    acc.accumulate(test::random_matrix(5, 3, 52));
    const CalibrationFactor f = factorize(acc);
    write_calibration(f, tmp.path("r.sadp"));
    const CalibrationFactor back = read_calibration(tmp.path("r.sadp"));
    CHECK((back.r - f.r).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.lambda_used == f.lambda_used);
    CHECK(back.sample_count == f.sample_count);
}

TEST_CASE("identity factor helper sanity") {
    const CalibrationFactor f = identity_factor(3);
    CHECK((f.r - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

}  // TEST_SUITE
