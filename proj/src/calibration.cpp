#include "qwha/calibration.hpp"

#include "qwha/tensor_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace qwha {

GramAccumulator::GramAccumulator(Index dim) : dim_(dim) {
    if (dim < 1) throw validation_error("GramAccumulator: dim must be positive");
    gram_ = Matrix::Zero(dim, dim);
}

void GramAccumulator::accumulate(const Matrix& x) {
    if (x.rows() != dim_)
        throw validation_error("accumulate: activation rows " + std::to_string(x.rows()) +
                               " do not match dim " + std::to_string(dim_));
    if (!all_finite(x)) throw validation_error("accumulate: non-finite activations");
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(x);
    gram_.triangularView<Eigen::StrictlyUpper>() =
        gram_.triangularView<Eigen::StrictlyLower>().transpose();
    samples_ += x.cols();
}

CalibrationFactor factorize(const GramAccumulator& acc) {
    if (acc.sample_count() < 1)
        throw validation_error("factorize: no samples accumulated");
    const Matrix& gram = acc.gram();
    const double trace = gram.trace();
    if (trace <= 0.0) throw numeric_error("factorize: zero Gram matrix, no signal");

    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success)
        throw numeric_error("factorize: eigendecomposition failed");
    Vector evals = es.eigenvalues();
    const double d = static_cast<double>(acc.dim());

    CalibrationFactor out;
    out.sample_count = acc.sample_count();
    // relative eigenvalue floor makes the invertibility trigger scale-free
    if (evals.minCoeff() <= 1e-12 * trace / d) {
        out.lambda_used = 1e-4 * trace / d;
        evals.array() += out.lambda_used;
    }
    out.r = es.eigenvectors() * evals.cwiseSqrt().asDiagonal();
    return out;
}

double reduced_objective(const Matrix& dw, const SparseAdapter& f,
                         const CalibrationFactor& r) {
    if (dw.rows() != f.d_out || dw.cols() != f.d_in)
        throw validation_error("reduced_objective: dW shape mismatch");
    if (r.r.rows() != dw.cols())
        throw validation_error("reduced_objective: R shape mismatch");
    const Matrix delta = materialize_delta(f);
    return ((dw - delta) * r.r).squaredNorm();
}

void write_calibration(const CalibrationFactor& f, const std::string& path) {
    write_matrix(f.r, path);
    nlohmann::json meta;
    meta["lambda_used"] = f.lambda_used;
    meta["sample_count"] = f.sample_count;
    meta["dim"] = f.r.rows();
    std::ofstream out(path + ".json", std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path + ".json");
    out << meta.dump(2) << '\n';
    if (!out) throw io_error("write failed: " + path + ".json");
}

CalibrationFactor read_calibration(const std::string& path) {
    CalibrationFactor f;
    f.r = read_matrix(path);
    if (f.r.rows() != f.r.cols())
        throw io_error("calibration factor must be square: " + path);
    std::ifstream in(path + ".json");
    if (!in) throw io_error("cannot open: " + path + ".json");
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw io_error("bad calibration sidecar " + path + ".json: " + e.what());
    }
    f.lambda_used = meta.at("lambda_used").get<double>();
    f.sample_count = meta.at("sample_count").get<long long>();
    return f;
}

}  // namespace qwha
