#pragma once

#include "qwha/sparse_adapter.hpp"
#include "qwha/types.hpp"

#include <string>

namespace qwha {

// Accumulates the activation Gram matrix X X^T over batches.
class GramAccumulator {
public:
    explicit GramAccumulator(Index dim);

    // gram += x x^T; x is dim x samples
    void accumulate(const Matrix& x);

    Index dim() const { return dim_; }
    long long sample_count() const { return samples_; }
    const Matrix& gram() const { return gram_; }

private:
    Index dim_;
    Matrix gram_;
    long long samples_ = 0;
};

// Invertible square root R of the (possibly regularized) Gram matrix, so
// that R R^T = X X^T + lambda I.
struct CalibrationFactor {
    Matrix r;
    double lambda_used = 0.0;
    long long sample_count = 0;
};

// Symmetric eigendecomposition of the Gram matrix; if the smallest
// eigenvalue is at or below 1e-12 * trace / dim, lambda = 1e-4 * trace / dim
// is added to the diagonal first. R = U Sigma^{1/2}.
CalibrationFactor factorize(const GramAccumulator& acc);

// || (dW - alpha F H^{-1}) R ||_F^2, the calibrated squared output error.
double reduced_objective(const Matrix& dw, const SparseAdapter& f,
                         const CalibrationFactor& r);

// R in SADP format plus a JSON sidecar at path + ".json" carrying
// lambda_used and sample_count.
void write_calibration(const CalibrationFactor& f, const std::string& path);
CalibrationFactor read_calibration(const std::string& path);

}  // namespace qwha
