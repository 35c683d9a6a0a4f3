#pragma once

#include "qwha/calibration.hpp"
#include "qwha/sparse_adapter.hpp"
#include "qwha/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

namespace qwha {

// Layer output error under the calibration factor, reported as the
// Frobenius norm ||(dW - dW_adapter) R||_F (squared internally). A null
// adapter gives the error before initialization.
double output_error(const Matrix& dw, const SparseAdapter* adapter,
                    const CalibrationFactor& r);

struct RankResult {
    Index rank = 0;
    double normalized = 0.0;  // rank / min(rows, cols)
};

// Count of singular values above rel_tol * sigma_max.
RankResult numerical_rank(const Matrix& m, double rel_tol = 1e-7);

enum class EnergyMode { SingularValues, TransformCoefficients };

struct EnergyResult {
    std::vector<double> curve;   // cumulative squared magnitudes, descending
    double hill_index = 0.0;     // eta: mean log-ratio of consecutive top-k magnitudes
    Index top_k = 0;             // k actually used
    bool zeros_excluded = false; // zeros among the top-k were dropped
};

// Sorted energy curve plus the Pareto hill index over the top-k magnitudes.
// top_k <= 0 selects the default min(1024, 10% of the magnitudes). The
// transform mode uses all entries of M H, or H' M H when two_sided is set.
EnergyResult energy_curve_and_hill(const Matrix& m, EnergyMode mode,
                                   TransformKind kind = TransformKind::WHT,
                                   bool two_sided = false, Index top_k = 0);

// Fraction (l1) of outlier-induced coefficient mass landing on the
// adapter's selected positions. Outliers are the top `outlier_fraction`
// magnitude entries of dW; the coefficient matrix transforms the
// outlier-masked dW with the adapter's kernel (two-sided for DCA/DHA).
double outlier_coverage(const Matrix& dw, const SparseAdapter& adapter,
                        double outlier_fraction = 0.10);

struct RankConditionResult {
    bool holds = false;
    double margin = 0.0;  // max over the grid of the condition polynomial
};

// Numeric scan of the sparse-random-matrix full-rank condition
// (1 - z^{l-1})^k + k z^{l-1} - (k (l-1) / l) z^l - 1 < 0 over a uniform
// grid on (0, 1], where k is the mean entry count per column and l the
// mean per row.
RankConditionResult full_rank_condition(double mean_per_row, double mean_per_col,
                                        Index grid = 2000);

struct SvdBaselineResult {
    Matrix delta;             // dense low-rank dW
    double objective_sq = 0;  // ||(dW - delta) R||_F^2
    bool r_pseudo_inverted = false;
};

// Calibrated low-rank optimum: truncated SVD of dW R mapped back through
// R^{-1} (pseudo-inverse with a flag when R is numerically singular).
SvdBaselineResult svd_lowrank_baseline(const Matrix& dw, const CalibrationFactor& r,
                                       Index rank);

// Per-layer metric bundle emitted by eval/compare/pipeline.
struct AnalysisReport {
    std::string label;
    std::string strategy;
    std::string kernel;
    bool two_sided = false;
    Index p = 0;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    double pre_error = 0.0;
    double post_error = 0.0;
    Index rank_f = 0;
    double rank_f_normalized = 0.0;
    Index rank_delta = 0;
    double rank_delta_normalized = 0.0;
    double hill_index = 0.0;
    Index hill_top_k = 0;
    bool hill_zeros_excluded = false;
    double coverage = 0.0;
    std::vector<double> energy_curve;
};

nlohmann::json report_to_json(const AnalysisReport& report, bool include_curve = true);
std::string report_csv_header();
std::string report_csv_row(const AnalysisReport& report);

}  // namespace qwha
