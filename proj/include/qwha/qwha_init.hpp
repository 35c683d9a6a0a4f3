#pragma once

#include "qwha/calibration.hpp"
#include "qwha/sparse_adapter.hpp"
#include "qwha/transforms.hpp"
#include "qwha/types.hpp"

#include <string_view>
#include <vector>

namespace qwha {

// Parameter-location strategies. AdaAlloc allocates per-channel budgets
// proportional to channel error norms and picks top-magnitude coefficients
// inside each channel. The baselines reproduce prior selection schemes:
// Magnitude takes the globally largest coefficients, Random draws positions
// uniformly, SSHHalfHalf takes half by magnitude and half at random.
enum class Strategy { AdaAlloc, Random, Magnitude, SSHHalfHalf };

const char* to_string(Strategy s);
Strategy strategy_from_string(std::string_view name);

struct AllocConfig {
    double temperature = 1.0;   // t in the allocation weights ||dW_i||^t
    Index min_per_channel = 2;  // enforced for AdaAlloc only
    Strategy strategy = Strategy::AdaAlloc;
    std::uint64_t seed = 0;
};

// AdaAlloc budgets: floor-allocated proportional shares, remainder assigned
// one at a time to the smallest allocation (ties to the lowest channel
// index), channels below min_per_channel raised to it funded from the
// largest allocations (ties to the highest index), and budgets capped at
// d_in with overflow redistributed smallest-first. Sum(p_i) == p always.
std::vector<Index> ada_alloc(const Matrix& dw, Index p, const AllocConfig& cfg);

// Budgets for any strategy. AdaAlloc delegates to ada_alloc; the baselines
// derive budgets from their global selection pattern over the dense
// coefficient scores (row counts of the globally selected cells).
std::vector<Index> budgets_for_strategy(const Matrix& dw, const Matrix& scores,
                                        Index p, const AllocConfig& cfg);

// Column choices for one channel given its budget. Deterministic for a
// given seed; magnitude ties break toward the lower index. Returned indices
// are sorted ascending.
std::vector<Index> select_channel(const RowVector& v_dense, Index p_i,
                                  Strategy strategy, std::uint64_t seed);

struct RefineResult {
    RowVector x;            // least-squares coefficients on the support
    bool ill_conditioned;   // true when B'B'^T modes were dropped (pinv path)
};

// x* = v B'^T (B' B'^T)^{-1}; when the Gram condition number exceeds 1e12
// the inverse becomes a pseudo-inverse with relative eigenvalue cutoff
// 1e-12 and the channel is flagged.
RefineResult refine_values(const RowVector& v, const Matrix& b_sub);

struct ChannelSolve {
    Index channel = 0;
    Index budget = 0;
    std::vector<Index> selected;   // column indices, ascending
    std::vector<double> refined;   // x*, aligned with selected
    double pre_error_sq = 0.0;     // ||v||^2
    double post_error_sq = 0.0;    // ||v - x* B'||^2
    bool ill_conditioned = false;
};

struct InitResult {
    SparseAdapter adapter;
    std::vector<ChannelSolve> channels;
};

// Quantization-aware initialization. Computes B = H^{-1} R once, allocates
// budgets, and per channel selects against the dense solution (dW H)_i
// (equal to v B^{-1}; no inverse is formed), refines values, and writes
// (c, E) in channel order. Stored values are x*/alpha so that
// alpha * F * H^{-1} reconstructs the error. Output is independent of the
// thread count.
InitResult initialize(const Matrix& dw, const CalibrationFactor& r,
                      const TransformPlan& plan, Index p, const AllocConfig& cfg,
                      double alpha = 1.0, int threads = 1);

// DCA/DHA baseline: dW = alpha H'^{-1} F H^{-1}. Because H' is orthonormal
// the objective equals || (H' dW - F H^{-1}) R ||_F^2, so the problem
// reduces to the single-transform case on the left-transformed target.
InitResult initialize_two_sided(const Matrix& dw, const CalibrationFactor& r,
                                const TransformPlan& right_plan,
                                const TransformPlan& left_plan, Index p,
                                const AllocConfig& cfg, double alpha = 1.0,
                                int threads = 1);

}  // namespace qwha
