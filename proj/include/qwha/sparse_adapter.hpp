#pragma once

#include "qwha/transforms.hpp"
#include "qwha/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace qwha {

// Sparse spectral adapter: dW = alpha * F * H^{-1}, with F holding values c
// at positions E. The two-sided form dW = alpha * H'^{-1} * F * H^{-1} exists
// only for the DCA/DHA comparison baselines.
struct SparseAdapter {
    Index d_out = 0;
    Index d_in = 0;
    std::vector<double> values;                      // c
    std::vector<std::pair<Index, Index>> indices;    // E, (row, col), 0-based
    TransformKind kernel = TransformKind::WHT;
    bool two_sided = false;
    double alpha = 1.0;

    Index p() const { return static_cast<Index>(values.size()); }
};

// F = Scatter(c, E). Order of (c, E) pairs is preserved; out-of-range or
// duplicate positions are rejected.
SparseAdapter scatter(std::vector<double> c, std::vector<std::pair<Index, Index>> e,
                      Index d_out, Index d_in,
                      TransformKind kernel = TransformKind::WHT,
                      bool two_sided = false, double alpha = 1.0);

// Dense F (structural zeros stay zero).
Matrix materialize_f(const SparseAdapter& a);

// alpha * F * H^{-1}; the overload with a left plan computes
// alpha * H'^{-1} * F * H^{-1}.
Matrix materialize_delta(const SparseAdapter& a, const TransformPlan& plan);
Matrix materialize_delta(const SparseAdapter& a, const TransformPlan& right_plan,
                         const TransformPlan& left_plan);

// Plans resolved from the process cache by the adapter's kernel and shape.
Matrix materialize_delta(const SparseAdapter& a);

// Y = (W_Q + dW) X without forming dW densely.
Matrix forward(const SparseAdapter& a, const TransformPlan& plan, const Matrix& w_q,
               const Matrix& x);

// Adapter file: u64 JSON-header length, the JSON header (shape, kernel,
// alpha, p, two-sided), then two SADP blocks: c as f64 p x 1 and E as
// u64 p x 2.
void write_adapter(const SparseAdapter& a, const std::string& path);
SparseAdapter read_adapter(const std::string& path);

}  // namespace qwha
