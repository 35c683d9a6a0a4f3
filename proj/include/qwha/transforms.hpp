#pragma once

#include "qwha/types.hpp"

#include <memory>
#include <span>
#include <string_view>

namespace qwha {

enum class TransformKind { WHT, DCT, DHT };

const char* to_string(TransformKind kind);
TransformKind transform_kind_from_string(std::string_view name);

// Orthonormal transform kernel of a fixed size, ready to apply.
//
// WHT plans factor N = 2^k * m and never materialize the power-of-two part;
// the 2^k stage runs as an add/subtract butterfly and the m x m Hadamard
// factor (m in {1, 12, 20, 28}) as a small dense block multiply. DCT and DHT
// plans cache the explicit N x N kernel, which beats their recursive forms
// for the sizes we care about.
//
// Inverses always go through the transpose rule H^{-1} = H^T; no symmetry
// assumptions.
class TransformPlan {
public:
    enum class Side { RightByH, RightByHInverse, LeftByH, LeftByHInverse };

    TransformPlan(TransformKind kind, Index n);

    TransformKind kind() const { return kind_; }
    Index size() const { return n_; }

    // Explicit matrix product with the kernel / its transpose.
    Matrix apply(const Matrix& m, Side side) const;

    // y = H x and y = H^T x on a contiguous vector of length size().
    // WHT runs the fused butterfly; DCT/DHT multiply by the cached kernel.
    void forward_inplace(double* v) const;
    void transpose_inplace(double* v) const;

    // Dense kernel; built on demand for WHT, cached for DCT/DHT.
    Matrix dense_kernel() const;

private:
    TransformKind kind_;
    Index n_;
    // WHT factorization N = 2^k * m
    Index block_ = 1;          // m
    Matrix hm_;                // unnormalized m x m Hadamard factor when m > 1
    double scale_ = 1.0;       // 1/sqrt(N)
    Matrix kernel_;            // explicit kernel for DCT/DHT
};

using PlanPtr = std::shared_ptr<const TransformPlan>;

PlanPtr build_plan(TransformKind kind, Index n);

// Process-wide plan cache keyed by (kind, size); safe under concurrent use.
PlanPtr get_plan(TransformKind kind, Index n);

// Direct construction rules, independent of the plan machinery. Useful as a
// test oracle and for the dense-multiply benchmark reference.
Matrix explicit_kernel(TransformKind kind, Index n);

// In-place fast WHT (orthonormal, includes the 1/sqrt(N) factor).
void fast_wht_inplace(std::span<double> v);

// Unnormalized +-1 Hadamard matrix for m in {1, 12, 20, 28}, built by Paley
// constructions. Other sizes raise validation_error naming the size; adding
// a factor order means extending this function.
Matrix hadamard_matrix(Index m);

// Splits n into 2^k * m with a supported Hadamard factor m, or throws.
std::pair<Index, Index> wht_factorization(Index n);

}  // namespace qwha
