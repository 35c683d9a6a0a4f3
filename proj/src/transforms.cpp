#include "qwha/transforms.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

namespace qwha {

const char* to_string(TransformKind kind) {
    switch (kind) {
        case TransformKind::WHT: return "WHT";
        case TransformKind::DCT: return "DCT";
        case TransformKind::DHT: return "DHT";
    }
    return "?";
}

TransformKind transform_kind_from_string(std::string_view name) {
    if (name == "WHT" || name == "wht") return TransformKind::WHT;
    if (name == "DCT" || name == "dct") return TransformKind::DCT;
    if (name == "DHT" || name == "dht") return TransformKind::DHT;
    throw validation_error("unknown transform kind: " + std::string(name));
}

namespace {

// quadratic character of GF(q), q prime: chi(0)=0, chi(r)=+1 for nonzero
// squares, -1 otherwise
std::vector<int> quadratic_character(Index q) {
    std::vector<int> chi(static_cast<std::size_t>(q), -1);
    chi[0] = 0;
    for (Index a = 1; a < q; ++a) chi[static_cast<std::size_t>((a * a) % q)] = 1;
    return chi;
}

// Paley I: q prime, q = 3 (mod 4), order q+1. H = I + S with
// S = [[0, e^T], [-e, J]], J the Jacobsthal matrix.
Matrix paley_type1(Index q) {
    const auto chi = quadratic_character(q);
    const Index n = q + 1;
    Matrix h(n, n);
    h(0, 0) = 1.0;
    for (Index j = 1; j < n; ++j) h(0, j) = 1.0;
    for (Index i = 1; i < n; ++i) h(i, 0) = -1.0;
    for (Index i = 1; i < n; ++i) {
        for (Index j = 1; j < n; ++j) {
            if (i == j) {
                h(i, j) = 1.0;  // chi(0) = 0 plus the identity
            } else {
                const Index d = ((i - j) % q + q) % q;
                h(i, j) = static_cast<double>(chi[static_cast<std::size_t>(d)]);
            }
        }
    }
    return h;
}

// Paley II: q prime, q = 1 (mod 4), order 2(q+1). Built from the symmetric
// conference matrix C = [[0, e^T], [e, J]] as
// H = C (x) [[1,1],[1,-1]] + I (x) [[1,-1],[-1,-1]].
Matrix paley_type2(Index q) {
    const auto chi = quadratic_character(q);
    const Index c_n = q + 1;
    Matrix c = Matrix::Zero(c_n, c_n);
    for (Index j = 1; j < c_n; ++j) {
        c(0, j) = 1.0;
        c(j, 0) = 1.0;
    }
    for (Index i = 1; i < c_n; ++i)
        for (Index j = 1; j < c_n; ++j) {
            const Index d = ((i - j) % q + q) % q;
            c(i, j) = static_cast<double>(chi[static_cast<std::size_t>(d)]);
        }
    const Index n = 2 * c_n;
    Matrix h(n, n);
    const double s[2][2] = {{1.0, 1.0}, {1.0, -1.0}};
    const double t[2][2] = {{1.0, -1.0}, {-1.0, -1.0}};
    for (Index i = 0; i < c_n; ++i)
        for (Index j = 0; j < c_n; ++j)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    h(2 * i + a, 2 * j + b) =
                        c(i, j) * s[a][b] + (i == j ? t[a][b] : 0.0);
    return h;
}

}  // namespace

Matrix hadamard_matrix(Index m) {
    switch (m) {
        case 1: {
            Matrix h(1, 1);
            h(0, 0) = 1.0;
            return h;
        }
        case 12: return paley_type1(11);
        case 20: return paley_type1(19);
        case 28: return paley_type2(13);
        default:
            throw validation_error("no bundled Hadamard factor of order " +
                                   std::to_string(m) +
                                   " (available: 1, 12, 20, 28)");
    }
}

std::pair<Index, Index> wht_factorization(Index n) {
    if (n < 1) throw validation_error("transform size must be positive");
    Index odd = n;
    Index pow2 = 1;
    while (odd % 2 == 0) {
        odd /= 2;
        pow2 *= 2;
    }
    if (odd == 1) return {pow2, 1};
    // odd parts 3, 5, 7 pair with a factor of 4 to reach the bundled
    // Hadamard orders 12, 20, 28
    if (odd == 3 || odd == 5 || odd == 7) {
        if (pow2 % 4 != 0)
            throw validation_error("unsupported WHT size " + std::to_string(n) +
                                   ": odd part " + std::to_string(odd) +
                                   " needs a factor of 4");
        return {pow2 / 4, 4 * odd};
    }
    throw validation_error("unsupported WHT size " + std::to_string(n) +
                           ": no Hadamard factorization available");
}

TransformPlan::TransformPlan(TransformKind kind, Index n) : kind_(kind), n_(n) {
    if (n < 1) throw validation_error("transform size must be positive");
    scale_ = 1.0 / std::sqrt(static_cast<double>(n));
    if (kind == TransformKind::WHT) {
        auto [pow2, m] = wht_factorization(n);
        (void)pow2;
        block_ = m;
        if (m > 1) hm_ = hadamard_matrix(m);
    } else {
        kernel_ = explicit_kernel(kind, n);
    }
}

namespace {

// add/subtract butterfly over nb contiguous lanes of width `block`
void block_butterfly(double* v, Index nb, Index block) {
    for (Index h = 1; h < nb; h <<= 1) {
        for (Index i = 0; i < nb; i += 2 * h) {
            for (Index b = i; b < i + h; ++b) {
                double* p = v + b * block;
                double* q = v + (b + h) * block;
                for (Index t = 0; t < block; ++t) {
                    const double x = p[t];
                    const double y = q[t];
                    p[t] = x + y;
                    q[t] = x - y;
                }
            }
        }
    }
}

}  // namespace

void TransformPlan::forward_inplace(double* v) const {
    if (kind_ == TransformKind::WHT) {
        const Index nb = n_ / block_;
        if (block_ > 1) {
            for (Index b = 0; b < nb; ++b) {
                Eigen::Map<Vector> seg(v + b * block_, block_);
                seg = (hm_ * seg).eval();
            }
        }
        block_butterfly(v, nb, block_);
        for (Index i = 0; i < n_; ++i) v[i] *= scale_;
    } else {
        Eigen::Map<Vector> x(v, n_);
        x = (kernel_ * x).eval();
    }
}

void TransformPlan::transpose_inplace(double* v) const {
    if (kind_ == TransformKind::WHT) {
        const Index nb = n_ / block_;
        if (block_ > 1) {
            // H^T = H_{2^k} (x) Hm^T: only the block factor transposes, the
            // butterfly stage is symmetric by construction
            for (Index b = 0; b < nb; ++b) {
                Eigen::Map<Vector> seg(v + b * block_, block_);
                seg = (hm_.transpose() * seg).eval();
            }
        }
        block_butterfly(v, nb, block_);
        for (Index i = 0; i < n_; ++i) v[i] *= scale_;
    } else {
        Eigen::Map<Vector> x(v, n_);
        x = (kernel_.transpose() * x).eval();
    }
}

Matrix TransformPlan::apply(const Matrix& m, Side side) const {
    const bool right = side == Side::RightByH || side == Side::RightByHInverse;
    const Index edge = right ? m.cols() : m.rows();
    if (edge != n_)
        throw validation_error("transform size " + std::to_string(n_) +
                               " does not match matrix edge " + std::to_string(edge));
    if (kind_ != TransformKind::WHT) {
        switch (side) {
            case Side::RightByH: return m * kernel_;
            case Side::RightByHInverse: return m * kernel_.transpose();
            case Side::LeftByH: return kernel_ * m;
            case Side::LeftByHInverse: return kernel_.transpose() * m;
        }
    }
    // WHT fast path. Row semantics: (M H)_i = H^T m_i, (M H^T)_i = H m_i.
    Matrix out = m;
    if (right) {
        for (Index i = 0; i < out.rows(); ++i) {
            double* row = out.data() + i * out.cols();
            if (side == Side::RightByH)
                transpose_inplace(row);
            else
                forward_inplace(row);
        }
    } else {
        std::vector<double> col(static_cast<std::size_t>(n_));
        for (Index j = 0; j < out.cols(); ++j) {
            for (Index i = 0; i < n_; ++i) col[static_cast<std::size_t>(i)] = out(i, j);
            if (side == Side::LeftByH)
                forward_inplace(col.data());
            else
                transpose_inplace(col.data());
            for (Index i = 0; i < n_; ++i) out(i, j) = col[static_cast<std::size_t>(i)];
        }
    }
    return out;
}

Matrix TransformPlan::dense_kernel() const {
    if (kind_ != TransformKind::WHT) return kernel_;
    return explicit_kernel(kind_, n_);
}

PlanPtr build_plan(TransformKind kind, Index n) {
    return std::make_shared<const TransformPlan>(kind, n);
}

PlanPtr get_plan(TransformKind kind, Index n) {
    static std::mutex mu;
    static std::map<std::pair<int, Index>, PlanPtr> cache;
    const auto key = std::make_pair(static_cast<int>(kind), n);
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    PlanPtr plan = build_plan(kind, n);
    std::lock_guard<std::mutex> lock(mu);
    auto [it, inserted] = cache.emplace(key, std::move(plan));
    (void)inserted;
    return it->second;
}

Matrix explicit_kernel(TransformKind kind, Index n) {
    if (n < 1) throw validation_error("transform size must be positive");
    Matrix h(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    switch (kind) {
        case TransformKind::WHT: {
            auto [pow2, m] = wht_factorization(n);
            (void)pow2;
            const Matrix hm = hadamard_matrix(m);
            // H_N = H_{2^k} (x) H_m with H_{2^k}[a][c] = (-1)^popcount(a & c)
            for (Index i = 0; i < n; ++i) {
                const auto a = static_cast<std::uint64_t>(i / m);
                const Index b = i % m;
                for (Index j = 0; j < n; ++j) {
                    const auto c = static_cast<std::uint64_t>(j / m);
                    const Index d = j % m;
                    const double sign = (std::popcount(a & c) & 1) ? -1.0 : 1.0;
                    h(i, j) = sign * hm(b, d) * scale;
                }
            }
            break;
        }
        case TransformKind::DCT: {
            // orthonormal DCT-II; arguments reduced mod the 4N period to keep
            // large sizes accurate
            const double row0 = scale;
            const double amp = std::sqrt(2.0 / static_cast<double>(n));
            for (Index k = 0; k < n; ++k) h(0, k) = row0;
            for (Index j = 1; j < n; ++j) {
                for (Index k = 0; k < n; ++k) {
                    const std::uint64_t t =
                        (static_cast<std::uint64_t>(2 * k + 1) *
                         static_cast<std::uint64_t>(j)) %
                        static_cast<std::uint64_t>(4 * n);
                    h(j, k) = amp * std::cos(M_PI * static_cast<double>(t) /
                                             (2.0 * static_cast<double>(n)));
                }
            }
            break;
        }
        case TransformKind::DHT: {
            // H_jk = cas(2 pi j k / N) / sqrt(N), cas(x) = cos x + sin x
            for (Index j = 0; j < n; ++j) {
                for (Index k = 0; k < n; ++k) {
                    const std::uint64_t t = (static_cast<std::uint64_t>(j) *
                                             static_cast<std::uint64_t>(k)) %
                                            static_cast<std::uint64_t>(n);
                    const double x = 2.0 * M_PI * static_cast<double>(t) /
                                     static_cast<double>(n);
                    h(j, k) = scale * (std::cos(x) + std::sin(x));
                }
            }
            break;
        }
    }
    return h;
}

void fast_wht_inplace(std::span<double> v) {
    const auto n = static_cast<Index>(v.size());
    const PlanPtr plan = get_plan(TransformKind::WHT, n);
    plan->forward_inplace(v.data());
}

}  // namespace qwha
