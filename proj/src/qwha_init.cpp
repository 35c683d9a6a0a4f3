#include "qwha/qwha_init.hpp"

#include "qwha/threading.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qwha {

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::AdaAlloc: return "AdaAlloc";
        case Strategy::Random: return "Random";
        case Strategy::Magnitude: return "Magnitude";
        case Strategy::SSHHalfHalf: return "SSHHalfHalf";
    }
    return "?";
}

Strategy strategy_from_string(std::string_view name) {
    if (name == "AdaAlloc" || name == "adaalloc") return Strategy::AdaAlloc;
    if (name == "Random" || name == "random") return Strategy::Random;
    if (name == "Magnitude" || name == "magnitude") return Strategy::Magnitude;
    if (name == "SSHHalfHalf" || name == "ssh") return Strategy::SSHHalfHalf;
    throw validation_error("unknown strategy: " + std::string(name));
}

namespace {

constexpr std::uint64_t kGlobalPatternStream = 0xFFFFFFFF00000001ULL;

Index argmin_allocation(const std::vector<Index>& p, Index cap) {
    Index best = -1;
    for (Index i = 0; i < static_cast<Index>(p.size()); ++i) {
        if (p[static_cast<std::size_t>(i)] >= cap) continue;
        if (best < 0 || p[static_cast<std::size_t>(i)] < p[static_cast<std::size_t>(best)])
            best = i;
    }
    return best;
}

// top-k flat cells of |scores|, ties broken by ascending flat index
std::vector<Index> global_top_magnitude(const Matrix& scores, Index k) {
    std::vector<Index> order(static_cast<std::size_t>(scores.size()));
    std::iota(order.begin(), order.end(), Index{0});
    const double* data = scores.data();
    std::nth_element(order.begin(), order.begin() + k, order.end(),
                     [&](Index a, Index b) {
                         const double ma = std::abs(data[a]);
                         const double mb = std::abs(data[b]);
                         if (ma != mb) return ma > mb;
                         return a < b;
                     });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

std::vector<Index> row_counts(const std::vector<Index>& cells, Index d_out, Index d_in) {
    std::vector<Index> counts(static_cast<std::size_t>(d_out), 0);
    for (Index cell : cells) ++counts[static_cast<std::size_t>(cell / d_in)];
    return counts;
}

// partial Fisher-Yates: k distinct draws from [0, n)
std::vector<Index> sample_without_replacement(Index n, Index k, Rng& rng) {
    std::vector<Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index i = 0; i < k; ++i) {
        const auto j = i + static_cast<Index>(rng.bounded(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
}

}  // namespace

std::vector<Index> ada_alloc(const Matrix& dw, Index p, const AllocConfig& cfg) {
    const Index d_out = dw.rows();
    const Index d_in = dw.cols();
    if (!all_finite(dw)) throw validation_error("ada_alloc: non-finite dW");
    if (cfg.temperature < 0.0)
        throw validation_error("ada_alloc: temperature must be non-negative");
    if (cfg.min_per_channel < 0)
        throw validation_error("ada_alloc: min_per_channel must be non-negative");
    if (p < cfg.min_per_channel * d_out || p > d_out * d_in)
        throw validation_error("ada_alloc: infeasible budget " + std::to_string(p) +
                               " for " + std::to_string(d_out) + "x" +
                               std::to_string(d_in) + " (min " +
                               std::to_string(cfg.min_per_channel) + "/channel)");

    // Eq-style proportional floors on ||dW_i||^t; t = 0 makes them uniform.
    std::vector<double> weight(static_cast<std::size_t>(d_out));
    double total = 0.0;
    for (Index i = 0; i < d_out; ++i) {
        weight[static_cast<std::size_t>(i)] =
            std::pow(dw.row(i).norm(), cfg.temperature);
        total += weight[static_cast<std::size_t>(i)];
    }
    std::vector<Index> alloc(static_cast<std::size_t>(d_out), 0);
    Index assigned = 0;
    if (total > 0.0) {
        for (Index i = 0; i < d_out; ++i) {
            const auto share = static_cast<Index>(std::floor(
                static_cast<double>(p) * weight[static_cast<std::size_t>(i)] / total));
            alloc[static_cast<std::size_t>(i)] = share;
            assigned += share;
        }
    }

    // remainder: one at a time to the smallest allocation, lowest index first
    for (Index r = assigned; r < p; ++r) {
        const Index i = argmin_allocation(alloc, d_in);
        ++alloc[static_cast<std::size_t>(i)];
    }

    // raise channels to the per-channel minimum, funded from the largest
    // allocations (ties toward the highest index)
    for (Index i = 0; i < d_out; ++i) {
        while (alloc[static_cast<std::size_t>(i)] < cfg.min_per_channel) {
            Index donor = -1;
            for (Index j = 0; j < d_out; ++j) {
                if (alloc[static_cast<std::size_t>(j)] <= cfg.min_per_channel) continue;
                if (donor < 0 ||
                    alloc[static_cast<std::size_t>(j)] >= alloc[static_cast<std::size_t>(donor)])
                    donor = j;
            }
            if (donor < 0)
                throw numeric_error("ada_alloc: cannot satisfy per-channel minimum");
            --alloc[static_cast<std::size_t>(donor)];
            ++alloc[static_cast<std::size_t>(i)];
        }
    }

    // cap at d_in; overflow goes back through the smallest-first rule
    for (Index i = 0; i < d_out; ++i) {
        while (alloc[static_cast<std::size_t>(i)] > d_in) {
            const Index j = argmin_allocation(alloc, d_in);
            --alloc[static_cast<std::size_t>(i)];
            ++alloc[static_cast<std::size_t>(j)];
        }
    }

    const Index sum = std::accumulate(alloc.begin(), alloc.end(), Index{0});
    if (sum != p) throw numeric_error("ada_alloc: budget conservation violated");
    return alloc;
}

std::vector<Index> budgets_for_strategy(const Matrix& dw, const Matrix& scores,
                                        Index p, const AllocConfig& cfg) {
    const Index d_out = scores.rows();
    const Index d_in = scores.cols();
    if (cfg.strategy == Strategy::AdaAlloc) return ada_alloc(dw, p, cfg);
    if (p < 0 || p > d_out * d_in)
        throw validation_error("budget " + std::to_string(p) + " out of range for " +
                               std::to_string(d_out) + "x" + std::to_string(d_in));
    switch (cfg.strategy) {
        case Strategy::Magnitude:
            return row_counts(global_top_magnitude(scores, p), d_out, d_in);
        case Strategy::Random: {
            Rng rng(mix_seed(cfg.seed, kGlobalPatternStream));
            return row_counts(sample_without_replacement(d_out * d_in, p, rng), d_out,
                              d_in);
        }
        case Strategy::SSHHalfHalf: {
            const Index by_mag = (p + 1) / 2;
            std::vector<Index> cells = global_top_magnitude(scores, by_mag);
            std::vector<bool> taken(static_cast<std::size_t>(d_out * d_in), false);
            for (Index cell : cells) taken[static_cast<std::size_t>(cell)] = true;
            std::vector<Index> rest;
            rest.reserve(static_cast<std::size_t>(d_out * d_in - by_mag));
            for (Index cell = 0; cell < d_out * d_in; ++cell)
                if (!taken[static_cast<std::size_t>(cell)]) rest.push_back(cell);
            Rng rng(mix_seed(cfg.seed, kGlobalPatternStream));
            for (Index i = 0; i < p - by_mag; ++i) {
                const auto j = i + static_cast<Index>(rng.bounded(
                                       static_cast<std::uint64_t>(rest.size() - i)));
                std::swap(rest[static_cast<std::size_t>(i)],
                          rest[static_cast<std::size_t>(j)]);
                cells.push_back(rest[static_cast<std::size_t>(i)]);
            }
            return row_counts(cells, d_out, d_in);
        }
        default: break;
    }
    throw validation_error("unknown strategy");
}

std::vector<Index> select_channel(const RowVector& v_dense, Index p_i,
                                  Strategy strategy, std::uint64_t seed) {
    const Index d = v_dense.size();
    if (p_i < 0 || p_i > d)
        throw validation_error("select_channel: budget " + std::to_string(p_i) +
                               " exceeds channel width " + std::to_string(d));
    if (p_i == 0) return {};

    auto top_magnitude = [&](Index k) {
        std::vector<Index> order(static_cast<std::size_t>(d));
        std::iota(order.begin(), order.end(), Index{0});
        std::nth_element(order.begin(), order.begin() + k, order.end(),
                         [&](Index a, Index b) {
                             const double ma = std::abs(v_dense[a]);
                             const double mb = std::abs(v_dense[b]);
                             if (ma != mb) return ma > mb;
                             return a < b;
                         });
        order.resize(static_cast<std::size_t>(k));
        return order;
    };

    std::vector<Index> picked;
    switch (strategy) {
        case Strategy::AdaAlloc:
        case Strategy::Magnitude:
            picked = top_magnitude(p_i);
            break;
        case Strategy::Random: {
            Rng rng(seed);
            picked = sample_without_replacement(d, p_i, rng);
            break;
        }
        case Strategy::SSHHalfHalf: {
            const Index by_mag = (p_i + 1) / 2;
            picked = top_magnitude(by_mag);
            std::vector<bool> taken(static_cast<std::size_t>(d), false);
            for (Index idx : picked) taken[static_cast<std::size_t>(idx)] = true;
            std::vector<Index> rest;
            rest.reserve(static_cast<std::size_t>(d - by_mag));
            for (Index idx = 0; idx < d; ++idx)
                if (!taken[static_cast<std::size_t>(idx)]) rest.push_back(idx);
            Rng rng(seed);
            for (Index i = 0; i < p_i - by_mag; ++i) {
                const auto j = i + static_cast<Index>(rng.bounded(
                                       static_cast<std::uint64_t>(rest.size() - i)));
                std::swap(rest[static_cast<std::size_t>(i)],
                          rest[static_cast<std::size_t>(j)]);
                picked.push_back(rest[static_cast<std::size_t>(i)]);
            }
            break;
        }
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

RefineResult refine_values(const RowVector& v, const Matrix& b_sub) {
    RefineResult out;
    out.ill_conditioned = false;
    if (b_sub.rows() == 0) {
        out.x.resize(0);
        return out;
    }
    if (b_sub.cols() != v.size())
        throw validation_error("refine_values: basis/target width mismatch");

    const Matrix gram = b_sub * b_sub.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success)
        throw numeric_error("refine_values: eigendecomposition failed");
    const Vector& evals = es.eigenvalues();
    const double emax = evals.maxCoeff();
    const RowVector rhs = v * b_sub.transpose();
    if (!(emax > 0.0)) {
        out.x = RowVector::Zero(b_sub.rows());
        out.ill_conditioned = true;
        return out;
    }
    // pseudo-inverse once the condition number passes 1e12
    const double cutoff = emax * 1e-12;
    Vector inv = Vector::Zero(evals.size());
    for (Index i = 0; i < evals.size(); ++i) {
        if (evals[i] > cutoff)
            inv[i] = 1.0 / evals[i];
        else
            out.ill_conditioned = true;
    }
    out.x = ((rhs * es.eigenvectors()) * inv.asDiagonal()) *
            es.eigenvectors().transpose();
    return out;
}

namespace {

InitResult initialize_core(const Matrix& target, const CalibrationFactor& r,
                           const TransformPlan& plan, Index p, const AllocConfig& cfg,
                           double alpha, int threads, TransformKind kernel,
                           bool two_sided) {
    const Index d_out = target.rows();
    const Index d_in = target.cols();
    if (plan.size() != d_in)
        throw validation_error("initialize: plan size does not match d_in");
    if (r.r.rows() != d_in || r.r.cols() != d_in)
        throw validation_error("initialize: calibration factor shape mismatch");
    if (alpha <= 0.0) throw validation_error("initialize: alpha must be positive");
    if (!all_finite(target)) throw validation_error("initialize: non-finite dW");

    // dense solution (dW H); equals v B^{-1} without forming an inverse
    const Matrix scores = plan.apply(target, TransformPlan::Side::RightByH);
    // B = H^{-1} R
    const Matrix basis = plan.apply(r.r, TransformPlan::Side::LeftByHInverse);
    // v_i = (dW)_i R, all channels at once
    const Matrix v_all = target * r.r;

    const std::vector<Index> budgets = budgets_for_strategy(target, scores, p, cfg);

    std::vector<ChannelSolve> channels(static_cast<std::size_t>(d_out));
    parallel_for(d_out, threads, [&](Index i) {
        ChannelSolve& ch = channels[static_cast<std::size_t>(i)];
        ch.channel = i;
        ch.budget = budgets[static_cast<std::size_t>(i)];
        ch.selected = select_channel(scores.row(i), ch.budget, cfg.strategy,
                                     mix_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        ch.pre_error_sq = v_all.row(i).squaredNorm();
        if (ch.selected.empty()) {
            ch.post_error_sq = ch.pre_error_sq;
            return;
        }
        Matrix b_sub(static_cast<Index>(ch.selected.size()), d_in);
        for (Index k = 0; k < b_sub.rows(); ++k)
            b_sub.row(k) = basis.row(ch.selected[static_cast<std::size_t>(k)]);
        const RefineResult refined = refine_values(v_all.row(i), b_sub);
        ch.ill_conditioned = refined.ill_conditioned;
        ch.refined.assign(refined.x.data(), refined.x.data() + refined.x.size());
        ch.post_error_sq = (v_all.row(i) - refined.x * b_sub).squaredNorm();
    });

    std::vector<double> c;
    std::vector<std::pair<Index, Index>> e;
    c.reserve(static_cast<std::size_t>(p));
    e.reserve(static_cast<std::size_t>(p));
    for (const ChannelSolve& ch : channels) {
        for (std::size_t k = 0; k < ch.selected.size(); ++k) {
            c.push_back(ch.refined[k] / alpha);
            e.emplace_back(ch.channel, ch.selected[k]);
        }
    }
    InitResult out;
    out.adapter = scatter(std::move(c), std::move(e), d_out, d_in, kernel, two_sided,
                          alpha);
    out.channels = std::move(channels);
    return out;
}

}  // namespace

InitResult initialize(const Matrix& dw, const CalibrationFactor& r,
                      const TransformPlan& plan, Index p, const AllocConfig& cfg,
                      double alpha, int threads) {
    return initialize_core(dw, r, plan, p, cfg, alpha, threads, plan.kind(), false);
}

InitResult initialize_two_sided(const Matrix& dw, const CalibrationFactor& r,
                                const TransformPlan& right_plan,
                                const TransformPlan& left_plan, Index p,
                                const AllocConfig& cfg, double alpha, int threads) {
    if (left_plan.kind() != right_plan.kind())
        throw validation_error("two-sided adapter must use one kernel kind");
    if (left_plan.size() != dw.rows())
        throw validation_error("initialize_two_sided: left plan size mismatch");
    const Matrix target = left_plan.apply(dw, TransformPlan::Side::LeftByH);
    return initialize_core(target, r, right_plan, p, cfg, alpha, threads,
                           right_plan.kind(), true);
}

}  // namespace qwha
