#include "qwha/analysis.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace qwha {

double output_error(const Matrix& dw, const SparseAdapter* adapter,
                    const CalibrationFactor& r) {
    if (r.r.rows() != dw.cols())
        throw validation_error("output_error: calibration factor shape mismatch");
    if (!adapter) return (dw * r.r).norm();
    if (adapter->d_out != dw.rows() || adapter->d_in != dw.cols())
        throw validation_error("output_error: adapter shape mismatch");
    const Matrix delta = materialize_delta(*adapter);
    return ((dw - delta) * r.r).norm();
}

RankResult numerical_rank(const Matrix& m, double rel_tol) {
    if (!all_finite(m)) throw validation_error("numerical_rank: non-finite input");
    Eigen::BDCSVD<Matrix> svd(m);
    const Vector& sv = svd.singularValues();
    RankResult out;
    if (sv.size() == 0) return out;
    const double cutoff = rel_tol * sv[0];
    for (Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff) ++out.rank;
    out.normalized =
        static_cast<double>(out.rank) / static_cast<double>(std::min(m.rows(), m.cols()));
    return out;
}

EnergyResult energy_curve_and_hill(const Matrix& m, EnergyMode mode,
                                   TransformKind kind, bool two_sided, Index top_k) {
    std::vector<double> mags;
    if (mode == EnergyMode::SingularValues) {
        Eigen::BDCSVD<Matrix> svd(m);
        const Vector& sv = svd.singularValues();
        mags.assign(sv.data(), sv.data() + sv.size());
    } else {
        Matrix coeff = get_plan(kind, m.cols())->apply(m, TransformPlan::Side::RightByH);
        if (two_sided)
            coeff = get_plan(kind, m.rows())->apply(coeff, TransformPlan::Side::LeftByH);
        mags.resize(static_cast<std::size_t>(coeff.size()));
        for (Index i = 0; i < coeff.size(); ++i)
            mags[static_cast<std::size_t>(i)] = std::abs(coeff.data()[i]);
    }
    std::sort(mags.begin(), mags.end(), std::greater<double>());

    EnergyResult out;
    out.curve.resize(mags.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < mags.size(); ++i) {
        acc += mags[i] * mags[i];
        out.curve[i] = acc;
    }

    const auto n = static_cast<Index>(mags.size());
    Index k = top_k > 0 ? std::min(top_k, n) : std::min<Index>(1024, n / 10);
    k = std::min(std::max<Index>(k, 2), n);
    std::vector<double> top;
    top.reserve(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) {
        if (mags[static_cast<std::size_t>(i)] > 0.0)
            top.push_back(mags[static_cast<std::size_t>(i)]);
        else
            out.zeros_excluded = true;
    }
    if (top.size() < 2)
        throw numeric_error("energy_curve_and_hill: fewer than 2 nonzero magnitudes");
    double eta = 0.0;
    for (std::size_t i = 0; i + 1 < top.size(); ++i)
        eta += std::log(top[i] / top[i + 1]);
    eta /= static_cast<double>(top.size() - 1);
    out.hill_index = eta;
    out.top_k = k;
    return out;
}

double outlier_coverage(const Matrix& dw, const SparseAdapter& adapter,
                        double outlier_fraction) {
    if (adapter.d_out != dw.rows() || adapter.d_in != dw.cols())
        throw validation_error("outlier_coverage: adapter shape mismatch");
    if (outlier_fraction <= 0.0 || outlier_fraction > 1.0)
        throw validation_error("outlier_coverage: fraction must be in (0, 1]");
    if (adapter.indices.empty()) return 0.0;

    const Index total = dw.size();
    const auto n_out = std::max<Index>(
        1, static_cast<Index>(std::floor(outlier_fraction * static_cast<double>(total))));

    // outlier mask: top-|.| entries of dW kept, everything else zeroed
    std::vector<Index> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), Index{0});
    const double* data = dw.data();
    std::nth_element(order.begin(), order.begin() + n_out, order.end(),
                     [&](Index a, Index b) {
                         const double ma = std::abs(data[a]);
                         const double mb = std::abs(data[b]);
                         if (ma != mb) return ma > mb;
                         return a < b;
                     });
    Matrix masked = Matrix::Zero(dw.rows(), dw.cols());
    for (Index i = 0; i < n_out; ++i) {
        const Index cell = order[static_cast<std::size_t>(i)];
        masked.data()[cell] = data[cell];
    }

    Matrix coeff =
        get_plan(adapter.kernel, dw.cols())->apply(masked, TransformPlan::Side::RightByH);
    if (adapter.two_sided)
        coeff = get_plan(adapter.kernel, dw.rows())
                    ->apply(coeff, TransformPlan::Side::LeftByH);

    const double total_l1 = coeff.cwiseAbs().sum();
    if (total_l1 <= 0.0) return 0.0;
    double captured = 0.0;
    for (const auto& [row, col] : adapter.indices) captured += std::abs(coeff(row, col));
    return captured / total_l1;
}

RankConditionResult full_rank_condition(double mean_per_row, double mean_per_col,
                                        Index grid) {
    if (mean_per_row < 1.0 || mean_per_col < 1.0)
        throw validation_error("full_rank_condition: means must be >= 1");
    if (grid < 1000) throw validation_error("full_rank_condition: grid must be >= 1000");
    // in the condition polynomial k counts entries per column, l per row
    const double k = mean_per_col;
    const double l = mean_per_row;
    RankConditionResult out;
    out.margin = -std::numeric_limits<double>::infinity();
    for (Index i = 1; i <= grid; ++i) {
        const double z = static_cast<double>(i) / static_cast<double>(grid);
        const double zl1 = std::pow(z, l - 1.0);
        const double phi = std::pow(1.0 - zl1, k) + k * zl1 -
                           (k * (l - 1.0) / l) * std::pow(z, l) - 1.0;
        out.margin = std::max(out.margin, phi);
    }
    out.holds = out.margin < 0.0;
    return out;
}

SvdBaselineResult svd_lowrank_baseline(const Matrix& dw, const CalibrationFactor& r,
                                       Index rank) {
    if (r.r.rows() != dw.cols())
        throw validation_error("svd_lowrank_baseline: calibration factor mismatch");
    if (rank < 0 || rank > std::min(dw.rows(), dw.cols()))
        throw validation_error("svd_lowrank_baseline: rank out of range");
    const Matrix target = dw * r.r;

    SvdBaselineResult out;
    if (rank == 0) {
        out.delta = Matrix::Zero(dw.rows(), dw.cols());
        out.objective_sq = target.squaredNorm();
        return out;
    }

    Eigen::BDCSVD<Matrix> svd(target, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Matrix truncated = svd.matrixU().leftCols(rank) *
                             svd.singularValues().head(rank).asDiagonal() *
                             svd.matrixV().leftCols(rank).transpose();

    // delta = truncated R^{-1}
    Eigen::BDCSVD<Matrix> rsvd(r.r, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = rsvd.singularValues();
    const double cutoff = sv.size() ? sv[0] * 1e-12 : 0.0;
    Vector inv = Vector::Zero(sv.size());
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > cutoff)
            inv[i] = 1.0 / sv[i];
        else
            out.r_pseudo_inverted = true;
    }
    const Matrix r_inv = rsvd.matrixV() * inv.asDiagonal() * rsvd.matrixU().transpose();
    out.delta = truncated * r_inv;
    out.objective_sq = (target - out.delta * r.r).squaredNorm();
    return out;
}

nlohmann::json report_to_json(const AnalysisReport& report, bool include_curve) {
    nlohmann::json j;
    j["label"] = report.label;
    j["strategy"] = report.strategy;
    j["kernel"] = report.kernel;
    j["two_sided"] = report.two_sided;
    j["p"] = report.p;
    j["alpha"] = report.alpha;
    j["seed"] = report.seed;
    j["pre_error"] = report.pre_error;
    j["post_error"] = report.post_error;
    j["rank_f"] = report.rank_f;
    j["rank_f_normalized"] = report.rank_f_normalized;
    j["rank_delta"] = report.rank_delta;
    j["rank_delta_normalized"] = report.rank_delta_normalized;
    j["hill_index"] = report.hill_index;
    j["hill_top_k"] = report.hill_top_k;
    j["hill_zeros_excluded"] = report.hill_zeros_excluded;
    j["coverage"] = report.coverage;
    if (include_curve) j["energy_curve"] = report.energy_curve;
    return j;
}

std::string report_csv_header() {
    return "label,strategy,kernel,two_sided,p,alpha,seed,pre_error,post_error,"
           "rank_f,rank_f_normalized,rank_delta,rank_delta_normalized,"
           "hill_index,hill_top_k,coverage";
}

std::string report_csv_row(const AnalysisReport& r) {
    std::ostringstream os;
    os.precision(12);
    os << r.label << ',' << r.strategy << ',' << r.kernel << ',' << (r.two_sided ? 1 : 0)
       << ',' << r.p << ',' << r.alpha << ',' << r.seed << ',' << r.pre_error << ','
       << r.post_error << ',' << r.rank_f << ',' << r.rank_f_normalized << ','
       << r.rank_delta << ',' << r.rank_delta_normalized << ',' << r.hill_index << ','
       << r.hill_top_k << ',' << r.coverage;
    return os.str();
}

}  // namespace qwha
