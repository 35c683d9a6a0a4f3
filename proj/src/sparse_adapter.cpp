#include "qwha/sparse_adapter.hpp"

#include "qwha/tensor_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace qwha {

SparseAdapter scatter(std::vector<double> c, std::vector<std::pair<Index, Index>> e,
                      Index d_out, Index d_in, TransformKind kernel, bool two_sided,
                      double alpha) {
    if (c.size() != e.size())
        throw validation_error("scatter: values and indices differ in length");
    if (d_out < 1 || d_in < 1) throw validation_error("scatter: empty shape");
    if (alpha <= 0.0) throw validation_error("scatter: alpha must be positive");
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(e.size());
    for (const auto& [r, col] : e) {
        if (r < 0 || r >= d_out || col < 0 || col >= d_in)
            throw validation_error("scatter: index (" + std::to_string(r) + ", " +
                                   std::to_string(col) + ") out of range");
        const auto key = static_cast<std::uint64_t>(r) * static_cast<std::uint64_t>(d_in) +
                         static_cast<std::uint64_t>(col);
        if (!seen.insert(key).second)
            throw validation_error("scatter: duplicate index (" + std::to_string(r) +
                                   ", " + std::to_string(col) + ")");
    }
    SparseAdapter a;
    a.d_out = d_out;
    a.d_in = d_in;
    a.values = std::move(c);
    a.indices = std::move(e);
    a.kernel = kernel;
    a.two_sided = two_sided;
    a.alpha = alpha;
    return a;
}

Matrix materialize_f(const SparseAdapter& a) {
    Matrix f = Matrix::Zero(a.d_out, a.d_in);
    for (std::size_t l = 0; l < a.values.size(); ++l)
        f(a.indices[l].first, a.indices[l].second) = a.values[l];
    return f;
}

namespace {

void check_right_plan(const SparseAdapter& a, const TransformPlan& plan) {
    if (plan.size() != a.d_in)
        throw validation_error("adapter/plan size mismatch: d_in " +
                               std::to_string(a.d_in) + " vs plan " +
                               std::to_string(plan.size()));
    if (plan.kind() != a.kernel)
        throw validation_error("adapter/plan kernel mismatch");
}

}  // namespace

Matrix materialize_delta(const SparseAdapter& a, const TransformPlan& plan) {
    if (a.two_sided)
        throw validation_error("two-sided adapter needs a left plan");
    check_right_plan(a, plan);
    Matrix delta = Matrix::Zero(a.d_out, a.d_in);
    // rows without entries stay zero; transform only the occupied ones
    std::vector<bool> occupied(static_cast<std::size_t>(a.d_out), false);
    for (std::size_t l = 0; l < a.values.size(); ++l) {
        occupied[static_cast<std::size_t>(a.indices[l].first)] = true;
        delta(a.indices[l].first, a.indices[l].second) = a.values[l];
    }
    if (plan.kind() == TransformKind::WHT) {
        for (Index i = 0; i < a.d_out; ++i) {
            if (!occupied[static_cast<std::size_t>(i)]) continue;
            // (F H^T)_i = H f_i
            plan.forward_inplace(delta.data() + i * a.d_in);
        }
        delta *= a.alpha;
    } else {
        std::vector<Index> rows;
        for (Index i = 0; i < a.d_out; ++i)
            if (occupied[static_cast<std::size_t>(i)]) rows.push_back(i);
        Matrix packed(static_cast<Index>(rows.size()), a.d_in);
        for (Index r = 0; r < packed.rows(); ++r) packed.row(r) = delta.row(rows[r]);
        packed = plan.apply(packed, TransformPlan::Side::RightByHInverse);
        delta.setZero();
        for (Index r = 0; r < packed.rows(); ++r)
            delta.row(rows[r]) = a.alpha * packed.row(r);
    }
    return delta;
}

Matrix materialize_delta(const SparseAdapter& a, const TransformPlan& right_plan,
                         const TransformPlan& left_plan) {
    if (!a.two_sided) return materialize_delta(a, right_plan);
    check_right_plan(a, right_plan);
    if (left_plan.size() != a.d_out)
        throw validation_error("two-sided adapter/plan size mismatch: d_out " +
                               std::to_string(a.d_out) + " vs left plan " +
                               std::to_string(left_plan.size()));
    SparseAdapter single = a;
    single.two_sided = false;
    const Matrix t = materialize_delta(single, right_plan);
    return left_plan.apply(t, TransformPlan::Side::LeftByHInverse);
}

Matrix materialize_delta(const SparseAdapter& a) {
    const PlanPtr right = get_plan(a.kernel, a.d_in);
    if (!a.two_sided) return materialize_delta(a, *right);
    const PlanPtr left = get_plan(a.kernel, a.d_out);
    return materialize_delta(a, *right, *left);
}

Matrix forward(const SparseAdapter& a, const TransformPlan& plan, const Matrix& w_q,
               const Matrix& x) {
    check_right_plan(a, plan);
    if (w_q.rows() != a.d_out || w_q.cols() != a.d_in)
        throw validation_error("forward: W_Q shape mismatch");
    if (x.rows() != a.d_in) throw validation_error("forward: activation shape mismatch");
    Matrix y = w_q * x;
    if (a.values.empty()) return y;
    if (a.two_sided) {
        // rare path, used only by baselines: fall back to the dense delta
        const PlanPtr left = get_plan(a.kernel, a.d_out);
        return y + materialize_delta(a, plan, *left) * x;
    }
    // (W_Q + alpha F H^{-1}) X = W_Q X + alpha F (H^{-1} X)
    const Matrix t = plan.apply(x, TransformPlan::Side::LeftByHInverse);
    for (std::size_t l = 0; l < a.values.size(); ++l)
        y.row(a.indices[l].first) +=
            a.alpha * a.values[l] * t.row(a.indices[l].second);
    return y;
}

void write_adapter(const SparseAdapter& a, const std::string& path) {
    nlohmann::json header;
    header["format_version"] = 1;
    header["d_out"] = a.d_out;
    header["d_in"] = a.d_in;
    header["p"] = a.p();
    header["kernel"] = to_string(a.kernel);
    header["two_sided"] = a.two_sided;
    header["alpha"] = a.alpha;
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    const auto len = static_cast<std::uint64_t>(text.size());
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((len >> (8 * i)) & 0xFF);
    out.write(buf, 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));

    Matrix c(a.p(), 1);
    IndexMatrix e(a.p(), 2);
    for (Index l = 0; l < a.p(); ++l) {
        c(l, 0) = a.values[static_cast<std::size_t>(l)];
        e(l, 0) = static_cast<std::uint64_t>(a.indices[static_cast<std::size_t>(l)].first);
        e(l, 1) = static_cast<std::uint64_t>(a.indices[static_cast<std::size_t>(l)].second);
    }
    write_matrix_block(out, c, Dtype::f64);
    write_index_block(out, e);
    out.flush();
    if (!out) throw io_error("write failed: " + path);
}

SparseAdapter read_adapter(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path);
    char buf[8];
    in.read(buf, 8);
    if (!in) throw io_error("adapter: truncated header in " + path);
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i)
        len |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw io_error("adapter: truncated header in " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw io_error("adapter: bad JSON header in " + path + ": " + e.what());
    }

    const Matrix c = read_matrix_block(in);
    const IndexMatrix e = read_index_block(in);
    const auto p = header.at("p").get<Index>();
    if (c.rows() != p || c.cols() != 1 || e.rows() != p || e.cols() != 2)
        throw io_error("adapter: payload shape mismatch in " + path);

    std::vector<double> values(static_cast<std::size_t>(p));
    std::vector<std::pair<Index, Index>> indices(static_cast<std::size_t>(p));
    for (Index l = 0; l < p; ++l) {
        values[static_cast<std::size_t>(l)] = c(l, 0);
        indices[static_cast<std::size_t>(l)] = {static_cast<Index>(e(l, 0)),
                                                static_cast<Index>(e(l, 1))};
    }
    return scatter(std::move(values), std::move(indices), header.at("d_out").get<Index>(),
                   header.at("d_in").get<Index>(),
                   transform_kind_from_string(header.at("kernel").get<std::string>()),
                   header.at("two_sided").get<bool>(), header.at("alpha").get<double>());
}

}  // namespace qwha
