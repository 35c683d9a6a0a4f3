#include "qwha/pipeline.hpp"

#include "qwha/tensor_io.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>

namespace qwha {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Index resolve_budget(Index p, Index rank_equivalent, Index d_out, Index d_in) {
    if ((p > 0) == (rank_equivalent > 0))
        throw validation_error("exactly one of --p and --rank-equivalent is required");
    if (p > 0) return p;
    return rank_equivalent * (d_out + d_in);
}

AnalysisReport analyze_adapter(const Matrix& dw, const CalibrationFactor& r,
                               const InitResult& init, const std::string& label) {
    const SparseAdapter& a = init.adapter;
    AnalysisReport rep;
    rep.label = label;
    rep.kernel = to_string(a.kernel);
    rep.two_sided = a.two_sided;
    rep.p = a.p();
    rep.alpha = a.alpha;
    rep.pre_error = output_error(dw, nullptr, r);
    rep.post_error = output_error(dw, &a, r);

    const Matrix f = materialize_f(a);
    const RankResult rank_f = numerical_rank(f);
    rep.rank_f = rank_f.rank;
    rep.rank_f_normalized = rank_f.normalized;
    const RankResult rank_d = numerical_rank(materialize_delta(a));
    rep.rank_delta = rank_d.rank;
    rep.rank_delta_normalized = rank_d.normalized;

    const EnergyResult energy = energy_curve_and_hill(
        dw, EnergyMode::TransformCoefficients, a.kernel, a.two_sided);
    rep.hill_index = energy.hill_index;
    rep.hill_top_k = energy.top_k;
    rep.hill_zeros_excluded = energy.zeros_excluded;
    rep.energy_curve = energy.curve;
    rep.coverage = outlier_coverage(dw, a);
    return rep;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    namespace fs = std::filesystem;
    if (cfg.out_dir.empty()) throw validation_error("pipeline: out_dir is required");
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw io_error("pipeline: cannot create " + cfg.out_dir);
    const auto out = [&](const std::string& name) {
        return (fs::path(cfg.out_dir) / name).string();
    };

    PipelineResult result;
    auto t0 = std::chrono::steady_clock::now();

    const Matrix w = read_matrix(cfg.weights_file);
    if (cfg.activation_files.empty())
        throw validation_error("pipeline: at least one activation file is required");
    result.stage_seconds["load"] = seconds_since(t0);

    // quantize
    t0 = std::chrono::steady_clock::now();
    QuantConfig qcfg{cfg.bits, cfg.group_size};
    const QuantizedLayer q = quantize(w, qcfg, cfg.threads);
    const Matrix dw = quant_error(w, q);
    if (cfg.write_intermediates) {
        write_quantized(q, out("quantized.sadq"));
        write_matrix(dequantize(q), out("dequantized.sadp"));
        write_matrix(dw, out("error.sadp"));
    }
    result.stage_seconds["quantize"] = seconds_since(t0);

    // calibrate
    t0 = std::chrono::steady_clock::now();
    GramAccumulator acc(w.cols());
    for (const std::string& path : cfg.activation_files) acc.accumulate(read_matrix(path));
    const CalibrationFactor r = factorize(acc);
    if (cfg.write_intermediates) write_calibration(r, out("calibration.sadp"));
    result.stage_seconds["calibrate"] = seconds_since(t0);

    // init
    t0 = std::chrono::steady_clock::now();
    const Index p = resolve_budget(cfg.p, cfg.rank_equivalent, w.rows(), w.cols());
    AllocConfig alloc;
    alloc.temperature = cfg.temperature;
    alloc.min_per_channel = cfg.min_per_channel;
    alloc.strategy = cfg.strategy;
    alloc.seed = cfg.seed;
    const PlanPtr right = get_plan(cfg.kernel, w.cols());
    InitResult init;
    if (cfg.two_sided) {
        const PlanPtr left = get_plan(cfg.kernel, w.rows());
        init = initialize_two_sided(dw, r, *right, *left, p, alloc, cfg.alpha,
                                    cfg.threads);
    } else {
        init = initialize(dw, r, *right, p, alloc, cfg.alpha, cfg.threads);
    }
    result.adapter_path = out("adapter.sada");
    write_adapter(init.adapter, result.adapter_path);
    result.stage_seconds["init"] = seconds_since(t0);

    // eval
    t0 = std::chrono::steady_clock::now();
    AnalysisReport rep = analyze_adapter(dw, r, init, cfg.label);
    rep.strategy = to_string(cfg.strategy);
    rep.seed = cfg.seed;
    result.stage_seconds["eval"] = seconds_since(t0);

    nlohmann::json j = report_to_json(rep);
    j["config"] = {{"bits", cfg.bits},
                   {"group_size", cfg.group_size},
                   {"p", p},
                   {"strategy", to_string(cfg.strategy)},
                   {"kernel", to_string(cfg.kernel)},
                   {"two_sided", cfg.two_sided},
                   {"temperature", cfg.temperature},
                   {"min_per_channel", cfg.min_per_channel},
                   {"alpha", cfg.alpha},
                   {"seed", cfg.seed},
                   {"threads", cfg.threads}};
    j["stage_seconds"] = result.stage_seconds;
    j["lambda_used"] = r.lambda_used;
    j["sample_count"] = r.sample_count;

    result.report_path = out("report.json");
    {
        std::ofstream os(result.report_path, std::ios::trunc);
        if (!os) throw io_error("cannot open for writing: " + result.report_path);
        os << j.dump(2) << '\n';
    }
    {
        std::ofstream os(out("report.csv"), std::ios::trunc);
        if (!os) throw io_error("cannot open for writing: " + out("report.csv"));
        os << report_csv_header() << '\n' << report_csv_row(rep) << '\n';
    }
    result.report = std::move(rep);
    return result;
}

}  // namespace qwha
