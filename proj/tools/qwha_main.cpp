// Command-line pipeline for sparse spectral adapter initialization:
// synth -> quantize -> calibrate -> init -> eval/compare, plus transform
// benchmarks. Exit codes: 0 success, 2 validation error, 3 I/O error,
// 4 numerical failure.

#include "qwha/analysis.hpp"
#include "qwha/pipeline.hpp"
#include "qwha/synth.hpp"
#include "qwha/tensor_io.hpp"
#include "qwha/threading.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace qwha;

double median_ms(std::vector<double>& samples) {
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

template <typename Fn>
double time_ms(Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw io_error("write failed: " + path);
}

struct SynthArgs {
    std::string kind = "gaussian";
    Index rows = 0, cols = 0, samples = 0;
    double bulk_sigma = 1.0, spike_fraction = 0.01, spike_scale = 8.0,
           channel_fraction = 0.1;
    std::uint64_t seed = 0;
    std::string out_weights, out_activations;
};

void run_synth(const SynthArgs& a) {
    SynthConfig cfg;
    cfg.kind = synth_kind_from_string(a.kind);
    cfg.rows = a.rows;
    cfg.cols = a.cols;
    cfg.bulk_sigma = a.bulk_sigma;
    cfg.spike_fraction = a.spike_fraction;
    cfg.spike_scale = a.spike_scale;
    cfg.channel_fraction = a.channel_fraction;
    cfg.seed = a.seed;
    write_matrix(synth_matrix(cfg), a.out_weights);
    if (!a.out_activations.empty()) {
        if (a.samples < 1)
            throw validation_error("--samples must be positive when writing activations");
        write_matrix(synth_activations(a.cols, a.samples, a.seed), a.out_activations);
    }
    std::cout << "wrote " << a.out_weights;
    if (!a.out_activations.empty()) std::cout << " and " << a.out_activations;
    std::cout << " (seed " << a.seed << ")\n";
}

struct QuantizeArgs {
    std::string weights, out, out_dequantized, out_error;
    int bits = 4;
    Index group_size = 64;
    int threads = 0;
};

void run_quantize(const QuantizeArgs& a) {
    const Matrix w = read_matrix(a.weights);
    const QuantizedLayer q =
        quantize(w, QuantConfig{a.bits, a.group_size}, resolve_threads(a.threads));
    write_quantized(q, a.out);
    if (!a.out_dequantized.empty()) write_matrix(dequantize(q), a.out_dequantized);
    if (!a.out_error.empty()) write_matrix(quant_error(w, q), a.out_error);
    std::cout << "quantized " << w.rows() << "x" << w.cols() << " at " << a.bits
              << " bits, group " << a.group_size << " -> " << a.out << "\n";
}

struct CalibrateArgs {
    std::vector<std::string> activations;
    std::string out;
};

void run_calibrate(const CalibrateArgs& a) {
    Matrix first = read_matrix(a.activations.front());
    GramAccumulator acc(first.rows());
    acc.accumulate(first);
    for (std::size_t i = 1; i < a.activations.size(); ++i)
        acc.accumulate(read_matrix(a.activations[i]));
    const CalibrationFactor r = factorize(acc);
    write_calibration(r, a.out);
    std::cout << "calibrated over " << r.sample_count << " samples, lambda "
              << r.lambda_used << " -> " << a.out << "\n";
}

struct InitArgs {
    std::string weights, delta, calibration, out, report;
    int bits = 4;
    Index group_size = 64;
    Index p = 0, rank_equivalent = 0;
    std::string strategy = "AdaAlloc", kernel = "WHT";
    bool two_sided = false;
    double temperature = 1.0, alpha = 1.0;
    Index min_per_channel = 2;
    std::uint64_t seed = 0;
    int threads = 0;
};

Matrix load_delta(const InitArgs& a) {
    if (!a.delta.empty() && !a.weights.empty())
        throw validation_error("give either --delta or --weights, not both");
    if (!a.delta.empty()) return read_matrix(a.delta);
    if (a.weights.empty()) throw validation_error("either --delta or --weights is required");
    const Matrix w = read_matrix(a.weights);
    return quant_error(w, quantize(w, QuantConfig{a.bits, a.group_size}));
}

void run_init(const InitArgs& a) {
    const Matrix dw = load_delta(a);
    const CalibrationFactor r = read_calibration(a.calibration);
    const Index p = resolve_budget(a.p, a.rank_equivalent, dw.rows(), dw.cols());
    AllocConfig cfg;
    cfg.temperature = a.temperature;
    cfg.min_per_channel = a.min_per_channel;
    cfg.strategy = strategy_from_string(a.strategy);
    cfg.seed = a.seed;
    const TransformKind kind = transform_kind_from_string(a.kernel);
    const int threads = resolve_threads(a.threads);
    const PlanPtr right = get_plan(kind, dw.cols());
    InitResult init;
    if (a.two_sided) {
        const PlanPtr left = get_plan(kind, dw.rows());
        init = initialize_two_sided(dw, r, *right, *left, p, cfg, a.alpha, threads);
    } else {
        init = initialize(dw, r, *right, p, cfg, a.alpha, threads);
    }
    write_adapter(init.adapter, a.out);

    if (!a.report.empty()) {
        nlohmann::json j;
        j["strategy"] = a.strategy;
        j["kernel"] = a.kernel;
        j["two_sided"] = a.two_sided;
        j["p"] = p;
        j["alpha"] = a.alpha;
        j["seed"] = a.seed;
        j["lambda_used"] = r.lambda_used;
        nlohmann::json channels = nlohmann::json::array();
        for (const ChannelSolve& ch : init.channels) {
            channels.push_back({{"channel", ch.channel},
                                {"budget", ch.budget},
                                {"selected", ch.selected},
                                {"values", ch.refined},
                                {"pre_error_sq", ch.pre_error_sq},
                                {"post_error_sq", ch.post_error_sq},
                                {"ill_conditioned", ch.ill_conditioned}});
        }
        j["channels"] = std::move(channels);
        write_text(a.report, j.dump(2) + "\n");
    }
    double pre = 0.0, post = 0.0;
    for (const ChannelSolve& ch : init.channels) {
        pre += ch.pre_error_sq;
        post += ch.post_error_sq;
    }
    std::cout << "initialized p=" << p << " " << a.strategy << "/" << a.kernel
              << " adapter -> " << a.out << " (channel error " << std::sqrt(pre) << " -> "
              << std::sqrt(post) << ")\n";
}

struct EvalArgs {
    std::string delta, adapter, calibration, json_out, csv_out, label = "layer";
};

void run_eval(const EvalArgs& a) {
    const Matrix dw = read_matrix(a.delta);
    const SparseAdapter adapter = read_adapter(a.adapter);
    const CalibrationFactor r = read_calibration(a.calibration);

    AnalysisReport rep;
    rep.label = a.label;
    rep.kernel = to_string(adapter.kernel);
    rep.two_sided = adapter.two_sided;
    rep.p = adapter.p();
    rep.alpha = adapter.alpha;
    rep.pre_error = output_error(dw, nullptr, r);
    rep.post_error = output_error(dw, &adapter, r);
    const RankResult rank_f = numerical_rank(materialize_f(adapter));
    rep.rank_f = rank_f.rank;
    rep.rank_f_normalized = rank_f.normalized;
    const RankResult rank_d = numerical_rank(materialize_delta(adapter));
    rep.rank_delta = rank_d.rank;
    rep.rank_delta_normalized = rank_d.normalized;
    const EnergyResult energy = energy_curve_and_hill(
        dw, EnergyMode::TransformCoefficients, adapter.kernel, adapter.two_sided);
    rep.hill_index = energy.hill_index;
    rep.hill_top_k = energy.top_k;
    rep.hill_zeros_excluded = energy.zeros_excluded;
    rep.energy_curve = energy.curve;
    rep.coverage = outlier_coverage(dw, adapter);

    if (!a.json_out.empty()) write_text(a.json_out, report_to_json(rep).dump(2) + "\n");
    if (!a.csv_out.empty())
        write_text(a.csv_out, report_csv_header() + "\n" + report_csv_row(rep) + "\n");
    std::cout << report_csv_header() << "\n" << report_csv_row(rep) << "\n";
}

struct CompareArgs {
    std::string delta, calibration, json_out, csv_out, label = "layer";
    Index p = 0, rank_equivalent = 0;
    std::vector<std::string> strategies{"AdaAlloc", "Magnitude", "SSHHalfHalf", "Random"};
    std::vector<std::string> kernels{"WHT", "DCT", "DHT"};
    bool include_svd = false;
    double temperature = 1.0, alpha = 1.0;
    Index min_per_channel = 2;
    std::uint64_t seed = 0;
    int threads = 0;
};

void run_compare(const CompareArgs& a) {
    const Matrix dw = read_matrix(a.delta);
    const CalibrationFactor r = read_calibration(a.calibration);
    const Index p = resolve_budget(a.p, a.rank_equivalent, dw.rows(), dw.cols());
    const int threads = resolve_threads(a.threads);

    std::vector<AnalysisReport> rows;
    for (const std::string& kernel_name : a.kernels) {
        const TransformKind kind = transform_kind_from_string(kernel_name);
        // DCT/DHT run as the two-sided DCA/DHA baselines; WHT is single-transform
        const bool two_sided = kind != TransformKind::WHT;
        const PlanPtr right = get_plan(kind, dw.cols());
        const PlanPtr left = two_sided ? get_plan(kind, dw.rows()) : nullptr;
        for (const std::string& strategy_name : a.strategies) {
            AllocConfig cfg;
            cfg.temperature = a.temperature;
            cfg.min_per_channel = a.min_per_channel;
            cfg.strategy = strategy_from_string(strategy_name);
            cfg.seed = a.seed;
            InitResult init =
                two_sided
                    ? initialize_two_sided(dw, r, *right, *left, p, cfg, a.alpha, threads)
                    : initialize(dw, r, *right, p, cfg, a.alpha, threads);
            AnalysisReport rep = analyze_adapter(dw, r, init, a.label);
            rep.strategy = strategy_name;
            rep.seed = a.seed;
            rows.push_back(std::move(rep));
        }
    }
    if (a.include_svd) {
        const Index rank =
            a.rank_equivalent > 0
                ? a.rank_equivalent
                : std::max<Index>(1, p / (dw.rows() + dw.cols()));
        const SvdBaselineResult svd = svd_lowrank_baseline(dw, r, rank);
        AnalysisReport rep;
        rep.label = a.label;
        rep.strategy = "-";
        rep.kernel = "SVD";
        rep.p = rank * (dw.rows() + dw.cols());
        rep.seed = a.seed;
        rep.pre_error = output_error(dw, nullptr, r);
        rep.post_error = std::sqrt(svd.objective_sq);
        const RankResult rank_d = numerical_rank(svd.delta);
        rep.rank_delta = rank_d.rank;
        rep.rank_delta_normalized = rank_d.normalized;
        rep.rank_f = rank_d.rank;
        rep.rank_f_normalized = rank_d.normalized;
        const EnergyResult energy = energy_curve_and_hill(dw, EnergyMode::SingularValues);
        rep.hill_index = energy.hill_index;
        rep.hill_top_k = energy.top_k;
        rep.energy_curve = energy.curve;
        rows.push_back(std::move(rep));
    }

    std::ostringstream csv;
    csv << report_csv_header() << '\n';
    for (const AnalysisReport& rep : rows) csv << report_csv_row(rep) << '\n';
    if (!a.csv_out.empty()) write_text(a.csv_out, csv.str());
    if (!a.json_out.empty()) {
        nlohmann::json j = nlohmann::json::array();
        for (const AnalysisReport& rep : rows) j.push_back(report_to_json(rep, false));
        write_text(a.json_out, j.dump(2) + "\n");
    }
    std::cout << csv.str();
}

struct PipelineArgs {
    PipelineConfig cfg;
    std::string strategy = "AdaAlloc", kernel = "WHT";
};

void run_pipeline_cmd(PipelineArgs& a) {
    a.cfg.strategy = strategy_from_string(a.strategy);
    a.cfg.kernel = transform_kind_from_string(a.kernel);
    a.cfg.threads = resolve_threads(a.cfg.threads);
    const PipelineResult result = run_pipeline(a.cfg);
    std::cout << "adapter: " << result.adapter_path << "\n"
              << "report:  " << result.report_path << "\n"
              << report_csv_header() << "\n"
              << report_csv_row(result.report) << "\n";
    for (const auto& [stage, secs] : result.stage_seconds)
        std::cout << "time[" << stage << "] " << secs << " s\n";
}

struct BenchArgs {
    std::vector<Index> sizes{8, 1024, 4096};
    std::vector<std::string> kernels{"WHT", "DCT", "DHT"};
    int repeats = 25;
    std::string csv_out;
    std::uint64_t seed = 0;
};

void run_bench(const BenchArgs& a) {
    if (a.repeats < 1) throw validation_error("--repeats must be positive");
    std::ostringstream csv;
    csv << "kernel,size,fast_ms,dense_ms,speedup,max_abs_diff\n";
    for (const std::string& kernel_name : a.kernels) {
        const TransformKind kind = transform_kind_from_string(kernel_name);
        for (Index n : a.sizes) {
            PlanPtr plan;
            try {
                plan = get_plan(kind, n);
            } catch (const validation_error& e) {
                std::cout << "skip " << kernel_name << " " << n << ": " << e.what()
                          << "\n";
                continue;
            }
            Rng rng(mix_seed(a.seed, static_cast<std::uint64_t>(n)));
            Vector x(n);
            for (Index i = 0; i < n; ++i) x[i] = rng.gaussian();

            const Matrix kernel = explicit_kernel(kind, n);
            Vector dense_out(n);
            std::vector<double> dense_times;
            for (int rep = 0; rep < a.repeats; ++rep)
                dense_times.push_back(time_ms([&] { dense_out.noalias() = kernel * x; }));

            Vector fast_out(n);
            std::vector<double> fast_times;
            for (int rep = 0; rep < a.repeats; ++rep) {
                fast_times.push_back(time_ms([&] {
                    fast_out = x;
                    plan->forward_inplace(fast_out.data());
                }));
            }
            const double diff = (fast_out - dense_out).cwiseAbs().maxCoeff();
            const double fast = median_ms(fast_times);
            const double dense = median_ms(dense_times);
            csv << kernel_name << ',' << n << ',' << fast << ',' << dense << ','
                << dense / fast << ',' << diff << '\n';
        }
    }
    if (!a.csv_out.empty()) write_text(a.csv_out, csv.str());
    std::cout << csv.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse spectral adapter toolkit"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate synthetic weights/activations");
    synth->add_option("--kind", synth_args.kind, "gaussian | heavy-tailed-spikes");
    synth->add_option("--rows", synth_args.rows)->required();
    synth->add_option("--cols", synth_args.cols)->required();
    synth->add_option("--samples", synth_args.samples, "activation sample count");
    synth->add_option("--bulk-sigma", synth_args.bulk_sigma);
    synth->add_option("--spike-fraction", synth_args.spike_fraction);
    synth->add_option("--spike-scale", synth_args.spike_scale);
    synth->add_option("--channel-fraction", synth_args.channel_fraction);
    synth->add_option("--seed", synth_args.seed);
    synth->add_option("--out-weights", synth_args.out_weights)->required();
    synth->add_option("--out-activations", synth_args.out_activations);

    QuantizeArgs quant_args;
    auto* quant = app.add_subcommand("quantize", "group-wise round-to-nearest quantization");
    quant->add_option("--weights", quant_args.weights)->required();
    quant->add_option("--bits", quant_args.bits);
    quant->add_option("--group-size", quant_args.group_size);
    quant->add_option("--out", quant_args.out)->required();
    quant->add_option("--out-dequantized", quant_args.out_dequantized);
    quant->add_option("--out-error", quant_args.out_error);
    quant->add_option("--threads", quant_args.threads);

    CalibrateArgs cal_args;
    auto* cal = app.add_subcommand("calibrate", "accumulate activations into a factor R");
    cal->add_option("--activations", cal_args.activations)->required()->expected(-1);
    cal->add_option("--out", cal_args.out)->required();

    InitArgs init_args;
    auto* init = app.add_subcommand("init", "quantization-aware adapter initialization");
    init->add_option("--weights", init_args.weights, "quantize internally");
    init->add_option("--bits", init_args.bits);
    init->add_option("--group-size", init_args.group_size);
    init->add_option("--delta", init_args.delta, "precomputed quantization error");
    init->add_option("--calibration", init_args.calibration)->required();
    auto* init_p = init->add_option("--p", init_args.p, "total parameter budget");
    init->add_option("--rank-equivalent", init_args.rank_equivalent,
                     "budget via P(r) = (d_in + d_out) r")
        ->excludes(init_p);
    init->add_option("--strategy", init_args.strategy,
                     "AdaAlloc | Magnitude | SSHHalfHalf | Random");
    init->add_option("--kernel", init_args.kernel, "WHT | DCT | DHT");
    init->add_flag("--two-sided", init_args.two_sided);
    init->add_option("--temperature", init_args.temperature);
    init->add_option("--min-per-channel", init_args.min_per_channel);
    init->add_option("--alpha", init_args.alpha);
    init->add_option("--seed", init_args.seed);
    init->add_option("--threads", init_args.threads);
    init->add_option("--out", init_args.out)->required();
    init->add_option("--report", init_args.report, "per-channel JSON report");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "analysis report for one adapter");
    eval->add_option("--delta", eval_args.delta)->required();
    eval->add_option("--adapter", eval_args.adapter)->required();
    eval->add_option("--calibration", eval_args.calibration)->required();
    eval->add_option("--json", eval_args.json_out);
    eval->add_option("--csv", eval_args.csv_out);
    eval->add_option("--label", eval_args.label);

    CompareArgs cmp_args;
    auto* cmp = app.add_subcommand("compare", "strategy x kernel grid on one layer");
    cmp->add_option("--delta", cmp_args.delta)->required();
    cmp->add_option("--calibration", cmp_args.calibration)->required();
    auto* cmp_p = cmp->add_option("--p", cmp_args.p);
    cmp->add_option("--rank-equivalent", cmp_args.rank_equivalent)->excludes(cmp_p);
    cmp->add_option("--strategies", cmp_args.strategies)->expected(-1);
    cmp->add_option("--kernels", cmp_args.kernels)->expected(-1);
    cmp->add_flag("--include-svd", cmp_args.include_svd);
    cmp->add_option("--temperature", cmp_args.temperature);
    cmp->add_option("--min-per-channel", cmp_args.min_per_channel);
    cmp->add_option("--alpha", cmp_args.alpha);
    cmp->add_option("--seed", cmp_args.seed);
    cmp->add_option("--threads", cmp_args.threads);
    cmp->add_option("--json", cmp_args.json_out);
    cmp->add_option("--csv", cmp_args.csv_out);
    cmp->add_option("--label", cmp_args.label);

    PipelineArgs pipe_args;
    auto* pipe = app.add_subcommand("pipeline", "quantize -> calibrate -> init -> eval");
    pipe->add_option("--weights", pipe_args.cfg.weights_file)->required();
    pipe->add_option("--activations", pipe_args.cfg.activation_files)
        ->required()
        ->expected(-1);
    pipe->add_option("--out-dir", pipe_args.cfg.out_dir)->required();
    pipe->add_option("--label", pipe_args.cfg.label);
    pipe->add_option("--bits", pipe_args.cfg.bits);
    pipe->add_option("--group-size", pipe_args.cfg.group_size);
    auto* pipe_p = pipe->add_option("--p", pipe_args.cfg.p);
    pipe->add_option("--rank-equivalent", pipe_args.cfg.rank_equivalent)->excludes(pipe_p);
    pipe->add_option("--strategy", pipe_args.strategy);
    pipe->add_option("--kernel", pipe_args.kernel);
    pipe->add_flag("--two-sided", pipe_args.cfg.two_sided);
    pipe->add_option("--temperature", pipe_args.cfg.temperature);
    pipe->add_option("--min-per-channel", pipe_args.cfg.min_per_channel);
    pipe->add_option("--alpha", pipe_args.cfg.alpha);
    pipe->add_option("--seed", pipe_args.cfg.seed);
    pipe->add_option("--threads", pipe_args.cfg.threads);

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "transform timing vs dense multiply");
    bench->add_option("--sizes", bench_args.sizes)->expected(-1);
    bench->add_option("--kernels", bench_args.kernels)->expected(-1);
    bench->add_option("--repeats", bench_args.repeats);
    bench->add_option("--seed", bench_args.seed);
    bench->add_option("--csv", bench_args.csv_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) run_synth(synth_args);
        if (quant->parsed()) run_quantize(quant_args);
        if (cal->parsed()) run_calibrate(cal_args);
        if (init->parsed()) run_init(init_args);
        if (eval->parsed()) run_eval(eval_args);
        if (cmp->parsed()) run_compare(cmp_args);
        if (pipe->parsed()) run_pipeline_cmd(pipe_args);
        if (bench->parsed()) run_bench(bench_args);
    } catch (const validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const io_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
