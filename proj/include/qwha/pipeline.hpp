#pragma once

#include "qwha/analysis.hpp"
#include "qwha/qwha_init.hpp"
#include "qwha/quantizer.hpp"

#include <map>
#include <string>
#include <vector>

namespace qwha {

// End-to-end configuration: quantize -> calibrate -> init -> eval.
struct PipelineConfig {
    std::string weights_file;
    std::vector<std::string> activation_files;
    std::string out_dir;
    std::string label = "layer";
    int bits = 4;
    Index group_size = 64;
    Index p = 0;                // explicit budget ...
    Index rank_equivalent = 0;  // ... or derived via P(r) = (d_in + d_out) r
    Strategy strategy = Strategy::AdaAlloc;
    TransformKind kernel = TransformKind::WHT;
    bool two_sided = false;
    double temperature = 1.0;
    Index min_per_channel = 2;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    int threads = 1;
    bool write_intermediates = true;
};

struct PipelineResult {
    AnalysisReport report;
    std::string adapter_path;
    std::string report_path;
    std::map<std::string, double> stage_seconds;
};

Index resolve_budget(Index p, Index rank_equivalent, Index d_out, Index d_in);

// Runs the full pipeline and writes the adapter, the report (JSON + CSV),
// and intermediate artifacts into out_dir. Deterministic for a fixed config
// and seed: adapter bytes do not depend on the thread count.
PipelineResult run_pipeline(const PipelineConfig& cfg);

// Shared by eval/compare/pipeline: metrics for one initialized adapter.
AnalysisReport analyze_adapter(const Matrix& dw, const CalibrationFactor& r,
                               const InitResult& init, const std::string& label);

}  // namespace qwha
