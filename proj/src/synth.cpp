#include "qwha/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace qwha {

const char* to_string(SynthKind kind) {
    return kind == SynthKind::Gaussian ? "gaussian" : "heavy-tailed-spikes";
}

SynthKind synth_kind_from_string(std::string_view name) {
    if (name == "gaussian") return SynthKind::Gaussian;
    if (name == "heavy-tailed-spikes" || name == "heavy") return SynthKind::HeavyTailedSpikes;
    throw validation_error("unknown synth kind: " + std::string(name));
}

namespace {

void validate(const SynthConfig& cfg) {
    if (cfg.rows < 1 || cfg.cols < 1)
        throw validation_error("synth: shape must be positive");
    if (cfg.bulk_sigma <= 0.0) throw validation_error("synth: bulk_sigma must be positive");
    if (cfg.spike_fraction < 0.0 || cfg.spike_fraction > 1.0)
        throw validation_error("synth: spike_fraction must be in [0, 1]");
    if (cfg.channel_fraction <= 0.0 || cfg.channel_fraction > 1.0)
        throw validation_error("synth: channel_fraction must be in (0, 1]");
    if (cfg.spike_scale < 0.0) throw validation_error("synth: spike_scale must be >= 0");
}

}  // namespace

Matrix synth_matrix(const SynthConfig& cfg) {
    validate(cfg);
    Rng rng(mix_seed(cfg.seed, 0));
    Matrix m(cfg.rows, cfg.cols);
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = cfg.bulk_sigma * rng.gaussian();
    if (cfg.kind == SynthKind::Gaussian || cfg.spike_fraction == 0.0) return m;

    const auto n_spikes = static_cast<Index>(
        std::llround(cfg.spike_fraction * static_cast<double>(cfg.rows * cfg.cols)));
    if (n_spikes == 0) return m;
    const auto n_channels = std::max<Index>(
        1, static_cast<Index>(std::ceil(cfg.channel_fraction * static_cast<double>(cfg.rows))));

    // pick the spike channels, then spread spikes across them evenly with
    // distinct positions inside each channel
    Rng place(mix_seed(cfg.seed, 1));
    std::vector<Index> channels(static_cast<std::size_t>(cfg.rows));
    std::iota(channels.begin(), channels.end(), Index{0});
    for (Index i = 0; i < n_channels; ++i) {
        const auto j = i + static_cast<Index>(
                               place.bounded(static_cast<std::uint64_t>(cfg.rows - i)));
        std::swap(channels[static_cast<std::size_t>(i)],
                  channels[static_cast<std::size_t>(j)]);
    }
    channels.resize(static_cast<std::size_t>(n_channels));
    std::sort(channels.begin(), channels.end());

    const double spike = cfg.spike_scale * cfg.bulk_sigma;
    for (Index c = 0; c < n_channels; ++c) {
        Index quota = n_spikes / n_channels + (c < n_spikes % n_channels ? 1 : 0);
        quota = std::min(quota, cfg.cols);
        std::vector<Index> cols(static_cast<std::size_t>(cfg.cols));
        std::iota(cols.begin(), cols.end(), Index{0});
        for (Index i = 0; i < quota; ++i) {
            const auto j = i + static_cast<Index>(
                                   place.bounded(static_cast<std::uint64_t>(cfg.cols - i)));
            std::swap(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
        }
        const Index row = channels[static_cast<std::size_t>(c)];
        for (Index i = 0; i < quota; ++i) {
            const double sign = place.uniform01() < 0.5 ? -1.0 : 1.0;
            m(row, cols[static_cast<std::size_t>(i)]) = sign * spike;
        }
    }
    return m;
}

Matrix synth_activations(Index dim, Index samples, std::uint64_t seed) {
    if (dim < 1 || samples < 1)
        throw validation_error("synth_activations: shape must be positive");
    Rng rng(mix_seed(seed, 2));
    Matrix x(dim, samples);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.gaussian();
    return x;
}

}  // namespace qwha
