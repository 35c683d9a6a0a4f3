#pragma once

#include "qwha/types.hpp"

#include <string_view>

namespace qwha {

enum class SynthKind { Gaussian, HeavyTailedSpikes };

const char* to_string(SynthKind kind);
SynthKind synth_kind_from_string(std::string_view name);

// Reproducible synthetic layers. HeavyTailedSpikes plants
// spike_fraction * rows * cols entries of magnitude spike_scale * bulk_sigma
// on top of a Gaussian bulk, concentrated in ceil(channel_fraction * rows)
// randomly chosen channels (distinct positions within each).
struct SynthConfig {
    SynthKind kind = SynthKind::Gaussian;
    Index rows = 0;
    Index cols = 0;
    double bulk_sigma = 1.0;
    double spike_fraction = 0.01;
    double spike_scale = 8.0;
    double channel_fraction = 0.1;
    std::uint64_t seed = 0;
};

Matrix synth_matrix(const SynthConfig& cfg);

// i.i.d. standard normal activations, dim x samples.
Matrix synth_activations(Index dim, Index samples, std::uint64_t seed);

}  // namespace qwha
