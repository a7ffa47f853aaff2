#pragma once

#include <cstdint>
#include <string>

#include "pstn/data/dataset.hpp"

namespace pstn::data {

enum class SynthKind {
  warped_shapes_2d,   // binary stroke templates, random affine warps
  warped_series_1d,   // waveforms, random CPAB time warps
};

std::string to_string(SynthKind kind);
SynthKind parse_synth_kind(const std::string& name);

struct SynthSpec {
  SynthKind kind = SynthKind::warped_shapes_2d;
  std::size_t n = 100;         // total examples, spread evenly over classes
  std::size_t classes = 10;    // at most synth_max_classes(kind)
  double warp_scale = 0.1;     // theta ~ N(0, warp_scale^2 I)
  double noise = 0.0;          // additive pixel noise std
  std::uint64_t seed = 0;
  std::size_t size = 0;        // side (2D) or length (1D); 0 picks 16 / 64
  std::size_t cpab_cells = 16; // 1D tessellation of the nuisance warps
};

std::size_t synth_max_classes(SynthKind kind);

// One un-warped template per class, [classes, 1, spatial...].
Dataset synth_templates(const SynthSpec& spec);

// Example i has class i % classes, so every class gets floor or ceil of n/C
// examples. Throws ConfigError when a class would get fewer than 2.
Dataset synth_dataset(const SynthSpec& spec);

}  // namespace pstn::data
