#pragma once

#include <cstdint>
#include <random>

#include "mtqa/image.hpp"

namespace mtqa {

/// One realized input perturbation (the noise eta of the consistency losses).
struct Perturbation {
  bool flip = false;  // horizontal
  int shift_rows = 0;
  int shift_cols = 0;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;

  static Perturbation identity() { return {}; }
};

/// Distribution the trainer draws perturbations from.
struct PerturbConfig {
  double flip_prob = 0.5;
  double max_shift_frac = 0.1;  // |shift| <= floor(frac * side)
  double noise_sigma = 0.05;

  void validate() const;
  static PerturbConfig disabled() { return {0.0, 0.0, 0.0}; }
};

using Rng = std::mt19937_64;

Perturbation draw_perturbation(const PerturbConfig& config, int image_size, Rng& rng);
/// Flip, then integer translation with zero fill, then Gaussian noise, then clamp to [0,1].
Image apply_perturbation(const Image& image, const Perturbation& p);

}  // namespace mtqa
