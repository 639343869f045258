#include <algorithm>
#include <cmath>

#include "mtqa/perturb.hpp"

namespace mtqa {

void PerturbConfig::validate() const {
  if (!(flip_prob >= 0 && flip_prob <= 1)) throw ConfigError("flip_prob must lie in [0,1]");
  if (!(max_shift_frac >= 0 && max_shift_frac <= 0.1 + 1e-12)) throw ConfigError("max_shift_frac must lie in [0,0.1]");
  if (!(noise_sigma >= 0)) throw ConfigError("noise_sigma must be >= 0");
}

Perturbation draw_perturbation(const PerturbConfig& config, int image_size, Rng& rng) {
  Perturbation p;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int max_shift = static_cast<int>(std::floor(config.max_shift_frac * image_size + 1e-9));
  std::uniform_int_distribution<int> shift(-max_shift, max_shift);
  p.flip = u(rng) < config.flip_prob;
  p.shift_rows = shift(rng);
  p.shift_cols = shift(rng);
  p.noise_sigma = config.noise_sigma;
  p.noise_seed = rng();
  return p;
}

Image apply_perturbation(const Image& image, const Perturbation& p) {
  const int rows = image.rows(), cols = image.cols();
  Image out(rows, cols, 0.0f);
  for (int r = 0; r < rows; ++r) {
    const int sr = r - p.shift_rows;
    if (sr < 0 || sr >= rows) continue;
    for (int c = 0; c < cols; ++c) {
      const int sc0 = c - p.shift_cols;
      if (sc0 < 0 || sc0 >= cols) continue;
      const int sc = p.flip ? cols - 1 - sc0 : sc0;
      out(r, c) = image(sr, sc);
    }
  }
  if (p.noise_sigma > 0) {
    Rng rng(p.noise_seed);
    std::normal_distribution<double> gauss(0.0, p.noise_sigma);
    for (auto& v : out.values()) v = static_cast<float>(v + gauss(rng));
  }
  for (auto& v : out.values()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

}  // namespace mtqa
