#include "mtqa/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

namespace mtqa {

std::string_view to_string(Label l) {
  switch (l) {
    case Label::D: return "D";
    case Label::N: return "N";
    case Label::W: return "W";
  }
  return "?";
}

std::optional<Label> parse_label(std::string_view s) {
  if (s == "D") return Label::D;
  if (s == "N") return Label::N;
  if (s == "W") return Label::W;
  return std::nullopt;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + std::string(s) + "' (expected train, val or test)");
}

int Dataset::image_size() const {
  if (!labeled.empty()) return labeled.front().slice.pixels.rows();
  if (!unlabeled.empty()) return unlabeled.front().pixels.rows();
  return 0;
}

std::vector<std::string> Dataset::stack_ids() const {
  std::set<std::string> ids;
  for (const auto& l : labeled) ids.insert(l.slice.stack_id);
  for (const auto& u : unlabeled) ids.insert(u.stack_id);
  return {ids.begin(), ids.end()};
}

void SynthConfig::validate() const {
  if (n_stacks < 1) throw ConfigError("n_stacks must be >= 1");
  if (slices_per_stack < 1) throw ConfigError("slices_per_stack must be >= 1");
  if (image_size < 8) throw ConfigError("image_size must be >= 8");
  double sum = 0;
  for (double f : label_fractions) {
    if (!(f >= 0.0) || f > 1.0) throw ConfigError("label fractions must lie in [0,1]");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("label fractions must sum to 1");
  if (!(corruption_strength >= 0.0 && corruption_strength <= 1.0)) {
    throw ConfigError("corruption_strength must lie in [0,1]");
  }
  if (!(distractor_rate >= 0.0 && distractor_rate <= 1.0)) {
    throw ConfigError("distractor_rate must lie in [0,1]");
  }
}

bool Ellipse::contains(double row, double col) const {
  const double dr = row - center_row, dc = col - center_col;
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = dc * c + dr * s;
  const double v = -dc * s + dr * c;
  return (u * u) / (semi_major * semi_major) + (v * v) / (semi_minor * semi_minor) <= 1.0;
}

Mask Ellipse::rasterize(int size) const {
  Mask m(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) m(r, c) = contains(r, c) ? 1 : 0;
  return m;
}

std::array<int, 3> stack_label_counts(const std::array<double, 3>& fractions, int slices_per_stack) {
  std::array<int, 3> counts{};
  std::array<double, 3> rem{};
  int assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double quota = fractions[k] * slices_per_stack;
    counts[k] = static_cast<int>(std::floor(quota + 1e-9));
    rem[k] = quota - counts[k];
    assigned += counts[k];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int i = 0; assigned < slices_per_stack; i = (i + 1) % 3, ++assigned) ++counts[order[i]];
  return counts;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Low-frequency noise in [0,1]: bilinear upsampling of a coarse random lattice.
Image smooth_noise(int size, int coarse, Rng& rng) {
  Grid<double> lattice(coarse + 1, coarse + 1);
  for (auto& v : lattice.values()) v = uniform(rng, 0.0, 1.0);
  Image out(size, size);
  const double step = static_cast<double>(coarse) / size;
  for (int r = 0; r < size; ++r) {
    const double y = (r + 0.5) * step;
    const int y0 = std::min(static_cast<int>(y), coarse - 1);
    const double fy = y - y0;
    for (int c = 0; c < size; ++c) {
      const double x = (c + 0.5) * step;
      const int x0 = std::min(static_cast<int>(x), coarse - 1);
      const double fx = x - x0;
      const double v = (1 - fy) * ((1 - fx) * lattice(y0, x0) + fx * lattice(y0, x0 + 1)) +
                       fy * ((1 - fx) * lattice(y0 + 1, x0) + fx * lattice(y0 + 1, x0 + 1));
      out(r, c) = static_cast<float>(v);
    }
  }
  return out;
}

Image gaussian_blur(const Image& in, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  const int n = in.rows();
  Grid<double> tmp(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * in(r, std::clamp(c + i, 0, n - 1));
      tmp(r, c) = acc;
    }
  Image out(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp(std::clamp(r + i, 0, n - 1), c);
      out(r, c) = static_cast<float>(acc);
    }
  return out;
}

struct StackGeometry {
  double center_row, center_col, semi_major, semi_minor, angle;
};

// Brain layer (intensity) and its coverage in [0,1].
struct BrainLayer {
  Image intensity;
  Image coverage;
};

BrainLayer render_brain(const Ellipse& e, int size, Rng& rng) {
  BrainLayer layer{Image(size, size), Image(size, size)};
  const Image texture = smooth_noise(size, std::max(3, size / 10), rng);
  const double base = uniform(rng, 0.58, 0.70);
  const double rim_px = std::max(1.0, 1.5 * size / 64.0);
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  for (int r = 0; r < size; ++r)
    for (int col = 0; col < size; ++col) {
      const double dr = r - e.center_row, dc = col - e.center_col;
      const double u = dc * c + dr * s;
      const double v = -dc * s + dr * c;
      const double rho = std::sqrt((u * u) / (e.semi_major * e.semi_major) +
                                   (v * v) / (e.semi_minor * e.semi_minor));
      // Approximate signed distance to the boundary in pixels (positive inside).
      const double dist = (1.0 - rho) * e.semi_minor;
      const double alpha = std::clamp(dist + 0.5, 0.0, 1.0);
      if (alpha <= 0) continue;
      const double value = dist < rim_px ? 0.95 : base + 0.24 * (texture(r, col) - 0.5);
      layer.intensity(r, col) = static_cast<float>(value);
      layer.coverage(r, col) = static_cast<float>(alpha);
    }
  return layer;
}

Image render_background(int size, Rng& rng) {
  Image bg = smooth_noise(size, std::max(3, size / 12), rng);
  const double level = uniform(rng, 0.08, 0.22);
  for (auto& v : bg.values()) v = static_cast<float>(level * v);
  // Maternal tissue: soft, untextured blobs that stay below brain intensity.
  const int blobs = uniform_int(rng, 1, 3);
  for (int b = 0; b < blobs; ++b) {
    const double cr = uniform(rng, 0, size), cc = uniform(rng, 0, size);
    const double ar = uniform(rng, 0.12, 0.3) * size, ac = uniform(rng, 0.12, 0.3) * size;
    const double amp = uniform(rng, 0.15, 0.3);
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        const double d = ((r - cr) * (r - cr)) / (ar * ar) + ((c - cc) * (c - cc)) / (ac * ac);
        if (d < 1.0) bg(r, c) = static_cast<float>(std::max<double>(bg(r, c), amp * (1.0 - 0.5 * d)));
      }
  }
  return bg;
}

void composite(Image& img, const BrainLayer& brain, double gain = 1.0) {
  auto v = img.values();
  auto b = brain.intensity.values();
  auto a = brain.coverage.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = static_cast<float>((1.0 - a[i]) * v[i] + a[i] * gain * b[i]);
  }
}

// Row/column extent of the brain coverage.
struct Extent {
  int r0, r1, c0, c1;
};

Extent coverage_extent(const Image& coverage) {
  Extent e{coverage.rows(), -1, coverage.cols(), -1};
  for (int r = 0; r < coverage.rows(); ++r)
    for (int c = 0; c < coverage.cols(); ++c)
      if (coverage(r, c) > 0.5f) {
        e.r0 = std::min(e.r0, r);
        e.r1 = std::max(e.r1, r);
        e.c0 = std::min(e.c0, c);
        e.c1 = std::max(e.c1, c);
      }
  return e;
}

void void_band(Image& img, int row, int thickness, int c0, int c1) {
  const int n = img.rows();
  for (int r = std::max(0, row); r < std::min(n, row + thickness); ++r)
    for (int c = std::max(0, c0); c <= std::min(n - 1, c1); ++c) img(r, c) = 0.0f;
}

double mean_abs_diff(const Image& a, const Image& b) {
  double acc = 0;
  auto va = a.values();
  auto vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) acc += std::abs(static_cast<double>(va[i]) - vb[i]);
  return va.empty() ? 0.0 : acc / static_cast<double>(va.size());
}

// Applies blur / signal-void / ghosting over the brain at the given strength.
Image corrupt(const Image& clean, const BrainLayer& brain, double strength, Rng& rng) {
  const int n = clean.rows();
  const double scale = n / 64.0;
  const Extent ext = coverage_extent(brain.coverage);
  bool blur = uniform(rng, 0, 1) < 0.5;
  bool voids = uniform(rng, 0, 1) < 0.5;
  bool ghost = uniform(rng, 0, 1) < 0.5;
  if (!blur && !voids && !ghost) {
    switch (uniform_int(rng, 0, 2)) {
      case 0: blur = true; break;
      case 1: voids = true; break;
      default: ghost = true; break;
    }
  }
  Image out = clean;
  // Artifacts stay on the brain and a small margin around it.
  const Image region = gaussian_blur(brain.coverage, 1.5 * scale);
  auto weight = [&](int r, int c) { return std::clamp(2.0 * region(r, c), 0.0, 1.0); };
  if (blur) {
    const double sigma = (0.6 + 2.4 * strength) * scale;
    const Image blurred = gaussian_blur(clean, sigma);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        const double m = weight(r, c);
        out(r, c) = static_cast<float>((1 - m) * out(r, c) + m * blurred(r, c));
      }
  }
  if (ghost) {
    const double amp = 0.1 + 0.2 * strength;
    const int shift = static_cast<int>(std::lround(uniform(rng, 0.15, 0.3) * n)) * (uniform(rng, 0, 1) < 0.5 ? -1 : 1);
    for (int r = 0; r < n; ++r) {
      const int src = r - shift;
      if (src < 0 || src >= n) continue;
      for (int c = 0; c < n; ++c) {
        const double add = amp * weight(r, c) * brain.coverage(src, c) * brain.intensity(src, c);
        out(r, c) = static_cast<float>(std::min(1.0, out(r, c) + add));
      }
    }
  }
  const int thickness = std::max(1, static_cast<int>(std::lround((1.0 + 3.0 * strength * uniform(rng, 0.5, 1.0)) * scale)));
  auto add_band = [&](int thick) {
    if (ext.r1 < ext.r0) return;
    const int row = uniform_int(rng, ext.r0, std::max(ext.r0, ext.r1 - thick + 1));
    void_band(out, row, thick, ext.c0 - 2, ext.c1 + 2);
  };
  if (voids) {
    const int bands = 1 + static_cast<int>(std::lround(2.0 * strength * uniform(rng, 0, 1)));
    for (int b = 0; b < bands; ++b) add_band(thickness);
  }
  for (int extra = 0; extra < 6 && strength > 0 && mean_abs_diff(out, clean) < 2 * kCorruptionFloor; ++extra) {
    add_band(thickness + extra);
  }
  return out;
}

// A signal-void band in rows that do not intersect the brain.
void add_distractor(Image& img, const std::optional<Extent>& brain_ext, double strength, Rng& rng) {
  const int n = img.rows();
  const int thick = std::max(1, static_cast<int>(std::lround((1.0 + 2.0 * strength) * n / 64.0)));
  std::vector<int> rows;
  for (int r = 0; r + thick <= n; ++r) {
    if (brain_ext && r + thick > brain_ext->r0 - 2 && r < brain_ext->r1 + 3) continue;
    rows.push_back(r);
  }
  if (rows.empty()) return;
  const int row = rows[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(rows.size()) - 1))];
  const int len = uniform_int(rng, n / 4, n / 2);
  const int c0 = uniform_int(rng, 0, n - len);
  void_band(img, row, thick, c0, c0 + len - 1);
}

void add_noise_and_quantize(Image& img, const std::vector<float>& noise) {
  auto v = img.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = quantize16(v[i] + noise[i]);
}

std::vector<SynthSlice> generate_stack(const SynthConfig& cfg, int stack_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(cfg.seed >> 32), static_cast<std::uint32_t>(stack_index),
                    0x5eedu};
  Rng rng(seq);
  const int n = cfg.image_size;
  const int len = cfg.slices_per_stack;
  const std::string stack_id = cfg.stack_prefix + std::to_string(stack_index);

  const auto counts = stack_label_counts(cfg.label_fractions, len);
  // W slices sit at the stack ends where the brain leaves the field of view.
  std::vector<Label> labels(static_cast<std::size_t>(len));
  const int w_front = (counts[2] + 1) / 2;
  const int w_back = counts[2] - w_front;
  std::vector<Label> middle;
  middle.insert(middle.end(), counts[0], Label::D);
  middle.insert(middle.end(), counts[1], Label::N);
  std::shuffle(middle.begin(), middle.end(), rng);
  for (int i = 0; i < len; ++i) {
    if (i < w_front || i >= len - w_back) labels[i] = Label::W;
    else labels[i] = middle[static_cast<std::size_t>(i - w_front)];
  }

  StackGeometry geo{};
  geo.center_row = uniform(rng, 0.38, 0.62) * n;
  geo.center_col = uniform(rng, 0.38, 0.62) * n;
  geo.semi_major = uniform(rng, 0.17, 0.25) * n;
  geo.semi_minor = geo.semi_major * uniform(rng, 0.7, 0.9);
  geo.angle = uniform(rng, 0, std::numbers::pi);

  std::normal_distribution<float> gauss(0.0f, 0.015f);
  std::vector<SynthSlice> out;
  out.reserve(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) {
    const Label label = labels[i];
    const double t = (i + 0.5) / len;
    const double profile = 0.6 + 0.4 * std::sin(std::numbers::pi * t);
    Ellipse e;
    e.center_row = geo.center_row + uniform(rng, -0.03, 0.03) * n;
    e.center_col = geo.center_col + uniform(rng, -0.03, 0.03) * n;
    e.semi_major = geo.semi_major * profile;
    e.semi_minor = geo.semi_minor * profile;
    e.angle = geo.angle + uniform(rng, -0.15, 0.15);

    Image clean = render_background(n, rng);
    std::optional<BrainLayer> brain;
    std::optional<Extent> ext;
    if (label != Label::W) {
      brain = render_brain(e, n, rng);
      composite(clean, *brain);
      ext = coverage_extent(brain->coverage);
    }
    Image corrupted = clean;
    const double strength = cfg.corruption_strength;
    if (label == Label::N && strength > 0) {
      corrupted = corrupt(clean, *brain, strength * uniform(rng, 0.35, 1.0), rng);
    } else if (label != Label::N && strength > 0 && uniform(rng, 0, 1) < cfg.distractor_rate) {
      add_distractor(corrupted, ext, strength, rng);
    }
    std::vector<float> noise(clean.size());
    for (auto& v : noise) v = gauss(rng);
    add_noise_and_quantize(clean, noise);
    add_noise_and_quantize(corrupted, noise);

    SynthSlice s;
    s.item.slice = Slice{std::move(corrupted), stack_id, i};
    s.item.label = label;
    s.clean = std::move(clean);
    if (label != Label::W) s.brain = e;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<SynthSlice> generate_synthetic_detailed(const SynthConfig& config) {
  config.validate();
  std::vector<std::vector<SynthSlice>> stacks(static_cast<std::size_t>(config.n_stacks));
  // Each stack draws from its own seeded stream, so the result does not depend on scheduling.
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < config.n_stacks; ++s) stacks[static_cast<std::size_t>(s)] = generate_stack(config, s);
  std::vector<SynthSlice> out;
  out.reserve(static_cast<std::size_t>(config.n_stacks) * config.slices_per_stack);
  for (auto& st : stacks)
    for (auto& s : st) out.push_back(std::move(s));
  return out;
}

Dataset generate_synthetic(const SynthConfig& config) {
  Dataset ds;
  ds.split = config.split;
  for (auto& s : generate_synthetic_detailed(config)) ds.labeled.push_back(std::move(s.item));
  return ds;
}

Dataset hide_labels(const Dataset& full, std::size_t n_labeled, std::uint64_t seed) {
  if (n_labeled > full.labeled.size()) {
    throw ConfigError("requested " + std::to_string(n_labeled) + " labeled slices but only " +
                      std::to_string(full.labeled.size()) + " are available");
  }
  std::vector<std::size_t> idx(full.labeled.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<bool> keep(full.labeled.size(), false);
  for (std::size_t i = 0; i < n_labeled; ++i) keep[idx[i]] = true;
  Dataset out;
  out.split = full.split;
  out.unlabeled = full.unlabeled;
  for (std::size_t i = 0; i < full.labeled.size(); ++i) {
    if (keep[i]) out.labeled.push_back(full.labeled[i]);
    else out.unlabeled.push_back(full.labeled[i].slice);
  }
  return out;
}

DatasetSplits generate_splits(const SynthConfig& base, const SplitSizes& sizes) {
  DatasetSplits out;
  auto make = [&](int n, Split split, const char* prefix, std::uint64_t salt) {
    SynthConfig c = base;
    c.n_stacks = n;
    c.split = split;
    c.stack_prefix = std::string(prefix) + base.stack_prefix;
    c.seed = base.seed * 1000003ULL + salt;
    if (n < 0) throw ConfigError("split stack counts must be >= 0");
    if (n == 0) {
      c.n_stacks = 1;
      c.validate();
      Dataset empty;
      empty.split = split;
      return empty;
    }
    return generate_synthetic(c);
  };
  out.train = make(sizes.train_stacks, Split::Train, "train-", 1);
  out.val = make(sizes.val_stacks, Split::Val, "val-", 2);
  out.test = make(sizes.test_stacks, Split::Test, "test-", 3);
  return out;
}

}  // namespace mtqa
