#include "mtqa/roi.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mtqa {

void RoiConfig::validate() const {
  if (area_min < 1) throw ConfigError("area_min must be >= 1");
}

RoiConfig RoiConfig::from_fraction(double area_min_frac, int image_size) {
  if (!(area_min_frac >= 0.0 && area_min_frac <= 1.0)) throw ConfigError("area_min_frac must lie in [0,1]");
  RoiConfig c;
  const double pixels = static_cast<double>(image_size) * image_size;
  c.area_min = std::max(1L, static_cast<long>(std::ceil(area_min_frac * pixels - 1e-9)));
  return c;
}

RawMask mask_stats(const Mask& mask) {
  RawMask out;
  out.mask = mask;
  double sr = 0, sc = 0;
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c)
      if (mask(r, c)) {
        ++out.area;
        sr += r;
        sc += c;
      }
  if (out.area == 0) return out;
  const Point q{sr / out.area, sc / out.area};
  double max_d2 = 0;
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c)
      if (mask(r, c)) {
        const double dr = r - q.row, dc = c - q.col;
        max_d2 = std::max(max_d2, dr * dr + dc * dc);
      }
  out.centroid = q;
  out.radius = std::sqrt(max_d2);
  return out;
}

RoiCircle aggregate_stack_roi(std::span<const RawMask> masks, const RoiConfig& config) {
  config.validate();
  std::vector<const RawMask*> kept;
  for (const auto& m : masks)
    if (m.area >= config.area_min && m.centroid) kept.push_back(&m);
  if (kept.empty()) throw DataError("no reliable masks in stack");

  double total_area = 0;
  for (const auto* m : kept) total_area += static_cast<double>(m->area);
  const double norm = config.weighting == RoiWeighting::Normalized ? total_area
                                                                   : static_cast<double>(kept.size());
  RoiCircle out;
  for (const auto* m : kept) {
    out.center.row += static_cast<double>(m->area) * m->centroid->row / norm;
    out.center.col += static_cast<double>(m->area) * m->centroid->col / norm;
  }
  double var = 0, max_r = 0;
  for (const auto* m : kept) {
    const double dr = m->centroid->row - out.center.row;
    const double dc = m->centroid->col - out.center.col;
    var += static_cast<double>(m->area) * (dr * dr + dc * dc) / norm;
    max_r = std::max(max_r, *m->radius);
  }
  out.spread = std::sqrt(var);
  out.radius = out.spread + max_r;
  return out;
}

Mask rasterize_circle(const RoiCircle& circle, int rows, int cols) {
  Mask m(rows, cols);
  const double r2 = circle.radius * circle.radius;
  for (int r = 0; r < rows; ++r) {
    const double dr = r - circle.center.row;
    const double rem = r2 - dr * dr;
    if (rem < 0) continue;
    auto inside = [&](long c) {
      const double dc = static_cast<double>(c) - circle.center.col;
      return dr * dr + dc * dc <= r2;
    };
    // Span from the closed form, then nudged so the boundary matches the exact predicate.
    const double h = std::sqrt(rem);
    long lo = static_cast<long>(std::ceil(circle.center.col - h));
    long hi = static_cast<long>(std::floor(circle.center.col + h));
    while (inside(lo - 1)) --lo;
    while (lo <= hi && !inside(lo)) ++lo;
    while (inside(hi + 1)) ++hi;
    while (hi >= lo && !inside(hi)) --hi;
    lo = std::max(lo, 0L);
    hi = std::min(hi, static_cast<long>(cols) - 1);
    for (long c = lo; c <= hi; ++c) m(r, static_cast<int>(c)) = 1;
  }
  return m;
}

Slice apply_mask(const Slice& slice, const Mask& mask) {
  if (!slice.pixels.same_shape(mask)) throw ShapeError("apply_mask: mask shape does not match slice");
  Slice out = slice;
  auto px = out.pixels.values();
  auto mv = mask.values();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = mv[i] ? px[i] : 0.0f;
  return out;
}

Mask threshold_segmenter(const Image& image, float threshold) {
  const int rows = image.rows(), cols = image.cols();
  Grid<int> label(rows, cols, 0);
  std::vector<long> sizes{0};
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (image(r, c) < threshold || label(r, c)) continue;
      const int id = static_cast<int>(sizes.size());
      long count = 0;
      label(r, c) = id;
      stack.assign(1, {r, c});
      while (!stack.empty()) {
        auto [y, x] = stack.back();
        stack.pop_back();
        ++count;
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k) {
          if (ny[k] < 0 || ny[k] >= rows || nx[k] < 0 || nx[k] >= cols) continue;
          if (label(ny[k], nx[k]) || image(ny[k], nx[k]) < threshold) continue;
          label(ny[k], nx[k]) = id;
          stack.push_back({ny[k], nx[k]});
        }
      }
      sizes.push_back(count);
    }
  Mask out(rows, cols);
  if (sizes.size() == 1) return out;
  // Largest component; ties go to the one found first in raster order.
  const int best = static_cast<int>(std::max_element(sizes.begin() + 1, sizes.end()) - sizes.begin());
  auto lv = label.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < lv.size(); ++i) ov[i] = lv[i] == best ? 1 : 0;
  return out;
}

std::map<std::string, StackRoi> compute_stack_rois(const Dataset& dataset, const RoiConfig& config,
                                                   float threshold) {
  std::map<std::string, std::vector<RawMask>> per_stack;
  auto add = [&](const Slice& s) {
    per_stack[s.stack_id].push_back(mask_stats(threshold_segmenter(s.pixels, threshold)));
  };
  for (const auto& l : dataset.labeled) add(l.slice);
  for (const auto& u : dataset.unlabeled) add(u);
  const int n = dataset.image_size();
  std::map<std::string, StackRoi> out;
  for (auto& [id, masks] : per_stack) {
    StackRoi roi;
    try {
      roi.circle = aggregate_stack_roi(masks, config);
      roi.mask = rasterize_circle(*roi.circle, n, n);
    } catch (const DataError&) {
      roi.mask = Mask(n, n, 1);
    }
    out.emplace(id, std::move(roi));
  }
  return out;
}

}  // namespace mtqa
