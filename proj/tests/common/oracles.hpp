#pragma once

// Brute-force reference implementations used only by tests. They share no
// code with the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "mtqa/datamodel.hpp"
#include "mtqa/roi.hpp"

namespace mtqa::oracle {

struct MaskSummary {
  long area = 0;
  double row = 0, col = 0;  // centroid
  double radius = 0;
};

/// Integer-exact sums, then one division per coordinate.
inline MaskSummary summarize(const Mask& m) {
  MaskSummary s;
  long long sr = 0, sc = 0;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      if (m(r, c) != 0) {
        ++s.area;
        sr += r;
        sc += c;
      }
  if (s.area == 0) return s;
  s.row = static_cast<double>(sr) / static_cast<double>(s.area);
  s.col = static_cast<double>(sc) / static_cast<double>(s.area);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      if (m(r, c) != 0) s.radius = std::max(s.radius, std::hypot(r - s.row, c - s.col));
  return s;
}

/// Stack circle from raw masks. The normalized variant computes the spread
/// through the pairwise identity var = 1/2 * sum_ij w_i w_j |q_i - q_j|^2.
inline std::optional<RoiCircle> stack_circle(const std::vector<Mask>& masks, long area_min, bool literal = false) {
  std::vector<MaskSummary> kept;
  for (const auto& m : masks) {
    const MaskSummary s = summarize(m);
    if (s.area >= area_min && s.area > 0) kept.push_back(s);
  }
  if (kept.empty()) return std::nullopt;
  double total = 0;
  for (const auto& s : kept) total += static_cast<double>(s.area);
  const double denom = literal ? static_cast<double>(kept.size()) : total;
  RoiCircle out;
  double max_r = 0;
  for (const auto& s : kept) {
    out.center.row += static_cast<double>(s.area) / denom * s.row;
    out.center.col += static_cast<double>(s.area) / denom * s.col;
    max_r = std::max(max_r, s.radius);
  }
  double var = 0;
  if (!literal) {
    for (const auto& a : kept)
      for (const auto& b : kept) {
        const double d2 = (a.row - b.row) * (a.row - b.row) + (a.col - b.col) * (a.col - b.col);
        var += 0.5 * (static_cast<double>(a.area) / total) * (static_cast<double>(b.area) / total) * d2;
      }
  } else {
    for (const auto& s : kept) {
      const double d2 = std::pow(s.row - out.center.row, 2) + std::pow(s.col - out.center.col, 2);
      var += static_cast<double>(s.area) / denom * d2;
    }
  }
  out.spread = std::sqrt(var);
  out.radius = out.spread + max_r;
  return out;
}

inline Mask disk(const RoiCircle& c, int rows, int cols) {
  Mask m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int col = 0; col < cols; ++col) {
      const double dr = r - c.center.row, dc = col - c.center.col;
      m(r, col) = dr * dr + dc * dc <= c.radius * c.radius ? 1 : 0;
    }
  return m;
}

/// AUC by enumerating every positive/negative pair.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<Label>& truth) {
  double wins = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (truth[i] != Label::N) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truth[j] == Label::N) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

inline int missed_by_recount(const std::vector<Label>& truth, const std::vector<int>& selected) {
  int missed = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != Label::N) continue;
    bool hit = false;
    for (int s : selected) hit = hit || s == static_cast<int>(i);
    missed += hit ? 0 : 1;
  }
  return missed;
}

/// 1..max_masks masks mixing empty masks, speckle, rectangles and ellipses.
inline std::vector<Mask> random_mask_stack(std::mt19937_64& rng, int size, int max_masks) {
  std::uniform_int_distribution<int> count(1, max_masks), kind(0, 3), coord(0, size - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Mask> out;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    Mask m(size, size);
    switch (kind(rng)) {
      case 0:
        break;
      case 1:
        for (int k = 0, pts = 1 + coord(rng) % 20; k < pts; ++k) m(coord(rng), coord(rng)) = 1;
        break;
      case 2: {
        int r0 = coord(rng), r1 = coord(rng), c0 = coord(rng), c1 = coord(rng);
        if (r0 > r1) std::swap(r0, r1);
        if (c0 > c1) std::swap(c0, c1);
        for (int r = r0; r <= r1; ++r)
          for (int c = c0; c <= c1; ++c) m(r, c) = 1;
        break;
      }
      default: {
        const double cr = u(rng) * size, cc = u(rng) * size;
        const double a = 1 + u(rng) * size / 2.0, b = 1 + u(rng) * size / 2.0, t = u(rng) * 3.14159;
        for (int r = 0; r < size; ++r)
          for (int c = 0; c < size; ++c) {
            const double x = (c - cc) * std::cos(t) + (r - cr) * std::sin(t);
            const double y = -(c - cc) * std::sin(t) + (r - cr) * std::cos(t);
            m(r, c) = (x * x) / (a * a) + (y * y) / (b * b) <= 1.0 ? 1 : 0;
          }
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace mtqa::oracle
