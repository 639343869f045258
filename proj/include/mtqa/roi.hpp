#pragma once

#include <map>
#include <optional>
#include <string>
#include <span>

#include "mtqa/datamodel.hpp"

namespace mtqa {

struct Point {
  double row = 0;
  double col = 0;
};

/// Per-slice statistics of a raw brain mask.
struct RawMask {
  Mask mask;
  long area = 0;
  // Undefined (nullopt) for an empty mask.
  std::optional<Point> centroid;
  // Max distance from the centroid to any set pixel; undefined for an empty mask.
  std::optional<double> radius;

  bool empty() const { return area == 0; }
};

struct RoiCircle {
  Point center;
  double spread = 0;  // area-weighted std of the retained centroids
  double radius = 0;  // spread + max retained per-mask radius
};

// Normalized: weights A_i / sum(A_j), a convex combination of centroids.
// Literal: the unnormalized (1/|B|) sum(A_i q_i) variant, kept for comparison.
enum class RoiWeighting { Normalized, Literal };

struct RoiConfig {
  long area_min = 1;
  RoiWeighting weighting = RoiWeighting::Normalized;

  void validate() const;
  /// A_min as a fraction of the image pixel count (rounded up, at least 1).
  static RoiConfig from_fraction(double area_min_frac, int image_size);
};

RawMask mask_stats(const Mask& mask);

/// Aggregates the per-slice masks of one stack into a single circular ROI.
/// Throws DataError("no reliable masks in stack") if no mask reaches area_min.
RoiCircle aggregate_stack_roi(std::span<const RawMask> masks, const RoiConfig& config);

/// Pixel set iff its center lies within distance radius of the circle center.
Mask rasterize_circle(const RoiCircle& circle, int rows, int cols);

/// x (.) R: pixels outside the mask become zero.
Slice apply_mask(const Slice& slice, const Mask& mask);

/// Stand-in brain segmenter: threshold, then keep the largest 4-connected component.
inline constexpr float kDefaultSegThreshold = 0.45f;
Mask threshold_segmenter(const Image& image, float threshold = kDefaultSegThreshold);

/// Runs segmenter -> mask_stats -> aggregate -> rasterize for every stack in the
/// given slices. Stacks with no reliable mask get an all-ones ROI (no masking).
struct StackRoi {
  Mask mask;
  std::optional<RoiCircle> circle;
};
std::map<std::string, StackRoi> compute_stack_rois(const Dataset& dataset, const RoiConfig& config,
                                                   float threshold = kDefaultSegThreshold);

}  // namespace mtqa
