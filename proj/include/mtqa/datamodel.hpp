#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtqa/image.hpp"

namespace mtqa {

/// Slice quality class. The index mapping is fixed: D=0, N=1, W=2.
enum class Label : int { D = 0, N = 1, W = 2 };
inline constexpr int kNumClasses = 3;

inline int index_of(Label l) { return static_cast<int>(l); }
std::string_view to_string(Label l);
std::optional<Label> parse_label(std::string_view s);

struct Slice {
  Image pixels;  // intensities in [0,1]
  std::string stack_id;
  int slice_index = 0;

  friend bool operator==(const Slice&, const Slice&) = default;
};

struct LabeledSlice {
  Slice slice;
  Label label = Label::D;

  friend bool operator==(const LabeledSlice&, const LabeledSlice&) = default;
};

enum class Split { Train, Val, Test };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct Dataset {
  std::vector<LabeledSlice> labeled;
  std::vector<Slice> unlabeled;
  Split split = Split::Train;

  std::size_t size() const { return labeled.size() + unlabeled.size(); }
  // Spatial size shared by every slice; 0 for an empty dataset.
  int image_size() const;
  std::vector<std::string> stack_ids() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SynthConfig {
  int n_stacks = 10;
  int slices_per_stack = 30;
  std::array<double, 3> label_fractions{0.5, 0.3, 0.2};
  double corruption_strength = 0.6;
  // Probability that a D or W slice carries a signal-void band away from the brain.
  double distractor_rate = 0.3;
  std::uint64_t seed = 0;
  int image_size = 64;
  std::string stack_prefix = "stack";
  Split split = Split::Train;

  void validate() const;
};

struct Ellipse {
  double center_row = 0, center_col = 0;
  double semi_major = 0, semi_minor = 0;
  double angle = 0;  // radians, rotation of the major axis from the column axis

  bool contains(double row, double col) const;
  Mask rasterize(int size) const;
};

/// One generated slice with the generator's ground truth attached.
struct SynthSlice {
  LabeledSlice item;
  Image clean;                  // same slice before corruption (noise included)
  std::optional<Ellipse> brain; // absent for W slices
};

/// Minimum mean absolute difference between an N slice and its clean
/// counterpart whenever corruption_strength > 0.
inline constexpr double kCorruptionFloor = 0.002;

/// Per-stack class counts by the largest-remainder rule (ties to lower class index).
std::array<int, 3> stack_label_counts(const std::array<double, 3>& fractions, int slices_per_stack);

std::vector<SynthSlice> generate_synthetic_detailed(const SynthConfig& config);
/// Every generated slice is labeled; see hide_labels() to build an SSL pool.
Dataset generate_synthetic(const SynthConfig& config);

/// Keeps n_labeled labeled slices chosen uniformly at random and moves the rest
/// into the unlabeled pool, dropping their labels.
Dataset hide_labels(const Dataset& full, std::size_t n_labeled, std::uint64_t seed);

struct SplitSizes {
  int train_stacks = 10;
  int val_stacks = 4;
  int test_stacks = 4;
};

struct DatasetSplits {
  Dataset train, val, test;
};

/// Generates train/val/test with disjoint stack ids ("train-", "val-", "test-").
DatasetSplits generate_splits(const SynthConfig& base, const SplitSizes& sizes);

/// Manifest: header row, then `relative_image_path,stack_id,slice_index,label`
/// with label in {D,N,W,UNLABELED}. Paths are relative to the manifest's folder.
Dataset load_manifest(const std::filesystem::path& path, Split split = Split::Train);
/// Writes images as 16-bit PGM under `<manifest dir>/<image_subdir>/`.
void save_manifest(const Dataset& dataset, const std::filesystem::path& path,
                   const std::string& image_subdir = "images");

struct ManifestRow {
  std::string relative_path;
  std::string stack_id;
  int slice_index = 0;
  std::optional<Label> label;  // empty for UNLABELED
  std::size_t row = 0;         // 1-based line number in the file
};
/// Parses rows without touching image files.
std::vector<ManifestRow> read_manifest_rows(const std::filesystem::path& path);

}  // namespace mtqa
