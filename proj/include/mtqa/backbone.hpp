#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mtqa/datamodel.hpp"
#include "mtqa/kernels.hpp"
#include "mtqa/perturb.hpp"
#include "mtqa/tensor.hpp"

namespace mtqa {

/// Reference CNN: `widths.size()` blocks of (3x3 conv, activation, 2x2 average
/// pool), global average pooling into the feature vector z, then one affine
/// layer to the three class logits.
struct ArchSpec {
  int input_size = 64;
  std::vector<int> widths{16, 32, 64, 64};
  Activation activation = Activation::Relu;

  void validate() const;
  int feature_dim() const { return widths.back(); }
  std::string id() const;  // e.g. "refcnn-64-16.32.64.64-relu"
  static ArchSpec from_id(const std::string& id);

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

struct ParamArray {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;

  friend bool operator==(const ParamArray&, const ParamArray&) = default;
};

/// Ordered named parameter arrays. Copying is a deep copy (clone).
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(std::vector<ParamArray> arrays) : arrays_(std::move(arrays)) {}

  std::vector<ParamArray>& arrays() { return arrays_; }
  const std::vector<ParamArray>& arrays() const { return arrays_; }
  ParamArray& at(std::size_t i) { return arrays_.at(i); }
  const ParamArray& at(std::size_t i) const { return arrays_.at(i); }
  const ParamArray& find(const std::string& name) const;
  ParamArray& find(const std::string& name);

  std::size_t total_size() const;
  bool same_layout(const ModelParams& other) const;
  bool all_finite() const;
  /// Same names and shapes, every value set to zero.
  ModelParams zeros_like() const;
  double max_abs_diff(const ModelParams& other) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::vector<ParamArray> arrays_;
};

/// He-uniform conv weights, small uniform dense weights, zero biases.
ModelParams init_params(const ArchSpec& arch, std::uint64_t seed);
/// Deep copy; the result shares no storage with the source.
ModelParams clone_params(const ModelParams& params);
/// teacher <- alpha * teacher + (1 - alpha) * student, elementwise.
void ema_update(ModelParams& teacher, const ModelParams& student, double alpha);

enum class Backend { Parallel, Reference };

struct ForwardCache {
  std::vector<Tensor4> block_in;   // conv input per block
  std::vector<Tensor4> pre_act;    // conv output (pre-activation)
  Tensor4 last;                    // final pooled map (global-pool input)
  Matrix features;
};

struct BatchOutput {
  Matrix features;  // N x F
  Matrix logits;    // N x 3
  Matrix probs;     // N x 3
};

/// Stacks slices into an N x 1 x H x W tensor.
Tensor4 to_tensor(const std::vector<const Image*>& images);

/// Throws NumericError naming the layer on non-finite activations.
BatchOutput forward_batch(const ArchSpec& arch, const ModelParams& params, const Tensor4& input,
                          ForwardCache* cache = nullptr, Backend backend = Backend::Parallel);

/// Accumulates d(loss)/d(params) into `grads` given gradients at the logits and
/// (optionally) at the pooled features.
void backward_batch(const ArchSpec& arch, const ModelParams& params, const ForwardCache& cache,
                    const Matrix& grad_logits, const Matrix* grad_features, ModelParams& grads,
                    Backend backend = Backend::Parallel);

struct ForwardOutput {
  std::vector<double> feature;
  std::array<double, 3> probs{};
};

/// Single-slice forward with a realized perturbation.
ForwardOutput forward(const ArchSpec& arch, const ModelParams& params, const Slice& slice,
                      const Perturbation& perturbation = Perturbation::identity());

void softmax_rows(const Matrix& logits, Matrix& probs);

}  // namespace mtqa
