#include "mtqa/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace mtqa {

void ArchSpec::validate() const {
  if (widths.empty()) throw ConfigError("architecture needs at least one conv block");
  for (int w : widths)
    if (w < 1) throw ConfigError("conv widths must be >= 1");
  int s = input_size;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (s < 2 || s % 2) {
      throw ConfigError("input_size " + std::to_string(input_size) + " cannot be halved " +
                        std::to_string(widths.size()) + " times");
    }
    s /= 2;
  }
}

std::string ArchSpec::id() const {
  std::ostringstream os;
  os << "refcnn-" << input_size << '-';
  for (std::size_t i = 0; i < widths.size(); ++i) os << (i ? "." : "") << widths[i];
  os << (activation == Activation::Relu ? "-relu" : "-elu");
  return os.str();
}

ArchSpec ArchSpec::from_id(const std::string& id) {
  ArchSpec a;
  std::istringstream is(id);
  std::string prefix, size, widths, act;
  if (!std::getline(is, prefix, '-') || prefix != "refcnn" || !std::getline(is, size, '-') ||
      !std::getline(is, widths, '-') || !std::getline(is, act)) {
    throw ParseError("unrecognized architecture id '" + id + "'");
  }
  try {
    a.input_size = std::stoi(size);
    a.widths.clear();
    std::istringstream ws(widths);
    std::string w;
    while (std::getline(ws, w, '.')) a.widths.push_back(std::stoi(w));
  } catch (const std::exception&) {
    throw ParseError("unrecognized architecture id '" + id + "'");
  }
  if (act == "relu") a.activation = Activation::Relu;
  else if (act == "elu") a.activation = Activation::Elu;
  else throw ParseError("unrecognized activation in architecture id '" + id + "'");
  a.validate();
  return a;
}

const ParamArray& ModelParams::find(const std::string& name) const {
  for (const auto& a : arrays_)
    if (a.name == name) return a;
  throw ShapeError("no parameter named " + name);
}

ParamArray& ModelParams::find(const std::string& name) {
  for (auto& a : arrays_)
    if (a.name == name) return a;
  throw ShapeError("no parameter named " + name);
}

std::size_t ModelParams::total_size() const {
  std::size_t n = 0;
  for (const auto& a : arrays_) n += a.values.size();
  return n;
}

bool ModelParams::same_layout(const ModelParams& other) const {
  if (arrays_.size() != other.arrays_.size()) return false;
  for (std::size_t i = 0; i < arrays_.size(); ++i) {
    if (arrays_[i].name != other.arrays_[i].name || arrays_[i].shape != other.arrays_[i].shape ||
        arrays_[i].values.size() != other.arrays_[i].values.size()) {
      return false;
    }
  }
  return true;
}

bool ModelParams::all_finite() const {
  for (const auto& a : arrays_)
    for (double v : a.values)
      if (!std::isfinite(v)) return false;
  return true;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (auto& a : z.arrays_) std::fill(a.values.begin(), a.values.end(), 0.0);
  return z;
}

double ModelParams::max_abs_diff(const ModelParams& other) const {
  if (!same_layout(other)) throw ShapeError("max_abs_diff: parameter layouts differ");
  double m = 0;
  for (std::size_t i = 0; i < arrays_.size(); ++i)
    for (std::size_t j = 0; j < arrays_[i].values.size(); ++j)
      m = std::max(m, std::abs(arrays_[i].values[j] - other.arrays_[i].values[j]));
  return m;
}

ModelParams init_params(const ArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  std::vector<ParamArray> arrays;
  int cin = 1;
  for (std::size_t b = 0; b < arch.widths.size(); ++b) {
    const int cout = arch.widths[b];
    const double bound = std::sqrt(6.0 / (cin * 9));
    std::uniform_real_distribution<double> u(-bound, bound);
    ParamArray w{"conv" + std::to_string(b) + ".weight", {cout, cin, 3, 3}, {}};
    w.values.resize(static_cast<std::size_t>(cout) * cin * 9);
    for (auto& v : w.values) v = u(rng);
    arrays.push_back(std::move(w));
    arrays.push_back({"conv" + std::to_string(b) + ".bias", {cout}, std::vector<double>(static_cast<std::size_t>(cout), 0.0)});
    cin = cout;
  }
  const int f = arch.feature_dim();
  const double bound = 1.0 / std::sqrt(static_cast<double>(f));
  std::uniform_real_distribution<double> u(-bound, bound);
  ParamArray w{"fc.weight", {kNumClasses, f}, {}};
  w.values.resize(static_cast<std::size_t>(kNumClasses) * f);
  for (auto& v : w.values) v = u(rng);
  arrays.push_back(std::move(w));
  arrays.push_back({"fc.bias", {kNumClasses}, std::vector<double>(kNumClasses, 0.0)});
  return ModelParams(std::move(arrays));
}

ModelParams clone_params(const ModelParams& params) { return ModelParams(params.arrays()); }

void ema_update(ModelParams& teacher, const ModelParams& student, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("EMA coefficient must lie in [0,1]");
  if (!teacher.same_layout(student)) throw ShapeError("ema_update: teacher and student layouts differ");
  const double beta = 1.0 - alpha;
  for (std::size_t i = 0; i < teacher.arrays().size(); ++i) {
    auto& t = teacher.at(i).values;
    const auto& s = student.at(i).values;
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = alpha * t[j] + beta * s[j];
  }
}

Tensor4 to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) return {};
  const int rows = images.front()->rows(), cols = images.front()->cols();
  Tensor4 t(static_cast<int>(images.size()), 1, rows, cols);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->rows() != rows || images[i]->cols() != cols) throw ShapeError("to_tensor: mixed image sizes");
    auto v = images[i]->values();
    std::copy(v.begin(), v.end(), t.at(static_cast<int>(i), 0));
  }
  return t;
}

void softmax_rows(const Matrix& logits, Matrix& probs) {
  probs = Matrix(logits.rows, logits.cols);
  for (int n = 0; n < logits.rows; ++n) {
    const auto row = logits.row(n);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0;
    for (int k = 0; k < logits.cols; ++k) s += probs(n, k) = std::exp(row[static_cast<std::size_t>(k)] - m);
    for (int k = 0; k < logits.cols; ++k) probs(n, k) /= s;
  }
}

namespace {

struct Kernels {
  decltype(&parallel::conv3x3_forward) conv_fwd;
  decltype(&parallel::conv3x3_backward_input) conv_bwd_in;
  decltype(&parallel::conv3x3_backward_params) conv_bwd_params;
  decltype(&parallel::activation_forward) act_fwd;
  decltype(&parallel::activation_backward) act_bwd;
  decltype(&parallel::avgpool2_forward) pool_fwd;
  decltype(&parallel::avgpool2_backward) pool_bwd;
  decltype(&parallel::global_avgpool_forward) gap_fwd;
  decltype(&parallel::global_avgpool_backward) gap_bwd;
  decltype(&parallel::dense_forward) dense_fwd;
  decltype(&parallel::dense_backward) dense_bwd;
};

const Kernels& kernels(Backend b) {
  static const Kernels par{parallel::conv3x3_forward,    parallel::conv3x3_backward_input,
                           parallel::conv3x3_backward_params, parallel::activation_forward,
                           parallel::activation_backward, parallel::avgpool2_forward,
                           parallel::avgpool2_backward,  parallel::global_avgpool_forward,
                           parallel::global_avgpool_backward, parallel::dense_forward,
                           parallel::dense_backward};
  static const Kernels ser{reference::conv3x3_forward,    reference::conv3x3_backward_input,
                           reference::conv3x3_backward_params, reference::activation_forward,
                           reference::activation_backward, reference::avgpool2_forward,
                           reference::avgpool2_backward,  reference::global_avgpool_forward,
                           reference::global_avgpool_backward, reference::dense_forward,
                           reference::dense_backward};
  return b == Backend::Parallel ? par : ser;
}

void check_finite(std::span<const double> v, const std::string& layer) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError("non-finite activation in layer " + layer);
}

std::span<const double> vals(const ModelParams& p, std::size_t i) { return p.at(i).values; }
std::span<double> vals(ModelParams& p, std::size_t i) { return p.at(i).values; }

}  // namespace

BatchOutput forward_batch(const ArchSpec& arch, const ModelParams& params, const Tensor4& input,
                          ForwardCache* cache, Backend backend) {
  const auto& k = kernels(backend);
  const std::size_t blocks = arch.widths.size();
  if (params.arrays().size() != 2 * blocks + 2) throw ShapeError("parameters do not match architecture " + arch.id());
  if (input.c != 1 || input.h != arch.input_size || input.w != arch.input_size) {
    throw ShapeError("input size does not match architecture " + arch.id());
  }
  if (cache) {
    cache->block_in.resize(blocks);
    cache->pre_act.resize(blocks);
  }
  Tensor4 x = input, pre, post, pooled;
  for (std::size_t b = 0; b < blocks; ++b) {
    k.conv_fwd(x, vals(params, 2 * b), vals(params, 2 * b + 1), pre);
    check_finite(pre.data, "conv" + std::to_string(b));
    k.act_fwd(arch.activation, pre, post);
    k.pool_fwd(post, pooled);
    if (cache) {
      cache->block_in[b] = std::move(x);
      cache->pre_act[b] = std::move(pre);
      pre = Tensor4();
    }
    x = std::move(pooled);
    pooled = Tensor4();
  }
  BatchOutput out;
  k.gap_fwd(x, out.features);
  k.dense_fwd(out.features, vals(params, 2 * blocks), vals(params, 2 * blocks + 1), out.logits);
  check_finite(out.logits.data, "fc");
  softmax_rows(out.logits, out.probs);
  if (cache) {
    cache->last = std::move(x);
    cache->features = out.features;
  }
  return out;
}

void backward_batch(const ArchSpec& arch, const ModelParams& params, const ForwardCache& cache,
                    const Matrix& grad_logits, const Matrix* grad_features, ModelParams& grads, Backend backend) {
  const auto& k = kernels(backend);
  const std::size_t blocks = arch.widths.size();
  if (!grads.same_layout(params)) throw ShapeError("gradient buffer layout does not match parameters");
  Matrix g_feat;
  k.dense_bwd(cache.features, grad_logits, vals(params, 2 * blocks), g_feat, vals(grads, 2 * blocks),
              vals(grads, 2 * blocks + 1));
  if (grad_features) {
    if (grad_features->rows != g_feat.rows || grad_features->cols != g_feat.cols) {
      throw ShapeError("feature gradient shape mismatch");
    }
    for (std::size_t i = 0; i < g_feat.data.size(); ++i) g_feat.data[i] += grad_features->data[i];
  }
  Tensor4 g(cache.last.n, cache.last.c, cache.last.h, cache.last.w);
  k.gap_bwd(g_feat, g);
  Tensor4 g_post, g_pre, g_in;
  for (std::size_t bi = blocks; bi-- > 0;) {
    k.pool_bwd(g, g_post);
    k.act_bwd(arch.activation, cache.pre_act[bi], g_post, g_pre);
    k.conv_bwd_params(cache.block_in[bi], g_pre, vals(grads, 2 * bi), vals(grads, 2 * bi + 1));
    if (bi > 0) {
      k.conv_bwd_in(g_pre, vals(params, 2 * bi), g_in);
      g = std::move(g_in);
      g_in = Tensor4();
    }
  }
}

ForwardOutput forward(const ArchSpec& arch, const ModelParams& params, const Slice& slice,
                      const Perturbation& perturbation) {
  const Image x = apply_perturbation(slice.pixels, perturbation);
  const BatchOutput b = forward_batch(arch, params, to_tensor({&x}));
  ForwardOutput out;
  out.feature.assign(b.features.data.begin(), b.features.data.end());
  for (int c = 0; c < kNumClasses; ++c) out.probs[static_cast<std::size_t>(c)] = b.probs(0, c);
  return out;
}

}  // namespace mtqa
