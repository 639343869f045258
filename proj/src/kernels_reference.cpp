// Serial, bounds-checked loops written directly from the layer definitions.
#include <cmath>

#include "mtqa/kernels.hpp"

namespace mtqa::reference {
namespace {

double in_or_zero(const Tensor4& t, int n, int c, int y, int x) {
  if (y < 0 || y >= t.h || x < 0 || x >= t.w) return 0.0;
  return t.data[((static_cast<std::size_t>(n) * t.c + c) * t.h + y) * t.w + x];
}

double& ref(Tensor4& t, int n, int c, int y, int x) {
  return t.data[((static_cast<std::size_t>(n) * t.c + c) * t.h + y) * t.w + x];
}

double wt(std::span<const double> w, int cin, int oc, int ic, int ky, int kx) {
  return w[((static_cast<std::size_t>(oc) * cin + ic) * 3 + ky) * 3 + kx];
}

}  // namespace

void conv3x3_forward(const Tensor4& in, std::span<const double> weight, std::span<const double> bias,
                     Tensor4& out) {
  const int cout = static_cast<int>(bias.size());
  if (weight.size() != static_cast<std::size_t>(cout) * in.c * 9) throw ShapeError("conv3x3: weight size mismatch");
  out = Tensor4(in.n, cout, in.h, in.w);
  for (int n = 0; n < in.n; ++n)
    for (int oc = 0; oc < cout; ++oc)
      for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
          double s = bias[oc];
          for (int ic = 0; ic < in.c; ++ic)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx)
                s += wt(weight, in.c, oc, ic, ky, kx) * in_or_zero(in, n, ic, y + ky - 1, x + kx - 1);
          ref(out, n, oc, y, x) = s;
        }
}

void conv3x3_backward_input(const Tensor4& grad_out, std::span<const double> weight, Tensor4& grad_in) {
  const int cin = static_cast<int>(weight.size() / (static_cast<std::size_t>(grad_out.c) * 9));
  grad_in = Tensor4(grad_out.n, cin, grad_out.h, grad_out.w);
  // Scatter form: every output position pushes its gradient back to its 3x3 inputs.
  for (int n = 0; n < grad_out.n; ++n)
    for (int oc = 0; oc < grad_out.c; ++oc)
      for (int y = 0; y < grad_out.h; ++y)
        for (int x = 0; x < grad_out.w; ++x) {
          const double g = in_or_zero(grad_out, n, oc, y, x);
          for (int ic = 0; ic < cin; ++ic)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = y + ky - 1, ix = x + kx - 1;
                if (iy < 0 || iy >= grad_in.h || ix < 0 || ix >= grad_in.w) continue;
                ref(grad_in, n, ic, iy, ix) += wt(weight, cin, oc, ic, ky, kx) * g;
              }
        }
}

void conv3x3_backward_params(const Tensor4& in, const Tensor4& grad_out, std::span<double> grad_weight,
                             std::span<double> grad_bias) {
  const int cin = in.c;
  for (int n = 0; n < in.n; ++n)
    for (int oc = 0; oc < grad_out.c; ++oc)
      for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
          const double g = in_or_zero(grad_out, n, oc, y, x);
          grad_bias[oc] += g;
          for (int ic = 0; ic < cin; ++ic)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx)
                grad_weight[((static_cast<std::size_t>(oc) * cin + ic) * 3 + ky) * 3 + kx] +=
                    g * in_or_zero(in, n, ic, y + ky - 1, x + kx - 1);
        }
}

void activation_forward(Activation act, const Tensor4& pre, Tensor4& out) {
  out = Tensor4(pre.n, pre.c, pre.h, pre.w);
  for (std::size_t i = 0; i < pre.data.size(); ++i) {
    const double v = pre.data[i];
    out.data[i] = v > 0 ? v : (act == Activation::Relu ? 0.0 : std::exp(v) - 1.0);
  }
}

void activation_backward(Activation act, const Tensor4& pre, const Tensor4& grad_out, Tensor4& grad_pre) {
  grad_pre = Tensor4(pre.n, pre.c, pre.h, pre.w);
  for (std::size_t i = 0; i < pre.data.size(); ++i) {
    const double v = pre.data[i];
    const double d = v > 0 ? 1.0 : (act == Activation::Relu ? 0.0 : std::exp(v));
    grad_pre.data[i] = d * grad_out.data[i];
  }
}

void avgpool2_forward(const Tensor4& in, Tensor4& out) {
  if (in.h % 2 || in.w % 2) throw ShapeError("avgpool2: spatial size must be even");
  out = Tensor4(in.n, in.c, in.h / 2, in.w / 2);
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c)
      for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
          double s = 0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) s += in_or_zero(in, n, c, 2 * y + a, 2 * x + b);
          ref(out, n, c, y, x) = s / 4.0;
        }
}

void avgpool2_backward(const Tensor4& grad_out, Tensor4& grad_in) {
  grad_in = Tensor4(grad_out.n, grad_out.c, grad_out.h * 2, grad_out.w * 2);
  for (int n = 0; n < grad_out.n; ++n)
    for (int c = 0; c < grad_out.c; ++c)
      for (int y = 0; y < grad_in.h; ++y)
        for (int x = 0; x < grad_in.w; ++x) ref(grad_in, n, c, y, x) = in_or_zero(grad_out, n, c, y / 2, x / 2) / 4.0;
}

void global_avgpool_forward(const Tensor4& in, Matrix& out) {
  out = Matrix(in.n, in.c);
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c) {
      double s = 0;
      for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) s += in_or_zero(in, n, c, y, x);
      out(n, c) = s / (static_cast<double>(in.h) * in.w);
    }
}

void global_avgpool_backward(const Matrix& grad_out, Tensor4& grad_in) {
  if (grad_in.n != grad_out.rows || grad_in.c != grad_out.cols) {
    throw ShapeError("global_avgpool_backward: grad_in not shaped like the forward input");
  }
  for (int n = 0; n < grad_in.n; ++n)
    for (int c = 0; c < grad_in.c; ++c)
      for (int y = 0; y < grad_in.h; ++y)
        for (int x = 0; x < grad_in.w; ++x)
          ref(grad_in, n, c, y, x) = grad_out(n, c) / (static_cast<double>(grad_in.h) * grad_in.w);
}

void dense_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias, Matrix& out) {
  const int k_out = static_cast<int>(bias.size());
  if (weight.size() != static_cast<std::size_t>(k_out) * in.cols) throw ShapeError("dense: weight size mismatch");
  out = Matrix(in.rows, k_out);
  for (int n = 0; n < in.rows; ++n)
    for (int k = 0; k < k_out; ++k) {
      double s = bias[k];
      for (int f = 0; f < in.cols; ++f) s += weight[static_cast<std::size_t>(k) * in.cols + f] * in(n, f);
      out(n, k) = s;
    }
}

void dense_backward(const Matrix& in, const Matrix& grad_out, std::span<const double> weight, Matrix& grad_in,
                    std::span<double> grad_weight, std::span<double> grad_bias) {
  grad_in = Matrix(in.rows, in.cols);
  for (int n = 0; n < in.rows; ++n)
    for (int k = 0; k < grad_out.cols; ++k) {
      const double g = grad_out(n, k);
      grad_bias[k] += g;
      for (int f = 0; f < in.cols; ++f) {
        grad_in(n, f) += weight[static_cast<std::size_t>(k) * in.cols + f] * g;
        grad_weight[static_cast<std::size_t>(k) * in.cols + f] += g * in(n, f);
      }
    }
}

}  // namespace mtqa::reference
