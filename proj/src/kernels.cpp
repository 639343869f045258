#include <algorithm>
#include <cmath>
#include <vector>

#include "mtqa/kernels.hpp"

namespace mtqa::parallel {
namespace {

void reshape(Tensor4& t, int n, int c, int h, int w) {
  if (t.n == n && t.c == c && t.h == h && t.w == w && t.data.size() == t.plane() * n * c) return;
  t = Tensor4(n, c, h, w);
}

void reshape(Matrix& m, int rows, int cols) {
  if (m.rows == rows && m.cols == cols && m.data.size() == static_cast<std::size_t>(rows) * cols) return;
  m = Matrix(rows, cols);
}

// Copy with a one-pixel zero border around every plane.
void pad1(const Tensor4& t, std::vector<double>& out) {
  const int hp = t.h + 2, wp = t.w + 2;
  const std::size_t pplane = static_cast<std::size_t>(hp) * wp;
  out.assign(pplane * t.n * t.c, 0.0);
  const int planes = t.n * t.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const double* src = t.data.data() + static_cast<std::size_t>(p) * t.plane();
    double* dst = out.data() + static_cast<std::size_t>(p) * pplane + wp + 1;
    for (int y = 0; y < t.h; ++y) std::copy(src + static_cast<std::size_t>(y) * t.w, src + static_cast<std::size_t>(y + 1) * t.w, dst + static_cast<std::size_t>(y) * wp);
  }
}

}  // namespace

void conv3x3_forward(const Tensor4& in, std::span<const double> weight, std::span<const double> bias,
                     Tensor4& out) {
  const int cin = in.c, h = in.h, w = in.w;
  const int cout = static_cast<int>(bias.size());
  if (weight.size() != static_cast<std::size_t>(cout) * cin * 9) throw ShapeError("conv3x3: weight size mismatch");
  reshape(out, in.n, cout, h, w);
  std::vector<double> padded;
  pad1(in, padded);
  const int wp = w + 2;
  const std::size_t pplane = static_cast<std::size_t>(h + 2) * wp;
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < in.n; ++n) {
    for (int oc = 0; oc < cout; ++oc) {
      double* o = out.at(n, oc);
      std::fill(o, o + out.plane(), bias[oc]);
      for (int ic = 0; ic < cin; ++ic) {
        const double* xp = padded.data() + (static_cast<std::size_t>(n) * cin + ic) * pplane;
        const double* k = weight.data() + (static_cast<std::size_t>(oc) * cin + ic) * 9;
        const double k0 = k[0], k1 = k[1], k2 = k[2], k3 = k[3], k4 = k[4], k5 = k[5], k6 = k[6], k7 = k[7], k8 = k[8];
        for (int y = 0; y < h; ++y) {
          const double* r0 = xp + static_cast<std::size_t>(y) * wp;
          const double* r1 = r0 + wp;
          const double* r2 = r1 + wp;
          double* orow = o + static_cast<std::size_t>(y) * w;
#pragma omp simd
          for (int x = 0; x < w; ++x) {
            orow[x] += k0 * r0[x] + k1 * r0[x + 1] + k2 * r0[x + 2] + k3 * r1[x] + k4 * r1[x + 1] + k5 * r1[x + 2] +
                       k6 * r2[x] + k7 * r2[x + 1] + k8 * r2[x + 2];
          }
        }
      }
    }
  }
}

void conv3x3_backward_input(const Tensor4& grad_out, std::span<const double> weight, Tensor4& grad_in) {
  const int cout = grad_out.c, h = grad_out.h, w = grad_out.w;
  const int cin = static_cast<int>(weight.size() / (static_cast<std::size_t>(cout) * 9));
  reshape(grad_in, grad_out.n, cin, h, w);
  std::vector<double> padded;
  pad1(grad_out, padded);
  const int wp = w + 2;
  const std::size_t pplane = static_cast<std::size_t>(h + 2) * wp;
  // Input pixel (y, x) receives k(ky, kx) * g(y + 1 - ky, x + 1 - kx), i.e. padded row y + 2 - ky.
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < grad_out.n; ++n) {
    for (int ic = 0; ic < cin; ++ic) {
      double* gi = grad_in.at(n, ic);
      std::fill(gi, gi + grad_in.plane(), 0.0);
      for (int oc = 0; oc < cout; ++oc) {
        const double* gp = padded.data() + (static_cast<std::size_t>(n) * cout + oc) * pplane;
        const double* k = weight.data() + (static_cast<std::size_t>(oc) * cin + ic) * 9;
        const double k0 = k[0], k1 = k[1], k2 = k[2], k3 = k[3], k4 = k[4], k5 = k[5], k6 = k[6], k7 = k[7], k8 = k[8];
        for (int y = 0; y < h; ++y) {
          const double* r0 = gp + static_cast<std::size_t>(y) * wp;  // ky = 2
          const double* r1 = r0 + wp;                                // ky = 1
          const double* r2 = r1 + wp;                                // ky = 0
          double* irow = gi + static_cast<std::size_t>(y) * w;
#pragma omp simd
          for (int x = 0; x < w; ++x) {
            irow[x] += k8 * r0[x] + k7 * r0[x + 1] + k6 * r0[x + 2] + k5 * r1[x] + k4 * r1[x + 1] + k3 * r1[x + 2] +
                       k2 * r2[x] + k1 * r2[x + 1] + k0 * r2[x + 2];
          }
        }
      }
    }
  }
}

void conv3x3_backward_params(const Tensor4& in, const Tensor4& grad_out, std::span<double> grad_weight,
                             std::span<double> grad_bias) {
  const int cin = in.c, cout = grad_out.c, h = in.h, w = in.w;
  if (grad_weight.size() != static_cast<std::size_t>(cout) * cin * 9 || grad_bias.size() != static_cast<std::size_t>(cout)) {
    throw ShapeError("conv3x3 backward: gradient buffer size mismatch");
  }
  std::vector<double> padded;
  pad1(in, padded);
  const int wp = w + 2;
  const std::size_t pplane = static_cast<std::size_t>(h + 2) * wp;
  // Each (oc, ic) pair owns its 9 weights; the batch is reduced in a fixed order.
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < cout; ++oc) {
    for (int ic = 0; ic < cin; ++ic) {
      double a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0, a8 = 0;
      for (int n = 0; n < in.n; ++n) {
        const double* g = grad_out.at(n, oc);
        const double* xp = padded.data() + (static_cast<std::size_t>(n) * cin + ic) * pplane;
        for (int y = 0; y < h; ++y) {
          const double* grow = g + static_cast<std::size_t>(y) * w;
          const double* r0 = xp + static_cast<std::size_t>(y) * wp;
          const double* r1 = r0 + wp;
          const double* r2 = r1 + wp;
#pragma omp simd reduction(+ : a0, a1, a2, a3, a4, a5, a6, a7, a8)
          for (int x = 0; x < w; ++x) {
            const double gv = grow[x];
            a0 += gv * r0[x];
            a1 += gv * r0[x + 1];
            a2 += gv * r0[x + 2];
            a3 += gv * r1[x];
            a4 += gv * r1[x + 1];
            a5 += gv * r1[x + 2];
            a6 += gv * r2[x];
            a7 += gv * r2[x + 1];
            a8 += gv * r2[x + 2];
          }
        }
      }
      double* gw = grad_weight.data() + (static_cast<std::size_t>(oc) * cin + ic) * 9;
      gw[0] += a0;
      gw[1] += a1;
      gw[2] += a2;
      gw[3] += a3;
      gw[4] += a4;
      gw[5] += a5;
      gw[6] += a6;
      gw[7] += a7;
      gw[8] += a8;
    }
  }
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < cout; ++oc) {
    double s = 0;
    for (int n = 0; n < grad_out.n; ++n) {
      const double* g = grad_out.at(n, oc);
      for (std::size_t i = 0; i < grad_out.plane(); ++i) s += g[i];
    }
    grad_bias[oc] += s;
  }
}

void activation_forward(Activation act, const Tensor4& pre, Tensor4& out) {
  reshape(out, pre.n, pre.c, pre.h, pre.w);
  const std::ptrdiff_t size = static_cast<std::ptrdiff_t>(pre.data.size());
  const double* p = pre.data.data();
  double* o = out.data.data();
  if (act == Activation::Relu) {
#pragma omp parallel for simd schedule(static)
    for (std::ptrdiff_t i = 0; i < size; ++i) o[i] = p[i] > 0 ? p[i] : 0.0;
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < size; ++i) o[i] = p[i] > 0 ? p[i] : std::expm1(p[i]);
  }
}

void activation_backward(Activation act, const Tensor4& pre, const Tensor4& grad_out, Tensor4& grad_pre) {
  reshape(grad_pre, pre.n, pre.c, pre.h, pre.w);
  const std::ptrdiff_t size = static_cast<std::ptrdiff_t>(pre.data.size());
  const double* p = pre.data.data();
  const double* g = grad_out.data.data();
  double* o = grad_pre.data.data();
  if (act == Activation::Relu) {
#pragma omp parallel for simd schedule(static)
    for (std::ptrdiff_t i = 0; i < size; ++i) o[i] = p[i] > 0 ? g[i] : 0.0;
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < size; ++i) o[i] = p[i] > 0 ? g[i] : g[i] * std::exp(p[i]);
  }
}

void avgpool2_forward(const Tensor4& in, Tensor4& out) {
  if (in.h % 2 || in.w % 2) throw ShapeError("avgpool2: spatial size must be even");
  const int oh = in.h / 2, ow = in.w / 2;
  reshape(out, in.n, in.c, oh, ow);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c) {
      const double* x = in.at(n, c);
      double* o = out.at(n, c);
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          const double* r0 = x + static_cast<std::size_t>(2 * y) * in.w + 2 * xx;
          const double* r1 = r0 + in.w;
          o[static_cast<std::size_t>(y) * ow + xx] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
        }
    }
}

void avgpool2_backward(const Tensor4& grad_out, Tensor4& grad_in) {
  const int ih = grad_out.h * 2, iw = grad_out.w * 2;
  reshape(grad_in, grad_out.n, grad_out.c, ih, iw);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < grad_out.n; ++n)
    for (int c = 0; c < grad_out.c; ++c) {
      const double* g = grad_out.at(n, c);
      double* gi = grad_in.at(n, c);
      for (int y = 0; y < ih; ++y)
        for (int xx = 0; xx < iw; ++xx)
          gi[static_cast<std::size_t>(y) * iw + xx] = 0.25 * g[static_cast<std::size_t>(y / 2) * grad_out.w + xx / 2];
    }
}

void global_avgpool_forward(const Tensor4& in, Matrix& out) {
  reshape(out, in.n, in.c);
  const double inv = 1.0 / static_cast<double>(in.plane());
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c) {
      const double* x = in.at(n, c);
      double s = 0;
      for (std::size_t i = 0; i < in.plane(); ++i) s += x[i];
      out(n, c) = s * inv;
    }
}

void global_avgpool_backward(const Matrix& grad_out, Tensor4& grad_in) {
  // grad_in must already carry the spatial shape of the forward input.
  if (grad_in.n != grad_out.rows || grad_in.c != grad_out.cols) {
    throw ShapeError("global_avgpool_backward: grad_in not shaped like the forward input");
  }
  const double inv = 1.0 / static_cast<double>(grad_in.plane());
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < grad_in.n; ++n)
    for (int c = 0; c < grad_in.c; ++c) {
      double* gi = grad_in.at(n, c);
      std::fill(gi, gi + grad_in.plane(), grad_out(n, c) * inv);
    }
}

void dense_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias, Matrix& out) {
  const int k_out = static_cast<int>(bias.size());
  if (weight.size() != static_cast<std::size_t>(k_out) * in.cols) throw ShapeError("dense: weight size mismatch");
  reshape(out, in.rows, k_out);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < in.rows; ++n)
    for (int k = 0; k < k_out; ++k) {
      double s = bias[k];
      const double* wr = weight.data() + static_cast<std::size_t>(k) * in.cols;
      for (int f = 0; f < in.cols; ++f) s += wr[f] * in(n, f);
      out(n, k) = s;
    }
}

void dense_backward(const Matrix& in, const Matrix& grad_out, std::span<const double> weight, Matrix& grad_in,
                    std::span<double> grad_weight, std::span<double> grad_bias) {
  const int k_out = grad_out.cols, f_in = in.cols;
  reshape(grad_in, in.rows, f_in);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < in.rows; ++n)
    for (int f = 0; f < f_in; ++f) {
      double s = 0;
      for (int k = 0; k < k_out; ++k) s += weight[static_cast<std::size_t>(k) * f_in + f] * grad_out(n, k);
      grad_in(n, f) = s;
    }
#pragma omp parallel for schedule(static)
  for (int k = 0; k < k_out; ++k) {
    for (int f = 0; f < f_in; ++f) {
      double s = 0;
      for (int n = 0; n < in.rows; ++n) s += grad_out(n, k) * in(n, f);
      grad_weight[static_cast<std::size_t>(k) * f_in + f] += s;
    }
    double b = 0;
    for (int n = 0; n < in.rows; ++n) b += grad_out(n, k);
    grad_bias[k] += b;
  }
}

}  // namespace mtqa::parallel
