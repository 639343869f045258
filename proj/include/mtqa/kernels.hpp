#pragma once

#include <span>

#include "mtqa/tensor.hpp"

namespace mtqa {

enum class Activation { Relu, Elu };

/// Layer kernels of the reference CNN. The `parallel` namespace holds the
/// OpenMP versions used for training; `reference` holds plain serial loops
/// kept as the test oracle and benchmark baseline. Both produce identical
/// results up to floating-point summation order within one output element.
///
/// Convolutions are 3x3, stride 1, zero padding 1. Weights are laid out as
/// [out_channel][in_channel][3][3].
namespace parallel {

void conv3x3_forward(const Tensor4& in, std::span<const double> weight, std::span<const double> bias,
                     Tensor4& out);
void conv3x3_backward_input(const Tensor4& grad_out, std::span<const double> weight, Tensor4& grad_in);
// Accumulates (+=) into grad_weight / grad_bias.
void conv3x3_backward_params(const Tensor4& in, const Tensor4& grad_out, std::span<double> grad_weight,
                             std::span<double> grad_bias);

void activation_forward(Activation act, const Tensor4& pre, Tensor4& out);
void activation_backward(Activation act, const Tensor4& pre, const Tensor4& grad_out, Tensor4& grad_pre);

void avgpool2_forward(const Tensor4& in, Tensor4& out);
void avgpool2_backward(const Tensor4& grad_out, Tensor4& grad_in);

void global_avgpool_forward(const Tensor4& in, Matrix& out);
void global_avgpool_backward(const Matrix& grad_out, Tensor4& grad_in);

// out[n][k] = bias[k] + sum_f weight[k][f] * in[n][f]
void dense_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias, Matrix& out);
void dense_backward(const Matrix& in, const Matrix& grad_out, std::span<const double> weight, Matrix& grad_in,
                    std::span<double> grad_weight, std::span<double> grad_bias);

}  // namespace parallel

namespace reference {

void conv3x3_forward(const Tensor4& in, std::span<const double> weight, std::span<const double> bias,
                     Tensor4& out);
void conv3x3_backward_input(const Tensor4& grad_out, std::span<const double> weight, Tensor4& grad_in);
void conv3x3_backward_params(const Tensor4& in, const Tensor4& grad_out, std::span<double> grad_weight,
                             std::span<double> grad_bias);

void activation_forward(Activation act, const Tensor4& pre, Tensor4& out);
void activation_backward(Activation act, const Tensor4& pre, const Tensor4& grad_out, Tensor4& grad_pre);

void avgpool2_forward(const Tensor4& in, Tensor4& out);
void avgpool2_backward(const Tensor4& grad_out, Tensor4& grad_in);

void global_avgpool_forward(const Tensor4& in, Matrix& out);
void global_avgpool_backward(const Matrix& grad_out, Tensor4& grad_in);

void dense_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias, Matrix& out);
void dense_backward(const Matrix& in, const Matrix& grad_out, std::span<const double> weight, Matrix& grad_in,
                    std::span<double> grad_weight, std::span<double> grad_bias);

}  // namespace reference

}  // namespace mtqa
