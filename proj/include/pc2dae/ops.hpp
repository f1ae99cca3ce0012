#pragma once

#include <vector>

#include "pc2dae/rng.hpp"
#include "pc2dae/tensor.hpp"

// Differentiable op vocabulary over Tensor. Conventions:
//  - 3-D activations are [batch, channels, time], row-major.
//  - Binary elementwise ops require exactly matching shapes.
//  - Every op validates shapes up front and names the offending dimension.
namespace pc2dae::ad {

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
// x * s where s is a [1] tensor (learnable scalar coefficient).
Tensor scale_by(const Tensor& x, const Tensor& s);

Tensor relu(const Tensor& x);
Tensor elu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor abs(const Tensor& x);
// Numerically safe softplus (1/beta) * log(1 + exp(beta * x)); evaluated
// as (1/beta) * (max(z, 0) + log1p(exp(-|z|))) and clamped to DBL_MIN so
// the result is strictly positive even for very negative inputs.
Tensor softplus(const Tensor& x, double beta);

// ---- reductions / normalizers ----
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Mean along one axis, keeping that axis with size 1.
Tensor mean_axis(const Tensor& x, int axis);
Tensor softmax(const Tensor& x, int axis);

// ---- structural ----
Tensor reshape(const Tensor& x, Shape shape);
// Concatenates [B,Ci,T] tensors along the channel axis.
Tensor concat_channels(const std::vector<Tensor>& parts);
// Pads the time axis by repeating the edge samples. x is [B,C,T].
Tensor replicate_pad_time(const Tensor& x, Index pad);
// First difference along time: out[t] = x[t+1] - x[t], length T-1.
Tensor time_diff(const Tensor& x);
// Per-channel gating: x is [B,C,T], gate is [B,C,1].
Tensor channel_scale(const Tensor& x, const Tensor& gate);

// ---- neural ----
// input [B,Cin,T], weight [Cout,Cin/groups,k], optional bias [Cout].
// Zero padding on both ends; stride 1.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              Index dilation, Index padding, Index groups = 1);
Tensor group_norm(const Tensor& x, Index num_groups, const Tensor& gamma,
                  const Tensor& beta, double eps = 1e-5);
// Inverted dropout; pass-through when !training or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, RngStream* rng);

// Forward evaluation path for conv1d. Both paths accumulate taps in the
// same order and must agree bit-for-bit; the explicit-patch path exists as
// a cross-check and for profiling experiments.
enum class ConvPath { DirectLoops, Im2col };
void set_conv_path(ConvPath path);
ConvPath conv_path();

// Raw forward evaluators, exposed so tests can compare the two paths.
Array conv1d_direct(const Array& input, const Shape& in_shape,
                    const Array& weight, const Shape& w_shape,
                    const Array* bias, Index dilation, Index padding,
                    Index groups);
Array conv1d_im2col(const Array& input, const Shape& in_shape,
                    const Array& weight, const Shape& w_shape,
                    const Array* bias, Index dilation, Index padding,
                    Index groups);

// Output length for stride-1 zero-padded convolution.
Index conv1d_out_len(Index in_len, Index kernel, Index dilation, Index padding);

}  // namespace pc2dae::ad
