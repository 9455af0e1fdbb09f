#pragma once

#include "semuv/nn/tensor.hpp"

namespace semuv::nn {

// Backward functions return the input gradient and accumulate (+=) parameter
// gradients into the non-null output pointers.

// y[N,O] = x[N,I] * w[I,O] + b[O]
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dw, Tensor* db,
                      bool need_dx = true);

// 3x3 cross-correlation, stride 1, zero padding 1.
// x[N,C,H,W], k[K,C,3,3], b[K] -> y[N,K,H,W]
Tensor conv3x3(const Tensor& x, const Tensor& k, const Tensor& b);
Tensor conv3x3_backward(const Tensor& x, const Tensor& k, const Tensor& dy, Tensor* dk, Tensor* db,
                        bool need_dx = true);

inline constexpr double kLeakySlope = 0.2;
Tensor leaky_relu(const Tensor& x, double slope = kLeakySlope);
Tensor leaky_relu_backward(const Tensor& x, const Tensor& dy, double slope = kLeakySlope);

// [N,C,H,W] -> [N,C,2H,2W]; adjoint sums each 2x2 block.
Tensor upsample2x_nearest(const Tensor& x);
Tensor upsample2x_nearest_backward(const Tensor& dy);

// [N,C,H,W] -> [N,C,H/2,W/2] by 2x2 mean; H and W must be even.
Tensor downsample2x_avg(const Tensor& x);
Tensor downsample2x_avg_backward(const Tensor& dy);

// Adaptive instance normalization with per-sample styles:
// y = scale * (x - mean) / sqrt(var + eps) + shift, statistics per (n, c)
// over H*W with the population variance. scale, shift: [N,C].
inline constexpr double kAdainEps = 1e-8;
Tensor adain(const Tensor& x, const Tensor& scale, const Tensor& shift);
Tensor adain_backward(const Tensor& x, const Tensor& scale, const Tensor& dy, Tensor* dscale, Tensor* dshift);

// Elementwise (tanh(x) + 1) / 2, mapping to [0, 1]; backward takes the output.
Tensor tanh_unit(const Tensor& x);
Tensor tanh_unit_backward(const Tensor& y, const Tensor& dy);

// [N,C,H,W] -> [N,C] mean over space.
Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor& dy, std::size_t h, std::size_t w);

double softplus(double x);
double sigmoid(double x);

// Pins BLAS to a single thread so GEMM results are bitwise reproducible.
void configure_blas();

}  // namespace semuv::nn
