#include "semuv/nn/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace semuv::nn {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* name) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + name + " must have rank " + std::to_string(rank) + ", got " +
                     to_string(t.shape()));
  }
}

// Row-major C[M,N] = alpha * op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double beta, double* c) {
  const int lda = static_cast<int>(trans_a ? m : k);
  const int ldb = static_cast<int>(trans_b ? k : n);
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0, a, lda, b, ldb, beta, c,
              static_cast<int>(n));
}

// cols[(c*9 + ky*3 + kx), y*W + x] = img[c, y+ky-1, x+kx-1] (zero outside).
void im2col(const double* img, std::size_t channels, std::size_t h, std::size_t w, double* cols) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* src = img + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = cols + ((c * 3 + ky) * 3 + kx) * hw;
        const int dx = kx - 1;
        for (std::size_t y = 0; y < h; ++y) {
          double* out = row + y * w;
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) {
            std::memset(out, 0, w * sizeof(double));
            continue;
          }
          const double* in = src + static_cast<std::size_t>(sy) * w;
          if (dx == 0) {
            std::memcpy(out, in, w * sizeof(double));
          } else if (dx < 0) {
            out[0] = 0.0;
            std::memcpy(out + 1, in, (w - 1) * sizeof(double));
          } else {
            std::memcpy(out, in + 1, (w - 1) * sizeof(double));
            out[w - 1] = 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulate columns back into the image.
void col2im(const double* cols, std::size_t channels, std::size_t h, std::size_t w, double* img) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    double* dst = img + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = cols + ((c * 3 + ky) * 3 + kx) * hw;
        const int dx = kx - 1;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const double* in = row + y * w;
          double* out = dst + static_cast<std::size_t>(sy) * w;
          const std::size_t x0 = dx < 0 ? 1 : 0;
          const std::size_t x1 = dx > 0 ? w - 1 : w;
          for (std::size_t x = x0; x < x1; ++x) out[x + dx] += in[x];
        }
      }
    }
  }
}

}  // namespace

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "dense", "x");
  require_rank(w, 2, "dense", "weights");
  const std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(1);
  if (w.dim(0) != in || b.shape() != Shape{out}) {
    throw ShapeError("dense: x " + to_string(x.shape()) + ", w " + to_string(w.shape()) + ", b " +
                     to_string(b.shape()) + " disagree");
  }
  Tensor y({n, out});
  for (std::size_t i = 0; i < n; ++i) std::copy(b.values().begin(), b.values().end(), y.data() + i * out);
  gemm(false, false, n, out, in, x.data(), w.data(), 1.0, y.data());
  check_finite(y, "dense");
  return y;
}

Tensor dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dw, Tensor* db, bool need_dx) {
  const std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(1);
  expect_shape(dy, {n, out}, "dense_backward dy");
  if (dw) gemm(true, false, in, out, n, x.data(), dy.data(), 1.0, dw->data());
  if (db) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t o = 0; o < out; ++o) (*db)[o] += dy[i * out + o];
    }
  }
  if (!need_dx) return {};
  Tensor dx({n, in});
  gemm(false, true, n, in, out, dy.data(), w.data(), 0.0, dx.data());
  check_finite(dx, "dense_backward");
  return dx;
}

Tensor conv3x3(const Tensor& x, const Tensor& k, const Tensor& b) {
  require_rank(x, 4, "conv3x3", "x");
  require_rank(k, 4, "conv3x3", "kernels");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t kout = k.dim(0);
  if (k.dim(1) != c || k.dim(2) != 3 || k.dim(3) != 3 || b.shape() != Shape{kout} || h < 1 || w < 1) {
    throw ShapeError("conv3x3: x " + to_string(x.shape()) + ", kernels " + to_string(k.shape()) + ", bias " +
                     to_string(b.shape()) + " disagree");
  }
  const std::size_t hw = h * w, ck = c * 9;
  Tensor y({n, kout, h, w});
  std::vector<double> cols(ck * hw);
  for (std::size_t i = 0; i < n; ++i) {
    im2col(x.data() + i * c * hw, c, h, w, cols.data());
    double* yi = y.data() + i * kout * hw;
    for (std::size_t o = 0; o < kout; ++o) std::fill(yi + o * hw, yi + (o + 1) * hw, b[o]);
    gemm(false, false, kout, hw, ck, k.data(), cols.data(), 1.0, yi);
  }
  check_finite(y, "conv3x3");
  return y;
}

Tensor conv3x3_backward(const Tensor& x, const Tensor& k, const Tensor& dy, Tensor* dk, Tensor* db, bool need_dx) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t kout = k.dim(0);
  expect_shape(dy, {n, kout, h, w}, "conv3x3_backward dy");
  const std::size_t hw = h * w, ck = c * 9;
  std::vector<double> cols(ck * hw);
  Tensor dx;
  if (need_dx) dx = Tensor({n, c, h, w});
  for (std::size_t i = 0; i < n; ++i) {
    const double* dyi = dy.data() + i * kout * hw;
    if (dk) {
      im2col(x.data() + i * c * hw, c, h, w, cols.data());
      gemm(false, true, kout, ck, hw, dyi, cols.data(), 1.0, dk->data());
    }
    if (db) {
      for (std::size_t o = 0; o < kout; ++o) {
        double s = 0.0;
        for (std::size_t p = 0; p < hw; ++p) s += dyi[o * hw + p];
        (*db)[o] += s;
      }
    }
    if (need_dx) {
      gemm(true, false, ck, hw, kout, k.data(), dyi, 0.0, cols.data());
      col2im(cols.data(), c, h, w, dx.data() + i * c * hw);
    }
  }
  if (need_dx) check_finite(dx, "conv3x3_backward");
  return dx;
}

Tensor leaky_relu(const Tensor& x, double slope) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : v * slope;
  return y;
}

Tensor leaky_relu_backward(const Tensor& x, const Tensor& dy, double slope) {
  expect_shape(dy, x.shape(), "leaky_relu_backward dy");
  Tensor dx = dy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0)) dx[i] *= slope;
  }
  return dx;
}

Tensor upsample2x_nearest(const Tensor& x) {
  require_rank(x, 4, "upsample2x_nearest", "x");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor y({x.dim(0), x.dim(1), 2 * h, 2 * w});
  for (std::size_t p = 0; p < planes; ++p) {
    const double* in = x.data() + p * h * w;
    double* out = y.data() + p * 4 * h * w;
    for (std::size_t yy = 0; yy < 2 * h; ++yy) {
      const double* row = in + (yy / 2) * w;
      double* orow = out + yy * 2 * w;
      for (std::size_t xx = 0; xx < 2 * w; ++xx) orow[xx] = row[xx / 2];
    }
  }
  return y;
}

Tensor upsample2x_nearest_backward(const Tensor& dy) {
  require_rank(dy, 4, "upsample2x_nearest_backward", "dy");
  if (dy.dim(2) % 2 || dy.dim(3) % 2) throw ShapeError("upsample2x_nearest_backward: odd spatial extent");
  const std::size_t planes = dy.dim(0) * dy.dim(1), h = dy.dim(2) / 2, w = dy.dim(3) / 2;
  Tensor dx({dy.dim(0), dy.dim(1), h, w});
  for (std::size_t p = 0; p < planes; ++p) {
    const double* in = dy.data() + p * 4 * h * w;
    double* out = dx.data() + p * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double* a = in + (2 * y) * 2 * w + 2 * x;
        const double* b = a + 2 * w;
        out[y * w + x] = a[0] + a[1] + b[0] + b[1];
      }
    }
  }
  return dx;
}

Tensor downsample2x_avg(const Tensor& x) {
  require_rank(x, 4, "downsample2x_avg", "x");
  if (x.dim(2) % 2 || x.dim(3) % 2) throw ShapeError("downsample2x_avg: odd spatial extent " + to_string(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2) / 2, w = x.dim(3) / 2;
  Tensor y({x.dim(0), x.dim(1), h, w});
  for (std::size_t p = 0; p < planes; ++p) {
    const double* in = x.data() + p * 4 * h * w;
    double* out = y.data() + p * h * w;
    for (std::size_t yy = 0; yy < h; ++yy) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        const double* a = in + (2 * yy) * 2 * w + 2 * xx;
        const double* b = a + 2 * w;
        out[yy * w + xx] = 0.25 * (a[0] + a[1] + b[0] + b[1]);
      }
    }
  }
  return y;
}

Tensor downsample2x_avg_backward(const Tensor& dy) {
  require_rank(dy, 4, "downsample2x_avg_backward", "dy");
  Tensor dx = upsample2x_nearest(dy);
  dx *= 0.25;
  return dx;
}

Tensor adain(const Tensor& x, const Tensor& scale, const Tensor& shift) {
  require_rank(x, 4, "adain", "content");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (hw < 2) throw ShapeError("adain: spatial extent must be >= 2 for nondegenerate statistics");
  expect_shape(scale, {n, c}, "adain scale");
  expect_shape(shift, {n, c}, "adain shift");
  Tensor y(x.shape());
  for (std::size_t p = 0; p < n * c; ++p) {
    const double* in = x.data() + p * hw;
    double* out = y.data() + p * hw;
    double mean = 0.0;
    for (std::size_t i = 0; i < hw; ++i) mean += in[i];
    mean /= static_cast<double>(hw);
    double var = 0.0;
    for (std::size_t i = 0; i < hw; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= static_cast<double>(hw);
    const double inv_std = 1.0 / std::sqrt(var + kAdainEps);
    const double s = scale[p], t = shift[p];
    for (std::size_t i = 0; i < hw; ++i) out[i] = s * (in[i] - mean) * inv_std + t;
  }
  check_finite(y, "adain");
  return y;
}

Tensor adain_backward(const Tensor& x, const Tensor& scale, const Tensor& dy, Tensor* dscale, Tensor* dshift) {
  expect_shape(dy, x.shape(), "adain_backward dy");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor dx(x.shape());
  std::vector<double> xhat(hw);
  for (std::size_t p = 0; p < n * c; ++p) {
    const double* in = x.data() + p * hw;
    const double* g = dy.data() + p * hw;
    double* out = dx.data() + p * hw;
    double mean = 0.0;
    for (std::size_t i = 0; i < hw; ++i) mean += in[i];
    mean /= static_cast<double>(hw);
    double var = 0.0;
    for (std::size_t i = 0; i < hw; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= static_cast<double>(hw);
    const double inv_std = 1.0 / std::sqrt(var + kAdainEps);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      xhat[i] = (in[i] - mean) * inv_std;
      sum_g += g[i];
      sum_gx += g[i] * xhat[i];
    }
    if (dscale) (*dscale)[p] += sum_gx;
    if (dshift) (*dshift)[p] += sum_g;
    const double s = scale[p];
    const double mean_g = sum_g / static_cast<double>(hw);
    const double mean_gx = sum_gx / static_cast<double>(hw);
    for (std::size_t i = 0; i < hw; ++i) out[i] = s * inv_std * (g[i] - mean_g - xhat[i] * mean_gx);
  }
  check_finite(dx, "adain_backward");
  return dx;
}

Tensor tanh_unit(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = 0.5 * (std::tanh(v) + 1.0);
  return y;
}

Tensor tanh_unit_backward(const Tensor& y, const Tensor& dy) {
  expect_shape(dy, y.shape(), "tanh_unit_backward dy");
  Tensor dx = dy;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = 2.0 * y[i] - 1.0;
    dx[i] *= 0.5 * (1.0 - t * t);
  }
  return dx;
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool", "x");
  const std::size_t planes = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor y({x.dim(0), x.dim(1)});
  for (std::size_t p = 0; p < planes; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += x[p * hw + i];
    y[p] = s / static_cast<double>(hw);
  }
  return y;
}

Tensor global_avg_pool_backward(const Tensor& dy, std::size_t h, std::size_t w) {
  require_rank(dy, 2, "global_avg_pool_backward", "dy");
  const std::size_t hw = h * w;
  Tensor dx({dy.dim(0), dy.dim(1), h, w});
  for (std::size_t p = 0; p < dy.size(); ++p) {
    std::fill(dx.data() + p * hw, dx.data() + (p + 1) * hw, dy[p] / static_cast<double>(hw));
  }
  return dx;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void configure_blas() { openblas_set_num_threads(1); }

}  // namespace semuv::nn
