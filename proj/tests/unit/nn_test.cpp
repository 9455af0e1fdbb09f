#include "semuv/nn/ops.hpp"
#include "semuv/nn/params.hpp"
#include "../common/gradient_suite.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace semuv;
using nn::Tensor;
using gradient_suite::random_tensor;

TEST_CASE("dense matches identity, bias broadcast and a triple-loop oracle") {
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  const Tensor x = random_tensor({2, 3}, 1);
  CHECK(nn::dense(x, eye, Tensor({3})) == x);

  const Tensor b({3}, {1.0, -2.0, 0.5});
  const Tensor y0 = nn::dense(Tensor({2, 3}), eye, b);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) CHECK(y0[i * 3 + j] == b[j]);

  const Tensor a = random_tensor({3, 4}, 2), w = random_tensor({4, 2}, 3), bias = random_tensor({2}, 4);
  const Tensor y = nn::dense(a, w, bias);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = bias[j];
      for (int k = 0; k < 4; ++k) s += a[i * 4 + k] * w[k * 2 + j];
      CHECK(y[i * 2 + j] == doctest::Approx(s).epsilon(1e-12));
    }
  CHECK_THROWS_AS(nn::dense(a, random_tensor({3, 2}, 5), bias), nn::ShapeError);
}

TEST_CASE("conv3x3 delta kernel, ones kernel and direct-sum oracle") {
  const Tensor x = random_tensor({1, 2, 4, 4}, 6);
  Tensor delta({2, 2, 3, 3});
  delta[(0 * 2 + 0) * 9 + 4] = 1.0;
  delta[(1 * 2 + 1) * 9 + 4] = 1.0;
  const Tensor same = nn::conv3x3(x, delta, Tensor({2}));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(same[i] == doctest::Approx(x[i]).epsilon(1e-15));

  const Tensor c({1, 1, 5, 5}, 0.7);
  const Tensor ones = nn::conv3x3(c, Tensor({1, 1, 3, 3}, 1.0), Tensor({1}));
  CHECK(ones[2 * 5 + 2] == doctest::Approx(9 * 0.7));
  CHECK(ones[0] == doctest::Approx(4 * 0.7));  // corner sees 4 taps under zero padding

  const Tensor k = random_tensor({3, 2, 3, 3}, 7), b = random_tensor({3}, 8);
  const Tensor y = nn::conv3x3(x, k, b);
  for (int o = 0; o < 3; ++o)
    for (int r = 0; r < 4; ++r)
      for (int col = 0; col < 4; ++col) {
        double s = b[o];
        for (int ci = 0; ci < 2; ++ci)
          for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
              const int rr = r + dr, cc = col + dc;
              if (rr < 0 || rr >= 4 || cc < 0 || cc >= 4) continue;
              s += x[(ci * 4 + rr) * 4 + cc] * k[((o * 2 + ci) * 3 + dr + 1) * 3 + dc + 1];
            }
        CHECK(y[(o * 4 + r) * 4 + col] == doctest::Approx(s).epsilon(1e-12));
      }
}

TEST_CASE("pointwise and resampling ops") {
  const Tensor v({2}, {1.0, -1.0});
  const Tensor lr = nn::leaky_relu(v);
  CHECK(lr[0] == 1.0);
  CHECK(lr[1] == doctest::Approx(-0.2));

  const Tensor x = random_tensor({2, 3, 4, 6}, 9);
  CHECK(nn::downsample2x_avg(nn::upsample2x_nearest(x)) == x);
  const Tensor g = nn::downsample2x_avg_backward(Tensor({2, 3, 2, 3}, 1.0));
  CHECK(g.shape() == x.shape());
  for (double e : g.values()) CHECK(e == 0.25);
  CHECK_THROWS_AS(nn::downsample2x_avg(Tensor({1, 1, 3, 4})), nn::ShapeError);

  const Tensor t = nn::tanh_unit(Tensor({3}, {-50.0, 0.0, 50.0}));
  CHECK(t[0] >= 0.0);
  CHECK(t[1] == 0.5);
  CHECK(t[2] <= 1.0);
}

TEST_CASE("adain normalizes per channel then applies style") {
  const Tensor x = random_tensor({2, 3, 5, 5}, 10, 3.0);
  auto stats = [](const Tensor& y, std::size_t n, std::size_t c) {
    const std::size_t hw = 25;
    double m = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < hw; ++i) m += y[(n * 3 + c) * hw + i];
    m /= hw;
    for (std::size_t i = 0; i < hw; ++i) s2 += std::pow(y[(n * 3 + c) * hw + i] - m, 2);
    return std::pair{m, std::sqrt(s2 / hw)};
  };
  const Tensor unit = nn::adain(x, Tensor({2, 3}, 1.0), Tensor({2, 3}, 0.0));
  const Tensor styled = nn::adain(x, Tensor({2, 3}, 2.0), Tensor({2, 3}, 3.0));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c) {
      auto [m0, s0] = stats(unit, n, c);
      CHECK(std::abs(m0) < 1e-6);
      CHECK(std::abs(s0 - 1.0) < 1e-6);
      auto [m1, s1] = stats(styled, n, c);
      CHECK(std::abs(m1 - 3.0) < 1e-5);
      CHECK(std::abs(s1 - 2.0) < 1e-5);
    }
  const Tensor flat = nn::adain(Tensor({1, 1, 3, 3}, 4.0), Tensor({1, 1}, 2.0), Tensor({1, 1}, -0.5));
  for (double e : flat.values()) CHECK(e == -0.5);
  CHECK_THROWS(nn::adain(Tensor({1, 1, 1, 1}), Tensor({1, 1}), Tensor({1, 1})));
}

TEST_CASE("ops trap non-finite results") {
  Tensor bad({1, 2}, {1.0, std::nan("")});
  CHECK_THROWS_AS(nn::dense(bad, Tensor({2, 1}, 1.0), Tensor({1})), nn::NumericError);
}

TEST_CASE("adam first step, zero gradient and determinism") {
  nn::ParamStore ps;
  ps.add("a", Tensor({3}, {1.0, 2.0, 3.0}));
  ps.add("b", Tensor({1}, {0.5}));
  ps[0].grad = Tensor({3}, {4.0, -0.01, 0.0});
  ps[1].grad = Tensor({1}, {0.0});
  nn::adam_step(ps, 0.1);
  // First bias-corrected step is lr * g / (|g| + eps).
  CHECK(ps[0].value[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-9));
  CHECK(std::abs(ps[0].value[1] - (2.0 + 0.1)) < 1e-6);
  CHECK(ps[0].value[2] == 3.0);
  CHECK(ps[1].value[0] == 0.5);
  for (double g : ps[0].grad.values()) CHECK(g == 0.0);

  auto run = [] {
    nn::ParamStore p;
    p.add("w", random_tensor({4}, 11));
    for (int s = 0; s < 5; ++s) {
      p[0].grad = random_tensor({4}, 100 + s);
      nn::adam_step(p, 0.01);
    }
    return p[0].value;
  };
  CHECK(run() == run());
}

TEST_CASE("grad_check basics") {
  const Tensor x = random_tensor({6}, 12);
  const double quad = nn::grad_check([](const Tensor& v, Tensor* g) {
    double s = 0.0;
    for (double e : v.values()) s += e * e;
    if (g) {
      *g = v;
      *g *= 2.0;
    }
    return s;
  }, x);
  CHECK(quad < 1e-8);
  const double flat = nn::grad_check([](const Tensor& v, Tensor* g) {
    if (g) *g = Tensor(v.shape());
    return 3.0;
  }, x);
  CHECK(flat == 0.0);
  // A wrong gradient is caught.
  const double wrong = nn::grad_check([](const Tensor& v, Tensor* g) {
    if (g) *g = Tensor(v.shape(), 1.0);
    return v[0] * v[0];
  }, x);
  CHECK(wrong > 0.5);
}

TEST_CASE("every differentiable op passes the finite-difference suite") {
  for (const auto& c : gradient_suite::run()) {
    INFO(c.name);
    CHECK(c.max_relative_error < 1e-3);
  }
}

TEST_CASE("checkpoints round trip bit-exactly and reject corruption") {
  testing::TempDir dir("ckpt");
  nn::ParamStore ps;
  ps.add("w", random_tensor({2, 3}, 13));
  ps.add("b", random_tensor({3}, 14));
  const auto path = dir / "m.ckpt";
  nn::save_checkpoint(path, ps, {{"config", "{\"x\":1}"}});
  const nn::Checkpoint ck = nn::read_checkpoint(path);
  REQUIRE(ck.tensors.size() == 2);
  CHECK(ck.tensors[0].first == "w");
  CHECK(ck.tensors[0].second == ps[0].value);
  CHECK(ck.blobs.at("config") == "{\"x\":1}");

  nn::ParamStore other;
  other.add("w", Tensor({2, 3}));
  other.add("b", Tensor({3}));
  nn::load_values(other, ck);
  CHECK(other[1].value == ps[1].value);
  CHECK(nn::serialize_checkpoint(other, {{"config", "{\"x\":1}"}}) == nn::serialize_checkpoint(ps, {{"config", "{\"x\":1}"}}));

  nn::ParamStore wrong;
  wrong.add("w", Tensor({3, 2}));
  CHECK_THROWS(nn::load_values(wrong, ck));

  auto bytes = nn::serialize_checkpoint(ps);
  bytes[0] = 'X';
  CHECK_THROWS(nn::parse_checkpoint(bytes));
  bytes = nn::serialize_checkpoint(ps);
  bytes.resize(bytes.size() - 5);
  CHECK_THROWS(nn::parse_checkpoint(bytes));
}
