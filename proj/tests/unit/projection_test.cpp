#include "semuv/latent_boundaries.hpp"
#include "semuv/projection.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace semuv;

namespace {

gen::GeneratorModel model32() {
  gen::GeneratorConfig c;
  c.latent_dim = 16;
  c.mapping_layers = 2;
  c.resolution = 32;
  c.seed = 12;
  return gen::GeneratorModel(c);
}

proj::ProjectionConfig quick(int steps) {
  proj::ProjectionConfig c;
  c.steps = steps;
  c.mean_w_samples = 500;
  c.seed = 3;
  return c;
}

// Center-aligned bilinear reduction by a power-of-two factor f samples
// halfway between source pixels f*i + f/2 - 1 and f*i + f/2 on each axis.
double pyramid_oracle(const UVTextureMap& a, const UVTextureMap& b, int levels) {
  double loss = 0.0;
  for (int l = 0; l < levels; ++l) {
    const int f = 1 << l, n = a.width() / f;
    auto sample = [&](const UVTextureMap& m, int i, int j, int c) {
      if (f == 1) return m.channel(i, j, c);
      const int x0 = f * i + f / 2 - 1, y0 = f * j + f / 2 - 1;
      return 0.25 * (m.channel(x0, y0, c) + m.channel(x0 + 1, y0, c) + m.channel(x0, y0 + 1, c) +
                     m.channel(x0 + 1, y0 + 1, c));
    };
    double s = 0.0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) s += std::pow(sample(a, i, j, c) - sample(b, i, j, c), 2);
    loss += s / (3.0 * n * n);
  }
  return loss;
}

}  // namespace

TEST_CASE("reconstruction loss examples") {
  const UVTextureMap a = testing::random_texture(16, 16, 1), b = testing::random_texture(16, 16, 2);
  CHECK(proj::reconstruction_loss(a, a, 3) == 0.0);
  UVTextureMap black(8, 8), white(8, 8);
  for (double& v : white.channels()) v = 1.0;
  CHECK(proj::reconstruction_loss(white, black, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(proj::reconstruction_loss(white, black, 3) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(std::abs(proj::reconstruction_loss(a, b, 3) - pyramid_oracle(a, b, 3)) < 1e-9);
  CHECK(std::abs(proj::reconstruction_loss(a, b, 4) - pyramid_oracle(a, b, 4)) < 1e-9);
  CHECK_THROWS(proj::reconstruction_loss(a, black, 1));
}

TEST_CASE("psnr") {
  const UVTextureMap a = testing::random_texture(8, 8, 3);
  CHECK(std::isinf(proj::psnr_db(a, a)));
  UVTextureMap g1(4, 4), g2(4, 4);
  for (double& v : g2.channels()) v = 0.1;
  CHECK(proj::psnr_db(g1, g2) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("projection from the true latent starts at zero loss") {
  const gen::GeneratorModel g = model32();
  const auto w0 = gen::map_latent(g, gen::sample_z(16, 5));
  proj::ProjectionConfig c = quick(5);
  c.init = w0;
  const auto r = proj::project(gen::synthesize(g, w0), g, c);
  CHECK(r.loss_curve.at(0) == 0.0);
  CHECK(r.final_loss == 0.0);
  CHECK(r.best_step == 0);
  CHECK(r.w == w0);
}

TEST_CASE("projection is deterministic and tracks the best step") {
  const gen::GeneratorModel g = model32();
  const UVTextureMap target = gen::synthesize(g, gen::map_latent(g, gen::sample_z(16, 7)));
  const auto a = proj::project(target, g, quick(40));
  const auto b = proj::project(target, g, quick(40));
  CHECK(a.to_json() == b.to_json());
  CHECK(a.w == b.w);
  CHECK(a.final_loss == *std::min_element(a.loss_curve.begin(), a.loss_curve.end()));
  CHECK(a.final_loss < a.loss_curve.front());
  CHECK(proj::reconstruction_loss(a.reconstruction, target, 3) == doctest::Approx(a.final_loss).epsilon(1e-12));
  CHECK_THROWS(proj::project(testing::random_texture(16, 16, 1), g, quick(5)));
}

TEST_CASE("projection recovers a generated image from a nearby start") {
  // An untrained generator has poor basins far from the truth, so start close.
  const gen::GeneratorModel g = model32();
  for (int t = 0; t < 3; ++t) {
    const auto truth = gen::map_latent(g, gen::sample_z(16, 100 + t));
    proj::ProjectionConfig c = quick(60);
    c.init = truth;
    Rng rng(200 + t);
    for (double& v : c.init->values) v += 0.1 * rng.normal();
    const auto r = proj::project(gen::synthesize(g, truth), g, c);
    INFO("target " << t);
    CHECK(r.final_loss < 0.01 * r.loss_curve.front());
  }
}

TEST_CASE("editing a projection by zero reproduces the reconstruction") {
  const gen::GeneratorModel g = model32();
  const UVTextureMap target = testing::random_texture(32, 32, 8);
  const auto r = proj::project(target, g, quick(10));
  boundaries::AttributeBoundary b;
  b.attribute = "age";
  b.normal.assign(16, 0.0);
  b.normal[3] = 1.0;
  CHECK(std::ranges::equal(gen::synthesize(g, boundaries::edit(r.w, b, 0.0)).channels(), r.reconstruction.channels()));
}

TEST_CASE("projection config validation") {
  proj::ProjectionConfig c;
  c.steps = 0;
  CHECK_THROWS(c.validate());
  c = {};
  c.levels = 0;
  CHECK_THROWS(c.validate());
}
