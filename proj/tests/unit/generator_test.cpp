#include "semuv/generator.hpp"
#include "semuv/random.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace semuv;
using nn::Tensor;

namespace {

gen::GeneratorModel small_model() {
  gen::GeneratorConfig c;
  c.latent_dim = 16;
  c.mapping_layers = 2;
  c.resolution = 16;
  c.seed = 5;
  return gen::GeneratorModel(c);
}

}  // namespace

TEST_CASE("mapping is deterministic and finite at z = 0") {
  const gen::GeneratorModel g{gen::GeneratorConfig{}};
  const gen::LatentVector z = gen::sample_z(64, 3);
  CHECK(gen::map_latent(g, z) == gen::map_latent(g, z));
  const gen::LatentVector w0 = gen::map_latent(g, {gen::Space::z, std::vector<double>(64, 0.0)});
  CHECK(w0.space == gen::Space::w);
  for (double v : w0.values) CHECK(std::isfinite(v));
}

TEST_CASE("space tags are enforced") {
  const gen::GeneratorModel g = small_model();
  const gen::LatentVector z = gen::sample_z(16, 1);
  CHECK_THROWS_AS(gen::synthesize(g, z), gen::LatentError);
  const gen::LatentVector w = gen::map_latent(g, z);
  CHECK_THROWS_AS(gen::map_latent(g, w), gen::LatentError);
  CHECK_THROWS_AS(gen::synthesize(g, {gen::Space::w, std::vector<double>(15, 0.0)}), gen::LatentError);
}

TEST_CASE("synthesize is pure, correctly sized and bounded") {
  const gen::GeneratorModel g{gen::GeneratorConfig{}};
  const gen::LatentVector w = gen::map_latent(g, gen::sample_z(64, 9));
  const UVTextureMap a = gen::synthesize(g, w);
  const UVTextureMap b = gen::synthesize(g, w);
  CHECK(a.width() == 64);
  CHECK(a.height() == 64);
  CHECK(std::ranges::equal(a.channels(), b.channels()));
  for (double v : a.channels()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("sample_mean_w agrees with an explicit Monte-Carlo mean") {
  const gen::GeneratorModel g = small_model();
  const std::uint64_t seed = 21;
  const gen::LatentVector one = gen::sample_mean_w(g, 1, seed);
  const gen::LatentVector direct = gen::map_latent(g, gen::sample_z(16, derive_seed(seed, 0)));
  for (int k = 0; k < 16; ++k) CHECK(one.values[k] == doctest::Approx(direct.values[k]).epsilon(1e-12));

  const std::size_t n = 10000;
  std::vector<double> sum(16, 0.0), sq(16, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = gen::map_latent(g, gen::sample_z(16, derive_seed(seed, i)));
    for (int k = 0; k < 16; ++k) {
      sum[k] += w.values[k];
      sq[k] += w.values[k] * w.values[k];
    }
  }
  const gen::LatentVector m10 = gen::sample_mean_w(g, n, seed);
  const gen::LatentVector m20 = gen::sample_mean_w(g, 2 * n, seed);
  CHECK(m10 == gen::sample_mean_w(g, n, seed));
  for (int k = 0; k < 16; ++k) {
    const double mean = sum[k] / n;
    const double sd = std::sqrt(sq[k] / n - mean * mean);
    CHECK(std::abs(m10.values[k] - mean) < 1e-3);
    CHECK(std::abs(m10.values[k] - m20.values[k]) < 3.0 * sd / std::sqrt(double(n)));
  }
}

TEST_CASE("pixel-sum gradient with respect to w matches finite differences") {
  gen::GeneratorModel g = small_model();
  const gen::LatentVector w = gen::map_latent(g, gen::sample_z(16, 4));
  const double err = nn::grad_check([&](const Tensor& wt, Tensor* grad) {
    gen::SynthesisTape tape;
    const Tensor img = g.synthesize_forward(wt, &tape);
    double s = 0.0;
    for (double v : img.values()) s += v;
    if (grad) *grad = g.synthesize_latent_grad(tape, Tensor(img.shape(), 1.0));
    return s;
  }, gen::latent_to_tensor(w), 1e-5);
  CHECK(err < 1e-3);
}

TEST_CASE("generator checkpoints reproduce the model") {
  testing::TempDir dir("gen");
  const gen::GeneratorModel g = small_model();
  g.save(dir / "g.ckpt");
  const gen::GeneratorModel back = gen::GeneratorModel::load(dir / "g.ckpt");
  CHECK(back.config().to_json() == g.config().to_json());
  const auto w = gen::map_latent(g, gen::sample_z(16, 2));
  CHECK(std::ranges::equal(gen::synthesize(back, w).channels(), gen::synthesize(g, w).channels()));
  CHECK_THROWS(gen::GeneratorModel::load(dir / "missing.ckpt"));
}

TEST_CASE("config validation") {
  gen::GeneratorConfig c;
  c.resolution = 48;
  CHECK_THROWS(c.validate());
  c.resolution = 64;
  c.latent_dim = 0;
  CHECK_THROWS(c.validate());
  CHECK(gen::GeneratorConfig::from_json(gen::GeneratorConfig{}.to_json()).to_json() == gen::GeneratorConfig{}.to_json());
}
