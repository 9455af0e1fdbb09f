#include "semuv/latent_boundaries.hpp"
#include "semuv/random.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace semuv;
using boundaries::AttributeBoundary;
using boundaries::BoundaryError;
using gen::LatentVector;

namespace {

LatentVector wv(std::vector<double> v) { return {gen::Space::w, std::move(v)}; }

AttributeBoundary make(const std::string& name, std::vector<double> n, double offset = 0.0) {
  AttributeBoundary b;
  b.attribute = name;
  double len = 0.0;
  for (double v : n) len += v * v;
  for (double& v : n) v /= std::sqrt(len);
  b.normal = std::move(n);
  b.offset = offset;
  return b;
}

double angle_deg(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::acos(std::clamp(d / std::sqrt(na * nb), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

boundaries::SvmConfig no_holdout() {
  boundaries::SvmConfig c;
  c.heldout_fraction = 0.0;
  return c;
}

}  // namespace

TEST_CASE("select_extremes takes quantile tails with stable ties") {
  std::vector<boundaries::LabeledLatent> s;
  for (int i = 0; i < 10; ++i) s.push_back({wv({double(i)}), {0.0, i / 9.0, 0.0}});
  const auto e = boundaries::select_extremes(s, faces::Attribute::facial_hair, 0.2);
  REQUIRE(e.positives.size() == 2);
  REQUIRE(e.negatives.size() == 2);
  CHECK(e.positives[0].values[0] == 9);
  CHECK(e.positives[1].values[0] == 8);
  CHECK(e.negatives[0].values[0] == 0);
  CHECK(e.negatives[1].values[0] == 1);

  const auto half = boundaries::select_extremes(s, faces::Attribute::facial_hair, 0.5);
  CHECK(half.positives.size() + half.negatives.size() == 10);

  // Ties at the cut: indices 2 and 3 share the top value, 2 wins.
  std::vector<boundaries::LabeledLatent> t;
  for (int i = 0; i < 10; ++i) t.push_back({wv({double(i)}), {i == 2 || i == 3 ? 1.0 : 0.1 * (i % 5), 0.0, 0.0}});
  const auto te = boundaries::select_extremes(t, faces::Attribute::age, 0.1);
  CHECK(te.positives[0].values[0] == 2);

  std::vector<boundaries::LabeledLatent> flat(12, {wv({0.0}), {0.5, 0.5, 0.5}});
  CHECK_THROWS_AS(boundaries::select_extremes(flat, faces::Attribute::age), BoundaryError);
  CHECK_THROWS_AS(boundaries::select_extremes(std::span(s).first(4), faces::Attribute::age), BoundaryError);
}

TEST_CASE("svm recovers a symmetric separator and flips with the labels") {
  Rng rng(1);
  std::vector<LatentVector> pos, neg;
  for (int i = 0; i < 20; ++i) {
    pos.push_back(wv({1.0, rng.uniform(-0.01, 0.01)}));
    neg.push_back(wv({-1.0, rng.uniform(-0.01, 0.01)}));
  }
  const AttributeBoundary b = boundaries::train_boundary(pos, neg, "x");
  CHECK(angle_deg(b.normal, {1.0, 0.0}) * std::numbers::pi / 180.0 < 0.05);
  CHECK(b.heldout_accuracy == 1.0);
  const AttributeBoundary swapped = boundaries::train_boundary(neg, pos, "x");
  CHECK(angle_deg(swapped.normal, {-1.0, 0.0}) * std::numbers::pi / 180.0 < 0.05);
}

TEST_CASE("svm matches the geometric max-margin separator in 2-D") {
  // Two positive support points on <u, x> = 1 and one negative on <u, x> = -1
  // whose projection falls between them, so the max-margin normal is u.
  const double th = 30.0 * std::numbers::pi / 180.0;
  const std::vector<double> u{std::cos(th), std::sin(th)}, t{-std::sin(th), std::cos(th)};
  auto at = [&](double a, double s) { return wv({a * u[0] + s * t[0], a * u[1] + s * t[1]}); };
  std::vector<LatentVector> pos{at(1.0, -2.0), at(1.0, 2.0)}, neg{at(-1.0, 0.3)};
  Rng rng(3);
  for (int i = 0; i < 12; ++i) {
    pos.push_back(at(rng.uniform(1.5, 3.0), rng.uniform(-2.0, 2.0)));
    neg.push_back(at(rng.uniform(-3.0, -1.5), rng.uniform(-1.0, 1.0)));
  }
  boundaries::SvmConfig cfg = no_holdout();
  cfg.epochs = 400;
  const AttributeBoundary b = boundaries::train_boundary(pos, neg, "m", cfg);
  CHECK(angle_deg(b.normal, u) < 5.0);
  CHECK(std::abs(b.offset) < 0.2);  // max-margin hyperplane passes through the origin
}

TEST_CASE("svm rejects empty classes and reports held-out accuracy") {
  CHECK_THROWS_AS(boundaries::train_boundary({}, {wv({1.0})}, "x"), BoundaryError);
  std::vector<LatentVector> pos, neg;
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    pos.push_back(wv({1.0 + rng.normal() * 0.3, rng.normal(), rng.normal()}));
    neg.push_back(wv({-1.0 + rng.normal() * 0.3, rng.normal(), rng.normal()}));
  }
  const AttributeBoundary b = boundaries::train_boundary(pos, neg, "x");
  CHECK(b.heldout_accuracy > 0.9);
  CHECK(b.midpoint.size() == 3);
  double len = 0.0;
  for (double v : b.normal) len += v * v;
  CHECK(std::abs(std::sqrt(len) - 1.0) < 1e-9);
}

TEST_CASE("orthogonalize examples and postconditions") {
  const auto same = boundaries::orthogonalize({make("a", {1, 0}), make("b", {0, 1})});
  CHECK(same[0].normal == std::vector<double>{1, 0});
  CHECK(same[1].normal == std::vector<double>{0, 1});

  const auto ob = boundaries::orthogonalize({make("a", {1, 0}), make("b", {1, 1})});
  CHECK(std::abs(ob[1].normal[0]) < 1e-15);
  CHECK(ob[1].normal[1] == doctest::Approx(1.0).epsilon(1e-15));

  Rng rng(9);
  std::vector<AttributeBoundary> many;
  for (int k = 0; k < 5; ++k) {
    std::vector<double> n(16);
    for (double& v : n) v = rng.normal() + (k == 0 ? 0.0 : 2.0);  // deliberately correlated
    many.push_back(make("b" + std::to_string(k), n, rng.normal()));
  }
  const auto o = boundaries::orthogonalize(many);
  for (std::size_t i = 0; i < o.size(); ++i) {
    double len = 0.0;
    for (double v : o[i].normal) len += v * v;
    CHECK(std::abs(std::sqrt(len) - 1.0) < 1e-9);
    for (std::size_t j = 0; j < i; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < 16; ++k) d += o[i].normal[k] * o[j].normal[k];
      CHECK(std::abs(d) < 1e-9);
    }
  }
  // Editing along one orthogonalized boundary leaves every other score unchanged.
  const LatentVector w = wv(std::vector<double>(16, 0.3));
  for (std::size_t i = 0; i < o.size(); ++i)
    for (std::size_t j = 0; j < o.size(); ++j) {
      if (i == j) continue;
      CHECK(std::abs(o[j].score(boundaries::edit(w, o[i], 2.5)) - o[j].score(w)) <= 1e-9);
    }
}

TEST_CASE("orthogonalize names the colliding pair") {
  try {
    boundaries::orthogonalize({make("age", {1, 0, 0}), make("gender", {0, 1, 0}), make("beard", {1, 1e-9, 0})});
    FAIL("expected rank deficiency");
  } catch (const BoundaryError& e) {
    CHECK(e.kind() == BoundaryError::Kind::rank_deficient);
    const std::string msg = e.what();
    CHECK(msg.find("beard") != std::string::npos);
    CHECK(msg.find("age") != std::string::npos);
  }
}

TEST_CASE("orthogonalize keeps hyperplanes through the class midpoint") {
  AttributeBoundary a = make("a", {1, 0}), b = make("b", {1, 1});
  b.midpoint = {2.0, 3.0};
  const auto o = boundaries::orthogonalize({a, b});
  CHECK(o[1].score(wv({2.0, 3.0})) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("edits are exact latent additions") {
  const AttributeBoundary b = make("a", {3, -1, 2});
  const LatentVector w = wv({0.7, -1.3, 2.1});
  CHECK(boundaries::edit(w, b, 0.0) == w);
  const LatentVector e = boundaries::edit(w, b, 1.75);
  double along = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = e.values[i] - w.values[i];
    CHECK(std::abs(d - 1.75 * b.normal[i]) <= 1e-15 * 4);
    along += d * b.normal[i];
  }
  CHECK(along == doctest::Approx(1.75).epsilon(1e-14));
  const LatentVector back = boundaries::edit(e, b, -1.75);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(back.values[i] - w.values[i]) <= 1e-12);
  // Scores grow exactly linearly.
  for (double a : {-3.0, -0.5, 1.0, 2.0}) CHECK(std::abs(b.score(boundaries::edit(w, b, a)) - (b.score(w) + a)) <= 1e-12);
  CHECK_THROWS(boundaries::edit(wv({1.0}), b, 1.0));
  CHECK_THROWS(boundaries::edit({gen::Space::z, {0, 0, 0}}, b, 1.0));
}

TEST_CASE("interpolation sequences") {
  const std::vector<AttributeBoundary> bs{make("age", {1, 0}), make("gender", {0, 1})};
  boundaries::EditRequest r{wv({0.5, 0.5}), "gender", 1, -2.0, 2.0};
  auto one = boundaries::interpolation_sequence(r, bs);
  REQUIRE(one.size() == 1);
  CHECK(one[0].values[1] == doctest::Approx(-1.5));

  r.steps = 3;
  r.alpha_min = -1.0;
  r.alpha_max = 1.0;
  CHECK(boundaries::alpha_schedule(3, -1.0, 1.0) == std::vector<double>{-1.0, 0.0, 1.0});
  const auto three = boundaries::interpolation_sequence(r, bs);
  CHECK(three[1].values == r.base.values);

  r.steps = 7;
  r.alpha_min = -3.0;
  r.alpha_max = 3.0;
  const auto seq = boundaries::interpolation_sequence(r, bs);
  for (std::size_t i = 1; i < seq.size(); ++i) {
    CHECK(std::abs(seq[i].values[0] - seq[i - 1].values[0]) <= 1e-12);
    CHECK(std::abs(seq[i].values[1] - seq[i - 1].values[1] - 1.0) <= 1e-12);
    CHECK(bs[1].score(seq[i]) > bs[1].score(seq[i - 1]));
  }
  r.attribute = "hat";
  try {
    boundaries::interpolation_sequence(r, bs);
    FAIL("expected unknown attribute");
  } catch (const BoundaryError& e) {
    CHECK(e.kind() == BoundaryError::Kind::unknown_attribute);
  }
  CHECK_THROWS(boundaries::alpha_schedule(0, 0.0, 1.0));
}

TEST_CASE("boundary and latent files round trip") {
  testing::TempDir dir("bnd");
  AttributeBoundary b = make("age", {0.6, 0.8}, 0.25);
  b.heldout_accuracy = 0.9;
  b.sigma_w = 0.4;
  b.trained_on = "abc";
  boundaries::save_boundaries({b}, dir / "one.json");
  const auto one = boundaries::load_boundaries(dir / "one.json");
  REQUIRE(one.size() == 1);
  CHECK(one[0].to_json() == b.to_json());
  CHECK(nlohmann::json::parse(testing::read_file(dir / "one.json")).contains("dim"));

  boundaries::save_boundaries({b, make("gender", {0, 1})}, dir / "two.json");
  CHECK(boundaries::load_boundaries(dir / "two.json").size() == 2);

  nlohmann::json bad = b.to_json();
  bad["normal"] = {1.0, 1.0};
  CHECK_THROWS_AS(AttributeBoundary::from_json(bad), BoundaryError);
  testing::write_file(dir / "junk.json", "{not json");
  CHECK_THROWS_AS(boundaries::load_boundaries(dir / "junk.json"), BoundaryError);

  std::vector<boundaries::LabeledLatent> ls{{wv({0.1, 0.2}), {0.3, 0.4, 0.5}}, {wv({-1.0, 2.0}), {1.0, 0.0, 0.25}}};
  boundaries::save_labeled_latents(ls, dir / "l.jsonl");
  const auto back = boundaries::load_labeled_latents(dir / "l.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[1].w == ls[1].w);
  CHECK(back[1].attributes == ls[1].attributes);
  CHECK(boundaries::latent_spread(ls) > 0.0);
}

TEST_CASE("generated latents are labelled deterministically") {
  gen::GeneratorConfig c;
  c.latent_dim = 8;
  c.resolution = 32;
  const gen::GeneratorModel g(c);
  const auto a = boundaries::label_generated_latents(g, 3, 6);
  const auto b = boundaries::label_generated_latents(g, 3, 6);
  REQUIRE(a.size() == 3);
  CHECK(a[2].w == b[2].w);
  CHECK(a[2].attributes == b[2].attributes);
  // Batched and single mapping may round differently inside BLAS.
  const auto single = gen::map_latent(g, gen::sample_z(8, derive_seed(6, 0)));
  for (int k = 0; k < 8; ++k) CHECK(a[0].w.values[k] == doctest::Approx(single.values[k]).epsilon(1e-12));
}
