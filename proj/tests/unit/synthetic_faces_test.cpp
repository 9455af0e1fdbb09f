#include "semuv/synthetic_faces.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace semuv;
using namespace semuv::faces;

TEST_CASE("generation is a pure function of attributes, seed and resolution") {
  const FaceAttributes a{0.3, 0.6, 0.9};
  CHECK(generate_texture(a, 11, 64) == generate_texture(a, 11, 64));
  CHECK_FALSE(generate_texture(a, 11, 64) == generate_texture(a, 12, 64));
  const UVTextureMap t = generate_texture(a, 11, 64);
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("dataset elements do not depend on how many are drawn") {
  const auto small = sample_dataset(3, 5, 32);
  const auto large = sample_dataset(10, 5, 32);
  for (std::size_t i = 0; i < small.size(); ++i) {
    CHECK(small[i].texture == large[i].texture);
    CHECK(small[i].attributes == large[i].attributes);
    CHECK(small[i].seed == large[i].seed);
  }
  const auto e = sample_element(5, 7, 32);
  CHECK(e.texture == large[7].texture);
}

TEST_CASE("invalid requests are rejected") {
  CHECK_THROWS_AS(generate_texture({1.2, 0, 0}, 1, 64), std::invalid_argument);
  CHECK_THROWS_AS(generate_texture({0, -0.1, 0}, 1, 64), std::invalid_argument);
  CHECK_THROWS_AS(generate_texture({0, 0, 0}, 1, 48), std::invalid_argument);
  CHECK_FALSE(supported_resolution(16));
  CHECK(supported_resolution(256));
  CHECK_THROWS(measure_attributes(UVTextureMap(16, 16)));
}

TEST_CASE("the oracle recovers generated attributes") {
  for (int res : {32, 64, 128}) {
    CAPTURE(res);
    double worst = 0.0;
    for (const auto& item : sample_dataset(res == 128 ? 40 : 150, 99, res)) {
      const FaceAttributes m = measure_attributes(item.texture);
      worst = std::max({worst, std::abs(m.age - item.attributes.age),
                        std::abs(m.facial_hair - item.attributes.facial_hair),
                        std::abs(m.gender - item.attributes.gender)});
    }
    CHECK(worst < 0.05);
  }
}

TEST_CASE("one attribute sweep leaves the other readings unchanged") {
  for (Attribute a : {Attribute::age, Attribute::facial_hair, Attribute::gender}) {
    CAPTURE(to_string(a));
    double previous = -1.0;
    FaceAttributes first{};
    for (int i = 0; i <= 10; ++i) {
      FaceAttributes attrs{0.5, 0.5, 0.5};
      (a == Attribute::age ? attrs.age : a == Attribute::gender ? attrs.gender : attrs.facial_hair) = i / 10.0;
      const FaceAttributes m = measure_attributes(generate_texture(attrs, 21, 64));
      CHECK(get(m, a) > previous);
      previous = get(m, a);
      if (i == 0) first = m;
      for (Attribute other : {Attribute::age, Attribute::facial_hair, Attribute::gender}) {
        if (other != a) CHECK(std::abs(get(m, other) - get(first, other)) < 0.02);
      }
    }
  }
}

TEST_CASE("attribute names round trip") {
  for (Attribute a : {Attribute::age, Attribute::facial_hair, Attribute::gender}) {
    CHECK(parse_attribute(to_string(a)) == a);
  }
  CHECK_FALSE(parse_attribute("smile").has_value());
}

TEST_CASE("corpus export and reload") {
  testing::TempDir dir("corpus");
  const auto corpus = sample_dataset(5, 3, 32);
  export_corpus(corpus, dir.path());
  CHECK(std::filesystem::exists(dir / "manifest.jsonl"));
  const auto manifest = read_manifest(dir.path());
  REQUIRE(manifest.size() == 5);
  CHECK(manifest[2].seed == corpus[2].seed);
  const auto back = load_corpus(dir / "manifest.jsonl");
  REQUIRE(back.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(quantized_bytes(back[i].texture) == quantized_bytes(corpus[i].texture));
    CHECK(back[i].attributes.age == doctest::Approx(corpus[i].attributes.age).epsilon(1e-12));
  }
}
