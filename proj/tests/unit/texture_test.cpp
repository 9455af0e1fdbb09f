#include "semuv/texture.hpp"
#include "support.hpp"

#include <doctest.h>
#include <png.h>

#include <cmath>

using namespace semuv;

TEST_CASE("quantization rounds half away from zero and clamps") {
  CHECK(quantize_channel(0.0) == 0);
  CHECK(quantize_channel(1.0) == 255);
  CHECK(quantize_channel(127.5 / 255.0) == 128);
  CHECK(quantize_channel(-0.2) == 0);
  CHECK(quantize_channel(1.7) == 255);
}

TEST_CASE("from_channels validates size and range") {
  CHECK_THROWS_AS(UVTextureMap::from_channels(2, 2, std::vector<double>(11, 0.5)), std::invalid_argument);
  CHECK_THROWS(UVTextureMap::from_channels(2, 2, std::vector<double>(12, 1.5)));
  CHECK_NOTHROW(UVTextureMap::from_channels(2, 2, std::vector<double>(12, 1.0)));
}

TEST_CASE("png and ppm round trips are exact after quantization") {
  testing::TempDir dir("tex");
  const UVTextureMap t = testing::random_texture(17, 9, 3);
  for (auto fmt : {ImageFormat::png, ImageFormat::ppm}) {
    const auto path = dir / (fmt == ImageFormat::png ? "a.png" : "a.ppm");
    save_texture(t, path, fmt);
    const UVTextureMap back = load_texture(path);
    REQUIRE(back.width() == 17);
    REQUIRE(back.height() == 9);
    CHECK(quantized_bytes(back) == quantized_bytes(t));
    // Saving the decoded image again is byte-identical.
    const auto path2 = dir / (fmt == ImageFormat::png ? "b.png" : "b.ppm");
    save_texture(back, path2, fmt);
    CHECK(testing::read_file(path) == testing::read_file(path2));
  }
}

TEST_CASE("ppm decoder handles comments and maxval scaling") {
  const std::string header = "P6\n# made by hand\n2 1\n# another\n15\n";
  std::string bytes = header + std::string("\x0f\x00\x05\x00\x0f\x0a", 6);
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data());
  const UVTextureMap t = decode_ppm({p, bytes.size()});
  CHECK(t.channel(0, 0, 0) == doctest::Approx(1.0));
  CHECK(t.channel(0, 0, 2) == doctest::Approx(5.0 / 15.0));
  CHECK(t.channel(1, 0, 1) == doctest::Approx(1.0));
}

TEST_CASE("decoder errors carry their kind") {
  testing::TempDir dir("texerr");
  try {
    load_texture(dir / "missing.png");
    FAIL("expected throw");
  } catch (const TextureError& e) {
    CHECK(e.kind() == TextureError::Kind::missing_file);
  }

  // 16-bit PPM.
  std::string ppm16 = "P6\n1 1\n65535\n" + std::string(6, '\x01');
  testing::write_file(dir / "deep.ppm", ppm16);
  try {
    load_texture(dir / "deep.ppm");
    FAIL("expected throw");
  } catch (const TextureError& e) {
    CHECK(e.kind() == TextureError::Kind::unsupported_bit_depth);
  }

  // 16-bit PNG written through libpng directly.
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = 2;
  image.height = 2;
  image.format = PNG_FORMAT_LINEAR_RGB;
  std::vector<png_uint_16> pixels(12, 1000);
  const auto deep_png = dir / "deep.png";
  REQUIRE(png_image_write_to_file(&image, deep_png.c_str(), 0, pixels.data(), 0, nullptr));
  try {
    load_texture(deep_png);
    FAIL("expected throw");
  } catch (const TextureError& e) {
    CHECK(e.kind() == TextureError::Kind::unsupported_bit_depth);
  }

  // Truncated PNG.
  save_texture(testing::random_texture(8, 8, 1), dir / "ok.png", ImageFormat::png);
  std::string bytes = testing::read_file(dir / "ok.png");
  testing::write_file(dir / "cut.png", bytes.substr(0, bytes.size() / 2));
  try {
    load_texture(dir / "cut.png");
    FAIL("expected throw");
  } catch (const TextureError& e) {
    CHECK(e.kind() == TextureError::Kind::malformed);
  }

  CHECK_THROWS_AS(save_texture(UVTextureMap(2, 2), dir / "no_such_dir" / "x.png", ImageFormat::png), TextureError);
}

TEST_CASE("bilinear resize: identity, constants and exact 2x averaging") {
  const UVTextureMap t = testing::random_texture(8, 6, 9);
  CHECK(resize_bilinear(t, 8, 6) == t);

  const UVTextureMap flat(5, 5, {0.25, 0.5, 0.75});
  const UVTextureMap up = resize_bilinear(flat, 13, 7);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 13; ++x) CHECK(up.at(x, y).g == doctest::Approx(0.5).epsilon(1e-12));
  }

  // Centre-aligned halving samples exactly between source pixel pairs.
  const UVTextureMap half = resize_bilinear(t, 4, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double expect = 0.25 * (t.channel(2 * x, 2 * y, c) + t.channel(2 * x + 1, 2 * y, c) +
                                      t.channel(2 * x, 2 * y + 1, c) + t.channel(2 * x + 1, 2 * y + 1, c));
        CHECK(half.channel(x, y, c) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("planar resize adjoint satisfies the dot-product identity") {
  semuv::Rng rng(4);
  const int sw = 9, sh = 7, dw = 4, dh = 5, ch = 3;
  std::vector<double> x(ch * sw * sh), y(ch * dw * dh), ax(y.size()), aty(x.size());
  for (double& v : x) v = rng.normal();
  for (double& v : y) v = rng.normal();
  resize_planar(x, ch, sw, sh, ax, dw, dh);
  resize_planar_adjoint(y, ch, sw, sh, aty, dw, dh);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += ax[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("content hash tracks quantized content") {
  const UVTextureMap a = testing::random_texture(6, 6, 1);
  UVTextureMap b = a;
  CHECK(content_hash(a) == content_hash(b));
  CHECK(content_hash(a).size() == 16);
  b.channel(0, 0, 0) = b.channel(0, 0, 0) > 0.5 ? 0.0 : 1.0;
  CHECK(content_hash(a) != content_hash(b));
}

TEST_CASE("hconcat places images side by side") {
  const UVTextureMap a(2, 3, {1, 0, 0}), b(4, 3, {0, 1, 0});
  std::vector<UVTextureMap> parts{a, b};
  const UVTextureMap c = hconcat(parts);
  CHECK(c.width() == 6);
  CHECK(c.at(1, 2) == Rgb{1, 0, 0});
  CHECK(c.at(2, 0) == Rgb{0, 1, 0});
  std::vector<UVTextureMap> bad{a, UVTextureMap(2, 2)};
  CHECK_THROWS(hconcat(bad));
}
