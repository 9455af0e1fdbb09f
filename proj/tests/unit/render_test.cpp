#include "semuv/mesh_render.hpp"
#include "semuv/random.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace semuv::render;
using semuv::Rgb;
using semuv::Rng;
using semuv::UVTextureMap;
using semuv::resize_bilinear;

namespace {

const char* kQuadObj =
    "# unit quad\n"
    "v -0.5 -0.5 0\n"
    "v 0.5 -0.5 0\n"
    "v 0.5 0.5 0\n"
    "v -0.5 0.5 0\n"
    "vt 0 0\n"
    "vt 1 0\n"
    "vt 1 1\n"
    "vt 0 1\n"
    "vn 0 0 1\n"
    "f 1/1/1 2/2/1 3/3/1\n"
    "f 1/1/1 3/3/1 4/4/1\n";

// Axis-aligned square in the z = 0 plane with UVs spanning [0, 1].
HeadMesh square(double half) {
  HeadMesh m;
  m.vertices = {{-half, -half, 0}, {half, -half, 0}, {half, half, 0}, {-half, half, 0}};
  m.uvs = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  m.triangles = {Triangle{Corner{0, 0}, Corner{1, 1}, Corner{2, 2}}, Triangle{Corner{0, 0}, Corner{2, 2}, Corner{3, 3}}};
  return m;
}

double max_diff(const UVTextureMap& a, const UVTextureMap& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.channels().size(); ++i) m = std::max(m, std::abs(a.channels()[i] - b.channels()[i]));
  return m;
}

}  // namespace

TEST_CASE("obj parsing") {
  const HeadMesh m = parse_obj(kQuadObj);
  CHECK(m.vertices.size() == 4);
  CHECK(m.triangles.size() == 2);

  const HeadMesh fan = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1 4/1\n");
  REQUIRE(fan.triangles.size() == 2);
  CHECK(fan.triangles[1][0].vertex == 0);
  CHECK(fan.triangles[1][1].vertex == 2);
  CHECK(fan.triangles[1][2].vertex == 3);

  const HeadMesh neg = parse_obj(
      "v -0.5 -0.5 0\nv 0.5 -0.5 0\nv 0.5 0.5 0\nv -0.5 0.5 0\nvt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\n"
      "f -4/-4 -3/-3 -2/-2\nf -4/-4 -2/-2 -1/-1\n");
  CHECK(neg.triangles == m.triangles);
  CHECK(neg.vertices == m.vertices);

  CHECK(parse_obj(format_obj(m)).triangles == m.triangles);
}

TEST_CASE("obj errors carry kinds and line numbers") {
  auto kind_of = [](const char* text) {
    try {
      parse_obj(text);
    } catch (const MeshError& e) {
      return std::pair{e.kind(), e.line()};
    }
    return std::pair{MeshError::Kind::io, -1};
  };
  CHECK(kind_of("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").first == MeshError::Kind::missing_uv);
  CHECK(kind_of("v 0 0 0\nvt 0 0\nf 1/1 2/1 3/1\n") == std::pair{MeshError::Kind::index_out_of_range, 3});
  CHECK(kind_of("v 0 zero 0\n") == std::pair{MeshError::Kind::malformed, 1});
  CHECK_THROWS_AS(load_obj("/nonexistent/head.obj"), MeshError);
}

TEST_CASE("camera validation") {
  RenderCamera c;
  c.fov_degrees = 0.0;
  CHECK_THROWS_AS(c.validate(), MeshError);
  c = {};
  c.target = c.eye;
  CHECK_THROWS_AS(c.validate(), MeshError);
  c = {};
  c.up = {0, 0, 1};  // parallel to the view direction
  CHECK_THROWS_AS(c.validate(), MeshError);
}

TEST_CASE("nothing in the frustum renders background") {
  HeadMesh behind = square(0.5);
  for (auto& v : behind.vertices) v.z = 10.0;
  RenderCamera cam;
  cam.width = cam.height = 32;
  const auto r = render(behind, testing::random_texture(8, 8, 1), cam, {}, {0.2, 0.4, 0.6});
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) CHECK(r.image.at(x, y) == Rgb{0.2, 0.4, 0.6});
}

TEST_CASE("full-viewport quad equals the bilinear resample") {
  RenderCamera cam;
  cam.width = cam.height = 96;
  const double half = 5.0 * std::tan(cam.fov_degrees / 2.0 * std::numbers::pi / 180.0);
  const UVTextureMap tex = testing::random_texture(40, 40, 2);
  const auto r = render(square(half), tex, cam, Light::ambient_only());
  CHECK(max_diff(r.image, resize_bilinear(tex, 96, 96)) <= 1.0 / 255.0);
}

TEST_CASE("pinhole extent of a unit quad") {
  for (double d : {3.0, 5.0, 8.0}) {
    RenderCamera cam;
    cam.eye = {0, 0, d};
    cam.width = cam.height = 200;
    const auto r = render(square(0.5), UVTextureMap(4, 4), cam, Light::ambient_only());
    int lo = cam.width, hi = -1;
    for (int x = 0; x < cam.width; ++x)
      if (r.image.at(x, cam.height / 2).r < 0.5) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    const double half_px = 0.5 / (d * std::tan(10.0 * std::numbers::pi / 180.0)) * (cam.height / 2.0);
    INFO("distance " << d);
    CHECK(std::abs(lo - (cam.width / 2.0 - half_px)) <= 1.0);
    CHECK(std::abs(hi + 1 - (cam.width / 2.0 + half_px)) <= 1.0);
  }
}

TEST_CASE("triangle order does not change the image") {
  // Overlapping triangles at distinct depths.
  Rng rng(4);
  HeadMesh soup;
  soup.uvs = {{0.1, 0.1}, {0.9, 0.2}, {0.5, 0.9}};
  for (int t = 0; t < 40; ++t) {
    const double z = rng.uniform(-1.0, 1.0);
    for (int k = 0; k < 3; ++k) soup.vertices.push_back({rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), z});
    soup.triangles.push_back(Triangle{Corner{3 * t, 0}, Corner{3 * t + 1, 1}, Corner{3 * t + 2, 2}});
  }
  const UVTextureMap tex = testing::random_texture(16, 16, 5);
  RenderCamera cam;
  cam.width = cam.height = 128;
  const auto base = render(soup, tex, cam);
  HeadMesh shuffled = soup;
  for (std::size_t i = shuffled.triangles.size(); i > 1; --i) std::swap(shuffled.triangles[i - 1], shuffled.triangles[rng.below(i)]);
  CHECK(std::ranges::equal(render(shuffled, tex, cam).image.channels(), base.image.channels()));

  // The head mesh shares edges; tie pixels may differ, nothing else.
  const HeadMesh head = make_head_mesh();
  const RenderCamera hc = view_camera(head, View::front, 128);
  const UVTextureMap face = testing::random_texture(64, 64, 6);
  const auto h0 = render(head, face, hc);
  HeadMesh hs = head;
  for (std::size_t i = hs.triangles.size(); i > 1; --i) std::swap(hs.triangles[i - 1], hs.triangles[rng.below(i)]);
  const auto h1 = render(hs, face, hc);
  int differing = 0;
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) differing += !(h0.image.at(x, y) == h1.image.at(x, y));
  CHECK(differing <= 128 * 128 / 1000);
}

TEST_CASE("head mesh views") {
  const HeadMesh head = make_head_mesh();
  CHECK_NOTHROW(head.validate());
  const Vec3 c = head.centroid();
  const auto px = project_point(view_camera(head, View::front, 256), c);
  REQUIRE(px);
  CHECK(std::abs((*px)[0] - 128.0) <= 1.0);
  CHECK(std::abs((*px)[1] - 128.0) <= 1.0);

  // Left/right symmetric texture.
  UVTextureMap tex = testing::random_texture(64, 64, 7);
  for (int y = 0; y < 64; ++y)
    for (int x = 32; x < 64; ++x) tex.set(x, y, tex.at(63 - x, y));
  const auto views = render_views(head, tex, 96);
  UVTextureMap mirrored(96, 96);
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x) mirrored.set(x, y, views[2].image.at(95 - x, y));
  CHECK(max_diff(views[1].image, mirrored) <= 1.0 / 255.0);
  CHECK(max_diff(views[0].image, views[1].image) > 0.0);
  CHECK(max_diff(views[0].image, views[2].image) > 0.0);
  for (double v : views[0].image.channels()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(std::ranges::equal(render_views(head, tex, 96)[0].image.channels(), views[0].image.channels()));
  CHECK(parse_view("left") == View::left);
  CHECK(!parse_view("top"));
  CHECK(view_yaw_degrees(View::right) == 30.0);
}

TEST_CASE("shipped head asset matches the generator") {
  const HeadMesh shipped = load_obj(SEMUV_ASSET_DIR "/head.obj");
  const HeadMesh made = make_head_mesh();
  CHECK(shipped.triangles == made.triangles);
  CHECK(shipped.vertices.size() == made.vertices.size());
}
