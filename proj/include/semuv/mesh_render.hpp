#pragma once

#include "semuv/texture.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace semuv::render {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

double dot(Vec3 a, Vec3 b);
Vec3 cross(Vec3 a, Vec3 b);
double length(Vec3 a);
Vec3 normalize(Vec3 a);

struct Corner {
  int vertex = 0;
  int uv = 0;
  friend bool operator==(const Corner&, const Corner&) = default;
};

using Triangle = std::array<Corner, 3>;

// UVs follow the OBJ convention (v points up); texture row = (1 - v) * H.
struct HeadMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<double, 2>> uvs;
  std::vector<Triangle> triangles;

  void validate() const;
  Vec3 centroid() const;
  double bounding_radius(Vec3 center) const;
};

class MeshError : public std::runtime_error {
 public:
  enum class Kind { io, malformed, missing_uv, index_out_of_range, degenerate };
  MeshError(Kind kind, const std::string& what, int line = 0)
      : std::runtime_error(what), kind_(kind), line_(line) {}
  Kind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  Kind kind_;
  int line_;
};

HeadMesh parse_obj(std::string_view text, const std::string& source = "<obj>");
HeadMesh load_obj(const std::filesystem::path& path);
std::string format_obj(const HeadMesh& mesh);
void save_obj(const HeadMesh& mesh, const std::filesystem::path& path);

// Low-poly closed head, mirror-symmetric in x, facing +z, with UVs laid out
// to match the synthetic face corpus.
HeadMesh make_head_mesh(int columns = 64, int rows = 40);

struct RenderCamera {
  double fov_degrees = 20.0;  // vertical
  Vec3 eye{0.0, 0.0, 5.0};
  Vec3 target{0.0, 0.0, 0.0};
  Vec3 up{0.0, 1.0, 0.0};
  int width = 256;
  int height = 256;
  double near_plane = 0.01;
  double far_plane = 1000.0;

  void validate() const;  // throws MeshError(degenerate)
};

// Direction points towards the light.
struct Light {
  Vec3 direction{0.0, 0.3, 1.0};
  double diffuse = 0.8;
  double ambient = 0.2;

  static Light ambient_only() { return {{0.0, 0.0, 1.0}, 0.0, 1.0}; }
};

// Continuous pixel coordinates (x right, y down; pixel centres at +0.5) of a
// world point, or nullopt when it lies behind the near plane.
std::optional<std::array<double, 2>> project_point(const RenderCamera& camera, Vec3 p);

struct RenderedImage {
  UVTextureMap image;
  Rgb background;
};

RenderedImage render(const HeadMesh& mesh, const UVTextureMap& texture, const RenderCamera& camera,
                     const Light& light = {}, Rgb background = {1.0, 1.0, 1.0});

enum class View { front, left, right };
std::optional<View> parse_view(std::string_view name);
std::string to_string(View v);
double view_yaw_degrees(View v);

// Orbit camera at the view's yaw around the centroid, far enough that the
// bounding sphere spans 80% of the frame height.
RenderCamera view_camera(const HeadMesh& mesh, View view, int size = 256, double fov_degrees = 20.0);

std::array<RenderedImage, 3> render_views(const HeadMesh& mesh, const UVTextureMap& texture, int size = 256,
                                          const Light& light = {}, double fov_degrees = 20.0);

}  // namespace semuv::render
