#include "semuv/mesh_render.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace semuv::render {

double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 cross(Vec3 a, Vec3 b) { return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x}; }
double length(Vec3 a) { return std::sqrt(dot(a, a)); }
Vec3 normalize(Vec3 a) {
  const double len = length(a);
  return len > 0.0 ? (1.0 / len) * a : a;
}

void HeadMesh::validate() const {
  const int nv = static_cast<int>(vertices.size()), nt = static_cast<int>(uvs.size());
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    const Triangle& t = triangles[i];
    for (const Corner& c : t) {
      if (c.vertex < 0 || c.vertex >= nv || c.uv < 0 || c.uv >= nt) {
        throw MeshError(MeshError::Kind::index_out_of_range, "triangle " + std::to_string(i) + " index out of range");
      }
    }
    if (t[0].vertex == t[1].vertex || t[1].vertex == t[2].vertex || t[0].vertex == t[2].vertex) {
      throw MeshError(MeshError::Kind::degenerate, "triangle " + std::to_string(i) + " repeats a vertex");
    }
  }
}

Vec3 HeadMesh::centroid() const {
  Vec3 c;
  for (const Vec3& v : vertices) c = c + v;
  return vertices.empty() ? c : (1.0 / static_cast<double>(vertices.size())) * c;
}

double HeadMesh::bounding_radius(Vec3 center) const {
  double r = 0.0;
  for (const Vec3& v : vertices) r = std::max(r, length(v - center));
  return r;
}

namespace {

[[noreturn]] void malformed(const std::string& source, int line, const std::string& why) {
  throw MeshError(MeshError::Kind::malformed, source + ":" + std::to_string(line) + ": " + why, line);
}

double parse_number(std::string_view tok, const std::string& source, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    malformed(source, line, "bad number '" + std::string(tok) + "'");
  }
  return v;
}

// OBJ indices are 1-based; negative values count back from the latest element.
int resolve_index(std::string_view tok, int count, const std::string& source, int line) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || v == 0) {
    malformed(source, line, "bad index '" + std::string(tok) + "'");
  }
  const long idx = v > 0 ? v - 1 : count + v;
  if (idx < 0 || idx >= count) {
    throw MeshError(MeshError::Kind::index_out_of_range,
                    source + ":" + std::to_string(line) + ": index " + std::string(tok) + " out of range", line);
  }
  return static_cast<int>(idx);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

}  // namespace

HeadMesh parse_obj(std::string_view text, const std::string& source) {
  HeadMesh mesh;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (tok[0] == "v") {
      if (tok.size() < 4) malformed(source, line_no, "vertex needs three coordinates");
      mesh.vertices.push_back({parse_number(tok[1], source, line_no), parse_number(tok[2], source, line_no),
                               parse_number(tok[3], source, line_no)});
    } else if (tok[0] == "vt") {
      if (tok.size() < 3) malformed(source, line_no, "texture coordinate needs two values");
      mesh.uvs.push_back({parse_number(tok[1], source, line_no), parse_number(tok[2], source, line_no)});
    } else if (tok[0] == "f") {
      if (tok.size() < 4) malformed(source, line_no, "face needs at least three corners");
      std::vector<Corner> corners;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const std::string_view c = tok[k];
        const auto s1 = c.find('/');
        if (s1 == std::string_view::npos) {
          throw MeshError(MeshError::Kind::missing_uv,
                          source + ":" + std::to_string(line_no) + ": face corner without texture coordinate", line_no);
        }
        const auto s2 = c.find('/', s1 + 1);
        const std::string_view vt = c.substr(s1 + 1, s2 == std::string_view::npos ? std::string_view::npos : s2 - s1 - 1);
        if (vt.empty()) {
          throw MeshError(MeshError::Kind::missing_uv,
                          source + ":" + std::to_string(line_no) + ": face corner without texture coordinate", line_no);
        }
        corners.push_back({resolve_index(c.substr(0, s1), static_cast<int>(mesh.vertices.size()), source, line_no),
                           resolve_index(vt, static_cast<int>(mesh.uvs.size()), source, line_no)});
      }
      for (std::size_t k = 1; k + 1 < corners.size(); ++k) mesh.triangles.push_back({corners[0], corners[k], corners[k + 1]});
    }
    // vn, o, g, s, usemtl, mtllib and other records carry nothing we use.
    if (end == text.size()) break;
  }
  try {
    mesh.validate();
  } catch (const MeshError& e) {
    throw MeshError(e.kind(), source + ": " + e.what());
  }
  return mesh;
}

HeadMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MeshError(MeshError::Kind::io, "cannot open mesh " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_obj(buf.str(), path.string());
}

std::string format_obj(const HeadMesh& mesh) {
  std::ostringstream out;
  out.precision(9);
  for (const Vec3& v : mesh.vertices) out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
  for (const auto& t : mesh.uvs) out << "vt " << t[0] << ' ' << t[1] << '\n';
  for (const Triangle& t : mesh.triangles) {
    out << 'f';
    for (const Corner& c : t) out << ' ' << c.vertex + 1 << '/' << c.uv + 1;
    out << '\n';
  }
  return out.str();
}

void save_obj(const HeadMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw MeshError(MeshError::Kind::io, "cannot write " + path.string());
  out << "# low-poly head, +z forward, y up\n" << format_obj(mesh);
}

HeadMesh make_head_mesh(int columns, int rows) {
  if (columns < 4 || columns % 2 != 0 || rows < 3) throw std::invalid_argument("make_head_mesh: bad grid size");
  HeadMesh mesh;
  // Surface point for texture coordinates (s, t), t = 0 at the crown.
  auto surface = [](double s, double t) {
    // The central half of the texture (the face) wraps +-60 degrees; the rest
    // covers the sides and back.
    const double a = s - 0.5;
    const double pi = std::numbers::pi;
    const double phi = std::abs(a) <= 0.25 ? a * (pi / 3.0) / 0.25
                                           : std::copysign(pi / 3.0 + (std::abs(a) - 0.25) * (2.0 * pi / 3.0) / 0.25, a);
    const double theta = t * std::numbers::pi;
    const double st = std::sin(theta);
    Vec3 p{0.78 * st * std::sin(phi), 1.0 * std::cos(theta), 0.88 * st * std::cos(phi)};
    // Narrow the jaw and push the nose forward.
    const double jaw = 1.0 - 0.18 * std::max(0.0, std::cos(theta) * -1.0);
    p.x *= jaw;
    const double nose = 0.12 * std::exp(-std::pow(phi / 0.14, 2) - std::pow((t - 0.55) / 0.07, 2));
    p.z += nose;
    return p;
  };
  // Interior grid rows 1..rows-1 with a duplicated seam column; one vertex
  // per pole.
  const int cols = columns;
  auto grid_vertex = [&](int r, int c) { return 1 + (r - 1) * (cols + 1) + c; };
  mesh.vertices.push_back(surface(0.5, 0.0));
  for (int r = 1; r < rows; ++r) {
    for (int c = 0; c <= cols; ++c) {
      mesh.vertices.push_back(surface(static_cast<double>(c) / cols, static_cast<double>(r) / rows));
    }
  }
  const int bottom = static_cast<int>(mesh.vertices.size());
  mesh.vertices.push_back(surface(0.5, 1.0));
  // Vertices on the back seam coincide; reuse the c = 0 position for c = cols.
  auto vid = [&](int r, int c) { return grid_vertex(r, c == cols ? 0 : c); };

  for (int r = 0; r <= rows; ++r) {
    for (int c = 0; c <= cols; ++c) {
      mesh.uvs.push_back({static_cast<double>(c) / cols, 1.0 - static_cast<double>(r) / rows});
    }
  }
  auto uid = [&](int r, int c) { return r * (cols + 1) + c; };

  for (int c = 0; c < cols; ++c) {
    // Caps: a pole corner uses the UV at the middle of its column.
    mesh.triangles.push_back({Corner{0, uid(0, c)}, Corner{vid(1, c), uid(1, c)}, Corner{vid(1, c + 1), uid(1, c + 1)}});
    mesh.triangles.push_back(
        {Corner{vid(rows - 1, c), uid(rows - 1, c)}, Corner{bottom, uid(rows, c)}, Corner{vid(rows - 1, c + 1), uid(rows - 1, c + 1)}});
  }
  for (int r = 1; r + 1 < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Corner a{vid(r, c), uid(r, c)}, b{vid(r, c + 1), uid(r, c + 1)};
      const Corner d{vid(r + 1, c), uid(r + 1, c)}, e{vid(r + 1, c + 1), uid(r + 1, c + 1)};
      // Mirror the diagonal across the face midline so the mesh is symmetric.
      if (c < cols / 2) {
        mesh.triangles.push_back({a, d, e});
        mesh.triangles.push_back({a, e, b});
      } else {
        mesh.triangles.push_back({a, d, b});
        mesh.triangles.push_back({b, d, e});
      }
    }
  }
  mesh.validate();
  return mesh;
}

void RenderCamera::validate() const {
  if (!(fov_degrees > 0.0 && fov_degrees < 180.0)) throw MeshError(MeshError::Kind::degenerate, "fov must lie in (0, 180)");
  if (!(near_plane > 0.0 && near_plane < far_plane)) throw MeshError(MeshError::Kind::degenerate, "need 0 < near < far");
  if (width < 1 || height < 1) throw MeshError(MeshError::Kind::degenerate, "image size must be positive");
  const Vec3 f = target - eye;
  if (length(f) == 0.0) throw MeshError(MeshError::Kind::degenerate, "eye and target coincide");
  if (length(cross(normalize(f), normalize(up))) < 1e-9) {
    throw MeshError(MeshError::Kind::degenerate, "up vector is parallel to the view direction");
  }
}

namespace {

struct CameraBasis {
  Vec3 r, u, f;
  double tan_half, aspect;
};

CameraBasis basis(const RenderCamera& camera) {
  const Vec3 f = normalize(camera.target - camera.eye);
  const Vec3 r = normalize(cross(f, camera.up));
  return {r, cross(r, f), f, std::tan(camera.fov_degrees * std::numbers::pi / 360.0),
          static_cast<double>(camera.width) / camera.height};
}

}  // namespace

std::optional<std::array<double, 2>> project_point(const RenderCamera& camera, Vec3 p) {
  camera.validate();
  const CameraBasis b = basis(camera);
  const Vec3 d = p - camera.eye;
  const double z = dot(d, b.f);
  if (z < camera.near_plane) return std::nullopt;
  return std::array<double, 2>{(dot(d, b.r) / z / (b.tan_half * b.aspect) + 1.0) * 0.5 * camera.width,
                               (1.0 - dot(d, b.u) / z / b.tan_half) * 0.5 * camera.height};
}

namespace {

struct ClipVertex {
  Vec3 view;  // camera space: x right, y up, z forward
  double u, v;
};

// Bilinear sample with edge clamp; (u, v) in OBJ convention.
Rgb sample_bilinear(const UVTextureMap& tex, double u, double v) {
  const int w = tex.width(), h = tex.height();
  const double x = u * w - 0.5, y = (1.0 - v) * h - 0.5;
  const double fx = std::floor(x), fy = std::floor(y);
  const double ax = x - fx, ay = y - fy;
  const int x0 = std::clamp(static_cast<int>(fx), 0, w - 1), x1 = std::clamp(static_cast<int>(fx) + 1, 0, w - 1);
  const int y0 = std::clamp(static_cast<int>(fy), 0, h - 1), y1 = std::clamp(static_cast<int>(fy) + 1, 0, h - 1);
  Rgb out;
  double* dst[3] = {&out.r, &out.g, &out.b};
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - ax) * tex.channel(x0, y0, c) + ax * tex.channel(x1, y0, c);
    const double bot = (1.0 - ax) * tex.channel(x0, y1, c) + ax * tex.channel(x1, y1, c);
    *dst[c] = (1.0 - ay) * top + ay * bot;
  }
  return out;
}

// Sutherland-Hodgman against z >= near.
std::vector<ClipVertex> clip_near(const std::array<ClipVertex, 3>& tri, double near_z) {
  std::vector<ClipVertex> out;
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& a = tri[i];
    const ClipVertex& b = tri[(i + 1) % 3];
    const bool ina = a.view.z >= near_z, inb = b.view.z >= near_z;
    if (ina) out.push_back(a);
    if (ina != inb) {
      const double t = (near_z - a.view.z) / (b.view.z - a.view.z);
      out.push_back({a.view + t * (b.view - a.view), a.u + t * (b.u - a.u), a.v + t * (b.v - a.v)});
    }
  }
  return out;
}

}  // namespace

RenderedImage render(const HeadMesh& mesh, const UVTextureMap& texture, const RenderCamera& camera, const Light& light,
                     Rgb background) {
  camera.validate();
  mesh.validate();
  if (texture.empty()) throw std::invalid_argument("render: empty texture");
  const int W = camera.width, H = camera.height;
  RenderedImage out{UVTextureMap(W, H, background), background};

  const CameraBasis cb = basis(camera);
  const Vec3 f = cb.f, r = cb.r, u = cb.u;
  const double t = cb.tan_half, aspect = cb.aspect;
  const Vec3 l = normalize(light.direction);

  std::vector<double> zbuf(static_cast<std::size_t>(W) * H, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> owner(zbuf.size(), std::numeric_limits<std::size_t>::max());

  for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
    const Triangle& tri = mesh.triangles[ti];
    std::array<ClipVertex, 3> cv;
    std::array<Vec3, 3> world;
    for (int k = 0; k < 3; ++k) {
      world[k] = mesh.vertices[tri[k].vertex];
      const Vec3 d = world[k] - camera.eye;
      cv[k] = {{dot(d, r), dot(d, u), dot(d, f)}, mesh.uvs[tri[k].uv][0], mesh.uvs[tri[k].uv][1]};
    }
    // Two-sided: the geometric normal is flipped to face the viewer.
    Vec3 n = normalize(cross(world[1] - world[0], world[2] - world[0]));
    if (dot(n, camera.eye - world[0]) < 0.0) n = -1.0 * n;
    const double shade = light.diffuse * std::max(0.0, dot(n, l)) + light.ambient;

    const auto poly = clip_near(cv, camera.near_plane);
    if (poly.size() < 3) continue;
    struct Screen {
      double x, y, inv_z, u_over_z, v_over_z;
    };
    std::vector<Screen> s;
    for (const auto& p : poly) {
      const double inv_z = 1.0 / p.view.z;
      s.push_back({(p.view.x * inv_z / (t * aspect) + 1.0) * 0.5 * W, (1.0 - p.view.y * inv_z / t) * 0.5 * H, inv_z,
                   p.u * inv_z, p.v * inv_z});
    }
    for (std::size_t k = 1; k + 1 < s.size(); ++k) {
      const Screen& a = s[0];
      const Screen& b = s[k];
      const Screen& c = s[k + 1];
      const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
      if (area == 0.0) continue;
      const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}))));
      const int x1 = std::min(W - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}))));
      const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}))));
      const int y1 = std::min(H - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}))));
      for (int py = y0; py <= y1; ++py) {
        const double cy = py + 0.5;
        for (int px = x0; px <= x1; ++px) {
          const double cx = px + 0.5;
          const double w0 = ((b.x - cx) * (c.y - cy) - (b.y - cy) * (c.x - cx)) / area;
          const double w1 = ((c.x - cx) * (a.y - cy) - (c.y - cy) * (a.x - cx)) / area;
          const double w2 = 1.0 - w0 - w1;
          if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
          const double inv_z = w0 * a.inv_z + w1 * b.inv_z + w2 * c.inv_z;
          const double z = 1.0 / inv_z;
          if (z > camera.far_plane) continue;
          const std::size_t idx = static_cast<std::size_t>(py) * W + px;
          // Strict depth test; exact ties go to the lowest original index.
          if (!(z < zbuf[idx] || (z == zbuf[idx] && ti < owner[idx]))) continue;
          zbuf[idx] = z;
          owner[idx] = ti;
          const double tu = (w0 * a.u_over_z + w1 * b.u_over_z + w2 * c.u_over_z) / inv_z;
          const double tv = (w0 * a.v_over_z + w1 * b.v_over_z + w2 * c.v_over_z) / inv_z;
          const Rgb albedo = sample_bilinear(texture, tu, tv);
          out.image.set(px, py,
                        {std::clamp(albedo.r * shade, 0.0, 1.0), std::clamp(albedo.g * shade, 0.0, 1.0),
                         std::clamp(albedo.b * shade, 0.0, 1.0)});
        }
      }
    }
  }
  return out;
}

std::optional<View> parse_view(std::string_view name) {
  if (name == "front") return View::front;
  if (name == "left") return View::left;
  if (name == "right") return View::right;
  return std::nullopt;
}

std::string to_string(View v) {
  switch (v) {
    case View::front: return "front";
    case View::left: return "left";
    case View::right: return "right";
  }
  return "front";
}

double view_yaw_degrees(View v) {
  switch (v) {
    case View::front: return 0.0;
    case View::right: return 30.0;
    case View::left: return -30.0;
  }
  return 0.0;
}

RenderCamera view_camera(const HeadMesh& mesh, View view, int size, double fov_degrees) {
  const Vec3 c = mesh.centroid();
  const double radius = mesh.bounding_radius(c);
  if (!(radius > 0.0)) throw MeshError(MeshError::Kind::degenerate, "mesh has zero extent");
  // The sphere's silhouette subtends half-angle a with tan a = 0.8 tan(fov/2).
  const double tan_a = 0.8 * std::tan(fov_degrees * std::numbers::pi / 360.0);
  const double distance = radius * std::sqrt(1.0 + 1.0 / (tan_a * tan_a));
  const double yaw = view_yaw_degrees(view) * std::numbers::pi / 180.0;
  RenderCamera cam;
  cam.fov_degrees = fov_degrees;
  cam.width = cam.height = size;
  cam.target = c;
  cam.eye = c + distance * Vec3{std::sin(yaw), 0.0, std::cos(yaw)};
  cam.near_plane = std::max(1e-3, 0.01 * (distance - radius));
  cam.far_plane = distance + 2.0 * radius;
  return cam;
}

std::array<RenderedImage, 3> render_views(const HeadMesh& mesh, const UVTextureMap& texture, int size,
                                          const Light& light, double fov_degrees) {
  return {render(mesh, texture, view_camera(mesh, View::front, size, fov_degrees), light),
          render(mesh, texture, view_camera(mesh, View::left, size, fov_degrees), light),
          render(mesh, texture, view_camera(mesh, View::right, size, fov_degrees), light)};
}

}  // namespace semuv::render
