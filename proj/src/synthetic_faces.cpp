#include "semuv/synthetic_faces.hpp"

#include "semuv/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace semuv::faces {

std::string to_string(Attribute a) {
  switch (a) {
    case Attribute::age: return "age";
    case Attribute::facial_hair: return "facial_hair";
    case Attribute::gender: return "gender";
  }
  return "unknown";
}

std::optional<Attribute> parse_attribute(std::string_view name) {
  if (name == "age") return Attribute::age;
  if (name == "facial_hair" || name == "facial-hair") return Attribute::facial_hair;
  if (name == "gender") return Attribute::gender;
  return std::nullopt;
}

double get(const FaceAttributes& attrs, Attribute a) {
  switch (a) {
    case Attribute::age: return attrs.age;
    case Attribute::facial_hair: return attrs.facial_hair;
    case Attribute::gender: return attrs.gender;
  }
  return 0.0;
}

bool supported_resolution(int resolution) {
  return resolution == 32 || resolution == 64 || resolution == 128 || resolution == 256;
}

namespace {

struct PixelRect {
  int x0, y0, x1, y1;  // half-open
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  std::size_t area() const { return static_cast<std::size_t>(width()) * height(); }
};

PixelRect to_pixels(const layout::CellRect& r, int w, int h) {
  auto px = [](double cells, int side) { return static_cast<int>(std::lround(cells * side / 8.0)); };
  return {px(r.u0, w), px(r.v0, h), px(r.u1, w), px(r.v1, h)};
}

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// Exact area of pixel (x, y) covered by an axis-aligned rectangle in pixels.
double rect_coverage(int x, int y, double x0, double y0, double x1, double y1) {
  return overlap(x, x + 1.0, x0, x1) * overlap(y, y + 1.0, y0, y1);
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Feathered ellipse coverage; `feather` is the edge width in pixels.
double ellipse_coverage(double px, double py, double cx, double cy, double rx, double ry, double feather) {
  const double dx = (px - cx) / rx;
  const double dy = (py - cy) / ry;
  const double dist = (std::sqrt(dx * dx + dy * dy) - 1.0) * std::min(rx, ry);
  return std::clamp(0.5 - dist / feather, 0.0, 1.0);
}

Rgb lerp(Rgb a, Rgb b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

Rgb scale(Rgb c, double s) { return {c.r * s, c.g * s, c.b * s}; }
Rgb offset(Rgb c, double d) { return {c.r + d, c.g + d, c.b + d}; }

// Wrinkle darkening profile for pixel row y at age 1 (fixed phase).
double wrinkle_profile(int y, int height) {
  const double period_px = calibration::wrinkle_period * height;
  return 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (y + 0.5) / period_px);
}

// Forehead band grown by one pixel so the Laplacian inside the band only
// sees wrinkle rows.
PixelRect wrinkle_extent(int w, int h) {
  PixelRect r = to_pixels(layout::forehead_band, w, h);
  return {r.x0 - 1, r.y0 - 1, r.x1 + 1, r.y1 + 1};
}

double laplacian_energy(const std::vector<double>& lum, int w, const PixelRect& band) {
  double sum = 0.0;
  for (int y = band.y0; y < band.y1; ++y) {
    for (int x = band.x0; x < band.x1; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double l = 4.0 * lum[i] - lum[i - 1] - lum[i + 1] - lum[i - w] - lum[i + w];
      sum += l * l;
    }
  }
  return sum / static_cast<double>(band.area());
}

// Row-zero-mean, tile-periodic noise of side `tile`. When `target_laplacian_rms`
// is positive the tile is scaled so its periodic Laplacian has exactly that RMS.
std::vector<double> noise_tile(Rng& rng, int tile, double target_laplacian_rms, double amplitude) {
  std::vector<double> t(static_cast<std::size_t>(tile) * tile);
  for (double& v : t) v = rng.uniform(-1.0, 1.0);
  // Zero mean in every row: region means are exact and the Laplacian of the
  // noise is uncorrelated with any row-constant pattern such as wrinkles.
  for (int y = 0; y < tile; ++y) {
    double mean = 0.0;
    for (int x = 0; x < tile; ++x) mean += t[static_cast<std::size_t>(y) * tile + x];
    mean /= tile;
    for (int x = 0; x < tile; ++x) t[static_cast<std::size_t>(y) * tile + x] -= mean;
  }
  double scale_by = amplitude;
  if (target_laplacian_rms > 0.0) {
    double energy = 0.0;
    for (int y = 0; y < tile; ++y) {
      for (int x = 0; x < tile; ++x) {
        auto at = [&](int xx, int yy) {
          return t[static_cast<std::size_t>((yy + tile) % tile) * tile + (xx + tile) % tile];
        };
        const double l = 4.0 * at(x, y) - at(x - 1, y) - at(x + 1, y) - at(x, y - 1) - at(x, y + 1);
        energy += l * l;
      }
    }
    const double rms = std::sqrt(energy / static_cast<double>(t.size()));
    scale_by = target_laplacian_rms / rms;
  }
  for (double& v : t) v *= scale_by;
  return t;
}

void check_attributes(const FaceAttributes& a) {
  for (double v : {a.age, a.facial_hair, a.gender}) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("face attributes must lie in [0, 1]");
  }
}

}  // namespace

namespace calibration {

double wrinkle_energy(int resolution) {
  static std::mutex mutex;
  static std::map<int, double> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(resolution); it != cache.end()) return it->second;
  const int n = resolution;
  const PixelRect band = to_pixels(layout::forehead_band, n, n);
  const PixelRect ext = wrinkle_extent(n, n);
  std::vector<double> lum(static_cast<std::size_t>(n) * n, 0.0);
  for (int y = ext.y0; y < ext.y1; ++y) {
    for (int x = ext.x0; x < ext.x1; ++x) {
      lum[static_cast<std::size_t>(y) * n + x] = -wrinkle_amplitude * wrinkle_profile(y, n);
    }
  }
  const double e = laplacian_energy(lum, n, band);
  cache.emplace(resolution, e);
  return e;
}

double noise_floor_rms(int resolution) {
  return noise_floor_ratio * std::sqrt(wrinkle_energy(resolution));
}

}  // namespace calibration

UVTextureMap generate_texture(const FaceAttributes& attrs, std::uint64_t seed, int resolution) {
  if (!supported_resolution(resolution)) {
    throw std::invalid_argument("unsupported resolution " + std::to_string(resolution) +
                                " (expected 32, 64, 128 or 256)");
  }
  check_attributes(attrs);
  const int n = resolution;
  const double cell = n / 8.0;
  const int tile = n / 8;
  Rng rng(splitmix64(seed ^ 0x5eed0f0ce5ULL));

  const Rgb skin = lerp({0.88, 0.72, 0.62}, {0.47, 0.32, 0.24}, rng.uniform());
  const Rgb iris = lerp({0.30, 0.19, 0.10}, {0.33, 0.45, 0.55}, rng.uniform());
  const Rgb lips = lerp({0.72, 0.40, 0.40}, {0.55, 0.27, 0.27}, rng.uniform());
  const Rgb hair = lerp({0.10, 0.07, 0.05}, {0.45, 0.32, 0.18}, rng.uniform());
  const std::vector<double> skin_noise = noise_tile(rng, tile, calibration::noise_floor_rms(n), 0.0);
  const std::vector<double> stubble = noise_tile(rng, tile, 0.0, 1.0);

  const double brow_thickness =
      (calibration::brow_thickness_base + calibration::brow_thickness_gain * attrs.gender) * cell;
  const double brow_y0 = layout::brow_center_v * cell - brow_thickness / 2.0;
  const double brow_y1 = brow_y0 + brow_thickness;
  const double eye_feather = 1.4 - 0.9 * attrs.gender;
  const PixelRect wrinkles = wrinkle_extent(n, n);
  const auto& be = layout::beard_extent;
  constexpr double beard_ramp = 0.25;

  UVTextureMap out(n, n);
  for (int y = 0; y < n; ++y) {
    const double cy = (y + 0.5) / cell;  // pixel center in cells
    for (int x = 0; x < n; ++x) {
      const double cx = (x + 0.5) / cell;
      Rgb c = offset(skin, skin_noise[static_cast<std::size_t>(y % tile) * tile + x % tile]);

      // Hairline along the top edge.
      c = lerp(c, hair, 1.0 - smoothstep(0.40, 0.60, cy));

      // Nose side shading.
      const double nose_v = smoothstep(3.6, 3.9, cy) * (1.0 - smoothstep(4.9, 5.15, cy));
      const double nose_u = std::exp(-std::pow((cx - 3.72) / 0.1, 2)) + std::exp(-std::pow((cx - 4.28) / 0.1, 2));
      c = scale(c, 1.0 - 0.12 * nose_v * nose_u);

      // Eyes: sclera, iris, pupil.
      for (double ex : {2.8, 5.2}) {
        const double px = x + 0.5, py = y + 0.5;
        const double sclera = ellipse_coverage(px, py, ex * cell, 3.5 * cell, 0.5 * cell, 0.22 * cell, eye_feather);
        const double iris_c = ellipse_coverage(px, py, ex * cell, 3.5 * cell, 0.17 * cell, 0.17 * cell, eye_feather);
        const double pupil = ellipse_coverage(px, py, ex * cell, 3.5 * cell, 0.07 * cell, 0.07 * cell, eye_feather);
        c = lerp(c, {0.92, 0.91, 0.88}, sclera);
        c = lerp(c, iris, iris_c * sclera);
        c = lerp(c, {0.05, 0.04, 0.04}, pupil * sclera);
      }

      // Mouth.
      const double mouth = ellipse_coverage(x + 0.5, y + 0.5, 4.0 * cell, 5.55 * cell, 0.75 * cell, 0.22 * cell, 1.0);
      c = lerp(c, lips, mouth);

      // Brows: multiplicative darkening by exact rectangle coverage.
      for (const auto& brow : {layout::left_brow, layout::right_brow}) {
        const double cov = rect_coverage(x, y, brow.u0 * cell, brow_y0, brow.u1 * cell, brow_y1);
        c = scale(c, 1.0 - calibration::brow_darkening * cov);
      }

      // Beard region: flat mask inside, smooth ramp at the border.
      if (attrs.facial_hair > 0.0) {
        const double mu = smoothstep(be.u0, be.u0 + beard_ramp, cx) * (1.0 - smoothstep(be.u1 - beard_ramp, be.u1, cx));
        const double mv = smoothstep(be.v0, be.v0 + beard_ramp, cy) * (1.0 - smoothstep(be.v1 - beard_ramp, be.v1, cy));
        const double s = stubble[static_cast<std::size_t>(y % tile) * tile + x % tile];
        const double dark =
            calibration::beard_darkening * attrs.facial_hair * mu * mv * (1.0 + calibration::stubble_contrast * s);
        c = scale(c, 1.0 - dark);
      }

      // Forehead wrinkles: additive darkening, horizontal lines.
      if (attrs.age > 0.0 && x >= wrinkles.x0 && x < wrinkles.x1 && y >= wrinkles.y0 && y < wrinkles.y1) {
        c = offset(c, -calibration::wrinkle_amplitude * attrs.age * wrinkle_profile(y, n));
      }
      out.set(x, y, c);
    }
  }
  out.clamp();
  return out;
}

LabeledTexture sample_element(std::uint64_t seed, std::size_t index, int resolution) {
  const std::uint64_t s = derive_seed(seed, index);
  Rng rng(s);
  FaceAttributes attrs;
  attrs.age = rng.uniform();
  attrs.facial_hair = rng.uniform();
  attrs.gender = rng.uniform();
  return {generate_texture(attrs, s, resolution), attrs, s};
}

std::vector<LabeledTexture> sample_dataset(std::size_t n, std::uint64_t seed, int resolution) {
  if (n < 1) throw std::invalid_argument("dataset size must be >= 1");
  std::vector<LabeledTexture> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_element(seed, i, resolution));
  return out;
}

FaceAttributes measure_attributes(const UVTextureMap& texture) {
  const int w = texture.width();
  const int h = texture.height();
  if (w < 32 || h < 32) throw std::invalid_argument("texture too small for attribute measurement (< 32)");

  std::vector<double> lum(texture.pixel_count());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) lum[static_cast<std::size_t>(y) * w + x] = texture.luminance(x, y);
  }
  auto region_mean = [&](const PixelRect& r) {
    double s = 0.0;
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) s += lum[static_cast<std::size_t>(y) * w + x];
    }
    return s / static_cast<double>(r.area());
  };

  const PixelRect lc = to_pixels(layout::left_cheek, w, h);
  const PixelRect rc = to_pixels(layout::right_cheek, w, h);
  const double skin_ref = 0.5 * (region_mean(lc) + region_mean(rc));

  FaceAttributes out;
  if (skin_ref <= 1e-9) return out;

  const double beard = region_mean(to_pixels(layout::beard_core, w, h));
  out.facial_hair = std::clamp((1.0 - beard / skin_ref) / calibration::beard_darkening, 0.0, 1.0);

  // Brow thickness: darkening integrated down each window column.
  double thickness_px = 0.0;
  for (const auto& cells : {layout::left_brow_window, layout::right_brow_window}) {
    PixelRect r = to_pixels(cells, w, h);
    // The top row borders the wrinkle margin; noise rows are zero-mean, so
    // dropping whole rows keeps the sum exact.
    r.y0 += 1;
    double s = 0.0;
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) s += 1.0 - lum[static_cast<std::size_t>(y) * w + x] / skin_ref;
    }
    thickness_px += 0.5 * s / (calibration::brow_darkening * r.width());
  }
  const double thickness_cells = thickness_px / (h / 8.0);
  out.gender = std::clamp(
      (thickness_cells - calibration::brow_thickness_base) / calibration::brow_thickness_gain, 0.0, 1.0);

  const double energy = laplacian_energy(lum, w, to_pixels(layout::forehead_band, w, h));
  const double floor_rms = calibration::noise_floor_rms(h);
  const double excess = std::max(0.0, energy - floor_rms * floor_rms);
  out.age = std::clamp(std::sqrt(excess / calibration::wrinkle_energy(h)), 0.0, 1.0);
  return out;
}

void export_corpus(const std::vector<LabeledTexture>& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.jsonl", std::ios::trunc);
  if (!manifest) throw TextureError(TextureError::Kind::unwritable, "cannot write manifest in " + dir.string());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "tex_%06zu.png", i);
    save_texture(corpus[i].texture, dir / name, ImageFormat::png);
    nlohmann::ordered_json line;
    line["path"] = name;
    line["seed"] = corpus[i].seed;
    line["age"] = corpus[i].attributes.age;
    line["facial_hair"] = corpus[i].attributes.facial_hair;
    line["gender"] = corpus[i].attributes.gender;
    manifest << line.dump() << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_or_dir) {
  const std::filesystem::path manifest = std::filesystem::is_directory(manifest_or_dir)
                                             ? manifest_or_dir / "manifest.jsonl"
                                             : manifest_or_dir;
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open manifest " + manifest.string());
  std::vector<ManifestEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.path = manifest.parent_path() / j.at("path").get<std::string>();
      e.seed = j.value("seed", std::uint64_t{0});
      e.attributes = {j.value("age", 0.0), j.value("facial_hair", 0.0), j.value("gender", 0.0)};
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw std::runtime_error(manifest.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<LabeledTexture> load_corpus(const std::filesystem::path& manifest_or_dir) {
  std::vector<LabeledTexture> out;
  for (const auto& e : read_manifest(manifest_or_dir)) {
    out.push_back({load_texture(e.path), e.attributes, e.seed});
  }
  return out;
}

}  // namespace semuv::faces
