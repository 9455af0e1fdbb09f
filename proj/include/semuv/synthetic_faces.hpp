#pragma once

#include "semuv/texture.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace semuv::faces {

// Continuous style parameters in [0, 1]. `gender` is a rendering-style knob
// (0 = thin brows / soft features, 1 = thick brows / sharp features).
struct FaceAttributes {
  double age = 0.0;
  double facial_hair = 0.0;
  double gender = 0.0;

  friend bool operator==(const FaceAttributes&, const FaceAttributes&) = default;
};

enum class Attribute { age, facial_hair, gender };

std::string to_string(Attribute a);
std::optional<Attribute> parse_attribute(std::string_view name);
double get(const FaceAttributes& attrs, Attribute a);

struct LabeledTexture {
  UVTextureMap texture;
  FaceAttributes attributes;
  std::uint64_t seed = 0;
};

// Shared UV layout, in cells of 1/8 of the texture side. Every measurement
// region is whole cells so tile-periodic skin noise averages out exactly.
namespace layout {
struct CellRect {
  double u0, v0, u1, v1;
};
inline constexpr CellRect forehead_band{2, 1, 6, 2};     // wrinkles
inline constexpr CellRect left_brow{2.0, 2.0, 3.6, 3.0};  // brow strip (vertical extent = window)
inline constexpr CellRect right_brow{4.4, 2.0, 6.0, 3.0};
inline constexpr CellRect left_brow_window{2, 2, 3, 3};
inline constexpr CellRect right_brow_window{5, 2, 6, 3};
inline constexpr CellRect beard_core{3, 6, 5, 7};
inline constexpr CellRect beard_extent{2.6, 5.85, 5.4, 7.5};
inline constexpr CellRect left_cheek{1, 5, 2, 6};
inline constexpr CellRect right_cheek{6, 5, 7, 6};
inline constexpr double brow_center_v = 2.5;
}  // namespace layout

// Affine attribute-to-appearance constants. The oracle inverts these.
namespace calibration {
inline constexpr double beard_darkening = 0.55;       // core luminance ratio = 1 - k * facial_hair
inline constexpr double stubble_contrast = 0.35;
inline constexpr double brow_darkening = 0.45;
inline constexpr double brow_thickness_base = 0.12;   // cells
inline constexpr double brow_thickness_gain = 0.40;   // cells per unit gender
inline constexpr double wrinkle_amplitude = 0.12;
inline constexpr double wrinkle_period = 0.1;         // fraction of texture height
inline constexpr double noise_floor_ratio = 0.3;      // floor RMS / wrinkle RMS at age 1

// Mean squared luminance Laplacian over the forehead band produced by the
// wrinkle layer alone at age 1. Frozen per supported resolution.
double wrinkle_energy(int resolution);
// RMS Laplacian of the skin-noise tile (identical for every seed).
double noise_floor_rms(int resolution);
}  // namespace calibration

bool supported_resolution(int resolution);

// Throws std::invalid_argument for unsupported resolutions or attributes
// outside [0, 1].
UVTextureMap generate_texture(const FaceAttributes& attrs, std::uint64_t seed, int resolution);

// Element i uses seed derive_seed(seed, i), so prefixes are stable in n.
LabeledTexture sample_element(std::uint64_t seed, std::size_t index, int resolution);
std::vector<LabeledTexture> sample_dataset(std::size_t n, std::uint64_t seed, int resolution);

// Independent oracle that reads the attributes back from pixels.
FaceAttributes measure_attributes(const UVTextureMap& texture);

// Corpus on disk: PNG files plus manifest.jsonl with
// {"path", "seed", "age", "facial_hair", "gender"} per line.
struct ManifestEntry {
  std::filesystem::path path;
  std::uint64_t seed = 0;
  FaceAttributes attributes;
};
void export_corpus(const std::vector<LabeledTexture>& corpus, const std::filesystem::path& dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_or_dir);
std::vector<LabeledTexture> load_corpus(const std::filesystem::path& manifest_or_dir);

}  // namespace semuv::faces
