#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace semuv {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// H x W albedo image, row-major, interleaved RGB channels in [0, 1].
class UVTextureMap {
 public:
  UVTextureMap() = default;
  UVTextureMap(int width, int height, Rgb fill = {});

  // Takes ownership of interleaved channel data; throws if the size does not
  // match or any value lies outside [0, 1].
  static UVTextureMap from_channels(int width, int height, std::vector<double> channels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return width_ == 0; }

  Rgb at(int x, int y) const {
    const double* p = &data_[index(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    double* p = &data_[index(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
  double channel(int x, int y, int c) const { return data_[index(x, y) + c]; }
  double& channel(int x, int y, int c) { return data_[index(x, y) + c]; }

  std::span<const double> channels() const { return data_; }
  std::span<double> channels() { return data_; }

  // Mean of the three channels at a pixel.
  double luminance(int x, int y) const {
    const double* p = &data_[index(x, y)];
    return (p[0] + p[1] + p[2]) / 3.0;
  }

  // Clamp every channel into [0, 1].
  void clamp();
  // Throws std::domain_error if a channel is outside [0, 1] or non-finite.
  void validate() const;

  friend bool operator==(const UVTextureMap&, const UVTextureMap&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

enum class ImageFormat { png, ppm };

class TextureError : public std::runtime_error {
 public:
  enum class Kind { missing_file, malformed, unsupported_bit_depth, unwritable };

  TextureError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// 8-bit quantization used by every writer: round(v * 255), half away from zero,
// clamped to [0, 255].
std::uint8_t quantize_channel(double v);

// Loads PNG or binary PPM (P6), detected from the file signature.
UVTextureMap load_texture(const std::filesystem::path& path);
UVTextureMap decode_png(std::span<const std::uint8_t> bytes);
UVTextureMap decode_ppm(std::span<const std::uint8_t> bytes);

void save_texture(const UVTextureMap& map, const std::filesystem::path& path, ImageFormat format);
std::vector<std::uint8_t> encode_png(const UVTextureMap& map);
std::vector<std::uint8_t> encode_ppm(const UVTextureMap& map);

// Interleaved 8-bit RGB bytes after quantization.
std::vector<std::uint8_t> quantized_bytes(const UVTextureMap& map);

// Center-aligned bilinear resampling with edge clamp: destination pixel i
// samples source coordinate (i + 0.5) * src / dst - 0.5.
UVTextureMap resize_bilinear(const UVTextureMap& map, int new_width, int new_height);

// One axis of the bilinear resampling as explicit taps, shared by the
// forward resize and its adjoint.
struct ResampleTap {
  int lo = 0;
  int hi = 0;
  double weight_hi = 0.0;  // weight of `hi`; `lo` gets 1 - weight_hi
};
std::vector<ResampleTap> resample_taps(int src, int dst);

// Resample a planar [channels, height, width] buffer (and its adjoint).
void resize_planar(std::span<const double> src, int channels, int src_w, int src_h,
                   std::span<double> dst, int dst_w, int dst_h);
void resize_planar_adjoint(std::span<const double> dst_grad, int channels, int src_w, int src_h,
                           std::span<double> src_grad, int dst_w, int dst_h);

// Side-by-side composite (same heights required).
UVTextureMap hconcat(std::span<const UVTextureMap> images);

// Stable content hash of the quantized image (hex).
std::string content_hash(const UVTextureMap& map);

}  // namespace semuv
