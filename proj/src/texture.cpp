#include "semuv/texture.hpp"

#include "semuv/random.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

namespace semuv {

UVTextureMap::UVTextureMap(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("texture dimensions must be >= 1");
  }
  data_.resize(pixel_count() * 3);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    data_[3 * i] = fill.r;
    data_[3 * i + 1] = fill.g;
    data_[3 * i + 2] = fill.b;
  }
}

UVTextureMap UVTextureMap::from_channels(int width, int height, std::vector<double> channels) {
  UVTextureMap map(width, height);
  if (channels.size() != map.data_.size()) {
    throw std::invalid_argument("channel buffer size does not match texture dimensions");
  }
  map.data_ = std::move(channels);
  map.validate();
  return map;
}

void UVTextureMap::clamp() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

void UVTextureMap::validate() const {
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::domain_error("texture channel outside [0, 1]");
    }
  }
}

std::uint8_t quantize_channel(double v) {
  // std::round rounds half away from zero.
  const double q = std::round(v * 255.0);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

std::vector<std::uint8_t> quantized_bytes(const UVTextureMap& map) {
  std::vector<std::uint8_t> out(map.channels().size());
  std::transform(map.channels().begin(), map.channels().end(), out.begin(), quantize_channel);
  return out;
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw TextureError(TextureError::Kind::missing_file, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

UVTextureMap from_bytes(int width, int height, std::span<const std::uint8_t> bytes, double maxval) {
  std::vector<double> channels(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) channels[i] = bytes[i] / maxval;
  return UVTextureMap::from_channels(width, height, std::move(channels));
}

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

}  // namespace

UVTextureMap decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw TextureError(TextureError::Kind::malformed, std::string("png: ") + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw TextureError(TextureError::Kind::unsupported_bit_depth, "png: bit depth above 8 is not supported");
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    throw TextureError(TextureError::Kind::malformed, std::string("png: ") + image.message);
  }
  return from_bytes(static_cast<int>(image.width), static_cast<int>(image.height), buffer, 255.0);
}

UVTextureMap decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto malformed = [](const std::string& why) {
    return TextureError(TextureError::Kind::malformed, "ppm: " + why);
  };
  // Header tokens separated by whitespace, '#' starts a comment.
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string token;
    while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
      token.push_back(static_cast<char>(bytes[pos++]));
    }
    return token;
  };
  auto next_int = [&](const char* what) {
    const std::string token = next_token();
    try {
      std::size_t used = 0;
      const int value = std::stoi(token, &used);
      if (used != token.size() || value < 1) throw malformed(std::string("bad ") + what);
      return value;
    } catch (const std::logic_error&) {
      throw malformed(std::string("bad ") + what);
    }
  };

  if (next_token() != "P6") throw malformed("missing P6 magic");
  const int width = next_int("width");
  const int height = next_int("height");
  const int maxval = next_int("maxval");
  if (maxval > 65535) throw malformed("bad maxval");
  if (maxval > 255) {
    throw TextureError(TextureError::Kind::unsupported_bit_depth, "ppm: bit depth above 8 is not supported");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw malformed("truncated header");
  ++pos;
  const std::size_t expected = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() - pos < expected) throw malformed("truncated pixel data");
  return from_bytes(width, height, bytes.subspan(pos, expected), maxval);
}

UVTextureMap load_texture(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (is_png(bytes)) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  throw TextureError(TextureError::Kind::malformed, path.string() + ": not a PNG or P6 PPM file");
}

std::vector<std::uint8_t> encode_png(const UVTextureMap& map) {
  const std::vector<std::uint8_t> pixels = quantized_bytes(map);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(map.width());
  image.height = static_cast<png_uint_32>(map.height());
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> encode_ppm(const UVTextureMap& map) {
  const std::string header =
      "P6\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::vector<std::uint8_t> pixels = quantized_bytes(map);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

void save_texture(const UVTextureMap& map, const std::filesystem::path& path, ImageFormat format) {
  const std::vector<std::uint8_t> bytes = format == ImageFormat::png ? encode_png(map) : encode_ppm(map);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw TextureError(TextureError::Kind::unwritable, "cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw TextureError(TextureError::Kind::unwritable, "write failed for " + path.string());
  }
}

std::vector<ResampleTap> resample_taps(int src, int dst) {
  std::vector<ResampleTap> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    const double s = (i + 0.5) * scale - 0.5;
    const double f = std::floor(s);
    const int lo = static_cast<int>(f);
    taps[i].lo = std::clamp(lo, 0, src - 1);
    taps[i].hi = std::clamp(lo + 1, 0, src - 1);
    taps[i].weight_hi = s - f;
  }
  return taps;
}

void resize_planar(std::span<const double> src, int channels, int src_w, int src_h,
                   std::span<double> dst, int dst_w, int dst_h) {
  const auto tx = resample_taps(src_w, dst_w);
  const auto ty = resample_taps(src_h, dst_h);
  for (int c = 0; c < channels; ++c) {
    const double* s = src.data() + static_cast<std::size_t>(c) * src_w * src_h;
    double* d = dst.data() + static_cast<std::size_t>(c) * dst_w * dst_h;
    for (int y = 0; y < dst_h; ++y) {
      const double* row_lo = s + static_cast<std::size_t>(ty[y].lo) * src_w;
      const double* row_hi = s + static_cast<std::size_t>(ty[y].hi) * src_w;
      const double wy = ty[y].weight_hi;
      for (int x = 0; x < dst_w; ++x) {
        const double wx = tx[x].weight_hi;
        const double top = row_lo[tx[x].lo] * (1.0 - wx) + row_lo[tx[x].hi] * wx;
        const double bottom = row_hi[tx[x].lo] * (1.0 - wx) + row_hi[tx[x].hi] * wx;
        d[static_cast<std::size_t>(y) * dst_w + x] = top * (1.0 - wy) + bottom * wy;
      }
    }
  }
}

void resize_planar_adjoint(std::span<const double> dst_grad, int channels, int src_w, int src_h,
                           std::span<double> src_grad, int dst_w, int dst_h) {
  const auto tx = resample_taps(src_w, dst_w);
  const auto ty = resample_taps(src_h, dst_h);
  for (int c = 0; c < channels; ++c) {
    const double* g = dst_grad.data() + static_cast<std::size_t>(c) * dst_w * dst_h;
    double* s = src_grad.data() + static_cast<std::size_t>(c) * src_w * src_h;
    for (int y = 0; y < dst_h; ++y) {
      double* row_lo = s + static_cast<std::size_t>(ty[y].lo) * src_w;
      double* row_hi = s + static_cast<std::size_t>(ty[y].hi) * src_w;
      const double wy = ty[y].weight_hi;
      for (int x = 0; x < dst_w; ++x) {
        const double v = g[static_cast<std::size_t>(y) * dst_w + x];
        const double wx = tx[x].weight_hi;
        row_lo[tx[x].lo] += v * (1.0 - wy) * (1.0 - wx);
        row_lo[tx[x].hi] += v * (1.0 - wy) * wx;
        row_hi[tx[x].lo] += v * wy * (1.0 - wx);
        row_hi[tx[x].hi] += v * wy * wx;
      }
    }
  }
}

UVTextureMap resize_bilinear(const UVTextureMap& map, int new_width, int new_height) {
  if (new_width < 1 || new_height < 1) {
    throw std::invalid_argument("resize target must be >= 1 in each dimension");
  }
  if (new_width == map.width() && new_height == map.height()) return map;
  const int w = map.width();
  const int h = map.height();
  // Interleaved -> planar -> resample -> interleaved.
  std::vector<double> planar(map.channels().size());
  for (std::size_t i = 0; i < map.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) planar[c * map.pixel_count() + i] = map.channels()[3 * i + c];
  }
  const std::size_t out_pixels = static_cast<std::size_t>(new_width) * new_height;
  std::vector<double> resized(out_pixels * 3);
  resize_planar(planar, 3, w, h, resized, new_width, new_height);
  UVTextureMap out(new_width, new_height);
  auto dst = out.channels();
  for (std::size_t i = 0; i < out_pixels; ++i) {
    for (int c = 0; c < 3; ++c) dst[3 * i + c] = resized[c * out_pixels + i];
  }
  return out;
}

UVTextureMap hconcat(std::span<const UVTextureMap> images) {
  if (images.empty()) throw std::invalid_argument("hconcat of nothing");
  const int h = images.front().height();
  int total = 0;
  for (const auto& im : images) {
    if (im.height() != h) throw std::invalid_argument("hconcat requires equal heights");
    total += im.width();
  }
  UVTextureMap out(total, h);
  int x0 = 0;
  for (const auto& im : images) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < im.width(); ++x) out.set(x0 + x, y, im.at(x, y));
    }
    x0 += im.width();
  }
  return out;
}

std::string content_hash(const UVTextureMap& map) {
  const std::vector<std::uint8_t> bytes = quantized_bytes(map);
  std::uint64_t h = fnv1a(std::to_string(map.width()) + "x" + std::to_string(map.height()));
  h = fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), h);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace semuv
