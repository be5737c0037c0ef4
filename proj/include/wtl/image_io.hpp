#pragma once

// 8-bit raster I/O. PNG through libpng's simplified API, binary PGM/PPM as a
// fallback selected by file extension. Values are normalized to [0, 1] on load
// (divide by 255) and quantized with rounding on save.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wtl/errors.hpp"
#include "wtl/raster.hpp"

namespace wtl::io {

namespace detail {

inline bool has_ext(const std::filesystem::path& p, const char* ext) {
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e == ext;
}

inline std::uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

struct Bytes {
  int h = 0;
  int w = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;
};

inline Bytes read_png(const std::filesystem::path& path, int channels) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::io, "cannot open '" + path.string() + "': no such file");
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    fail(ErrorKind::format, "cannot decode PNG '" + path.string() + "': " + img.message);
  }
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Bytes out{static_cast<int>(img.height), static_cast<int>(img.width), channels, {}};
  out.data.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.data.data(), 0, nullptr)) {
    png_image_free(&img);
    fail(ErrorKind::format, "cannot decode PNG '" + path.string() + "': " + img.message);
  }
  return out;
}

inline void write_png(const std::filesystem::path& path, const Bytes& b) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(b.w);
  img.height = static_cast<png_uint_32>(b.h);
  img.format = b.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, b.data.data(), 0, nullptr)) {
    fail(ErrorKind::io, "cannot write '" + path.string() + "': " + img.message);
  }
}

inline Bytes read_pnm(const std::filesystem::path& path, int channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::string magic;
  in >> magic;
  const int file_channels = magic == "P5" ? 1 : magic == "P6" ? 3 : 0;
  if (file_channels == 0) fail(ErrorKind::format, "'" + path.string() + "' is not a binary PGM/PPM");
  auto next_int = [&] {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      in >> std::ws;
    }
    int v = -1;
    in >> v;
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (!in || w <= 0 || h <= 0 || maxval != 255) {
    fail(ErrorKind::format, "'" + path.string() + "': unsupported PNM header");
  }
  in.get();
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                                static_cast<std::size_t>(file_channels));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) fail(ErrorKind::format, "'" + path.string() + "': truncated pixel data");
  Bytes out{h, w, channels, {}};
  out.data.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(channels));
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * static_cast<std::size_t>(h); ++i) {
    for (int c = 0; c < channels; ++c) {
      std::uint8_t v;
      if (file_channels == channels) {
        v = raw[i * static_cast<std::size_t>(file_channels) + static_cast<std::size_t>(c)];
      } else if (file_channels == 1) {
        v = raw[i];
      } else {  // RGB to gray
        const auto* p = &raw[i * 3];
        v = static_cast<std::uint8_t>(std::lround(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]));
      }
      out.data[i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)] = v;
    }
  }
  return out;
}

inline void write_pnm(const std::filesystem::path& path, const Bytes& b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << (b.channels == 1 ? "P5" : "P6") << "\n" << b.w << " " << b.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(b.data.data()), static_cast<std::streamsize>(b.data.size()));
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
}

inline Bytes read_any(const std::filesystem::path& path, int channels) {
  if (has_ext(path, ".pgm") || has_ext(path, ".ppm") || has_ext(path, ".pnm")) return read_pnm(path, channels);
  return read_png(path, channels);
}

inline void write_any(const std::filesystem::path& path, const Bytes& b) {
  if (has_ext(path, ".pgm") || has_ext(path, ".ppm") || has_ext(path, ".pnm")) {
    write_pnm(path, b);
  } else {
    write_png(path, b);
  }
}

}  // namespace detail

inline Raster2D read_gray(const std::filesystem::path& path) {
  const auto b = detail::read_any(path, 1);
  Raster2D out(b.h, b.w);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = static_cast<float>(b.data[i]) / 255.0f;
  return out;
}

inline RgbImage read_rgb(const std::filesystem::path& path) {
  const auto b = detail::read_any(path, 3);
  auto out = RgbImage::zeros(b.h, b.w);
  for (std::size_t i = 0; i < out.channels[0].size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) out.channels[c].data()[i] = static_cast<float>(b.data[i * 3 + c]) / 255.0f;
  }
  return out;
}

/// Reads a grayscale raster and keeps pixels >= 0.5 as foreground.
inline BinaryMask read_mask(const std::filesystem::path& path) {
  const auto g = read_gray(path);
  BinaryMask m(g.height(), g.width());
  for (std::size_t i = 0; i < g.size(); ++i) m.data()[i] = g.data()[i] >= 0.5f ? 1 : 0;
  return m;
}

inline void write_gray(const std::filesystem::path& path, const Raster2D& g) {
  detail::Bytes b{g.height(), g.width(), 1, {}};
  b.data.reserve(g.size());
  for (float v : g.values()) b.data.push_back(detail::quantize(v));
  detail::write_any(path, b);
}

inline void write_rgb(const std::filesystem::path& path, const RgbImage& img) {
  detail::Bytes b{img.height(), img.width(), 3, {}};
  b.data.reserve(img.channels[0].size() * 3);
  for (std::size_t i = 0; i < img.channels[0].size(); ++i) {
    for (const auto& c : img.channels) b.data.push_back(detail::quantize(c.data()[i]));
  }
  detail::write_any(path, b);
}

inline void write_mask(const std::filesystem::path& path, const BinaryMask& m) {
  detail::Bytes b{m.height(), m.width(), 1, {}};
  b.data.reserve(m.size());
  for (auto v : m.values()) b.data.push_back(v ? 255 : 0);
  detail::write_any(path, b);
}

}  // namespace wtl::io
