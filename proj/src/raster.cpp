#include "l2h/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>

namespace l2h {

bool Raster::all_finite() const {
  for (float v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Raster::all_nonnegative() const {
  for (float v : values)
    if (v < 0.0f) return false;
  return true;
}

double raster_sum(const Raster& r) {
  double s = 0.0;
  for (float v : r.values) s += v;
  return s;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_u32le(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  std::fwrite(b, 1, 4, f);
}

std::uint32_t read_u32le(std::FILE* f) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) fail(ErrorCode::io_error, "truncated density file header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

Raster read_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail(ErrorCode::missing_file, "cannot open image: " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, f.get()) != 8 || png_sig_cmp(header, 0, 8))
    fail(ErrorCode::io_error, "not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::io_error, "PNG decode failed: " + path);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  // Normalize every input to 8-bit gray or RGB.
  png_set_strip_16(png);
  png_set_packing(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int c = static_cast<int>(png_get_channels(png, info));
  if (c != 1 && c != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::io_error, "unsupported channel count in " + path);
  }

  std::vector<png_byte> rowbuf(static_cast<std::size_t>(w) * c);
  Raster out(h, w, c);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, rowbuf.data(), nullptr);
    float* dst = out.values.data() + static_cast<std::size_t>(y) * w * c;
    for (int i = 0; i < w * c; ++i) dst[i] = static_cast<float>(rowbuf[i]) / 255.0f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const std::string& path, const Raster& img) {
  if (img.channels != 1 && img.channels != 3)
    fail(ErrorCode::io_error, "PNG output requires 1 or 3 channels");
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(ErrorCode::io_error, "cannot write image: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::io_error, "PNG encode failed: " + path);
  }
  png_init_io(png, f.get());
  const int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, img.width, img.height, 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> rowbuf(static_cast<std::size_t>(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    const float* src = img.values.data() + static_cast<std::size_t>(y) * img.width * img.channels;
    for (int i = 0; i < img.width * img.channels; ++i) {
      const float v = std::clamp(src[i], 0.0f, 1.0f);
      rowbuf[i] = static_cast<png_byte>(std::lround(v * 255.0f));
    }
    png_write_row(png, rowbuf.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Raster read_density_file(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail(ErrorCode::missing_file, "cannot open density file: " + path);
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "L2HD", 4) != 0)
    fail(ErrorCode::io_error, "bad density file magic: " + path);
  const std::uint32_t h = read_u32le(f.get());
  const std::uint32_t w = read_u32le(f.get());
  read_u32le(f.get());  // reserved
  Raster out(static_cast<int>(h), static_cast<int>(w), 1);
  // f32 payload is stored little-endian; this code targets little-endian hosts.
  if (std::fread(out.values.data(), sizeof(float), out.numel(), f.get()) != out.numel())
    fail(ErrorCode::io_error, "truncated density payload: " + path);
  if (!out.all_finite()) fail(ErrorCode::io_error, "non-finite density values: " + path);
  return out;
}

void write_density_file(const std::string& path, const Raster& density) {
  if (density.channels != 1)
    fail(ErrorCode::io_error, "density files are single-channel");
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(ErrorCode::io_error, "cannot write density file: " + path);
  std::fwrite("L2HD", 1, 4, f.get());
  write_u32le(f.get(), static_cast<std::uint32_t>(density.height));
  write_u32le(f.get(), static_cast<std::uint32_t>(density.width));
  write_u32le(f.get(), 0);
  std::fwrite(density.values.data(), sizeof(float), density.numel(), f.get());
}

Raster pad_to_multiple(const Raster& r, int multiple) {
  const int ph = (r.height + multiple - 1) / multiple * multiple;
  const int pw = (r.width + multiple - 1) / multiple * multiple;
  if (ph == r.height && pw == r.width) return r;
  Raster out(ph, pw, r.channels);
  for (int y = 0; y < r.height; ++y) {
    const float* src = r.values.data() + static_cast<std::size_t>(y) * r.width * r.channels;
    float* dst = out.values.data() + static_cast<std::size_t>(y) * pw * r.channels;
    std::copy(src, src + static_cast<std::size_t>(r.width) * r.channels, dst);
  }
  return out;
}

}  // namespace l2h
