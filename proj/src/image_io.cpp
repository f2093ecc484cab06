#include "ian/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

namespace ian {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw Error(std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

// Reads into [channels, H, W]; expands palettes and low bit depths, keeps 16-bit.
Tensor read_png(const std::filesystem::path& path, int want_channels) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  check(f != nullptr, "cannot open image '" + path.string() + "'");
  unsigned char sig[8];
  check(std::fread(sig, 1, 8, f.get()) == 8 && png_sig_cmp(sig, 0, 8) == 0, "'" + path.string() + "' is not a PNG");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  check(png != nullptr, "png: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto w = static_cast<std::int64_t>(png_get_image_width(png, info));
  const auto h = static_cast<std::int64_t>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_swap(png);  // host little-endian u16
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  const int bits = png_get_bit_depth(png, info);
  const int out_color = png_get_color_type(png, info);
  const bool is_gray = out_color == PNG_COLOR_TYPE_GRAY;
  const bool is_rgb = out_color == PNG_COLOR_TYPE_RGB;
  check((want_channels == 1 && is_gray) || (want_channels == 3 && is_rgb),
        "'" + path.string() + "': expected " + (want_channels == 1 ? std::string("single-channel") : "RGB") +
            " PNG, found " + std::to_string(channels) + " channel(s)");

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buf(row_bytes * static_cast<std::size_t>(h));
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (std::int64_t y = 0; y < h; ++y) rows[y] = buf.data() + y * row_bytes;
  png_read_image(png, rows.data());

  std::vector<float> out(static_cast<std::size_t>(channels * h * w));
  const double scale = bits == 16 ? 65535.0 : 255.0;
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        const std::size_t i = static_cast<std::size_t>(x * channels + c);
        double v;
        if (bits == 16) {
          std::uint16_t u;
          std::memcpy(&u, rows[y] + 2 * i, 2);
          v = u;
        } else {
          v = rows[y][i];
        }
        out[(c * h + y) * w + x] = static_cast<float>(v / scale);
      }
  return Tensor({channels, h, w}, std::move(out));
}

void write_png(const std::filesystem::path& path, const Tensor& img, int channels, int bits) {
  auto shape = img.shape();
  if (shape.size() == 4) {
    check(shape[0] == 1, "save: batch dimension must be 1, got " + shape_str(shape));
    shape.erase(shape.begin());
  }
  check(shape.size() == 3 && shape[0] == channels,
        "save: expected [" + std::to_string(channels) + ",H,W], got " + shape_str(img.shape()));
  const auto h = shape[1], w = shape[2];
  const int bytes = bits / 8;
  const double maxv = bits == 16 ? 65535.0 : 255.0;
  std::vector<unsigned char> buf(static_cast<std::size_t>(h * w * channels * bytes));
  const auto d = img.data();
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        const double v = std::clamp(static_cast<double>(d[(c * h + y) * w + x]), 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(v * maxv));
        unsigned char* p = buf.data() + ((y * w + x) * channels + c) * bytes;
        if (bytes == 2) {
          p[0] = static_cast<unsigned char>(q >> 8);
          p[1] = static_cast<unsigned char>(q & 0xff);
        } else {
          p[0] = static_cast<unsigned char>(q);
        }
      }

  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  check(f != nullptr, "cannot write '" + path.string() + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  check(png != nullptr, "png: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bits,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(w * channels * bytes);
  for (std::int64_t y = 0; y < h; ++y) png_write_row(png, buf.data() + y * stride);
  png_write_end(png, nullptr);
}

}  // namespace

Tensor load_image(const std::filesystem::path& path) { return read_png(path, 3); }
Tensor load_gray(const std::filesystem::path& path) { return read_png(path, 1); }
void save_image(const Tensor& img, const std::filesystem::path& path) { write_png(path, img, 3, 8); }
void save_gray16(const Tensor& img, const std::filesystem::path& path) { write_png(path, img, 1, 16); }

}  // namespace ian
