#include "image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "miner/error.hpp"

namespace miner::cli {

namespace {

[[noreturn]] void io_fail(const std::filesystem::path& path, const std::string& why) {
  throw Error(ErrorCode::Io, path.string() + ": " + why);
}

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

GridSignal read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) io_fail(path, "cannot open");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) io_fail(path, "not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) io_fail(path, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    io_fail(path, "libpng init failed");
  }
  // libpng reports errors with longjmp; keep everything that needs a
  // destructor outside this frame.
  std::vector<std::uint8_t> raw;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int depth = 0;
  int channels = 0;
  std::size_t rowbytes = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    io_fail(path, "corrupt PNG data");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // native little-endian u16
  png_read_update_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  depth = png_get_bit_depth(png, info);
  channels = png_get_channels(png, info);
  rowbytes = png_get_rowbytes(png, info);
  raw.resize(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) io_fail(path, "unsupported channel count");
  GridSignal img = GridSignal::image(height, width, static_cast<std::size_t>(channels));
  auto out = img.values();
  if (depth == 16) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint16_t v;
      std::memcpy(&v, raw.data() + 2 * i, 2);
      out[i] = static_cast<float>(v) / 65535.0f;
    }
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(raw[i]) / 255.0f;
  }
  return img;
}

GridSignal read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open");
  std::string magic;
  in >> magic;
  std::size_t channels = 0;
  if (magic == "P6") {
    channels = 3;
  } else if (magic == "P5") {
    channels = 1;
  } else {
    io_fail(path, "only binary PPM (P6) and PGM (P5) are supported");
  }
  auto next_int = [&]() -> long {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    long v = -1;
    if (!(in >> v)) io_fail(path, "bad PNM header");
    return v;
  };
  const long width = next_int();
  const long height = next_int();
  const long maxval = next_int();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) io_fail(path, "bad PNM header");
  in.get();  // single whitespace before the raster
  GridSignal img = GridSignal::image(static_cast<std::size_t>(height), static_cast<std::size_t>(width), channels);
  auto out = img.values();
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<std::uint8_t> raw(out.size() * bytes);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    io_fail(path, "truncated PNM raster");
  }
  const float scale = 1.0f / static_cast<float>(maxval);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const unsigned v = bytes == 2 ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
    out[i] = static_cast<float>(v) * scale;
  }
  return img;
}

std::uint16_t quantize16(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint16_t>(std::lround(c * 65535.0f));
}

}  // namespace

bool is_image_path(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

GridSignal read_image(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
  io_fail(path, "unrecognised image extension");
}

void write_png16(const GridSignal& image, const std::filesystem::path& path) {
  if (image.kind() != DomainKind::Image2D) throw Error(ErrorCode::WrongDomain, "PNG output needs an image");
  const std::size_t c = image.channels();
  if (c != 1 && c != 3) throw Error(ErrorCode::InvalidSignal, "PNG output needs 1 or 3 channels");
  const std::size_t h = image.dim(0);
  const std::size_t w = image.dim(1);
  // Big-endian 16-bit rows as PNG stores them.
  std::vector<std::uint8_t> raw(h * w * c * 2);
  const auto v = image.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::uint16_t q = quantize16(v[i]);
    raw[2 * i] = static_cast<std::uint8_t>(q >> 8);
    raw[2 * i + 1] = static_cast<std::uint8_t>(q & 0xFF);
  }

  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) io_fail(path, "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) io_fail(path, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    io_fail(path, "libpng init failed");
  }
  std::vector<png_bytep> rows(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = raw.data() + y * w * c * 2;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    io_fail(path, "PNG write failed");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16,
               c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) io_fail(path, "write failed");
}

void write_pnm(const GridSignal& image, const std::filesystem::path& path, bool sixteen_bit) {
  if (image.kind() != DomainKind::Image2D) throw Error(ErrorCode::WrongDomain, "PNM output needs an image");
  const std::size_t c = image.channels();
  if (c != 1 && c != 3) throw Error(ErrorCode::InvalidSignal, "PNM output needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) io_fail(path, "cannot open for writing");
  out << (c == 3 ? "P6" : "P5") << '\n' << image.dim(1) << ' ' << image.dim(0) << '\n'
      << (sixteen_bit ? 65535 : 255) << '\n';
  for (float v : image.values()) {
    if (sixteen_bit) {
      const std::uint16_t q = quantize16(v);
      out.put(static_cast<char>(q >> 8));
      out.put(static_cast<char>(q & 0xFF));
    } else {
      out.put(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    }
  }
  if (!out) io_fail(path, "write failed");
}

}  // namespace miner::cli
