#include "omnisweep/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "omnisweep/errors.hpp"

namespace omnisweep {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

Image read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw InputError("cannot open image " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("malformed PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_swap(png);  // 16-bit samples in host (little-endian) order
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buffer(row_bytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  const double max_value = depth == 16 ? 65535.0 : 255.0;
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v[3] = {0, 0, 0};
      for (int c = 0; c < std::min(channels, 3); ++c) {
        const std::size_t idx = static_cast<std::size_t>(x) * channels + c;
        if (depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, rows[y] + 2 * idx, 2);
          v[c] = s;
        } else {
          v[c] = rows[y][idx];
        }
      }
      const double lum = channels >= 3 ? 0.299 * v[0] + 0.587 * v[1] + 0.114 * v[2] : v[0];
      out.at(x, y) = static_cast<float>(lum / max_value);
    }
  }
  return out;
}

std::string next_token(std::istream& in) {
  std::string token;
  while (in) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  in >> token;
  return token;
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P2") throw InputError("unsupported PGM magic in " + path.string());
  int width = 0;
  int height = 0;
  int max_value = 0;
  try {
    width = std::stoi(next_token(in));
    height = std::stoi(next_token(in));
    max_value = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw InputError("malformed PGM header in " + path.string());
  }
  if (width < 1 || height < 1 || max_value < 1 || max_value > 65535) {
    throw InputError("malformed PGM header in " + path.string());
  }
  Image out(width, height);
  if (magic == "P2") {
    for (auto& v : out.data()) {
      int s = 0;
      if (!(in >> s)) throw InputError("truncated PGM " + path.string());
      v = static_cast<float>(s / static_cast<double>(max_value));
    }
    return out;
  }
  in.get();
  const int bytes = max_value > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * bytes);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw InputError("truncated PGM " + path.string());
  }
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    const int s = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
    out.data()[i] = static_cast<float>(s / static_cast<double>(max_value));
  }
  return out;
}

std::uint16_t quantize16(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(c * 65535.0));
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw InputError("cannot open image " + path.string());
  unsigned char sig[8] = {0};
  probe.read(reinterpret_cast<char*>(sig), 8);
  if (probe.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  if (sig[0] == 'P' && (sig[1] == '5' || sig[1] == '2')) return read_pgm(path);
  throw InputError("unrecognized image format: " + path.string());
}

void write_png16(const std::filesystem::path& path, const Image& image) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw InputError("cannot write image " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("failed writing PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width(), image.height(), 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(2 * static_cast<std::size_t>(image.width()));
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const std::uint16_t s = quantize16(image.at(x, y));
      row[2 * x] = static_cast<unsigned char>(s >> 8);
      row[2 * x + 1] = static_cast<unsigned char>(s & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_pgm16(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write image " + path.string());
  out << "P5\n" << image.width() << ' ' << image.height() << "\n65535\n";
  for (float v : image.data()) {
    const std::uint16_t s = quantize16(v);
    out.put(static_cast<char>(s >> 8));
    out.put(static_cast<char>(s & 0xff));
  }
  if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace omnisweep
