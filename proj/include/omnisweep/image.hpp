#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace omnisweep {

// Row-major single-channel float image.
class Image {
 public:
  Image() = default;
  Image(int width, int height, float fill = 0.0f)
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  float& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

// Row-major byte mask, 1 = valid.
using Mask = std::vector<std::uint8_t>;

// Loads 8/16-bit PNG or PGM (P2/P5); color is reduced to luminance
// (0.299 R + 0.587 G + 0.114 B). Values are scaled to [0, 1].
Image read_image(const std::filesystem::path& path);

// 16-bit grayscale PNG; values are clamped to [0, 1].
void write_png16(const std::filesystem::path& path, const Image& image);

// Binary 16-bit PGM (P5), values clamped to [0, 1].
void write_pgm16(const std::filesystem::path& path, const Image& image);

}  // namespace omnisweep
