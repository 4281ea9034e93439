// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

namespace enerf {

/// Row-major float image, 1 or 3 channels, nominal intensity range [0, 255].
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  static ImageBuffer zeros(int width, int height, int channels);
  static ImageBuffer constant(int width, int height, int channels, float value);

  float& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const ImageBuffer& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  bool all_finite() const;
};

/// Y = 0.299 R + 0.587 G + 0.114 B; identity on single-channel buffers.
ImageBuffer to_luminance(const ImageBuffer& image);

/// Writes binary PPM (P6) for 3-channel or PGM (P5) for 1-channel buffers.
/// Values are clamped to [0, 255] and rounded to 8 bits.
void write_image(const std::filesystem::path& path, const ImageBuffer& image);

/// Reads a binary P5/P6 file written by write_image (maxval 255).
ImageBuffer read_image(const std::filesystem::path& path);

}  // namespace enerf
