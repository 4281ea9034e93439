// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "enerf/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "enerf/common.hpp"

namespace enerf {

ImageBuffer ImageBuffer::zeros(int width, int height, int channels) {
  return constant(width, height, channels, 0.0f);
}

ImageBuffer ImageBuffer::constant(int width, int height, int channels, float value) {
  if (width <= 0 || height <= 0 || (channels != 1 && channels != 3)) {
    throw std::invalid_argument("ImageBuffer: invalid shape " + std::to_string(width) + "x" +
                                std::to_string(height) + "x" + std::to_string(channels));
  }
  ImageBuffer img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.data.assign(static_cast<std::size_t>(width) * height * channels, value);
  return img;
}

bool ImageBuffer::all_finite() const {
  for (float v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ImageBuffer to_luminance(const ImageBuffer& image) {
  if (image.channels == 1) return image;
  ImageBuffer out = ImageBuffer::zeros(image.width, image.height, 1);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const float r = image.data[i * 3 + 0];
    const float g = image.data[i * 3 + 1];
    const float b = image.data[i * 3 + 2];
    out.data[i] = static_cast<float>(kLumaR * r + kLumaG * g + kLumaB * b);
  }
  return out;
}

void write_image(const std::filesystem::path& path, const ImageBuffer& image) {
  if (image.data.size() != image.pixel_count() * image.channels) {
    throw std::invalid_argument("write_image: buffer size does not match shape");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataFormatError("write_image: cannot open " + path.string());
  out << (image.channels == 3 ? "P6" : "P5") << "\n"
      << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.data.size());
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    const float v = std::clamp(image.data[i], 0.0f, 255.0f);
    bytes[i] = static_cast<unsigned char>(std::lround(v));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataFormatError("write_image: short write to " + path.string());
}

ImageBuffer read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("read_image: cannot open " + path.string());
  std::string magic;
  in >> magic;
  int channels = 0;
  if (magic == "P6") {
    channels = 3;
  } else if (magic == "P5") {
    channels = 1;
  } else {
    throw DataFormatError("read_image: unsupported magic '" + magic + "' in " + path.string());
  }
  int width = 0, height = 0, maxval = 0;
  in >> width >> height >> maxval;
  if (!in || width <= 0 || height <= 0) {
    throw DataFormatError("read_image: bad header in " + path.string());
  }
  if (maxval != 255) {
    throw DataFormatError("read_image: only maxval 255 supported, got " + std::to_string(maxval));
  }
  in.get();  // single whitespace after maxval
  ImageBuffer img = ImageBuffer::zeros(width, height, channels);
  std::vector<unsigned char> bytes(img.data.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw DataFormatError("read_image: truncated pixel data in " + path.string());
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = static_cast<float>(bytes[i]);
  return img;
}

}  // namespace enerf
