#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "faircl/tensor.hpp"

namespace faircl {

// 8-bit interleaved image as decoded from disk.
struct RawImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;  // row-major, channels interleaved
};

// Binary/ASCII PGM and PPM are always supported; PNG/JPEG when built with
// OpenCV. Throws InputError when the file cannot be decoded.
RawImage decode_image(const std::filesystem::path& path);

// Writes a binary PGM (1 channel) or PPM (3 channels).
void write_pnm(const std::filesystem::path& path, const RawImage& image);

// Half-pixel-centre bilinear resize of an [H, W, C] tensor.
Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

// Converts channels (gray <-> RGB, drops alpha), scales to [0, 1] and resizes
// to `target` = [H, W, C].
Tensor preprocess(const RawImage& image, const Shape& target);

}  // namespace faircl
