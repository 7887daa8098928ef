// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqdx/tensor.hpp"

namespace seqdx {

/// 8-bit grayscale image, row-major.
struct ImageU8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Decode a PNG or JPEG file to 8-bit grayscale (color inputs are
/// luma-converted). The format is chosen by sniffing the file signature.
ImageU8 decode_image(const std::string& path);

/// Write an 8-bit grayscale PNG. Deterministic: identical pixels yield an
/// identical byte stream.
void write_png_gray(const std::string& path, const ImageU8& img);

/// Write an 8-bit grayscale JPEG at the given quality.
void write_jpeg_gray(const std::string& path, const ImageU8& img, int quality = 92);

/// Replicate a grayscale image into a [3, s, s] tensor scaled to [0, 1].
/// Inputs whose extent differs from `target_size` (including non-square
/// inputs) are first resized bilinearly.
TensorPtr gray_to_rgb(const ImageU8& img, int target_size);

/// Bilinear resize of a [3, s, s] tensor's single geometry applied per
/// channel: rotate by `degrees` around the image center with zero fill
/// outside the frame.
TensorPtr rotate_bilinear(const TensorPtr& img, float degrees);

/// Crop the axis-aligned square [x0, x0+side) x [y0, y0+side) (float
/// coordinates) and resize it back to the input extent bilinearly.
TensorPtr crop_resize_bilinear(const TensorPtr& img, float x0, float y0, float side);

}  // namespace seqdx
