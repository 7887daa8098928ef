// SPDX-License-Identifier: Apache-2.0
#include "seqdx/image.hpp"

#include <cmath>

namespace seqdx {

namespace {

// Bilinear sample of one channel plane with zero fill outside [0,s) x [0,s).
// Exact at integer coordinates: weights degenerate to 1 and 0.
float sample_plane(const float* plane, int s, float sy, float sx) {
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    const float wx = sx - static_cast<float>(x0);
    const float wy = sy - static_cast<float>(y0);
    auto px = [&](int y, int x) -> float {
        if (x < 0 || y < 0 || x >= s || y >= s) return 0.0f;
        return plane[static_cast<std::size_t>(y) * s + x];
    };
    const float top = (1.0f - wx) * px(y0, x0) + wx * px(y0, x0 + 1);
    const float bot = (1.0f - wx) * px(y0 + 1, x0) + wx * px(y0 + 1, x0 + 1);
    return (1.0f - wy) * top + wy * bot;
}

float sample_u8(const ImageU8& img, float sy, float sx) {
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    const float wx = sx - static_cast<float>(x0);
    const float wy = sy - static_cast<float>(y0);
    auto px = [&](int y, int x) -> float {
        if (x < 0) x = 0;
        if (y < 0) y = 0;
        if (x >= img.width) x = img.width - 1;
        if (y >= img.height) y = img.height - 1;
        return static_cast<float>(img.at(y, x));
    };
    const float top = (1.0f - wx) * px(y0, x0) + wx * px(y0, x0 + 1);
    const float bot = (1.0f - wx) * px(y0 + 1, x0) + wx * px(y0 + 1, x0 + 1);
    return (1.0f - wy) * top + wy * bot;
}

void check_chw(const TensorPtr& img) {
    if (img->rank() != 3 || img->shape[0] != 3 || img->shape[1] != img->shape[2]) {
        throw ShapeError("expected [3, s, s] image tensor, got " + shape_str(img->shape));
    }
}

}  // namespace

TensorPtr gray_to_rgb(const ImageU8& img, int target_size) {
    if (img.width < 1 || img.height < 1) throw IoError("gray_to_rgb: empty image");
    if (target_size < 1) throw Error("gray_to_rgb: target size must be positive");
    const int s = target_size;
    auto out = tensor_zeros({3, s, s});
    float* plane = out->data.data();
    if (img.width == s && img.height == s) {
        for (int i = 0; i < s * s; ++i) plane[i] = static_cast<float>(img.pixels[i]) / 255.0f;
    } else {
        const float sx_scale = static_cast<float>(img.width) / static_cast<float>(s);
        const float sy_scale = static_cast<float>(img.height) / static_cast<float>(s);
        for (int y = 0; y < s; ++y) {
            const float sy = (static_cast<float>(y) + 0.5f) * sy_scale - 0.5f;
            for (int x = 0; x < s; ++x) {
                const float sx = (static_cast<float>(x) + 0.5f) * sx_scale - 0.5f;
                plane[y * s + x] = sample_u8(img, sy, sx) / 255.0f;
            }
        }
    }
    std::copy(plane, plane + s * s, plane + s * s);
    std::copy(plane, plane + s * s, plane + 2 * s * s);
    return out;
}

TensorPtr rotate_bilinear(const TensorPtr& img, float degrees) {
    check_chw(img);
    const int s = img->shape[1];
    auto out = tensor_zeros(img->shape);
    const double rad = static_cast<double>(degrees) * 3.141592653589793 / 180.0;
    const float ct = static_cast<float>(std::cos(rad));
    const float st = static_cast<float>(std::sin(rad));
    const float c = (static_cast<float>(s) - 1.0f) / 2.0f;
    for (int ch = 0; ch < 3; ++ch) {
        const float* ip = img->data.data() + static_cast<std::size_t>(ch) * s * s;
        float* op = out->data.data() + static_cast<std::size_t>(ch) * s * s;
        for (int y = 0; y < s; ++y) {
            const float dy = static_cast<float>(y) - c;
            for (int x = 0; x < s; ++x) {
                const float dx = static_cast<float>(x) - c;
                const float sx = c + ct * dx + st * dy;
                const float sy = c - st * dx + ct * dy;
                op[y * s + x] = sample_plane(ip, s, sy, sx);
            }
        }
    }
    return out;
}

TensorPtr crop_resize_bilinear(const TensorPtr& img, float x0, float y0, float side) {
    check_chw(img);
    const int s = img->shape[1];
    if (side <= 0.0f) throw Error("crop_resize_bilinear: side must be positive");
    auto out = tensor_zeros(img->shape);
    const float step = side / static_cast<float>(s);
    const float hi = static_cast<float>(s) - 1.0f;
    auto clamp01 = [hi](float v) { return v < 0.0f ? 0.0f : (v > hi ? hi : v); };
    for (int ch = 0; ch < 3; ++ch) {
        const float* ip = img->data.data() + static_cast<std::size_t>(ch) * s * s;
        float* op = out->data.data() + static_cast<std::size_t>(ch) * s * s;
        for (int y = 0; y < s; ++y) {
            const float sy = clamp01(y0 + (static_cast<float>(y) + 0.5f) * step - 0.5f);
            for (int x = 0; x < s; ++x) {
                const float sx = clamp01(x0 + (static_cast<float>(x) + 0.5f) * step - 0.5f);
                op[y * s + x] = sample_plane(ip, s, sy, sx);
            }
        }
    }
    return out;
}

}  // namespace seqdx
