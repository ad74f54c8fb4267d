#pragma once

#include <cstdint>
#include <vector>

namespace finrad::imaging {

/// 8-bit RGB image stored as three planes in row-major order.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> r, g, b;

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

/// Continuous-valued grayscale image, intensities in [0, 1], row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    double& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t pixel_count() const { return data.size(); }
};

/// Integer gray-level quantization of a GrayImage. Levels run 1..num_levels.
struct DiscretizedImage {
    int width = 0;
    int height = 0;
    int num_levels = 0;
    std::vector<int> levels;

    int at(int y, int x) const { return levels[static_cast<size_t>(y) * width + x]; }
};

/// Disjoint tiling of an image into a rows x cols grid, row-major grid order.
struct PatchGrid {
    int rows = 0;
    int cols = 0;
    int patch_width = 0;
    int patch_height = 0;
    std::vector<GrayImage> patches;
};

/// ITU-R 601 luma weights over 8-bit channels, result scaled to [0, 1].
/// The weights sum to 0.9999, so pure white maps to 0.9999 before the clamp;
/// the clamp only guards rounding.
GrayImage to_gray(const RgbImage& img);

/// Map raw 8-bit intensities to [0, 1] by dividing by 255.
GrayImage normalize(int width, int height, const std::vector<uint8_t>& raw);

/// Quantize to ng levels over the fixed range [0, 1]:
/// level = min(ng, floor(v * ng) + 1). Monotone in v. Requires ng >= 2.
DiscretizedImage discretize(const GrayImage& img, int ng);

/// Bilinear resize. Output values never leave the input's [min, max] range;
/// same-size resize reproduces the input exactly.
GrayImage resize(const GrayImage& img, int out_width, int out_height);

/// Split into rows x cols disjoint tiles that exactly cover the image.
/// Width must be divisible by cols and height by rows.
PatchGrid patch_grid(const GrayImage& img, int rows, int cols);

/// Inverse of patch_grid: stitch tiles back into one image.
GrayImage reassemble(const PatchGrid& grid);

} // namespace finrad::imaging
