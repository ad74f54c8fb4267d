#include "finrad/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "finrad/errors.hpp"

namespace finrad::imaging {

namespace {

void require_valid(const RgbImage& img) {
    if (img.width < 1 || img.height < 1)
        throw InvalidArgument("RgbImage: dimensions must be positive");
    const size_t n = img.pixel_count();
    if (img.r.size() != n || img.g.size() != n || img.b.size() != n)
        throw InvalidArgument("RgbImage: channel planes must have width*height entries");
}

void require_valid(const GrayImage& img) {
    if (img.width < 1 || img.height < 1)
        throw InvalidArgument("GrayImage: dimensions must be positive");
    if (img.data.size() != img.pixel_count())
        throw InvalidArgument("GrayImage: data length must equal width*height");
}

// a + t*(b-a); stays inside [min(a,b), max(a,b)] for t in [0,1].
double lerp(double a, double b, double t) {
    return a + t * (b - a);
}

} // namespace

GrayImage to_gray(const RgbImage& img) {
    require_valid(img);
    GrayImage out(img.width, img.height);
    for (size_t i = 0; i < img.pixel_count(); ++i) {
        const double luma =
            0.2989 * img.r[i] + 0.5870 * img.g[i] + 0.1140 * img.b[i];
        out.data[i] = std::clamp(luma / 255.0, 0.0, 1.0);
    }
    return out;
}

GrayImage normalize(int width, int height, const std::vector<uint8_t>& raw) {
    if (width < 1 || height < 1)
        throw InvalidArgument("normalize: dimensions must be positive");
    if (raw.size() != static_cast<size_t>(width) * height)
        throw InvalidArgument("normalize: buffer length must equal width*height");
    GrayImage out(width, height);
    for (size_t i = 0; i < raw.size(); ++i) out.data[i] = raw[i] / 255.0;
    return out;
}

DiscretizedImage discretize(const GrayImage& img, int ng) {
    require_valid(img);
    if (ng < 2) throw InvalidArgument("discretize: need at least 2 gray levels");
    DiscretizedImage out;
    out.width = img.width;
    out.height = img.height;
    out.num_levels = ng;
    out.levels.resize(img.pixel_count());
    for (size_t i = 0; i < img.data.size(); ++i) {
        const int level = static_cast<int>(std::floor(img.data[i] * ng)) + 1;
        out.levels[i] = std::clamp(level, 1, ng);
    }
    return out;
}

GrayImage resize(const GrayImage& img, int out_width, int out_height) {
    require_valid(img);
    if (out_width < 1 || out_height < 1)
        throw InvalidArgument("resize: output dimensions must be positive");

    GrayImage out(out_width, out_height);
    const double sx = out_width > 1
                          ? static_cast<double>(img.width - 1) / (out_width - 1)
                          : 0.0;
    const double sy = out_height > 1
                          ? static_cast<double>(img.height - 1) / (out_height - 1)
                          : 0.0;
    // Single-row/column outputs sample the source center.
    const double cx = (img.width - 1) / 2.0;
    const double cy = (img.height - 1) / 2.0;

    for (int oy = 0; oy < out_height; ++oy) {
        const double fy = out_height > 1 ? oy * sy : cy;
        int y0 = static_cast<int>(std::floor(fy));
        y0 = std::clamp(y0, 0, img.height - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double ty = fy - y0;
        for (int ox = 0; ox < out_width; ++ox) {
            const double fx = out_width > 1 ? ox * sx : cx;
            int x0 = static_cast<int>(std::floor(fx));
            x0 = std::clamp(x0, 0, img.width - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double tx = fx - x0;
            const double top = lerp(img.at(y0, x0), img.at(y0, x1), tx);
            const double bottom = lerp(img.at(y1, x0), img.at(y1, x1), tx);
            out.at(oy, ox) = lerp(top, bottom, ty);
        }
    }
    return out;
}

PatchGrid patch_grid(const GrayImage& img, int rows, int cols) {
    require_valid(img);
    if (rows < 1 || cols < 1)
        throw InvalidArgument("patch_grid: grid dimensions must be positive");
    if (img.width % cols != 0 || img.height % rows != 0)
        throw InvalidArgument(
            "patch_grid: image " + std::to_string(img.width) + "x" +
            std::to_string(img.height) + " not divisible by grid " +
            std::to_string(cols) + "x" + std::to_string(rows));

    PatchGrid grid;
    grid.rows = rows;
    grid.cols = cols;
    grid.patch_width = img.width / cols;
    grid.patch_height = img.height / rows;
    grid.patches.reserve(static_cast<size_t>(rows) * cols);
    for (int gr = 0; gr < rows; ++gr) {
        for (int gc = 0; gc < cols; ++gc) {
            GrayImage patch(grid.patch_width, grid.patch_height);
            for (int y = 0; y < grid.patch_height; ++y)
                for (int x = 0; x < grid.patch_width; ++x)
                    patch.at(y, x) =
                        img.at(gr * grid.patch_height + y, gc * grid.patch_width + x);
            grid.patches.push_back(std::move(patch));
        }
    }
    return grid;
}

GrayImage reassemble(const PatchGrid& grid) {
    if (grid.patches.size() != static_cast<size_t>(grid.rows) * grid.cols)
        throw InvalidArgument("reassemble: patch count does not match grid");
    GrayImage out(grid.cols * grid.patch_width, grid.rows * grid.patch_height);
    for (int gr = 0; gr < grid.rows; ++gr) {
        for (int gc = 0; gc < grid.cols; ++gc) {
            const GrayImage& patch = grid.patches[static_cast<size_t>(gr) * grid.cols + gc];
            for (int y = 0; y < grid.patch_height; ++y)
                for (int x = 0; x < grid.patch_width; ++x)
                    out.at(gr * grid.patch_height + y, gc * grid.patch_width + x) =
                        patch.at(y, x);
        }
    }
    return out;
}

} // namespace finrad::imaging
