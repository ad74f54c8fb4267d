#include "finrad/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "finrad/errors.hpp"

namespace finrad::imaging {

namespace {

// ---------------------------------------------------------------------- PGM

int read_pgm_token(std::istream& in) {
    // Skips whitespace and '#' comments between header fields.
    for (;;) {
        const int c = in.peek();
        if (c == EOF) throw CorruptFileError("pgm: unexpected end of header");
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value)) throw CorruptFileError("pgm: malformed header field");
    return value;
}

GrayImage load_pgm(std::ifstream& file, const std::string& name) {
    char magic[2] = {0, 0};
    file.read(magic, 2);
    if (file.gcount() != 2 || magic[0] != 'P' || magic[1] != '5')
        throw CorruptFileError("pgm: bad magic in " + name);

    const int width = read_pgm_token(file);
    const int height = read_pgm_token(file);
    const int maxval = read_pgm_token(file);
    if (width < 1 || height < 1)
        throw CorruptFileError("pgm: non-positive dimensions in " + name);
    if (maxval != 255)
        throw UnsupportedFormatError("pgm: only maxval 255 supported, got " +
                                     std::to_string(maxval) + " in " + name);
    file.get(); // single whitespace byte before the raster

    std::vector<uint8_t> raw(static_cast<size_t>(width) * height);
    file.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(file.gcount()) != raw.size())
        throw CorruptFileError("pgm: truncated raster in " + name);
    return normalize(width, height, raw);
}

// ---------------------------------------------------------------------- PNG

struct PngReadCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngReadCloser() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
    (void)png;
    throw CorruptFileError(std::string("png: ") + msg);
}

void png_warning_handler(png_structp, png_const_charp) {}

GrayImage load_png(const std::filesystem::path& path) {
    PngReadCloser ctx;
    ctx.fp = std::fopen(path.string().c_str(), "rb");
    if (!ctx.fp) throw IoError("cannot open " + path.string());

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, ctx.fp) != 8 || png_sig_cmp(sig, 0, 8))
        throw CorruptFileError("png: bad signature in " + path.string());

    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                     png_error_handler, png_warning_handler);
    if (!ctx.png) throw Error("png: failed to allocate read struct");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw Error("png: failed to allocate info struct");

    png_init_io(ctx.png, ctx.fp);
    png_set_sig_bytes(ctx.png, 8);
    png_read_info(ctx.png, ctx.info);

    const png_uint_32 width = png_get_image_width(ctx.png, ctx.info);
    const png_uint_32 height = png_get_image_height(ctx.png, ctx.info);
    const int bit_depth = png_get_bit_depth(ctx.png, ctx.info);
    const int color_type = png_get_color_type(ctx.png, ctx.info);
    if (bit_depth > 8)
        throw UnsupportedFormatError("png: only 8-bit images supported: " +
                                     path.string());

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(ctx.png);
    if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS))
        png_set_tRNS_to_alpha(ctx.png);
    png_set_strip_alpha(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    const int channels = png_get_channels(ctx.png, ctx.info);
    if (channels != 1 && channels != 3)
        throw UnsupportedFormatError("png: unsupported channel count " +
                                     std::to_string(channels) + " in " +
                                     path.string());

    const size_t row_bytes = png_get_rowbytes(ctx.png, ctx.info);
    std::vector<uint8_t> raster(row_bytes * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raster.data() + y * row_bytes;
    png_read_image(ctx.png, rows.data());

    const int w = static_cast<int>(width);
    const int h = static_cast<int>(height);
    if (channels == 1) {
        std::vector<uint8_t> gray(static_cast<size_t>(w) * h);
        for (int y = 0; y < h; ++y)
            std::memcpy(gray.data() + static_cast<size_t>(y) * w,
                        raster.data() + static_cast<size_t>(y) * row_bytes, w);
        return normalize(w, h, gray);
    }
    RgbImage rgb;
    rgb.width = w;
    rgb.height = h;
    rgb.r.resize(rgb.pixel_count());
    rgb.g.resize(rgb.pixel_count());
    rgb.b.resize(rgb.pixel_count());
    for (int y = 0; y < h; ++y) {
        const uint8_t* row = raster.data() + static_cast<size_t>(y) * row_bytes;
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            rgb.r[i] = row[3 * x];
            rgb.g[i] = row[3 * x + 1];
            rgb.b[i] = row[3 * x + 2];
        }
    }
    return to_gray(rgb);
}

bool has_png_signature(std::ifstream& file) {
    unsigned char sig[8];
    file.read(reinterpret_cast<char*>(sig), 8);
    const bool is_png = file.gcount() == 8 && !png_sig_cmp(sig, 0, 8);
    file.clear();
    file.seekg(0);
    return is_png;
}

} // namespace

GrayImage load_image(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open " + path.string());

    char first = 0;
    file.get(first);
    if (!file) throw CorruptFileError("empty file: " + path.string());
    file.seekg(0);

    if (first == 'P') return load_pgm(file, path.string());
    if (has_png_signature(file)) {
        file.close();
        return load_png(path);
    }
    throw UnsupportedFormatError("unrecognized image format: " + path.string());
}

void save_pgm(const std::filesystem::path& path, const GrayImage& img) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot write " + path.string());
    file << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> raw(img.pixel_count());
    for (size_t i = 0; i < raw.size(); ++i) {
        const double v = std::clamp(img.data[i], 0.0, 1.0);
        raw[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
    file.write(reinterpret_cast<const char*>(raw.data()),
               static_cast<std::streamsize>(raw.size()));
    if (!file) throw IoError("short write to " + path.string());
}

namespace {

struct PngWriteCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngWriteCloser() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

void write_png(const std::filesystem::path& path, int width, int height,
               int color_type, int bytes_per_pixel,
               const std::vector<uint8_t>& raster) {
    PngWriteCloser ctx;
    ctx.fp = std::fopen(path.string().c_str(), "wb");
    if (!ctx.fp) throw IoError("cannot write " + path.string());
    ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                      png_error_handler, png_warning_handler);
    if (!ctx.png) throw Error("png: failed to allocate write struct");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw Error("png: failed to allocate info struct");

    png_init_io(ctx.png, ctx.fp);
    png_set_IHDR(ctx.png, ctx.info, width, height, 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);
    for (int y = 0; y < height; ++y)
        png_write_row(ctx.png, const_cast<png_bytep>(
                                   raster.data() +
                                   static_cast<size_t>(y) * width * bytes_per_pixel));
    png_write_end(ctx.png, ctx.info);
}

} // namespace

void save_png_gray(const std::filesystem::path& path, const GrayImage& img) {
    std::vector<uint8_t> raster(img.pixel_count());
    for (size_t i = 0; i < raster.size(); ++i)
        raster[i] = static_cast<uint8_t>(
            std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
    write_png(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 1, raster);
}

void save_png_rgb(const std::filesystem::path& path, const RgbImage& img) {
    std::vector<uint8_t> raster(img.pixel_count() * 3);
    for (size_t i = 0; i < img.pixel_count(); ++i) {
        raster[3 * i] = img.r[i];
        raster[3 * i + 1] = img.g[i];
        raster[3 * i + 2] = img.b[i];
    }
    write_png(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 3, raster);
}

} // namespace finrad::imaging
