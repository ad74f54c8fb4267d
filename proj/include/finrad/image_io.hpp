#pragma once

#include <filesystem>

#include "finrad/image.hpp"

namespace finrad::imaging {

/// Load a grayscale image from a binary PGM (P5, maxval 255) or an 8-bit PNG
/// (grayscale or RGB). RGB inputs go through to_gray; everything ends up
/// normalized to [0, 1].
///
/// Failure modes are reported distinctly: IoError for unreadable files,
/// UnsupportedFormatError for formats this reader does not handle,
/// CorruptFileError for truncated or malformed contents.
GrayImage load_image(const std::filesystem::path& path);

/// Write a GrayImage as binary PGM (P5, maxval 255). Values are clamped to
/// [0, 1] and rounded to 8 bits. Output bytes are deterministic.
void save_pgm(const std::filesystem::path& path, const GrayImage& img);

/// 8-bit grayscale PNG writer, used for test fixtures.
void save_png_gray(const std::filesystem::path& path, const GrayImage& img);

/// 8-bit RGB PNG writer, used for test fixtures.
void save_png_rgb(const std::filesystem::path& path, const RgbImage& img);

} // namespace finrad::imaging
