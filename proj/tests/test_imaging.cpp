#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "finrad/errors.hpp"
#include "finrad/image.hpp"
#include "finrad/image_io.hpp"
#include "finrad/rng.hpp"

using namespace finrad;
using imaging::GrayImage;
using imaging::RgbImage;

namespace {

RgbImage single_pixel(uint8_t r, uint8_t g, uint8_t b) {
    RgbImage img;
    img.width = 1;
    img.height = 1;
    img.r = {r};
    img.g = {g};
    img.b = {b};
    return img;
}

GrayImage random_image(Pcg64& rng, int w, int h) {
    GrayImage img(w, h);
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

std::filesystem::path temp_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "finrad_imaging_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("imaging") {

TEST_CASE("to_gray reproduces the luma formula") {
    CHECK(imaging::to_gray(single_pixel(0, 0, 0)).data[0] == 0.0);

    const double white = imaging::to_gray(single_pixel(255, 255, 255)).data[0];
    CHECK(white == doctest::Approx(0.9999).epsilon(1e-12));
    CHECK(white < 1.0); // coefficients sum to 0.9999; clamp must not fire

    const double mixed = imaging::to_gray(single_pixel(100, 150, 50)).data[0];
    CHECK(mixed == doctest::Approx(123.64 / 255.0).epsilon(1e-12));
}

TEST_CASE("to_gray output stays in [0,1]") {
    for (int r : {0, 255})
        for (int g : {0, 255})
            for (int b : {0, 255}) {
                const double v = imaging::to_gray(single_pixel(
                                                      static_cast<uint8_t>(r),
                                                      static_cast<uint8_t>(g),
                                                      static_cast<uint8_t>(b)))
                                     .data[0];
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
    Pcg64 rng(42);
    for (int i = 0; i < 10000; ++i) {
        const double v =
            imaging::to_gray(single_pixel(static_cast<uint8_t>(rng.below(256)),
                                          static_cast<uint8_t>(rng.below(256)),
                                          static_cast<uint8_t>(rng.below(256))))
                .data[0];
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("normalize maps 0..255 to 0..1") {
    const GrayImage img = imaging::normalize(3, 1, {0, 255, 51});
    CHECK(img.data[0] == 0.0);
    CHECK(img.data[1] == 1.0);
    CHECK(img.data[2] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("discretize quantizes over the fixed unit range") {
    GrayImage constant(4, 4, 0.3);
    const auto disc = imaging::discretize(constant, 16);
    for (int lvl : disc.levels) CHECK(lvl == 5);

    GrayImage one(1, 1, 1.0);
    CHECK(imaging::discretize(one, 2).levels[0] == 2);
    GrayImage zero(1, 1, 0.0);
    for (int ng : {2, 5, 16}) CHECK(imaging::discretize(zero, ng).levels[0] == 1);

    CHECK_THROWS_AS(imaging::discretize(one, 1), InvalidArgument);
}

TEST_CASE("discretize is monotone and in range") {
    Pcg64 rng(7);
    for (int trial = 0; trial < 2000; ++trial) {
        const double a = rng.uniform();
        const double b = rng.uniform();
        const int ng = 2 + static_cast<int>(rng.below(15));
        GrayImage img(2, 1);
        img.data = {std::min(a, b), std::max(a, b)};
        const auto disc = imaging::discretize(img, ng);
        CHECK(disc.levels[0] <= disc.levels[1]);
        for (int lvl : disc.levels) {
            CHECK(lvl >= 1);
            CHECK(lvl <= ng);
        }
    }
}

TEST_CASE("resize: identity, constants, and the 3-point ramp") {
    Pcg64 rng(3);
    const GrayImage img = random_image(rng, 9, 7);
    const GrayImage same = imaging::resize(img, 9, 7);
    CHECK(same.data == img.data); // bitwise

    const GrayImage filled(5, 4, 0.37);
    const GrayImage grown = imaging::resize(filled, 11, 3);
    for (double v : grown.data) CHECK(v == 0.37);

    GrayImage ramp(2, 1);
    ramp.data = {0.0, 1.0};
    const GrayImage widened = imaging::resize(ramp, 3, 1);
    CHECK(widened.data[0] == 0.0);
    CHECK(widened.data[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(widened.data[2] == 1.0);

    CHECK_THROWS_AS(imaging::resize(img, 0, 5), InvalidArgument);
}

TEST_CASE("resize stays within the input range") {
    Pcg64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int w = 2 + static_cast<int>(rng.below(12));
        const int h = 2 + static_cast<int>(rng.below(12));
        const GrayImage img = random_image(rng, w, h);
        const auto [mn_it, mx_it] =
            std::minmax_element(img.data.begin(), img.data.end());
        const GrayImage out = imaging::resize(img, 1 + static_cast<int>(rng.below(20)),
                                              1 + static_cast<int>(rng.below(20)));
        for (double v : out.data) {
            CHECK(v >= *mn_it);
            CHECK(v <= *mx_it);
        }
    }
}

TEST_CASE("patch_grid tiles and reassembles exactly") {
    Pcg64 rng(5);
    const GrayImage big = random_image(rng, 512, 512);
    const auto grid = imaging::patch_grid(big, 16, 16);
    CHECK(grid.patches.size() == 256);
    CHECK(grid.patch_width == 32);
    CHECK(grid.patch_height == 32);
    CHECK(imaging::reassemble(grid).data == big.data);

    const GrayImage small = random_image(rng, 4, 4);
    const auto quad = imaging::patch_grid(small, 2, 2);
    CHECK(quad.patches.size() == 4);
    CHECK(imaging::reassemble(quad).data == small.data);

    const auto whole = imaging::patch_grid(small, 1, 1);
    CHECK(whole.patches.size() == 1);
    CHECK(whole.patches[0].data == small.data);

    CHECK_THROWS_AS(imaging::patch_grid(random_image(rng, 5, 4), 2, 2),
                    InvalidArgument);
}

TEST_CASE("pgm round trip and error taxonomy") {
    const auto dir = temp_dir();

    { // single white pixel
        std::ofstream f(dir / "white.pgm", std::ios::binary);
        f << "P5\n1 1\n255\n";
        f.put(static_cast<char>(255));
    }
    const GrayImage white = imaging::load_image(dir / "white.pgm");
    CHECK(white.width == 1);
    CHECK(white.data[0] == 1.0);

    Pcg64 rng(19);
    const GrayImage img = random_image(rng, 13, 9);
    imaging::save_pgm(dir / "round.pgm", img);
    const GrayImage back = imaging::load_image(dir / "round.pgm");
    REQUIRE(back.width == 13);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5 / 255.0 + 1e-9);

    { // truncated raster
        std::ofstream f(dir / "trunc.pgm", std::ios::binary);
        f << "P5\n4 4\n255\n";
        f.put(static_cast<char>(1));
    }
    CHECK_THROWS_AS(imaging::load_image(dir / "trunc.pgm"), CorruptFileError);

    { // unsupported maxval
        std::ofstream f(dir / "deep.pgm", std::ios::binary);
        f << "P5\n1 1\n65535\n";
        f.put(static_cast<char>(0));
        f.put(static_cast<char>(0));
    }
    CHECK_THROWS_AS(imaging::load_image(dir / "deep.pgm"), UnsupportedFormatError);

    CHECK_THROWS_AS(imaging::load_image(dir / "does_not_exist.pgm"), IoError);

    { // garbage
        std::ofstream f(dir / "junk.bin", std::ios::binary);
        f << "XYZW garbage";
    }
    CHECK_THROWS_AS(imaging::load_image(dir / "junk.bin"), UnsupportedFormatError);
}

TEST_CASE("png loading: grayscale round trip and rgb conversion") {
    const auto dir = temp_dir();

    Pcg64 rng(23);
    const GrayImage img = random_image(rng, 10, 6);
    imaging::save_png_gray(dir / "gray.png", img);
    const GrayImage back = imaging::load_image(dir / "gray.png");
    REQUIRE(back.width == 10);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5 / 255.0 + 1e-9);

    RgbImage rgb = single_pixel(100, 150, 50);
    imaging::save_png_rgb(dir / "rgb.png", rgb);
    const GrayImage gray = imaging::load_image(dir / "rgb.png");
    CHECK(gray.data[0] == doctest::Approx(0.48486).epsilon(1e-4));
    CHECK(gray.data[0] == doctest::Approx(123.64 / 255.0).epsilon(1e-12));

    { // valid signature, corrupt contents
        std::ofstream f(dir / "broken.png", std::ios::binary);
        const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
        f.write(reinterpret_cast<const char*>(sig), 8);
        f << "not really a png";
    }
    CHECK_THROWS_AS(imaging::load_image(dir / "broken.png"), CorruptFileError);
}

} // TEST_SUITE
