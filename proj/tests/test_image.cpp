#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "esir/error.hpp"
#include "esir/image.hpp"
#include "test_util.hpp"

using namespace esir;
using esir::test::TempDir;
using esir::test::random_image;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("filled image has the requested shape and value") {
    Image img = Image::filled(7, 3, 1, 0.25);
    CHECK(img.width == 7);
    CHECK(img.height == 3);
    CHECK(img.data.size() == 21);
    for (double v : img.data) CHECK(v == 0.25);
    CHECK_THROWS_AS(Image::filled(0, 3, 1, 0.0), ArgumentError);
    CHECK_THROWS_AS(Image::filled(3, 3, 2, 0.0), ArgumentError);
}

TEST_CASE("mse and psnr agree with closed forms") {
    Image zeros = Image::filled(100, 32, 1, 0.0);
    Image ones = Image::filled(100, 32, 1, 1.0);
    CHECK(mse(zeros, zeros) == 0.0);
    CHECK(mse(zeros, ones) == doctest::Approx(1.0));
    CHECK(psnr(zeros, ones) == doctest::Approx(0.0));
    CHECK(psnr(zeros, zeros) == std::numeric_limits<double>::infinity());

    Image half = Image::filled(100, 32, 1, 0.5);
    CHECK(mse(zeros, half) == doctest::Approx(0.25));
    CHECK(psnr(zeros, half) == doctest::Approx(10.0 * std::log10(4.0)));

    Image other = Image::filled(10, 10, 1, 0.0);
    CHECK_THROWS_AS(mse(zeros, other), ArgumentError);
}

TEST_CASE("pgm payload parses with comments and scales by 255") {
    auto payload = bytes_of("P5 # banner\n# full line comment\n2 2\n255\n");
    payload.insert(payload.end(), {0, 51, 102, 255});
    Image img = load_ppm(payload);
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.channels == 1);
    CHECK(img.at(0, 0) == doctest::Approx(0.0));
    CHECK(img.at(0, 1) == doctest::Approx(51.0 / 255.0));
    CHECK(img.at(1, 0) == doctest::Approx(102.0 / 255.0));
    CHECK(img.at(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("ppm payload carries three channels") {
    auto payload = bytes_of("P6\n1 2\n255\n");
    payload.insert(payload.end(), {255, 0, 0, 0, 255, 0});
    Image img = load_ppm(payload);
    CHECK(img.channels == 3);
    CHECK(img.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(img.at(0, 0, 1) == doctest::Approx(0.0));
    CHECK(img.at(1, 0, 1) == doctest::Approx(1.0));
}

TEST_CASE("malformed headers and payloads raise parse errors with offsets") {
    CHECK_THROWS_AS(load_ppm(bytes_of("P4\n1 1\n255\n\x00")), ParseError);
    CHECK_THROWS_AS(load_ppm(bytes_of("P5\n1 1\n254\n\x00")), ParseError);
    CHECK_THROWS_AS(load_ppm(bytes_of("P5\n1\n255\n")), ParseError);
    CHECK_THROWS_AS(load_ppm(bytes_of("P5\n2 2\n255\nab")), ParseError);

    try {
        load_ppm(bytes_of("P5\n2 2\n255\nab"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset == 11);  // first payload byte
    }
}

TEST_CASE("save then load then save is byte-identical for random images") {
    for (int i = 0; i < 20; ++i) {
        int channels = (i % 3 == 0) ? 3 : 1;
        Image img = random_image(1000 + i, 13 + i, 9 + (i % 4), channels);
        std::vector<std::uint8_t> first = save_ppm(img);
        std::vector<std::uint8_t> second = save_ppm(load_ppm(first));
        CHECK(first == second);
    }
}

TEST_CASE("quantization is the only loss across one save/load cycle") {
    Image img = random_image(7, 31, 17, 1);
    Image back = load_ppm(save_ppm(img));
    CHECK(esir::test::max_abs_diff(img, back) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("file io round trips and reports missing paths") {
    TempDir dir("esir-image");
    Image img = random_image(3, 20, 10, 1);
    save_image_file(dir.path / "a.ppm", img);
    Image back = load_image_file(dir.path / "a.ppm");
    CHECK(save_ppm(back) == save_ppm(load_ppm(save_ppm(img))));
    CHECK_THROWS_AS(load_image_file(dir.path / "missing.ppm"), IoError);
}
