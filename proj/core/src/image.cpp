#include "esir/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>

#include "esir/error.hpp"

namespace esir {

namespace {

void check_shape(int width, int height, int channels) {
    if (width < 1 || height < 1)
        throw ArgumentError("image dimensions must be positive, got " +
                            std::to_string(width) + "x" + std::to_string(height));
    if (channels != 1 && channels != 3)
        throw ArgumentError("image must have 1 or 3 channels, got " + std::to_string(channels));
}

// Cursor over a PPM byte stream; all failures report the current offset.
struct PpmReader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    bool eof() const { return pos >= bytes.size(); }
    std::uint8_t peek() const { return bytes[pos]; }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos); }

    void skip_space_and_comments() {
        while (!eof()) {
            std::uint8_t c = peek();
            if (c == '#') {
                while (!eof() && peek() != '\n') ++pos;
            } else if (std::isspace(c)) {
                ++pos;
            } else {
                break;
            }
        }
    }

    int read_int() {
        skip_space_and_comments();
        if (eof()) fail("unexpected end of header");
        if (!std::isdigit(peek())) fail("expected digit");
        long value = 0;
        while (!eof() && std::isdigit(peek())) {
            value = value * 10 + (peek() - '0');
            if (value > std::numeric_limits<int>::max()) fail("header value out of range");
            ++pos;
        }
        return static_cast<int>(value);
    }
};

}  // namespace

Image Image::filled(int width, int height, int channels, double value) {
    check_shape(width, height, channels);
    Image img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.data.assign(static_cast<std::size_t>(width) * height * channels, value);
    return img;
}

Image load_ppm(std::span<const std::uint8_t> bytes) {
    PpmReader in{bytes};
    if (bytes.size() < 2) in.fail("truncated magic");
    char m0 = static_cast<char>(bytes[0]);
    char m1 = static_cast<char>(bytes[1]);
    if (m0 != 'P' || (m1 != '5' && m1 != '6')) {
        in.fail(std::string("unsupported magic \"") + m0 + m1 + "\"");
    }
    int channels = (m1 == '5') ? 1 : 3;
    in.pos = 2;

    int width = in.read_int();
    int height = in.read_int();
    int maxval = in.read_int();
    if (width < 1 || height < 1) in.fail("non-positive dimensions");
    if (maxval != 255) in.fail("unsupported maxval " + std::to_string(maxval));

    // Exactly one whitespace byte separates the header from the payload.
    if (in.eof() || !std::isspace(in.peek())) in.fail("missing header terminator");
    ++in.pos;

    std::size_t expected = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() - in.pos < expected)
        throw ParseError("truncated payload: need " + std::to_string(expected) +
                             " bytes, have " + std::to_string(bytes.size() - in.pos),
                         in.pos);

    Image img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.data.resize(expected);
    for (std::size_t i = 0; i < expected; ++i)
        img.data[i] = bytes[in.pos + i] / 255.0;
    return img;
}

std::vector<std::uint8_t> save_ppm(const Image& img) {
    check_shape(img.width, img.height, img.channels);
    if (img.data.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
        throw ArgumentError("image data length does not match dimensions");

    std::string header = (img.channels == 1 ? "P5\n" : "P6\n");
    header += std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";

    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.data.size());
    for (double v : img.data) {
        double q = std::floor(v * 255.0 + 0.5);  // round half up
        out.push_back(static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0)));
    }
    return out;
}

Image load_image_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("cannot read '" + path.string() + "'");
    return load_ppm(bytes);
}

void save_image_file(const std::filesystem::path& path, const Image& img) {
    std::vector<std::uint8_t> bytes = save_ppm(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write '" + path.string() + "'");
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1)
        throw ArgumentError("resize target must be at least 1x1, got " +
                            std::to_string(out_w) + "x" + std::to_string(out_h));

    Image out;
    out.width = out_w;
    out.height = out_h;
    out.channels = img.channels;
    out.data.resize(static_cast<std::size_t>(out_w) * out_h * img.channels);

    // Center-aligned mapping: output center (c+0.5)/out maps to source pixel
    // space u = (c+0.5)*scale - 0.5. Taps clamp to the edge rows/columns.
    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;

    for (int r = 0; r < out_h; ++r) {
        double v = (r + 0.5) * sy - 0.5;
        int r0 = static_cast<int>(std::floor(v));
        double fv = v - r0;
        int ra = std::clamp(r0, 0, img.height - 1);
        int rb = std::clamp(r0 + 1, 0, img.height - 1);
        for (int c = 0; c < out_w; ++c) {
            double u = (c + 0.5) * sx - 0.5;
            int c0 = static_cast<int>(std::floor(u));
            double fu = u - c0;
            int ca = std::clamp(c0, 0, img.width - 1);
            int cb = std::clamp(c0 + 1, 0, img.width - 1);
            for (int ch = 0; ch < img.channels; ++ch) {
                double top = img.at(ra, ca, ch) * (1.0 - fu) + img.at(ra, cb, ch) * fu;
                double bot = img.at(rb, ca, ch) * (1.0 - fu) + img.at(rb, cb, ch) * fu;
                out.at(r, c, ch) = top * (1.0 - fv) + bot * fv;
            }
        }
    }
    return out;
}

double mse(const Image& a, const Image& b) {
    if (!a.same_shape(b))
        throw ArgumentError("mse requires identical dimensions and channels");
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        se += d * d;
    }
    return se / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
    double err = mse(a, b);
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / err);
}

}  // namespace esir
