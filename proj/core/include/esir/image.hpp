#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace esir {

/// Row-major, channel-interleaved raster with floating-point intensities in
/// [0, 1]. Grayscale (1 channel) or RGB (3 channels). Quantization happens
/// only at file boundaries so downstream gradients stay sub-quantum.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> data;

    static Image filled(int width, int height, int channels, double value);

    double at(int row, int col, int ch = 0) const {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
    double& at(int row, int col, int ch = 0) {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }

    std::size_t value_count() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

/// Parses a binary PPM/PGM payload (magic "P5" or "P6", maxval 255).
/// Intensities become byte/255. Throws ParseError naming the byte offset on
/// malformed headers, unsupported magics or maxvals, and truncated payloads.
Image load_ppm(std::span<const std::uint8_t> bytes);

/// Encodes to binary PGM (1 channel) or PPM (3 channels), maxval 255.
/// Quantization is round-half-up of i*255, clamped to [0, 255]; a
/// save -> load -> save cycle is byte-identical.
std::vector<std::uint8_t> save_ppm(const Image& img);

Image load_image_file(const std::filesystem::path& path);
void save_image_file(const std::filesystem::path& path, const Image& img);

/// Bilinear resize with center-aligned normalized sampling and clamp-to-edge
/// boundaries. Output values are convex combinations of source values.
Image resize_bilinear(const Image& img, int out_w, int out_h);

/// Mean squared intensity error over all values. Both images must share
/// dimensions and channel count.
double mse(const Image& a, const Image& b);

/// 10*log10(1/MSE) for unit-range images; +infinity when the images match
/// exactly. Both images must share dimensions and channel count.
double psnr(const Image& a, const Image& b);

}  // namespace esir
