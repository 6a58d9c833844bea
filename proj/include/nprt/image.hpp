#pragma once

// RGB float images and the file formats around them: PFM (read/write),
// Radiance HDR / RGBE (read), PNG and binary PPM (tone-mapped write).
// Row 0 is the top of the image.

#include <filesystem>
#include <vector>

#include "nprt/common.hpp"

namespace nprt {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;  // row-major, 3 floats per pixel

    Image() = default;
    Image(int w, int h, float fill = 0.0f);

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    float* at(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)); }
    const float* at(int x, int y) const
    {
        return rgb.data() + 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x));
    }
    bool all_finite() const;
};

// "PF" colour or "Pf" greyscale (replicated to RGB); either byte order.
Image read_pfm(const std::filesystem::path& path);
// Little-endian colour PFM; bit-exact round trip with read_pfm.
void write_pfm(const Image& img, const std::filesystem::path& path);

// Radiance .hdr with flat or new-style run-length scanlines, "-Y H +X W" only.
Image read_rgbe(const std::filesystem::path& path);

// Dispatch on extension: .pfm or .hdr/.rgbe. Throws InputError otherwise.
Image load_envmap(const std::filesystem::path& path);

// round(255 * clamp(exposure * v, 0, 1)^(1 / gamma)).
std::uint8_t tonemap_channel(float v, double exposure, double gamma);

// 8-bit output by extension: .png or .ppm. A .pfm path writes linear values
// instead (exposure and gamma ignored).
void tonemap_write(const Image& img, const std::filesystem::path& path, double exposure = 1.0, double gamma = 2.2);

}  // namespace nprt
