#pragma once

// Image difference metrics on linear radiance clamped to [0, 1].

#include <string>

#include "nprt/image.hpp"

namespace nprt {

inline constexpr double kPsnrCap = 99.0;

double mae(const Image& a, const Image& b);
double mse(const Image& a, const Image& b);
// 10 log10(1 / mse), or kPsnrCap when mse < 1e-10.
double psnr(const Image& a, const Image& b);
// Mean local SSIM of the luminance 0.2126 R + 0.7152 G + 0.0722 B, 11x11
// Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1, over
// the positions where the whole window fits. Images smaller than the window
// use a window cut down to fit.
double ssim(const Image& a, const Image& b);

struct ChannelMetrics {
    double mae = 0, psnr_db = 0, ssim = 0;
};

struct MetricsReport {
    double mae = 0;
    double psnr_db = 0;
    double ssim = 0;
    int width = 0;
    int height = 0;
    ChannelMetrics channels[3];

    // {mae, psnr_db, ssim, width, height, channels:{r:{...},g:{...},b:{...}}}
    std::string to_json() const;
};

// Throws DataError on a dimension mismatch.
MetricsReport compare_images(const Image& a, const Image& b);

}  // namespace nprt
