#include "nprt/metrics.hpp"

#include "json.hpp"

namespace nprt {

namespace {

void check_dims(const Image& a, const Image& b)
{
    if (a.width != b.width || a.height != b.height)
        throw DataError("image dimensions differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                        std::to_string(b.width) + "x" + std::to_string(b.height));
    if (a.pixel_count() == 0) throw DataError("cannot compare empty images");
}

double clamp01(float v) { return std::clamp(static_cast<double>(v), 0.0, 1.0); }

// channel < 0 selects luminance.
std::vector<double> plane(const Image& img, int channel)
{
    std::vector<double> out(img.pixel_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const float* p = img.rgb.data() + 3 * i;
        out[i] = channel >= 0 ? clamp01(p[channel]) : 0.2126 * clamp01(p[0]) + 0.7152 * clamp01(p[1]) + 0.0722 * clamp01(p[2]);
    }
    return out;
}

double mae_plane(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

double mse_plane(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

double psnr_from_mse(double m) { return m < 1e-10 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(1.0 / m)); }

// Separable Gaussian filter, valid region only.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h, const std::vector<double>& k, int& ow, int& oh)
{
    const int r = static_cast<int>(k.size()) / 2;
    const int tw = w - 2 * r;
    std::vector<double> tmp(static_cast<std::size_t>(tw) * static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < tw; ++x) {
            double s = 0;
            for (int i = 0; i < static_cast<int>(k.size()); ++i)
                s += k[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x + i)];
            tmp[static_cast<std::size_t>(y) * static_cast<std::size_t>(tw) + static_cast<std::size_t>(x)] = s;
        }
    ow = tw;
    oh = h - 2 * r;
    std::vector<double> out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh));
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < static_cast<int>(k.size()); ++i)
                s += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(y + i) * static_cast<std::size_t>(tw) + static_cast<std::size_t>(x)];
            out[static_cast<std::size_t>(y) * static_cast<std::size_t>(ow) + static_cast<std::size_t>(x)] = s;
        }
    return out;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, int w, int h)
{
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03, sigma = 1.5;
    const int r = std::min({5, (w - 1) / 2, (h - 1) / 2});
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double ks = 0;
    for (int i = -r; i <= r; ++i) ks += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= ks;

    std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    int ow = 0, oh = 0;
    const auto ma = filter_valid(a, w, h, k, ow, oh), mb = filter_valid(b, w, h, k, ow, oh);
    const auto saa = filter_valid(aa, w, h, k, ow, oh), sbb = filter_valid(bb, w, h, k, ow, oh), sab = filter_valid(ab, w, h, k, ow, oh);
    double sum = 0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
        const double va = saa[i] - ma[i] * ma[i], vb = sbb[i] - mb[i] * mb[i], cov = sab[i] - ma[i] * mb[i];
        sum += ((2 * ma[i] * mb[i] + c1) * (2 * cov + c2)) / ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
    }
    return sum / static_cast<double>(ma.size());
}

}  // namespace

double mae(const Image& a, const Image& b)
{
    check_dims(a, b);
    double s = 0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) s += std::abs(clamp01(a.rgb[i]) - clamp01(b.rgb[i]));
    return s / static_cast<double>(a.rgb.size());
}

double mse(const Image& a, const Image& b)
{
    check_dims(a, b);
    double s = 0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = clamp01(a.rgb[i]) - clamp01(b.rgb[i]);
        s += d * d;
    }
    return s / static_cast<double>(a.rgb.size());
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const Image& a, const Image& b)
{
    check_dims(a, b);
    return ssim_plane(plane(a, -1), plane(b, -1), a.width, a.height);
}

MetricsReport compare_images(const Image& a, const Image& b)
{
    MetricsReport r;
    r.mae = mae(a, b);
    r.psnr_db = psnr(a, b);
    r.ssim = ssim(a, b);
    r.width = a.width;
    r.height = a.height;
    for (int c = 0; c < 3; ++c) {
        const auto pa = plane(a, c), pb = plane(b, c);
        r.channels[c] = {mae_plane(pa, pb), psnr_from_mse(mse_plane(pa, pb)), ssim_plane(pa, pb, a.width, a.height)};
    }
    return r;
}

std::string MetricsReport::to_json() const
{
    nlohmann::ordered_json j;
    j["mae"] = mae;
    j["psnr_db"] = psnr_db;
    j["ssim"] = ssim;
    j["width"] = width;
    j["height"] = height;
    const char* names[3] = {"r", "g", "b"};
    for (int c = 0; c < 3; ++c)
        j["channels"][names[c]] = {{"mae", channels[c].mae}, {"psnr_db", channels[c].psnr_db}, {"ssim", channels[c].ssim}};
    return j.dump(2);
}

}  // namespace nprt
