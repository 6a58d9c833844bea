#include "nprt/image.hpp"

#include <png.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace nprt {

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads one whitespace-delimited token of a text header, skipping '#' comments.
std::string header_token(const std::vector<unsigned char>& b, std::size_t& pos, const std::string& name)
{
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    std::string tok;
    while (pos < b.size() && !std::isspace(b[pos])) tok += static_cast<char>(b[pos++]);
    if (tok.empty()) throw FormatError("'" + name + "': truncated header");
    return tok;
}

void check_dims(long long w, long long h, const std::string& name)
{
    if (w <= 0 || h <= 0) throw FormatError("'" + name + "': image dimensions must be positive");
    if (w > 65536 || h > 65536) throw FormatError("'" + name + "': image dimensions are implausibly large");
}

std::string lower_ext(const std::filesystem::path& p)
{
    std::string e = p.extension().string();
    for (char& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return e;
}

void write_png(const Image& img, const std::vector<std::uint8_t>& px, const std::filesystem::path& path)
{
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw DataError("cannot open '" + path.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw DataError("PNG encoding failed for '" + path.string() + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(px.data() + 3 * static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width)));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fclose(fp) != 0) throw DataError("write failed: '" + path.string() + "'");
}

}  // namespace

Image::Image(int w, int h, float fill) : width(w), height(h)
{
    if (w < 0 || h < 0) throw InputError("image dimensions must be non-negative");
    rgb.assign(3 * pixel_count(), fill);
}

bool Image::all_finite() const
{
    return std::all_of(rgb.begin(), rgb.end(), [](float v) { return std::isfinite(v); });
}

Image read_pfm(const std::filesystem::path& path)
{
    const auto b = read_bytes(path);
    const std::string name = path.string();
    std::size_t pos = 0;
    const std::string magic = header_token(b, pos, name);
    if (magic != "PF" && magic != "Pf") throw FormatError("'" + name + "' is not a PFM file");
    const int channels = magic == "PF" ? 3 : 1;
    long long w = 0, h = 0;
    double scale = 0;
    try {
        w = std::stoll(header_token(b, pos, name));
        h = std::stoll(header_token(b, pos, name));
        scale = std::stod(header_token(b, pos, name));
    } catch (const std::logic_error&) {
        throw FormatError("'" + name + "': malformed PFM header");
    }
    check_dims(w, h, name);
    if (scale == 0.0 || !std::isfinite(scale)) throw FormatError("'" + name + "': PFM scale must be non-zero");
    ++pos;  // single whitespace byte after the scale
    const bool little = scale < 0;
    const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(channels);
    if (b.size() - std::min(pos, b.size()) < 4 * count) throw FormatError("'" + name + "': truncated PFM data");
    Image img(static_cast<int>(w), static_cast<int>(h));
    for (long long y = 0; y < h; ++y) {
        const long long row = h - 1 - y;  // PFM stores the bottom row first
        for (long long x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) {
                const std::size_t o = pos + 4 * ((static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)) *
                                                     static_cast<std::size_t>(channels) +
                                                 static_cast<std::size_t>(c));
                std::uint32_t u = 0;
                for (int k = 0; k < 4; ++k) {
                    const std::uint32_t byte = b[o + static_cast<std::size_t>(k)];
                    u |= little ? byte << (8 * k) : byte << (8 * (3 - k));
                }
                const float v = std::bit_cast<float>(u);
                float* px = img.at(static_cast<int>(x), static_cast<int>(row));
                if (channels == 3) px[c] = v;
                else px[0] = px[1] = px[2] = v;
            }
    }
    return img;
}

void write_pfm(const Image& img, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << "PF\n" << img.width << ' ' << img.height << "\n-1.0\n";
    std::vector<char> buf(12 * static_cast<std::size_t>(img.width));
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const std::uint32_t u = std::bit_cast<std::uint32_t>(img.at(x, y)[c]);
                for (int k = 0; k < 4; ++k)
                    buf[static_cast<std::size_t>(12 * x + 4 * c + k)] = static_cast<char>((u >> (8 * k)) & 0xFF);
            }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw DataError("write failed: '" + path.string() + "'");
}

Image read_rgbe(const std::filesystem::path& path)
{
    const auto b = read_bytes(path);
    const std::string name = path.string();
    std::size_t pos = 0;
    auto line = [&]() {
        std::string s;
        while (pos < b.size() && b[pos] != '\n') s += static_cast<char>(b[pos++]);
        if (pos >= b.size()) throw FormatError("'" + name + "': truncated RGBE header");
        ++pos;
        return s;
    };
    const std::string first = line();
    if (first.rfind("#?", 0) != 0) throw FormatError("'" + name + "' is not a Radiance HDR file");
    for (std::string s = line(); !s.empty(); s = line())
        if (s.rfind("FORMAT=", 0) == 0 && s != "FORMAT=32-bit_rle_rgbe")
            throw FormatError("'" + name + "': unsupported pixel format " + s.substr(7));
    std::istringstream res(line());
    std::string ya, xa;
    long long h = 0, w = 0;
    if (!(res >> ya >> h >> xa >> w) || ya != "-Y" || xa != "+X")
        throw FormatError("'" + name + "': only '-Y H +X W' RGBE orientation is supported");
    check_dims(w, h, name);

    Image img(static_cast<int>(w), static_cast<int>(h));
    std::vector<unsigned char> scan(4 * static_cast<std::size_t>(w));
    auto need = [&](std::size_t n) {
        if (b.size() - pos < n) throw FormatError("'" + name + "': truncated RGBE data");
    };
    for (long long y = 0; y < h; ++y) {
        need(4);
        const bool rle = w >= 8 && w < 32768 && b[pos] == 2 && b[pos + 1] == 2 && (b[pos + 2] & 0x80) == 0;
        if (rle) {
            if (((b[pos + 2] << 8) | b[pos + 3]) != w) throw FormatError("'" + name + "': RGBE scanline width mismatch");
            pos += 4;
            for (int c = 0; c < 4; ++c) {
                long long x = 0;
                while (x < w) {
                    need(1);
                    int count = b[pos++];
                    if (count > 128) {
                        count -= 128;
                        need(1);
                        if (x + count > w) throw FormatError("'" + name + "': RGBE run overflows scanline");
                        const unsigned char v = b[pos++];
                        for (int k = 0; k < count; ++k) scan[static_cast<std::size_t>(4 * x++ + c)] = v;
                    } else {
                        if (count == 0 || x + count > w) throw FormatError("'" + name + "': bad RGBE run");
                        need(static_cast<std::size_t>(count));
                        for (int k = 0; k < count; ++k) scan[static_cast<std::size_t>(4 * x++ + c)] = b[pos++];
                    }
                }
            }
        } else {
            need(scan.size());
            std::memcpy(scan.data(), b.data() + pos, scan.size());
            pos += scan.size();
        }
        for (long long x = 0; x < w; ++x) {
            const unsigned char* e = scan.data() + 4 * x;
            float* px = img.at(static_cast<int>(x), static_cast<int>(y));
            if (e[3] == 0) {
                px[0] = px[1] = px[2] = 0.0f;
            } else {
                const float f = std::ldexp(1.0f, e[3] - (128 + 8));
                for (int c = 0; c < 3; ++c) px[c] = (static_cast<float>(e[c]) + 0.5f) * f;
            }
        }
    }
    return img;
}

Image load_envmap(const std::filesystem::path& path)
{
    const std::string ext = lower_ext(path);
    Image img;
    if (ext == ".pfm") img = read_pfm(path);
    else if (ext == ".hdr" || ext == ".rgbe") img = read_rgbe(path);
    else throw InputError("unsupported environment map format '" + ext + "' (expected .pfm or .hdr)");
    if (!img.all_finite()) throw DataError("environment map '" + path.string() + "' has non-finite pixels");
    return img;
}

std::uint8_t tonemap_channel(float v, double exposure, double gamma)
{
    double x = std::clamp(exposure * static_cast<double>(v), 0.0, 1.0);
    if (std::isnan(x)) x = 0.0;
    return static_cast<std::uint8_t>(std::lround(255.0 * std::pow(x, 1.0 / gamma)));
}

void tonemap_write(const Image& img, const std::filesystem::path& path, double exposure, double gamma)
{
    const std::string ext = lower_ext(path);
    if (ext == ".pfm") {
        write_pfm(img, path);
        return;
    }
    if (!(gamma > 0.0) || !std::isfinite(exposure)) throw InputError("tone mapping needs gamma > 0 and a finite exposure");
    std::vector<std::uint8_t> px(img.rgb.size());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = tonemap_channel(img.rgb[i], exposure, gamma);
    if (ext == ".png") {
        write_png(img, px, path);
    } else if (ext == ".ppm") {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
        out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
        out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
        if (!out) throw DataError("write failed: '" + path.string() + "'");
    } else {
        throw InputError("unsupported image format '" + ext + "' (expected .png, .ppm or .pfm)");
    }
}

}  // namespace nprt
