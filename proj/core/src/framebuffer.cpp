#include "blockrf/framebuffer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "blockrf/error.hpp"
#include "blockrf/image_io.hpp"

namespace blockrf {

void Framebuffer::set(int x, int y, const Vec3& c, double a) {
    const std::size_t i = std::size_t(y) * width + x;
    rgb[3 * i + 0] = static_cast<float>(c.x);
    rgb[3 * i + 1] = static_cast<float>(c.y);
    rgb[3 * i + 2] = static_cast<float>(c.z);
    alpha[i] = static_cast<float>(a);
}

Vec3 Framebuffer::at(int x, int y) const {
    const std::size_t i = std::size_t(y) * width + x;
    return {rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]};
}

std::vector<std::uint8_t> Framebuffer::to_rgb8() const {
    std::vector<std::uint8_t> out(rgb.size());
    for (std::size_t i = 0; i < rgb.size(); ++i)
        out[i] = static_cast<std::uint8_t>(
            std::lround(std::clamp(double(rgb[i]), 0.0, 1.0) * 255.0));
    return out;
}

double psnr(const Framebuffer& a, const Framebuffer& b) {
    if (a.width != b.width || a.height != b.height)
        throw InvalidArgument("psnr: image dimensions differ");
    if (a.rgb.empty()) throw InvalidArgument("psnr: empty image");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = double(a.rgb[i]) - double(b.rgb[i]);
        sum += d * d;
    }
    const double mse = sum / double(a.rgb.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

ImageDiff image_diff(const Framebuffer& a, const Framebuffer& b) {
    if (a.width != b.width || a.height != b.height)
        throw InvalidArgument("image_diff: image dimensions differ");
    ImageDiff d;
    if (a.rgb.empty()) return d;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double e = std::abs(double(a.rgb[i]) - double(b.rgb[i]));
        sum += e;
        d.max_abs = std::max(d.max_abs, e);
    }
    d.mean_abs = sum / double(a.rgb.size());
    return d;
}

void write_png(const Framebuffer& fb, const std::filesystem::path& path) {
    Image8 img;
    img.width = fb.width;
    img.height = fb.height;
    img.channels = 3;
    img.pixels = fb.to_rgb8();
    write_file(path, encode_png(img));
}

void write_pfm(const Framebuffer& fb, const std::filesystem::path& path) {
    std::ostringstream header;
    header << "PF\n" << fb.width << " " << fb.height << "\n-1.0\n";
    std::string out = header.str();
    const std::size_t head = out.size();
    out.resize(head + fb.rgb.size() * 4);
    char* dst = out.data() + head;
    // PFM rows run bottom to top.
    for (int y = fb.height - 1; y >= 0; --y) {
        for (int x = 0; x < fb.width; ++x)
            for (int c = 0; c < 3; ++c) {
                float v = fb.rgb[(std::size_t(y) * fb.width + x) * 3 + c];
                std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
                if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
                std::memcpy(dst, &bits, 4);
                dst += 4;
            }
    }
    write_file(path, out);
}

Framebuffer read_pfm(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(char(bytes[pos++]));
        return t;
    };
    if (token() != "PF") throw FormatError("read_pfm: only color PFM is supported");
    int w = 0, h = 0;
    double scale = 0.0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        scale = std::stod(token());
    } catch (const std::exception&) {
        throw FormatError("read_pfm: malformed header in " + path.string());
    }
    ++pos;  // single whitespace after the scale
    if (w <= 0 || h <= 0 || bytes.size() - pos != std::size_t(w) * h * 12)
        throw FormatError("read_pfm: size mismatch in " + path.string());
    const bool little = scale < 0.0;
    Framebuffer fb(w, h);
    const std::uint8_t* src = bytes.data() + pos;
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                std::uint32_t bits;
                std::memcpy(&bits, src, 4);
                src += 4;
                const bool swap = little != (std::endian::native == std::endian::little);
                if (swap) bits = __builtin_bswap32(bits);
                fb.rgb[(std::size_t(y) * w + x) * 3 + c] = std::bit_cast<float>(bits);
            }
    std::fill(fb.alpha.begin(), fb.alpha.end(), 1.0f);
    return fb;
}

Framebuffer read_png(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    const Image8 img = decode_png(bytes);
    Framebuffer fb(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* p =
                img.pixels.data() + (std::size_t(y) * img.width + x) * img.channels;
            Vec3 c;
            for (int k = 0; k < 3; ++k) c[k] = p[img.channels >= 3 ? k : 0] / 255.0;
            fb.set(x, y, c, 1.0);
        }
    return fb;
}

Framebuffer read_image(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".pfm") return read_pfm(path);
    if (ext == ".png") return read_png(path);
    throw InvalidArgument("unsupported image extension: " + ext);
}

void write_image(const Framebuffer& fb, const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".pfm") return write_pfm(fb, path);
    if (ext == ".png") return write_png(fb, path);
    throw InvalidArgument("unsupported image extension: " + ext);
}

}  // namespace blockrf
