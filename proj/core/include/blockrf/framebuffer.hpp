#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "blockrf/math.hpp"

namespace blockrf {

/// Linear RGB plus accumulated opacity, row 0 at the top.
struct Framebuffer {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;    // 3 per pixel
    std::vector<float> alpha;  // 1 per pixel

    Framebuffer() = default;
    Framebuffer(int w, int h)
        : width(w), height(h), rgb(std::size_t(w) * h * 3, 0.0f), alpha(std::size_t(w) * h, 0.0f) {}

    void set(int x, int y, const Vec3& c, double a);
    Vec3 at(int x, int y) const;

    /// 8-bit RGB quantization used by the PNG export.
    std::vector<std::uint8_t> to_rgb8() const;
    bool operator==(const Framebuffer&) const = default;
};

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over rgb; identical images report kPsnrCap. Throws
/// InvalidArgument on a size mismatch.
double psnr(const Framebuffer& a, const Framebuffer& b);

/// Mean and max absolute per-channel difference.
struct ImageDiff {
    double mean_abs = 0.0;
    double max_abs = 0.0;
};
ImageDiff image_diff(const Framebuffer& a, const Framebuffer& b);

void write_png(const Framebuffer& fb, const std::filesystem::path& path);
/// Lossless float export (little-endian PFM, color).
void write_pfm(const Framebuffer& fb, const std::filesystem::path& path);
Framebuffer read_pfm(const std::filesystem::path& path);
/// 8-bit PNG read back into [0, 1] floats; alpha is set to 1.
Framebuffer read_png(const std::filesystem::path& path);
/// Dispatches on the extension (.png / .pfm).
Framebuffer read_image(const std::filesystem::path& path);
void write_image(const Framebuffer& fb, const std::filesystem::path& path);

}  // namespace blockrf
