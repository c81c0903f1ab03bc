#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace blockrf {

/// 8-bit image with interleaved channels (1, 3 or 4).
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 4;
    std::vector<std::uint8_t> pixels;
};

/// Deterministic PNG encoding: fixed compression settings, no timestamps or text chunks.
std::vector<std::uint8_t> encode_png(const Image8& img);
/// Throws FormatError on corrupt data (CRC or zlib failures included).
Image8 decode_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file(const std::filesystem::path& path, const std::string& text);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace blockrf
