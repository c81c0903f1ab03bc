#include "blockrf/image_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <fstream>

#include "blockrf/error.hpp"

namespace blockrf {

namespace {

struct WriteSink {
    std::vector<std::uint8_t>* out;
};

void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
    auto* sink = static_cast<WriteSink*>(png_get_io_ptr(png));
    sink->out->insert(sink->out->end(), data, data + len);
}

void png_flush_cb(png_structp) {}

struct ReadSource {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t len) {
    auto* src = static_cast<ReadSource*>(png_get_io_ptr(png));
    if (src->pos + len > src->size) png_error(png, "unexpected end of PNG data");
    std::memcpy(out, src->data + src->pos, len);
    src->pos += len;
}

int color_type_for(int channels) {
    switch (channels) {
        case 1: return PNG_COLOR_TYPE_GRAY;
        case 3: return PNG_COLOR_TYPE_RGB;
        case 4: return PNG_COLOR_TYPE_RGBA;
        default: return -1;
    }
}

// Kept free of objects with destructors: libpng reports errors by longjmp.
bool encode_raw(const Image8& img, std::vector<std::uint8_t>& out, std::vector<png_bytep>& rows) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    WriteSink sink{&out};
    png_set_write_fn(png, &sink, png_write_cb, png_flush_cb);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 8, color_type_for(img.channels), PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

bool decode_raw(ReadSource& src, Image8& img, std::vector<png_bytep>& rows, const char** err) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        *err = "corrupt PNG data";
        return false;
    }
    png_set_read_fn(png, &src, png_read_cb);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (bit_depth != 8 || (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB &&
                           color != PNG_COLOR_TYPE_RGBA)) {
        png_destroy_read_struct(&png, &info, nullptr);
        *err = "unsupported PNG pixel format";
        return false;
    }
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.channels = png_get_channels(png, info);
    img.pixels.resize(std::size_t(w) * h * img.channels);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = img.pixels.data() + std::size_t(y) * w * img.channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image8& img) {
    if (img.width <= 0 || img.height <= 0 || color_type_for(img.channels) < 0 ||
        img.pixels.size() != std::size_t(img.width) * img.height * img.channels)
        throw InvalidArgument("encode_png: inconsistent image description");
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    auto* base = const_cast<std::uint8_t*>(img.pixels.data());
    for (int y = 0; y < img.height; ++y)
        rows[y] = base + std::size_t(y) * img.width * img.channels;
    std::vector<std::uint8_t> out;
    if (!encode_raw(img, out, rows)) throw Error("encode_png: libpng failure");
    return out;
}

Image8 decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
        throw FormatError("decode_png: missing PNG signature");
    ReadSource src{bytes.data(), bytes.size(), 0};
    Image8 img;
    std::vector<png_bytep> rows;
    const char* err = "libpng failure";
    if (!decode_raw(src, img, rows, &err)) throw FormatError(std::string("decode_png: ") + err);
    return img;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> data(size);
    if (size && !in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size)))
        throw IoError("cannot read " + path.string());
    return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span<const std::uint8_t>(
                         reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace blockrf
