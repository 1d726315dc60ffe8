#pragma once

#include "error.hpp"
#include "raster.hpp"

#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

// 8-bit PNG/JPEG codecs at the file boundary. Everything inside the pipeline is
// floating point; quantization to 8 bits happens here and only here.

namespace sushi {

namespace detail {

inline std::uint8_t to_byte(double v) {
    return std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline Raster from_bytes(const std::vector<std::uint8_t>& bytes, int w, int h, int ch) {
    Raster out(w, h, ch);
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = bytes[i] / 255.0;
    return out;
}

inline Raster read_png(const std::string& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw IoError("cannot read PNG '" + path + "': " + image.message);
    const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
    image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw IoError("cannot decode PNG '" + path + "': " + msg);
    }
    return from_bytes(buf, int(image.width), int(image.height), gray ? 1 : 3);
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr info) {
    auto* err = reinterpret_cast<JpegErrorManager*>(info->err);
    (*info->err->format_message)(info, err->message);
    std::longjmp(err->jump, 1);
}

inline Raster read_jpeg(const std::string& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!file) throw IoError("cannot open '" + path + "'");
    jpeg_decompress_struct info{};
    JpegErrorManager err{};
    info.err = jpeg_std_error(&err.base);
    err.base.error_exit = &jpeg_error_exit;
    // No C++ objects with destructors may be created between setjmp and longjmp.
    std::vector<std::uint8_t> buf;
    int w = 0, h = 0, ch = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&info);
        throw IoError("cannot decode JPEG '" + path + "': " + err.message);
    }
    jpeg_create_decompress(&info);
    jpeg_stdio_src(&info, file.get());
    jpeg_read_header(&info, TRUE);
    info.out_color_space = info.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&info);
    w = int(info.output_width);
    h = int(info.output_height);
    ch = int(info.output_components);
    buf.resize(std::size_t(w) * std::size_t(h) * std::size_t(ch));
    while (info.output_scanline < info.output_height) {
        JSAMPROW row = buf.data() + std::size_t(info.output_scanline) * std::size_t(w) * std::size_t(ch);
        jpeg_read_scanlines(&info, &row, 1);
    }
    jpeg_finish_decompress(&info);
    jpeg_destroy_decompress(&info);
    return from_bytes(buf, w, h, ch);
}

} // namespace detail

/// Reads a PNG or JPEG file, choosing the decoder by file signature.
inline Raster read_image(const std::string& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!file) throw IoError("cannot open '" + path + "'");
    unsigned char sig[8] = {};
    const std::size_t n = std::fread(sig, 1, sizeof sig, file.get());
    file.reset();
    if (n == 8 && png_sig_cmp(sig, 0, 8) == 0) return detail::read_png(path);
    if (n >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return detail::read_jpeg(path);
    throw IoError("unsupported image format: '" + path + "'");
}

/// Writes an 8-bit PNG (gray or RGB depending on channel count).
inline void write_png(const std::string& path, const Raster& img) {
    std::vector<std::uint8_t> bytes(img.data().size());
    std::transform(img.data().begin(), img.data().end(), bytes.begin(), detail::to_byte);
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = png_uint_32(img.width());
    image.height = png_uint_32(img.height());
    image.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr))
        throw IoError("cannot write PNG '" + path + "': " + image.message);
}

} // namespace sushi
