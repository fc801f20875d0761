#include "mrs/image.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first.
#include <csetjmp>
#include <cstdio>
#include <jpeglib.h>

#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mrs/errors.hpp"

namespace mrs {

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

GrayImage::GrayImage(int w, int h, std::vector<std::uint8_t> px) : width(w), height(h), pixels(std::move(px)) {
  if (pixels.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {
    throw DimensionError("gray image " + std::to_string(w) + "x" + std::to_string(h) + " needs " +
                         std::to_string(w * h) + " pixels, got " + std::to_string(pixels.size()));
  }
}

ImageFormat sniff_format(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (b.size() >= 8 && std::memcmp(b.data(), kPng, 8) == 0) return ImageFormat::Png;
  if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF) return ImageFormat::Jpeg;
  if (b.size() >= 2 && b[0] == 'P' && b[1] == '5') return ImageFormat::Pgm;
  return ImageFormat::Unknown;
}

namespace {

GrayImage decode_pgm(std::span<const std::uint8_t> b) {
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < b.size()) {
      if (b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
      } else if (std::isspace(b[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    long v = 0;
    std::size_t start = pos;
    while (pos < b.size() && std::isdigit(b[pos])) {
      v = v * 10 + (b[pos] - '0');
      if (v > 1 << 20) throw ImageDecodeError("PGM header value too large");
      ++pos;
    }
    if (pos == start) throw ImageDecodeError("PGM header: expected an integer at byte " + std::to_string(pos));
    return v;
  };
  const long w = read_int(), h = read_int(), maxval = read_int();
  if (w <= 0 || h <= 0) throw ImageDecodeError("PGM has empty dimensions");
  if (maxval != 255) throw ImageDecodeError("only 8-bit PGM (maxval 255) is supported");
  if (pos >= b.size() || !std::isspace(b[pos])) throw ImageDecodeError("PGM header not terminated");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (b.size() - pos < n) throw ImageDecodeError("PGM pixel data truncated");
  return GrayImage(static_cast<int>(w), static_cast<int>(h),
                   std::vector<std::uint8_t>(b.begin() + static_cast<std::ptrdiff_t>(pos),
                                             b.begin() + static_cast<std::ptrdiff_t>(pos + n)));
}

std::variant<GrayImage, RgbImage> decode_png(std::span<const std::uint8_t> b) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, b.data(), b.size())) {
    throw ImageDecodeError(std::string("PNG: ") + img.message);
  }
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(img));
  // Transparent pixels composite onto white.
  png_color background{255, 255, 255};
  if (!png_image_finish_read(&img, &background, px.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ImageDecodeError(std::string("PNG: ") + img.message);
  }
  const int w = static_cast<int>(img.width), h = static_cast<int>(img.height);
  if (gray) return GrayImage(w, h, std::move(px));
  return RgbImage{w, h, std::move(px)};
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_quiet(j_common_ptr) {}

std::variant<GrayImage, RgbImage> decode_jpeg(std::span<const std::uint8_t> b) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.output_message = jpeg_quiet;  // warnings are not errors; keep stderr clean
  std::vector<std::uint8_t> px;
  int w = 0, h = 0, channels = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ImageDecodeError(std::string("JPEG: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, b.data(), static_cast<unsigned long>(b.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  w = static_cast<int>(cinfo.output_width);
  h = static_cast<int>(cinfo.output_height);
  channels = cinfo.output_components;
  px.resize(static_cast<std::size_t>(w) * h * channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = px.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  if (channels == 1) return GrayImage(w, h, std::move(px));
  return RgbImage{w, h, std::move(px)};
}

}  // namespace

std::variant<GrayImage, RgbImage> decode_image(std::span<const std::uint8_t> bytes) {
  switch (sniff_format(bytes)) {
    case ImageFormat::Png: return decode_png(bytes);
    case ImageFormat::Jpeg: return decode_jpeg(bytes);
    case ImageFormat::Pgm: return decode_pgm(bytes);
    case ImageFormat::Unknown: break;
  }
  throw ImageDecodeError("unrecognized image format (expected PNG, JPEG or binary PGM)");
}

GrayImage to_grayscale(const RgbImage& rgb) {
  GrayImage g(rgb.width, rgb.height);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    const unsigned r = rgb.pixels[3 * i], gr = rgb.pixels[3 * i + 1], b = rgb.pixels[3 * i + 2];
    // Integer form of the luma weights; +500 rounds half-up.
    g.pixels[i] = static_cast<std::uint8_t>((299 * r + 587 * gr + 114 * b + 500) / 1000);
  }
  return g;
}

GrayImage to_grayscale(const std::variant<GrayImage, RgbImage>& image) {
  return std::visit([](const auto& im) { return to_grayscale(im); }, image);
}

GrayImage decode_gray(std::span<const std::uint8_t> bytes) { return to_grayscale(decode_image(bytes)); }

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw ImageDecodeError(std::string("PNG encode: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw ImageDecodeError(std::string("PNG encode: ") + img.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

GrayImage read_gray_image(const std::filesystem::path& path) { return decode_gray(read_file_bytes(path)); }

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace mrs
