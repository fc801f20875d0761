#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mrs {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0);
  GrayImage(int w, int h, std::vector<std::uint8_t> px);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved R,G,B
};

enum class ImageFormat { Png, Jpeg, Pgm, Unknown };

ImageFormat sniff_format(std::span<const std::uint8_t> bytes);

// Decodes PNG, JPEG or binary PGM (P5). Throws ImageDecodeError.
std::variant<GrayImage, RgbImage> decode_image(std::span<const std::uint8_t> bytes);

// Luma 0.299R + 0.587G + 0.114B, rounded half-up.
GrayImage to_grayscale(const RgbImage& rgb);
inline GrayImage to_grayscale(const GrayImage& gray) { return gray; }
GrayImage to_grayscale(const std::variant<GrayImage, RgbImage>& image);

// decode_image + to_grayscale.
GrayImage decode_gray(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
std::vector<std::uint8_t> encode_png(const GrayImage& image);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
GrayImage read_gray_image(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace mrs
