#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "maskexplain/tensor.hpp"

namespace maskexplain {

/// RGB image, pixels (H, W, 3) in [0, 1].
struct Image {
  Tensor pixels;
  std::optional<std::filesystem::path> source;

  std::size_t height() const { return pixels.dim(0); }
  std::size_t width() const { return pixels.dim(1); }
};

/// Inclusive pixel bounds of an object.
struct BBox {
  std::size_t row0 = 0, col0 = 0, row1 = 0, col1 = 0;
  std::size_t area() const { return (row1 - row0 + 1) * (col1 - col0 + 1); }
  bool contains(std::size_t r, std::size_t c) const {
    return r >= row0 && r <= row1 && c >= col0 && c <= col1;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

// Binary netpbm, 8 bit. Reading clamps nothing: bytes map to k/255.
Image load_image(const std::filesystem::path& path);
void save_image(const Image& image, const std::filesystem::path& path);
std::string encode_ppm(const Tensor& pixels);
Tensor decode_ppm(std::string_view bytes);

/// Writes an (H, W) map with values in [0, 1] as a P5 graymap.
void save_mask(const Tensor& mask, const std::filesystem::path& path);
Tensor load_mask(const std::filesystem::path& path);
std::string encode_pgm(const Tensor& mask);
Tensor decode_pgm(std::string_view bytes);

/// floor(v * 255 + 0.5) after clamping to [0, 1].
std::uint8_t quantize(double v);

/// Black -> red on [0, 0.5], red -> yellow on [0.5, 1].
std::array<double, 3> colormap(double v);

/// colormap(m) * alpha * m + image * (1 - alpha * m), per pixel.
Image render_overlay(const Image& image, const Tensor& mask, double alpha = 0.6);

/// Fraction of the mask's total value inside `box`; 0 for an all-zero mask.
double mass_inside_bbox(const Tensor& mask, const BBox& box);

struct ShapesSample {
  Image image;
  std::size_t label = 0;
  BBox bbox;
};

inline const std::vector<std::string>& shape_labels() {
  static const std::vector<std::string> labels = {"square", "circle", "triangle"};
  return labels;
}

/// Class-balanced synthetic set, samples ordered class-interleaved
/// (square, circle, triangle, square, ...). Deterministic per seed.
std::vector<ShapesSample> generate_shapes(std::size_t n_per_class, std::size_t image_size,
                                          std::uint64_t seed);

struct ManifestEntry {
  std::filesystem::path path;
  std::size_t label = 0;
  BBox bbox;
};

/// JSON lines: {"path": ..., "label": k, "bbox": [row0, col0, row1, col1]}.
void write_dataset_manifest(const std::vector<ManifestEntry>& entries,
                            const std::filesystem::path& path);
std::vector<ManifestEntry> read_dataset_manifest(const std::filesystem::path& path);

/// Writes every sample as PPM under `dir` plus `dir/manifest.jsonl`.
std::vector<ManifestEntry> write_shapes_dataset(const std::vector<ShapesSample>& samples,
                                                const std::filesystem::path& dir);

}  // namespace maskexplain
