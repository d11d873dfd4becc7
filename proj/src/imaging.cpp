#include "maskexplain/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "maskexplain/error.hpp"

namespace maskexplain {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

struct NetpbmHeader {
  std::size_t width = 0, height = 0;
  std::size_t data_offset = 0;
};

// Parses "<magic> <w> <h> <maxval>" with '#' comments, then exactly one
// whitespace byte before the raster.
NetpbmHeader parse_header(std::string_view bytes, std::string_view magic) {
  if (bytes.size() < 2 || bytes.substr(0, 2) != magic) {
    throw Error(ErrorCode::BadMagic, "expected netpbm magic " + std::string(magic));
  }
  std::size_t pos = 2;
  auto next_number = [&](const char* what) -> std::size_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size()) throw Error(ErrorCode::Truncated, std::string("header ends before ") + what);
    if (!std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw Error(ErrorCode::BadDimensions, std::string("malformed ") + what);
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw Error(ErrorCode::BadDimensions, std::string(what) + " too large");
      ++pos;
    }
    return v;
  };
  NetpbmHeader h;
  h.width = next_number("width");
  h.height = next_number("height");
  const std::size_t maxval = next_number("maxval");
  if (h.width == 0 || h.height == 0) throw Error(ErrorCode::BadDimensions, "zero image dimension");
  if (maxval != 255) {
    throw Error(ErrorCode::BadDimensions, "only 8-bit images supported, maxval " + std::to_string(maxval));
  }
  if (pos >= bytes.size()) throw Error(ErrorCode::Truncated, "header ends before raster");
  if (!std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw Error(ErrorCode::BadDimensions, "missing separator after maxval");
  }
  h.data_offset = pos + 1;
  return h;
}

std::string header(std::string_view magic, std::size_t w, std::size_t h) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

}  // namespace

std::uint8_t quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

std::string encode_ppm(const Tensor& pixels) {
  if (pixels.rank() != 3 || pixels.dim(2) != 3) {
    throw Error(ErrorCode::ShapeMismatch, "PPM needs (H,W,3), got " + shape_to_string(pixels.shape()));
  }
  std::string out = header("P6", pixels.dim(1), pixels.dim(0));
  for (double v : pixels.data()) out.push_back(static_cast<char>(quantize(v)));
  return out;
}

Tensor decode_ppm(std::string_view bytes) {
  const auto h = parse_header(bytes, "P6");
  const std::size_t n = h.width * h.height * 3;
  if (bytes.size() - h.data_offset < n) {
    throw Error(ErrorCode::Truncated, "PPM raster truncated: expected " + std::to_string(n) +
                                          " bytes, found " + std::to_string(bytes.size() - h.data_offset));
  }
  Tensor t(Shape{h.height, h.width, 3});
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<unsigned char>(bytes[h.data_offset + i]) / 255.0;
  }
  return t;
}

std::string encode_pgm(const Tensor& mask) {
  if (mask.rank() != 2) {
    throw Error(ErrorCode::ShapeMismatch, "PGM needs (H,W), got " + shape_to_string(mask.shape()));
  }
  std::string out = header("P5", mask.dim(1), mask.dim(0));
  for (double v : mask.data()) out.push_back(static_cast<char>(quantize(v)));
  return out;
}

Tensor decode_pgm(std::string_view bytes) {
  const auto h = parse_header(bytes, "P5");
  const std::size_t n = h.width * h.height;
  if (bytes.size() - h.data_offset < n) throw Error(ErrorCode::Truncated, "PGM raster truncated");
  Tensor t(Shape{h.height, h.width});
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<unsigned char>(bytes[h.data_offset + i]) / 255.0;
  }
  return t;
}

Image load_image(const std::filesystem::path& path) {
  Image img{decode_ppm(read_file(path)), path};
  return img;
}

void save_image(const Image& image, const std::filesystem::path& path) {
  write_file(path, encode_ppm(image.pixels));
}

void save_mask(const Tensor& mask, const std::filesystem::path& path) {
  write_file(path, encode_pgm(mask));
}

Tensor load_mask(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

std::array<double, 3> colormap(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  if (c <= 0.5) return {2.0 * c, 0.0, 0.0};
  return {1.0, 2.0 * c - 1.0, 0.0};
}

Image render_overlay(const Image& image, const Tensor& mask, double alpha) {
  const auto& s = image.pixels.shape();
  if (mask.rank() != 2 || s.size() != 3 || mask.dim(0) != s[0] || mask.dim(1) != s[1]) {
    throw Error(ErrorCode::ShapeMismatch, "overlay: image " + shape_to_string(s) +
                                              " vs mask " + shape_to_string(mask.shape()));
  }
  if (alpha < 0.0 || alpha > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "overlay alpha must lie in [0,1]");
  }
  Image out{Tensor(s), std::nullopt};
  for (std::size_t r = 0; r < s[0]; ++r) {
    for (std::size_t c = 0; c < s[1]; ++c) {
      const double m = std::clamp(mask.at(r, c), 0.0, 1.0);
      const auto color = colormap(m);
      const double w = alpha * m;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double v = color[ch] * w + image.pixels.at(r, c, ch) * (1.0 - w);
        out.pixels.at(r, c, ch) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

double mass_inside_bbox(const Tensor& mask, const BBox& box) {
  if (mask.rank() != 2 || box.row1 >= mask.dim(0) || box.col1 >= mask.dim(1) ||
      box.row0 > box.row1 || box.col0 > box.col1) {
    throw Error(ErrorCode::InvalidArgument, "bbox outside mask " + shape_to_string(mask.shape()));
  }
  double inside = 0.0, total = 0.0;
  for (std::size_t r = 0; r < mask.dim(0); ++r) {
    for (std::size_t c = 0; c < mask.dim(1); ++c) {
      const double v = mask.at(r, c);
      total += v;
      if (box.contains(r, c)) inside += v;
    }
  }
  return total == 0.0 ? 0.0 : inside / total;
}

void write_dataset_manifest(const std::vector<ManifestEntry>& entries,
                            const std::filesystem::path& path) {
  std::string out;
  for (const auto& e : entries) {
    nlohmann::json j{{"path", e.path.string()},
                     {"label", e.label},
                     {"bbox", {e.bbox.row0, e.bbox.col0, e.bbox.row1, e.bbox.col1}}};
    out += j.dump() + "\n";
  }
  write_file(path, out);
}

std::vector<ManifestEntry> read_dataset_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.path = j.at("path").get<std::string>();
      if (e.path.is_relative()) e.path = path.parent_path() / e.path;
      e.label = j.at("label").get<std::size_t>();
      const auto b = j.at("bbox").get<std::vector<std::size_t>>();
      if (b.size() != 4) throw Error(ErrorCode::InvalidArgument, "bbox needs 4 values");
      e.bbox = BBox{b[0], b[1], b[2], b[3]};
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::InvalidArgument,
                  path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return entries;
}

std::vector<ManifestEntry> write_shapes_dataset(const std::vector<ShapesSample>& samples,
                                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%05zu.ppm", i);
    save_image(samples[i].image, dir / name);
    entries.push_back({name, samples[i].label, samples[i].bbox});
  }
  write_dataset_manifest(entries, dir / "manifest.jsonl");
  for (auto& e : entries) e.path = dir / e.path;
  return entries;
}

}  // namespace maskexplain
