#include <algorithm>
#include <cmath>
#include <random>

#include "maskexplain/error.hpp"
#include "maskexplain/imaging.hpp"

namespace maskexplain {

namespace {

bool covers(std::size_t label, double size, double r0, double c0, std::size_t r, std::size_t c) {
  const double y = static_cast<double>(r) - r0;
  const double x = static_cast<double>(c) - c0;
  if (y < 0 || x < 0 || y >= size || x >= size) return false;
  switch (label) {
    case 0:
      return true;
    case 1: {
      const double center = (size - 1) / 2.0;
      const double radius = size / 2.0;
      return (y - center) * (y - center) + (x - center) * (x - center) <= radius * radius;
    }
    default: {
      // Apex on the top row, base on the bottom row.
      const double center = (size - 1) / 2.0;
      const double half_width = (y + 1.0) / size * (size / 2.0);
      return std::fabs(x - center) <= half_width;
    }
  }
}

}  // namespace

std::vector<ShapesSample> generate_shapes(std::size_t n_per_class, std::size_t image_size,
                                          std::uint64_t seed) {
  if (image_size < 16) {
    throw Error(ErrorCode::InvalidArgument, "shapes images must be at least 16 pixels wide");
  }
  const std::size_t classes = shape_labels().size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double s_img = static_cast<double>(image_size);
  std::vector<ShapesSample> out;
  out.reserve(n_per_class * classes);
  for (std::size_t i = 0; i < n_per_class * classes; ++i) {
    const std::size_t label = i % classes;
    const auto size = static_cast<double>(std::floor(uniform(s_img / 4, s_img / 2 + 1)));
    const double r0 = std::floor(uniform(0, s_img - size + 1));
    const double c0 = std::floor(uniform(0, s_img - size + 1));

    std::array<double, 3> bg{}, fg{};
    for (auto& v : bg) v = uniform(0.0, 0.3);
    for (auto& v : fg) v = uniform(0.65, 1.0);

    ShapesSample sample;
    sample.label = label;
    sample.image.pixels = Tensor(Shape{image_size, image_size, 3});
    std::size_t rmin = image_size, cmin = image_size, rmax = 0, cmax = 0;
    for (std::size_t r = 0; r < image_size; ++r) {
      for (std::size_t c = 0; c < image_size; ++c) {
        const bool object = covers(label, size, r0, c0, r, c);
        if (object) {
          rmin = std::min(rmin, r);
          cmin = std::min(cmin, c);
          rmax = std::max(rmax, r);
          cmax = std::max(cmax, c);
        }
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const double base = object ? fg[ch] : bg[ch];
          sample.image.pixels.at(r, c, ch) = std::clamp(base + uniform(-0.04, 0.04), 0.0, 1.0);
        }
      }
    }
    sample.bbox = BBox{rmin, cmin, rmax, cmax};
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace maskexplain
