#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "maskexplain/imaging.hpp"
#include "maskexplain/model.hpp"

namespace maskexplain::testing {

inline Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Flatten then one dense layer: logit_k = sum a_k[ijc] x[ijc] + b_k.
inline Model linear_model(std::size_t h, std::size_t w, std::size_t classes, std::uint64_t seed) {
  ModelSpec spec{{h, w, 3}, {FlattenLayer{}, DenseLayer{classes}}, classes, {}};
  for (std::size_t k = 0; k < classes; ++k) spec.label_names.push_back("c" + std::to_string(k));
  WeightStore ws;
  ws["layer1.weight"] = random_tensor(Shape{classes, h * w * 3}, seed);
  ws["layer1.bias"] = random_tensor(Shape{classes}, seed + 1);
  return Model(spec, ws);
}

inline Model zero_model(std::size_t size) {
  const auto spec = tiny_cnn_spec(size, shape_labels());
  return Model(spec, zero_weights(spec));
}

inline Model random_cnn(std::size_t size, std::uint64_t seed) {
  const auto spec = tiny_cnn_spec(size, shape_labels());
  return Model(spec, init_weights(spec, seed));
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("maskexplain_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

#ifdef MASKEXPLAIN_TEST_MODEL
inline const Model& trained_model() {
  static const Model model = load_model(MASKEXPLAIN_TEST_MODEL);
  return model;
}
#endif

}  // namespace maskexplain::testing
