#pragma once

#include <cstdint>
#include <vector>

#include "maskexplain/imaging.hpp"
#include "maskexplain/model.hpp"

namespace maskexplain {

struct TrainOptions {
  std::size_t epochs = 10;
  double learning_rate = 0.05;
  std::size_t batch_size = 8;
  std::uint64_t seed = 7;
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
};

struct TrainResult {
  Model model;
  double test_accuracy = 0.0;
  std::vector<double> epoch_losses;  // mean training cross-entropy per epoch
};

/// Minibatch SGD on softmax cross-entropy. Needs at least 3 classes with
/// 200 training and 50 test images each. Throws TrainingDiverged when a
/// non-empty epoch budget ends below 60% test accuracy.
TrainResult train_tiny_cnn(const std::vector<ShapesSample>& train_set,
                           const std::vector<ShapesSample>& test_set,
                           const std::vector<std::string>& label_names,
                           const TrainOptions& options = {});

double accuracy(const Model& model, const std::vector<ShapesSample>& samples);

}  // namespace maskexplain
