#include "maskexplain/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "maskexplain/error.hpp"

namespace maskexplain {

namespace {

constexpr std::size_t kMinTrainPerClass = 200;
constexpr std::size_t kMinTestPerClass = 50;
constexpr double kMinAccuracy = 0.6;

void check_split(const std::vector<ShapesSample>& set, std::size_t classes, std::size_t minimum,
                 const char* which) {
  std::vector<std::size_t> counts(classes, 0);
  for (const auto& s : set) {
    if (s.label >= classes) {
      throw Error(ErrorCode::InvalidArgument, std::string(which) + " label out of range");
    }
    ++counts[s.label];
  }
  for (std::size_t k = 0; k < classes; ++k) {
    if (counts[k] < minimum) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string(which) + " split has " + std::to_string(counts[k]) +
                      " images of class " + std::to_string(k) + ", need " +
                      std::to_string(minimum));
    }
  }
}

}  // namespace

double accuracy(const Model& model, const std::vector<ShapesSample>& samples) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : samples) {
    const Tensor p = model.predict_logits(s.image.pixels);
    if (argmax(p.data()) == s.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

TrainResult train_tiny_cnn(const std::vector<ShapesSample>& train_set,
                           const std::vector<ShapesSample>& test_set,
                           const std::vector<std::string>& label_names,
                           const TrainOptions& options) {
  const std::size_t classes = label_names.size();
  if (classes < 3) throw Error(ErrorCode::InvalidArgument, "training needs at least 3 classes");
  if (train_set.empty()) throw Error(ErrorCode::InvalidArgument, "empty training set");
  if (options.batch_size == 0 || !(options.learning_rate > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "batch size and learning rate must be positive");
  }
  check_split(train_set, classes, kMinTrainPerClass, "train");
  check_split(test_set, classes, kMinTestPerClass, "test");

  const std::size_t image_size = train_set.front().image.height();
  const ModelSpec spec =
      tiny_cnn_spec(image_size, label_names, options.conv1_channels, options.conv2_channels);
  WeightStore params = init_weights(spec, options.seed);

  std::mt19937_64 rng(options.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{Model(spec, params), 0.0, {}};
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      WeightStore grad_sum;
      for (const auto& [name, t] : params) grad_sum.emplace(name, Tensor(t.shape()));

      for (std::size_t b = start; b < end; ++b) {
        const auto& sample = train_set[order[b]];
        Tape tape;
        ParamNodes nodes;
        for (const auto& [name, t] : params) nodes.emplace(name, tape.leaf(t));
        const NodeRef x = tape.constant(sample.image.pixels);
        const NodeRef probs = ops::softmax(tape, forward_logits(spec, tape, x, nodes));
        Tensor onehot(Shape{classes});
        onehot[sample.label] = 1.0;
        const NodeRef loss = ops::scale(
            tape, ops::sum(tape, ops::mul(tape, tape.constant(onehot), ops::log(tape, probs))), -1.0);
        const double value = tape.value(loss).item();
        if (!std::isfinite(value)) {
          throw Error(ErrorCode::TrainingDiverged,
                      "non-finite training loss in epoch " + std::to_string(epoch) +
                          "; try another seed or a smaller learning rate");
        }
        epoch_loss += value;
        const Gradients grads = backward(tape, loss);
        for (auto& [name, acc] : grad_sum) {
          const Tensor& g = grads[nodes.at(name)];
          for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
        }
      }
      const double step = options.learning_rate / static_cast<double>(end - start);
      for (auto& [name, t] : params) {
        const Tensor& g = grad_sum.at(name);
        for (std::size_t k = 0; k < t.size(); ++k) t[k] -= step * g[k];
      }
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
  }

  result.model = Model(spec, std::move(params));
  result.test_accuracy = accuracy(result.model, test_set);
  if (options.epochs > 0 && result.test_accuracy < kMinAccuracy) {
    throw Error(ErrorCode::TrainingDiverged,
                "test accuracy " + std::to_string(result.test_accuracy) +
                    " below 0.6 after " + std::to_string(options.epochs) +
                    " epochs; try another seed or learning rate");
  }
  return result;
}

}  // namespace maskexplain
