#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "multibox/multibox_loss.hpp"
#include "multibox/priors.hpp"
#include "multibox/rng.hpp"

namespace multibox {

/// Fully connected layer, y = weight * x + bias, weight is out x in.
struct Dense {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  static Dense zeros(int out, int in);
  /// Weights uniform in +-sqrt(6 / (in + out)), zero bias.
  static Dense glorot(int out, int in, Rng& rng);
};

struct LocalizerTopology {
  int input_side = 32;  ///< crops are resampled to input_side^2 pixels
  int hidden1 = 256;
  int hidden2 = 256;
  int num_slots = 16;

  int input_dim() const noexcept { return input_side * input_side; }
  bool operator==(const LocalizerTopology&) const = default;
};

/// Two ReLU hidden layers feeding a 4K residual head and a K logit head.
struct ModelParams {
  LocalizerTopology topology;
  std::uint64_t seed = 0;
  Dense layer1, layer2, loc_head, conf_head;

  static ModelParams zeros(const LocalizerTopology& topology);
  static ModelParams init(const LocalizerTopology& topology, std::uint64_t seed);

  /// Parameter tensors in checkpoint order; weights are column-major.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

struct ClassifierTopology {
  int input_side = 32;
  int hidden1 = 128;
  int hidden2 = 64;
  int num_classes = 3;  ///< foreground classes; one extra background output

  int input_dim() const noexcept { return input_side * input_side; }
  int outputs() const noexcept { return num_classes + 1; }
  bool operator==(const ClassifierTopology&) const = default;
};

struct ClassifierParams {
  ClassifierTopology topology;
  std::uint64_t seed = 0;
  Dense layer1, layer2, out;

  static ClassifierParams zeros(const ClassifierTopology& topology);
  static ClassifierParams init(const ClassifierTopology& topology, std::uint64_t seed);

  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

/// Activations of a batch; columns are examples.
struct LocalizerActivations {
  Eigen::MatrixXd hidden1, hidden2, residuals, logits;
};

LocalizerActivations forward_batch(const ModelParams& params, const Eigen::MatrixXd& inputs);

/// Accumulates into `grads` the parameter gradient given d(loss)/d(residuals)
/// and d(loss)/d(logits) for the whole batch.
void backward_batch(const ModelParams& params, const Eigen::MatrixXd& inputs,
                    const LocalizerActivations& acts, const Eigen::MatrixXd& grad_residuals,
                    const Eigen::MatrixXd& grad_logits, ModelParams& grads);

/// Predictions for column `col` of a batch: locations are prior + residual.
PredictionSet predictions_from(const LocalizerActivations& acts, Eigen::Index col,
                               const PriorSet& priors);

/// Single-crop forward pass. Throws ShapeMismatch on size disagreement.
PredictionSet forward(const ModelParams& params, std::span<const double> crop_pixels,
                      const PriorSet& priors);

/// Gradient of report.f_total with respect to every parameter, for the crop
/// the report was computed on.
ModelParams backward(const ModelParams& params, std::span<const double> crop_pixels,
                     const LossReport& report);

/// Softmax class probabilities for each column; last row is background.
Eigen::MatrixXd classify_batch(const ClassifierParams& params, const Eigen::MatrixXd& inputs);
std::vector<double> classify_crop(const ClassifierParams& params, std::span<const double> crop_pixels);

/// Mean cross-entropy of the batch; gradients accumulated into `grads`
/// (scaled by 1/batch) when non-null.
double classifier_loss(const ClassifierParams& params, const Eigen::MatrixXd& inputs,
                       std::span<const int> labels, ClassifierParams* grads);

template <typename Params>
struct AdagradState {
  Params accumulators;
  double epsilon = 1e-8;
};

AdagradState<ModelParams> make_adagrad(const ModelParams& params, double epsilon = 1e-8);
AdagradState<ClassifierParams> make_adagrad(const ClassifierParams& params, double epsilon = 1e-8);

/// accumulator += g^2; param -= lr * g / (sqrt(accumulator) + epsilon).
void adagrad_step(ModelParams& params, AdagradState<ModelParams>& state, const ModelParams& grads,
                  double lr);
void adagrad_step(ClassifierParams& params, AdagradState<ClassifierParams>& state,
                  const ClassifierParams& grads, double lr);

/// Raw Adagrad update over matching tensor lists.
void adagrad_update(std::span<const std::span<double>> params,
                    std::span<const std::span<double>> accumulators,
                    std::span<const std::span<const double>> grads, double lr, double epsilon);

void save_checkpoint(const std::string& path, const ModelParams& params);
void save_checkpoint(const std::string& path, const ClassifierParams& params);
ModelParams load_localizer(const std::string& path);
ClassifierParams load_classifier(const std::string& path);

void write_checkpoint(std::ostream& out, const ModelParams& params);
void write_checkpoint(std::ostream& out, const ClassifierParams& params);
ModelParams read_localizer(std::istream& in);
ClassifierParams read_classifier(std::istream& in);

}  // namespace multibox
