#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "multibox/datagen.hpp"
#include "multibox/multibox_loss.hpp"
#include "multibox/network.hpp"
#include "multibox/priors.hpp"

namespace multibox {

struct TrainConfig {
  double alpha = 0.3;
  double lr = 0.05;
  int batch_size = 128;
  int steps = 2000;
  std::uint64_t seed = 0;
  MatchMode mode = MatchMode::prior_matching;
  /// Worker threads for per-chunk gradients; 1 runs serially. The batch is
  /// always cut into the same chunks and reduced in chunk order, so the
  /// result does not depend on this value.
  int threads = 1;
};

struct TrainLogRow {
  int step = 0;
  double f_total = 0.0;
  double f_match = 0.0;
  double f_conf = 0.0;
};

struct LocalizerRun {
  ModelParams params;
  std::vector<TrainLogRow> log;
};

/// Called after every step with the step index and current parameters.
using StepCallback = std::function<void(int, const ModelParams&)>;

/// Mini-batch Adagrad on the mean multibox loss of each batch, starting from
/// `init`. Batches are drawn from seeded epoch permutations of `examples`.
LocalizerRun train_localizer(std::span<const Scene> scenes, std::span<const LocalizerExample> examples,
                             const PriorSet& priors, const ModelParams& init, const TrainConfig& config,
                             const StepCallback& on_step = {});

/// Mean multibox loss over a set of examples (no parameter update).
TrainLogRow evaluate_localizer(const ModelParams& params, std::span<const Scene> scenes,
                               std::span<const LocalizerExample> examples, const PriorSet& priors,
                               double alpha, MatchMode mode);

enum class SquareContext { maximum, minimum };

/// Square region handed to the classifier for a box: maximum is the smallest
/// square containing the box, minimum the square of side min(w, h); both are
/// centred on the box and clipped to the image.
NormBox context_square(const NormBox& box, SquareContext context) noexcept;

struct ClassifierTrainConfig {
  double lr = 0.05;
  int batch_size = 128;
  int steps = 1000;
  std::uint64_t seed = 0;
  SquareContext context = SquareContext::maximum;
};

struct ClassifierRun {
  ClassifierParams params;
  std::vector<double> log;  ///< mean cross-entropy per step
};

/// Softmax cross-entropy training with Adagrad. Labels must lie in
/// [0, num_classes]; num_classes is background. Throws LabelOutOfRange.
ClassifierRun train_classifier(std::span<const Scene> scenes, std::span<const ClassifierCrop> crops,
                               const ClassifierParams& init, const ClassifierTrainConfig& config);

/// Same, on pre-extracted inputs (one column per example).
ClassifierRun train_classifier(const Eigen::MatrixXd& inputs, std::span<const int> labels,
                               const ClassifierParams& init, const ClassifierTrainConfig& config);

/// Seeded split of [0, n) into (train, holdout) index lists.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_holdout(std::size_t n, double fraction,
                                                                            std::uint64_t seed);

}  // namespace multibox
