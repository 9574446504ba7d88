#include "multibox/training.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include "multibox/error.hpp"
#include "multibox/image.hpp"
#include "multibox/rng.hpp"

namespace multibox {

namespace {

constexpr int kChunk = 32;

/// Endless stream of example indices: seeded shuffles, one per epoch.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    shuffle();
  }

  std::size_t next() {
    if (pos_ == order_.size()) shuffle();
    return order_[pos_++];
  }

 private:
  void shuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t pos_ = 0;
};

void zero(ModelParams& p) {
  for (auto t : p.tensors()) std::fill(t.begin(), t.end(), 0.0);
}

void add_into(ModelParams& total, const ModelParams& part) {
  auto dst = total.tensors();
  auto src = part.tensors();
  for (std::size_t t = 0; t < dst.size(); ++t) {
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += src[t][i];
  }
}

Eigen::MatrixXd gather_inputs(std::span<const Scene> scenes, std::span<const LocalizerExample> examples,
                              std::span<const std::size_t> ids, int side) {
  Eigen::MatrixXd x(side * side, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t c = 0; c < ids.size(); ++c) {
    const LocalizerExample& ex = examples[ids[c]];
    extract_crop(scenes[ex.scene].image, ex.window.box, side,
                 std::span<double>(x.col(static_cast<Eigen::Index>(c)).data(), static_cast<std::size_t>(x.rows())));
  }
  return x;
}

struct ChunkResult {
  double f_total = 0.0, f_match = 0.0, f_conf = 0.0;
};

// Loss of one chunk; when `grads` is given, the chunk's share of the batch
// gradient (scaled by 1/batch) is written into it.
ChunkResult run_chunk(const ModelParams& params, std::span<const Scene> scenes,
                      std::span<const LocalizerExample> examples, std::span<const std::size_t> ids,
                      const PriorSet& priors, double alpha, MatchMode mode, double scale,
                      ModelParams* grads) {
  const int k = params.topology.num_slots;
  const Eigen::MatrixXd x = gather_inputs(scenes, examples, ids, params.topology.input_side);
  const LocalizerActivations acts = forward_batch(params, x);
  Eigen::MatrixXd g_res(4 * k, x.cols()), g_logit(k, x.cols());
  ChunkResult r;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const PredictionSet preds = predictions_from(acts, c, priors);
    const auto& gt = examples[ids[static_cast<std::size_t>(c)]].boxes;
    const LossReport rep = multibox_loss(preds, gt, alpha, mode, &priors);
    r.f_total += rep.f_total;
    r.f_match += rep.f_match;
    r.f_conf += rep.f_conf;
    for (int i = 0; i < k; ++i) {
      for (int d = 0; d < 4; ++d) g_res(4 * i + d, c) = scale * rep.grad_locations[i][d];
      g_logit(i, c) = scale * rep.grad_logits[i];
    }
  }
  if (grads != nullptr) backward_batch(params, x, acts, g_res, g_logit, *grads);
  return r;
}

void check_feasible(std::span<const LocalizerExample> examples, int k) {
  for (const auto& ex : examples) {
    if (ex.boxes.size() > static_cast<std::size_t>(k)) {
      throw Error(ErrorCode::InfeasibleMatch, "an example has " + std::to_string(ex.boxes.size()) +
                                                  " objects but the model only has " + std::to_string(k) +
                                                  " slots");
    }
  }
}

}  // namespace

LocalizerRun train_localizer(std::span<const Scene> scenes, std::span<const LocalizerExample> examples,
                             const PriorSet& priors, const ModelParams& init, const TrainConfig& config,
                             const StepCallback& on_step) {
  if (config.batch_size < 1 || config.steps < 0 || !(config.alpha > 0.0) || !(config.lr > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "training needs batch_size >= 1, steps >= 0, alpha > 0, lr > 0");
  }
  if (priors.size() != static_cast<std::size_t>(init.topology.num_slots)) {
    throw Error(ErrorCode::ShapeMismatch, "prior count differs from the model's slot count");
  }
  LocalizerRun run{init, {}};
  if (config.steps == 0) return run;
  if (examples.empty()) throw Error(ErrorCode::InvalidConfig, "training set is empty");
  check_feasible(examples, init.topology.num_slots);

  EpochSampler sampler(examples.size(), config.seed);
  AdagradState<ModelParams> state = make_adagrad(run.params);
  const int n_chunks = (config.batch_size + kChunk - 1) / kChunk;
  std::vector<ModelParams> chunk_grads(n_chunks, ModelParams::zeros(init.topology));
  std::vector<ChunkResult> chunk_loss(n_chunks);
  ModelParams total = ModelParams::zeros(init.topology);
  std::vector<std::size_t> batch(config.batch_size);
  const double scale = 1.0 / config.batch_size;
  const int workers = std::clamp(config.threads, 1, n_chunks);

  run.log.reserve(config.steps);
  for (int step = 0; step < config.steps; ++step) {
    for (auto& id : batch) id = sampler.next();

    auto work = [&](int c) {
      const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
      const std::size_t hi = std::min(batch.size(), lo + kChunk);
      zero(chunk_grads[c]);
      chunk_loss[c] = run_chunk(run.params, scenes, examples, std::span(batch).subspan(lo, hi - lo), priors,
                                config.alpha, config.mode, scale, &chunk_grads[c]);
    };
    if (workers == 1) {
      for (int c = 0; c < n_chunks; ++c) work(c);
    } else {
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (int c = w; c < n_chunks; c += workers) work(c);
        });
      }
    }

    zero(total);
    TrainLogRow row{step, 0.0, 0.0, 0.0};
    for (int c = 0; c < n_chunks; ++c) {
      add_into(total, chunk_grads[c]);
      row.f_total += chunk_loss[c].f_total;
      row.f_match += chunk_loss[c].f_match;
      row.f_conf += chunk_loss[c].f_conf;
    }
    row.f_total *= scale;
    row.f_match *= scale;
    row.f_conf *= scale;
    run.log.push_back(row);

    adagrad_step(run.params, state, total, config.lr);
    if (on_step) on_step(step, run.params);
  }
  return run;
}

TrainLogRow evaluate_localizer(const ModelParams& params, std::span<const Scene> scenes,
                               std::span<const LocalizerExample> examples, const PriorSet& priors,
                               double alpha, MatchMode mode) {
  TrainLogRow total;
  if (examples.empty()) return total;
  check_feasible(examples, params.topology.num_slots);
  std::vector<std::size_t> ids(examples.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (std::size_t lo = 0; lo < ids.size(); lo += kChunk) {
    const std::size_t hi = std::min(ids.size(), lo + kChunk);
    const ChunkResult r = run_chunk(params, scenes, examples, std::span(ids).subspan(lo, hi - lo), priors,
                                    alpha, mode, 1.0, nullptr);
    total.f_total += r.f_total;
    total.f_match += r.f_match;
    total.f_conf += r.f_conf;
  }
  const double n = static_cast<double>(examples.size());
  total.f_total /= n;
  total.f_match /= n;
  total.f_conf /= n;
  return total;
}

NormBox context_square(const NormBox& box, SquareContext context) noexcept {
  const double side = context == SquareContext::maximum ? std::max(box.width(), box.height())
                                                        : std::min(box.width(), box.height());
  const double cx = box.center_x();
  const double cy = box.center_y();
  return clip({cx - 0.5 * side, cy - 0.5 * side, cx + 0.5 * side, cy + 0.5 * side});
}

ClassifierRun train_classifier(const Eigen::MatrixXd& inputs, std::span<const int> labels,
                               const ClassifierParams& init, const ClassifierTrainConfig& config) {
  if (config.batch_size < 1 || config.steps < 0 || !(config.lr > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "classifier training needs batch_size >= 1, steps >= 0, lr > 0");
  }
  if (labels.size() != static_cast<std::size_t>(inputs.cols())) {
    throw Error(ErrorCode::ShapeMismatch, "one label per input column required");
  }
  for (int label : labels) {
    if (label < 0 || label > init.topology.num_classes) {
      throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(label) + " outside [0, " +
                                                  std::to_string(init.topology.num_classes) + "]");
    }
  }
  ClassifierRun run{init, {}};
  if (config.steps == 0) return run;
  if (labels.empty()) throw Error(ErrorCode::InvalidConfig, "classifier training set is empty");

  EpochSampler sampler(labels.size(), config.seed);
  AdagradState<ClassifierParams> state = make_adagrad(run.params);
  ClassifierParams grads = ClassifierParams::zeros(init.topology);
  Eigen::MatrixXd batch(inputs.rows(), config.batch_size);
  std::vector<int> batch_labels(config.batch_size);
  for (int step = 0; step < config.steps; ++step) {
    for (int c = 0; c < config.batch_size; ++c) {
      const std::size_t id = sampler.next();
      batch.col(c) = inputs.col(static_cast<Eigen::Index>(id));
      batch_labels[c] = labels[id];
    }
    for (auto t : grads.tensors()) std::fill(t.begin(), t.end(), 0.0);
    run.log.push_back(classifier_loss(run.params, batch, batch_labels, &grads));
    adagrad_step(run.params, state, grads, config.lr);
  }
  return run;
}

ClassifierRun train_classifier(std::span<const Scene> scenes, std::span<const ClassifierCrop> crops,
                               const ClassifierParams& init, const ClassifierTrainConfig& config) {
  const int side = init.topology.input_side;
  Eigen::MatrixXd inputs(side * side, static_cast<Eigen::Index>(crops.size()));
  std::vector<int> labels(crops.size());
  for (std::size_t i = 0; i < crops.size(); ++i) {
    const auto& crop = crops[i];
    if (crop.scene >= scenes.size()) throw Error(ErrorCode::ShapeMismatch, "crop refers to a missing scene");
    extract_crop(scenes[crop.scene].image, context_square(crop.box, config.context), side,
                 std::span<double>(inputs.col(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(side * side)));
    labels[i] = crop.label;
  }
  return train_classifier(inputs, labels, init, config);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_holdout(std::size_t n, double fraction,
                                                                            std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_hold = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> holdout(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
  std::sort(holdout.begin(), holdout.end());
  std::sort(train.begin(), train.end());
  return {train, holdout};
}

}  // namespace multibox
