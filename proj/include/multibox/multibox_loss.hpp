#pragma once

#include <span>
#include <vector>

#include "multibox/geometry.hpp"
#include "multibox/priors.hpp"

namespace multibox {

/// K predicted locations (raw 4-vectors, possibly outside [0,1]) and their
/// confidence logits. confidences are kept equal to sigmoid(logits).
struct PredictionSet {
  std::vector<Vec4> locations;
  std::vector<double> logits;
  std::vector<double> confidences;

  static PredictionSet from_logits(std::vector<Vec4> locations, std::vector<double> logits);

  std::size_t size() const noexcept { return locations.size(); }
};

/// Binary matching between prediction slots and ground-truth boxes.
/// Each ground truth is claimed by exactly one slot and each slot claims at
/// most one ground truth.
struct Assignment {
  std::vector<int> slot_of_gt;  ///< size M
  std::vector<int> gt_of_slot;  ///< size K, -1 when unmatched

  static Assignment from_slots(std::vector<int> slot_of_gt, std::size_t num_slots);

  bool matched(std::size_t slot) const { return gt_of_slot[slot] >= 0; }
  bool operator==(const Assignment&) const = default;
};

struct LossReport {
  double f_total = 0.0;
  double f_match = 0.0;
  double f_conf = 0.0;
  std::vector<Vec4> grad_locations;
  std::vector<double> grad_logits;
  Assignment assignment;
};

enum class MatchMode { direct, prior_matching };

double sigmoid(double z) noexcept;
/// log(1 + exp(z)) without overflow.
double softplus(double z) noexcept;

/// Change in F from assigning slot i to ground truth j versus leaving i
/// unmatched: alpha/2 |l - g|^2 - log c + log(1 - c).
double match_cost(const Vec4& location, double confidence, const NormBox& gt, double alpha);

/// Same quantity computed from the logit; -log c + log(1-c) == -logit.
double match_cost_from_logit(const Vec4& location, double logit, const NormBox& gt,
                             double alpha) noexcept;

/// Optimal assignment minimizing F(x, l, c). Throws InfeasibleMatch if K < M.
Assignment solve_assignment(const PredictionSet& preds, std::span<const NormBox> gt, double alpha);

/// Optimal assignment of priors to ground truth under 1/2 |p - g|^2.
Assignment solve_prior_assignment(std::span<const NormBox> priors, std::span<const NormBox> gt);

/// Loss and gradients for a fixed assignment. grad_logits is the exact
/// derivative through the sigmoid, c_i - sum_j x_ij.
LossReport loss_and_grad(const PredictionSet& preds, std::span<const NormBox> gt, double alpha,
                         const Assignment& assignment);

/// Solves the assignment (on predictions in direct mode, on priors in
/// prior_matching mode) and evaluates the loss on the predictions.
/// Throws MissingPriors when prior_matching is requested without K priors.
LossReport multibox_loss(const PredictionSet& preds, std::span<const NormBox> gt, double alpha,
                         MatchMode mode, const PriorSet* priors = nullptr);

}  // namespace multibox
