#include "multibox/multibox_loss.hpp"

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "multibox/assignment.hpp"
#include "multibox/error.hpp"

namespace multibox {

namespace {

double half_sq_dist(const Vec4& l, const NormBox& g) noexcept {
  const double d0 = l[0] - g.xmin;
  const double d1 = l[1] - g.ymin;
  const double d2 = l[2] - g.xmax;
  const double d3 = l[3] - g.ymax;
  return 0.5 * (d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3);
}

void require_feasible(std::size_t k, std::size_t m) {
  if (k < m) {
    throw Error(ErrorCode::InfeasibleMatch, "cannot match " + std::to_string(m) +
                                                " ground-truth boxes with " + std::to_string(k) +
                                                " prediction slots");
  }
}

}  // namespace

PredictionSet PredictionSet::from_logits(std::vector<Vec4> locations, std::vector<double> logits) {
  if (locations.size() != logits.size()) {
    throw Error(ErrorCode::ShapeMismatch, "locations and logits differ in length");
  }
  PredictionSet p;
  p.locations = std::move(locations);
  p.logits = std::move(logits);
  p.confidences.reserve(p.logits.size());
  for (double z : p.logits) p.confidences.push_back(sigmoid(z));
  return p;
}

Assignment Assignment::from_slots(std::vector<int> slot_of_gt, std::size_t num_slots) {
  Assignment a;
  a.gt_of_slot.assign(num_slots, -1);
  for (std::size_t j = 0; j < slot_of_gt.size(); ++j) {
    const int slot = slot_of_gt[j];
    if (slot < 0 || static_cast<std::size_t>(slot) >= num_slots || a.gt_of_slot[slot] >= 0) {
      throw Error(ErrorCode::InfeasibleMatch, "assignment is not injective");
    }
    a.gt_of_slot[slot] = static_cast<int>(j);
  }
  a.slot_of_gt = std::move(slot_of_gt);
  return a;
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) noexcept {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double match_cost(const Vec4& location, double confidence, const NormBox& gt, double alpha) {
  return alpha * half_sq_dist(location, gt) - std::log(confidence) + std::log1p(-confidence);
}

double match_cost_from_logit(const Vec4& location, double logit, const NormBox& gt,
                             double alpha) noexcept {
  return alpha * half_sq_dist(location, gt) - logit;
}

Assignment solve_assignment(const PredictionSet& preds, std::span<const NormBox> gt,
                            double alpha) {
  const std::size_t k = preds.size();
  require_feasible(k, gt.size());
  // Rows are ground truths so that the matrix is wide; the cost of leaving a
  // slot unmatched is the constant baseline and drops out.
  Eigen::MatrixXd cost(gt.size(), k);
  for (std::size_t j = 0; j < gt.size(); ++j) {
    for (std::size_t i = 0; i < k; ++i) {
      cost(j, i) = match_cost_from_logit(preds.locations[i], preds.logits[i], gt[j], alpha);
    }
  }
  return Assignment::from_slots(min_cost_assignment(cost), k);
}

Assignment solve_prior_assignment(std::span<const NormBox> priors, std::span<const NormBox> gt) {
  require_feasible(priors.size(), gt.size());
  Eigen::MatrixXd cost(gt.size(), priors.size());
  for (std::size_t j = 0; j < gt.size(); ++j) {
    for (std::size_t i = 0; i < priors.size(); ++i) {
      cost(j, i) = 0.5 * squared_distance(priors[i], gt[j]);
    }
  }
  return Assignment::from_slots(min_cost_assignment(cost), priors.size());
}

LossReport loss_and_grad(const PredictionSet& preds, std::span<const NormBox> gt, double alpha,
                         const Assignment& assignment) {
  const std::size_t k = preds.size();
  require_feasible(k, gt.size());
  if (assignment.slot_of_gt.size() != gt.size() || assignment.gt_of_slot.size() != k) {
    throw Error(ErrorCode::InfeasibleMatch, "assignment does not fit the prediction set");
  }

  LossReport r;
  r.grad_locations.assign(k, Vec4{0.0, 0.0, 0.0, 0.0});
  r.grad_logits.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const int j = assignment.gt_of_slot[i];
    const double z = preds.logits[i];
    if (j >= 0) {
      const NormBox& g = gt[static_cast<std::size_t>(j)];
      const Vec4& l = preds.locations[i];
      r.f_match += half_sq_dist(l, g);
      r.grad_locations[i] = {alpha * (l[0] - g.xmin), alpha * (l[1] - g.ymin),
                             alpha * (l[2] - g.xmax), alpha * (l[3] - g.ymax)};
      r.f_conf += softplus(-z);  // -log sigmoid(z)
      r.grad_logits[i] = preds.confidences[i] - 1.0;
    } else {
      r.f_conf += softplus(z);  // -log(1 - sigmoid(z))
      r.grad_logits[i] = preds.confidences[i];
    }
  }
  r.f_total = alpha * r.f_match + r.f_conf;
  r.assignment = assignment;
  return r;
}

LossReport multibox_loss(const PredictionSet& preds, std::span<const NormBox> gt, double alpha,
                         MatchMode mode, const PriorSet* priors) {
  if (mode == MatchMode::direct) {
    return loss_and_grad(preds, gt, alpha, solve_assignment(preds, gt, alpha));
  }
  if (priors == nullptr || priors->size() != preds.size()) {
    throw Error(ErrorCode::MissingPriors, "prior matching needs one prior per prediction slot");
  }
  return loss_and_grad(preds, gt, alpha, solve_prior_assignment(priors->priors, gt));
}

}  // namespace multibox
