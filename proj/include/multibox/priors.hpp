#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "multibox/geometry.hpp"

namespace multibox {

using Vec4 = std::array<double, 4>;

/// K centroid boxes. Prediction slot i regresses a residual relative to
/// priors[i], so the order is part of a trained model's identity.
struct PriorSet {
  std::vector<NormBox> priors;
  std::string source;
  std::uint64_t seed = 0;
  int iterations = 0;

  std::size_t size() const noexcept { return priors.size(); }
};

struct KMeansOptions {
  int max_iterations = 200;
  double tolerance = 1e-9;
  /// Independent k-means++ restarts; the lowest objective wins.
  int restarts = 1;
};

/// k-means over corner 4-vectors with seeded k-means++ initialization.
/// Empty clusters are re-seeded from the point farthest from its centroid.
/// Output is sorted by (xmin, ymin, xmax, ymax). Throws TooFewBoxes when
/// boxes.size() < k.
PriorSet fit_priors(std::span<const NormBox> boxes, int k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// Sum over points of the squared distance to the nearest centroid.
double kmeans_objective(std::span<const NormBox> boxes, std::span<const NormBox> centroids);

/// Objective after every Lloyd iteration of the last run of fit_priors with
/// the same arguments (restart that won). Exposed for monotonicity checks.
std::vector<double> kmeans_trace(std::span<const NormBox> boxes, int k, std::uint64_t seed,
                                 const KMeansOptions& options = {});

Vec4 encode_residual(const NormBox& prior, const NormBox& target) noexcept;

/// Raw prior + residual without clipping; this is the location the loss sees.
Vec4 apply_residual(const NormBox& prior, const Vec4& residual) noexcept;

/// prior + residual, coordinate order repaired by swapping, clipped to [0,1]^2.
NormBox decode(const NormBox& prior, const Vec4& residual) noexcept;

/// Converts a raw 4-vector location into a valid clipped box.
NormBox to_box(const Vec4& location) noexcept;

void write_priors(std::ostream& out, const PriorSet& priors);
PriorSet read_priors(std::istream& in);
void save_priors(const std::string& path, const PriorSet& priors);
PriorSet load_priors(const std::string& path);

}  // namespace multibox
