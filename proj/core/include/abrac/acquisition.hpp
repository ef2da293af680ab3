#pragma once

#include <functional>
#include <span>
#include <vector>

#include "abrac/ard_blr.hpp"
#include "abrac/matrix.hpp"
#include "abrac/rng.hpp"

namespace abrac {

/// Axis-aligned box the optimization runs over.
struct ConfigSpace {
  std::vector<double> lower;
  std::vector<double> upper;

  ConfigSpace() = default;
  ConfigSpace(std::vector<double> lo, std::vector<double> hi);

  std::size_t dim() const noexcept { return lower.size(); }
  bool contains(std::span<const double> x) const;
  std::vector<double> sample(RngStream& rng) const;
};

struct AcquisitionConfig {
  std::size_t candidate_count = 1000;
  bool local_refinement = true;
  int refinement_steps = 3;
};

/// Expected improvement for minimization: E[max{0, best - f(x)}]. With
/// sigma > 0 this is sigma (z Phi(z) + phi(z)), z = (best - mean)/sigma; the
/// sigma = 0 limit is max(0, best - mean).
double expected_improvement(const PosteriorPrediction& pred, double best);

using PosteriorFn =
    std::function<PosteriorPrediction(std::span<const double>)>;

/// Random multi-start EI maximization: scores `candidate_count` uniform
/// points, then optionally polishes the best one with coordinate-wise
/// golden-section passes. Ties break toward the earliest candidate. If every
/// candidate has zero EI, falls back to the candidate with the highest
/// posterior variance.
std::vector<double> maximize_ei(const PosteriorFn& posterior,
                                const ConfigSpace& space, double best,
                                const AcquisitionConfig& cfg, RngStream& rng);

/// Same selection rule over a finite candidate pool (tabular objectives):
/// scores `candidate_count` rows sampled uniformly from `pool`.
std::vector<double> maximize_ei_discrete(const PosteriorFn& posterior,
                                         const DenseMatrix& pool, double best,
                                         const AcquisitionConfig& cfg,
                                         RngStream& rng);

}  // namespace abrac
