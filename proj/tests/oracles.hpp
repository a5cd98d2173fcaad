// Test-only oracles, kept independent of the implementation paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "prismquant/gmm.hpp"

namespace prismquant::testing {

/// Classical single-Gaussian rate at a per-dimension distortion target,
/// solved exactly on the sorted spectrum (no bisection): find the water
/// level from the piecewise-linear distortion sum, then integrate the rate.
inline double class_rate_at_distortion(std::vector<double> eigenvalues, double distortion) {
  const std::size_t n = eigenvalues.size();
  std::sort(eigenvalues.begin(), eigenvalues.end());
  double total = distortion * static_cast<double>(n);
  double trace = 0.0;
  for (double v : eigenvalues) trace += v;
  if (total >= trace) return 0.0;

  // prefix(j) = sum of the j smallest eigenvalues; with j modes submerged,
  // n - j active modes sit at the water level.
  double prefix = 0.0;
  double level = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double candidate = (total - prefix) / static_cast<double>(n - j);
    const double lo = j == 0 ? 0.0 : eigenvalues[j - 1];
    if (candidate >= lo && candidate <= eigenvalues[j]) {
      level = candidate;
      break;
    }
    prefix += eigenvalues[j];
  }
  double rate = 0.0;
  for (double v : eigenvalues) {
    if (v > level) rate += 0.5 * std::log2(v / level);
  }
  return rate / static_cast<double>(n);
}

/// Brute-force minimizer of sum_c pi_c R_c(D_c) subject to
/// sum_c pi_c D_c <= D, by refining grid search over the per-component
/// distortion split (K <= 3). Independent of the global-water-level result
/// it is used to check.
inline double brute_force_conditional_rate(const MixtureDictionary& dict, double distortion) {
  const std::size_t k = dict.k;
  std::vector<std::vector<double>> spectra(k);
  std::vector<double> d_max(k);
  for (std::size_t c = 0; c < k; ++c) {
    spectra[c] = dict.eigs[c].eigenvalues;
    double trace = 0.0;
    for (double v : spectra[c]) trace += v;
    d_max[c] = trace / static_cast<double>(dict.n);
  }
  const auto class_rate = [&](std::size_t c, double d) {
    return class_rate_at_distortion(spectra[c], d);
  };

  if (k == 1) return class_rate(0, distortion);

  // Objective over the first k-1 distortions; the last takes the remaining
  // budget (clamped to its rate-0 point, leaving the constraint slack).
  const auto objective = [&](const std::vector<double>& head) {
    double used = 0.0;
    double rate = 0.0;
    for (std::size_t c = 0; c + 1 < k; ++c) {
      used += dict.priors[c] * head[c];
      rate += dict.priors[c] * class_rate(c, head[c]);
    }
    const double remaining = (distortion - used) / dict.priors[k - 1];
    if (remaining <= 0.0) return std::numeric_limits<double>::infinity();
    rate += dict.priors[k - 1] * class_rate(k - 1, std::min(remaining, d_max[k - 1]));
    return rate;
  };

  // Stage 1: plain per-component distortion grid (the brute force proper).
  // Stage 2: the reduced objective is jointly convex (sums of convex rate
  // functions composed with affine budget elimination), so nested
  // golden-section refinement converges to the joint optimum, including at
  // the activation kinks where a shrinking grid window stalls. The final
  // answer is the better of the two stages.
  constexpr std::size_t kGrid = 129;
  std::vector<double> floor_(k - 1), ceil_(k - 1);
  for (std::size_t c = 0; c + 1 < k; ++c) {
    floor_[c] = 1e-12 * d_max[c];
    ceil_[c] = d_max[c];
  }
  double best_rate = std::numeric_limits<double>::infinity();
  {
    std::vector<double> head(k - 1);
    const std::size_t cells = k == 2 ? kGrid : kGrid * kGrid;
    for (std::size_t cell = 0; cell < cells; ++cell) {
      std::size_t rest = cell;
      for (std::size_t c = 0; c + 1 < k; ++c) {
        const std::size_t idx = rest % kGrid;
        rest /= kGrid;
        head[c] = floor_[c] + (ceil_[c] - floor_[c]) * static_cast<double>(idx) /
                                  static_cast<double>(kGrid - 1);
      }
      best_rate = std::min(best_rate, objective(head));
    }
  }

  const auto golden_min = [](double lo, double hi, const auto& f) {
    constexpr double kPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - kPhi * (b - a);
    double x2 = a + kPhi * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    double best = std::min(f1, f2);
    for (int i = 0; i < 200 && (b - a) > 1e-14 * (hi - lo + 1.0); ++i) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - kPhi * (b - a);
        f1 = f(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + kPhi * (b - a);
        f2 = f(x2);
      }
      best = std::min(best, std::min(f1, f2));
    }
    return best;
  };

  double refined;
  if (k == 2) {
    refined = golden_min(floor_[0], ceil_[0],
                         [&](double d0) { return objective({d0}); });
  } else {
    refined = golden_min(floor_[0], ceil_[0], [&](double d0) {
      return golden_min(floor_[1], ceil_[1],
                        [&](double d1) { return objective({d0, d1}); });
    });
  }
  return std::min(best_rate, refined);
}

}  // namespace prismquant::testing
