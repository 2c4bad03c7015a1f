#pragma once

// Independent scalar-loop oracles used to pin down the vectorized loss and
// metric implementations. These deliberately share no code with the library
// beyond basic types.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "respscl/losses.h"

namespace respscl::testing {

// Plain triple-loop evaluation of the contrastive loss: for every anchor i,
// average over positives p of -log(exp(z_i.z_p/tau) / sum_n exp(z_i.z_n/tau)),
// denominator over negatives or over everything but the anchor.
inline double supcon_oracle(const MatX<double>& z, const std::vector<int>& labels,
                            double tau, bool negatives_only,
                            bool mean_over_anchors = false) {
  const int n = static_cast<int>(z.rows());
  double total = 0;
  int active = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> pos, den;
    for (int j = 0; j < n; ++j) {
      if (j == i) {
        continue;
      }
      if (labels[static_cast<size_t>(j)] == labels[static_cast<size_t>(i)]) {
        pos.push_back(j);
      }
      if (negatives_only) {
        if (labels[static_cast<size_t>(j)] != labels[static_cast<size_t>(i)]) {
          den.push_back(j);
        }
      } else {
        den.push_back(j);
      }
    }
    if (pos.empty() || den.empty()) {
      continue;
    }
    ++active;
    double anchor = 0;
    for (int p : pos) {
      double dot_ip = 0;
      for (int d = 0; d < z.cols(); ++d) {
        dot_ip += z(i, d) * z(p, d);
      }
      double denom = 0;
      for (int nn : den) {
        double dot_in = 0;
        for (int d = 0; d < z.cols(); ++d) {
          dot_in += z(i, d) * z(nn, d);
        }
        denom += std::exp(dot_in / tau);
      }
      anchor += -std::log(std::exp(dot_ip / tau) / denom);
    }
    total += anchor / static_cast<double>(pos.size());
  }
  if (active == 0) {
    throw std::runtime_error("oracle: no usable anchors");
  }
  return mean_over_anchors ? total / active : total;
}

// Scalar-loop cross entropy over probability rows.
inline double cross_entropy_oracle(const MatX<double>& probs,
                                   const std::vector<int>& targets,
                                   bool mean = true) {
  double total = 0;
  for (int i = 0; i < probs.rows(); ++i) {
    total -= std::log(probs(i, targets[static_cast<size_t>(i)]));
  }
  return mean ? total / static_cast<double>(probs.rows()) : total;
}

// Central finite difference of a scalar function of one coordinate.
template <typename F>
double central_diff(F&& f, double& slot, double h = 1e-4) {
  const double saved = slot;
  slot = saved + h;
  const double up = f();
  slot = saved - h;
  const double down = f();
  slot = saved;
  return (up - down) / (2 * h);
}

// Relative error with an absolute floor so that near-zero gradient pairs do
// not register spurious failures from finite-difference truncation noise.
inline double grad_rel_error(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return diff / scale;
}

inline void mean_std_oracle(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0;
  for (double x : xs) {
    mean += x;
  }
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) {
    sd = 0;
    return;
  }
  double ss = 0;
  for (double x : xs) {
    ss += (x - mean) * (x - mean);
  }
  sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace respscl::testing
