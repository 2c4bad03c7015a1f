#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace respscl {

// Denominator of the contrastive softmax: NegativesOnly sums over different-
// label views only (the printed form of the loss); AllButSelf sums over every
// view except the anchor (the standard formulation). Both are supported and
// tested; NegativesOnly is the default.
enum class DenominatorMode { NegativesOnly, AllButSelf };

// Reduction::Default keeps each loss's native form: mean over samples for
// cross entropy, sum over anchors for the contrastive loss.
enum class Reduction { Default, Sum, Mean };

struct LossConfig {
  double tau = 0.06;
  double alpha = 0.5;                       // hybrid tradeoff
  std::vector<double> lambdas{0.25, 0.75};  // per-head weights, class first
  DenominatorMode denominator_mode = DenominatorMode::NegativesOnly;
  Reduction reduction = Reduction::Default;

  void validate() const {
    if (!(tau > 0)) {
      throw std::invalid_argument("loss.tau must be > 0");
    }
    if (alpha < 0 || alpha > 1) {
      throw std::invalid_argument("loss.alpha must be in [0, 1]");
    }
    for (double l : lambdas) {
      if (!(l > 0)) {
        throw std::invalid_argument("loss.lambdas must be positive");
      }
    }
  }
};

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-anchor positive/negative index sets over a multiviewed batch.
// positives[i] excludes i itself; negatives[i] holds all different-label views.
struct PairSets {
  std::vector<std::vector<int>> positives;
  std::vector<std::vector<int>> negatives;
};

inline PairSets pair_sets(const std::vector<int>& labels) {
  const int n = static_cast<int>(labels.size());
  PairSets s;
  s.positives.resize(static_cast<size_t>(n));
  s.negatives.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) {
        continue;
      }
      if (labels[static_cast<size_t>(j)] == labels[static_cast<size_t>(i)]) {
        s.positives[static_cast<size_t>(i)].push_back(j);
      } else {
        s.negatives[static_cast<size_t>(i)].push_back(j);
      }
    }
  }
  return s;
}

// Cross entropy over probability rows (rows must already sum to 1).
template <typename T>
T cross_entropy(const MatX<T>& probs, const std::vector<int>& targets,
                Reduction reduction = Reduction::Default) {
  const auto b = probs.rows();
  const auto c = probs.cols();
  if (static_cast<Eigen::Index>(targets.size()) != b) {
    throw std::invalid_argument("cross_entropy: batch/target size mismatch");
  }
  T total = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const int t = targets[static_cast<size_t>(i)];
    if (t < 0 || t >= c) {
      throw std::invalid_argument("cross_entropy: target index " + std::to_string(t) +
                                  " out of range [0, " + std::to_string(c) + ")");
    }
    const T row_sum = probs.row(i).sum();
    if (std::abs(static_cast<double>(row_sum) - 1.0) > 1e-5) {
      throw std::invalid_argument("cross_entropy: probability row " + std::to_string(i) +
                                  " does not sum to 1");
    }
    total -= std::log(std::max(probs(i, t), static_cast<T>(1e-300)));
  }
  if (reduction == Reduction::Sum) {
    return total;
  }
  return total / static_cast<T>(b);  // Default and Mean
}

template <typename T>
struct ScalarGrad {
  T value = 0;
  MatX<T> grad;
};

// Numerically stable softmax + cross entropy on logits, with the gradient
// w.r.t. the logits. This is the node the training graph uses.
template <typename T>
ScalarGrad<T> softmax_cross_entropy(const MatX<T>& logits,
                                    const std::vector<int>& targets,
                                    Reduction reduction = Reduction::Default) {
  const auto b = logits.rows();
  const auto c = logits.cols();
  if (static_cast<Eigen::Index>(targets.size()) != b) {
    throw std::invalid_argument("softmax_cross_entropy: batch/target size mismatch");
  }
  ScalarGrad<T> out;
  out.grad.resize(b, c);
  T total = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const int t = targets[static_cast<size_t>(i)];
    if (t < 0 || t >= c) {
      throw std::invalid_argument("softmax_cross_entropy: target out of range");
    }
    const T m = logits.row(i).maxCoeff();
    T z = 0;
    for (Eigen::Index j = 0; j < c; ++j) {
      z += std::exp(logits(i, j) - m);
    }
    const T log_z = std::log(z) + m;
    total += log_z - logits(i, t);
    for (Eigen::Index j = 0; j < c; ++j) {
      out.grad(i, j) = std::exp(logits(i, j) - log_z);
    }
    out.grad(i, t) -= static_cast<T>(1);
  }
  if (reduction == Reduction::Sum) {
    out.value = total;
  } else {
    out.value = total / static_cast<T>(b);
    out.grad /= static_cast<T>(b);
  }
  return out;
}

template <typename T>
struct SupconOut {
  T value = 0;
  MatX<T> grad;  // dL/dz, same shape as z
  int skipped_anchors = 0;
  int active_anchors = 0;
};

// Supervised contrastive loss over a multiviewed batch of projected
// embeddings z [2N x D] with one label per view. Anchors whose denominator
// set is empty (single-label batch under NegativesOnly) are skipped and
// counted; a batch with no usable anchor is an error.
template <typename T>
SupconOut<T> supcon_loss(const MatX<T>& z, const std::vector<int>& labels,
                         const LossConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(z.rows());
  if (static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("supcon_loss: label/view count mismatch");
  }
  if (n < 2) {
    throw std::invalid_argument("supcon_loss: need at least two views");
  }
  const T inv_tau = static_cast<T>(1.0 / cfg.tau);
  const bool negatives_only = cfg.denominator_mode == DenominatorMode::NegativesOnly;

  const MatX<T> sim = (z * z.transpose()) * inv_tau;  // s_ij / tau
  const PairSets sets = pair_sets(labels);

  SupconOut<T> out;
  out.grad = MatX<T>::Zero(n, static_cast<int>(z.cols()));
  MatX<T> g = MatX<T>::Zero(n, n);  // dL/d(sim_ij), pre 1/tau factor

  T total = 0;
  for (int i = 0; i < n; ++i) {
    const auto& pos = sets.positives[static_cast<size_t>(i)];
    const auto& neg = sets.negatives[static_cast<size_t>(i)];
    const std::vector<int>* den = &neg;
    std::vector<int> all_but_self;
    if (!negatives_only) {
      all_but_self.reserve(static_cast<size_t>(n) - 1);
      for (int j = 0; j < n; ++j) {
        if (j != i) {
          all_but_self.push_back(j);
        }
      }
      den = &all_but_self;
    }
    if (pos.empty() || den->empty()) {
      ++out.skipped_anchors;
      continue;
    }
    ++out.active_anchors;

    // log-sum-exp over the denominator set, stabilized per anchor
    T m = -std::numeric_limits<T>::infinity();
    for (int j : *den) {
      m = std::max(m, sim(i, j));
    }
    T zsum = 0;
    for (int j : *den) {
      zsum += std::exp(sim(i, j) - m);
    }
    const T log_den = std::log(zsum) + m;

    const T inv_p = static_cast<T>(1) / static_cast<T>(pos.size());
    for (int p : pos) {
      total += -inv_p * (sim(i, p) - log_den);
      g(i, p) -= inv_p;
    }
    // the log-denominator appears once per positive; coefficients sum to 1
    for (int j : *den) {
      g(i, j) += std::exp(sim(i, j) - log_den);
    }
  }

  if (out.active_anchors == 0) {
    throw std::runtime_error("degenerate batch: single label");
  }

  T scale = inv_tau;
  if (cfg.reduction == Reduction::Mean) {
    const T inv_a = static_cast<T>(1) / static_cast<T>(out.active_anchors);
    total *= inv_a;
    scale *= inv_a;
  }
  out.value = total;
  // sim = z z^T / tau  =>  dL/dz = (G + G^T) z / tau
  out.grad = (g + g.transpose()) * z * scale;
  return out;
}

template <typename T>
struct MultiSupconOut {
  T value = 0;
  std::vector<T> per_head;
  std::vector<SupconOut<T>> heads;
};

// Weighted sum of per-head contrastive losses; each head has its own
// projected embeddings and labels. Labels must be present (>= 0) for every
// view handed to a head.
template <typename T>
MultiSupconOut<T> multi_supcon_loss(const std::vector<MatX<T>>& z_heads,
                                    const std::vector<std::vector<int>>& labels_heads,
                                    const LossConfig& cfg) {
  cfg.validate();
  const size_t k = z_heads.size();
  if (k == 0 || labels_heads.size() != k) {
    throw std::invalid_argument("multi_supcon_loss: head count mismatch");
  }
  if (cfg.lambdas.size() < k) {
    throw std::invalid_argument("multi_supcon_loss: need one lambda per head");
  }
  MultiSupconOut<T> out;
  for (size_t h = 0; h < k; ++h) {
    std::string missing;
    for (size_t i = 0; i < labels_heads[h].size(); ++i) {
      if (labels_heads[h][i] < 0) {
        missing += (missing.empty() ? "" : ", ") + std::to_string(i);
      }
    }
    if (!missing.empty()) {
      throw std::invalid_argument("multi_supcon_loss: head " + std::to_string(h) +
                                  " missing labels for views [" + missing + "]");
    }
    auto head = supcon_loss(z_heads[h], labels_heads[h], cfg);
    out.per_head.push_back(head.value);
    out.value += static_cast<T>(cfg.lambdas[h]) * head.value;
    head.grad *= static_cast<T>(cfg.lambdas[h]);
    out.heads.push_back(std::move(head));
  }
  return out;
}

template <typename T>
T hybrid_loss(T ce, T scl, const LossConfig& cfg) {
  cfg.validate();
  const T a = static_cast<T>(cfg.alpha);
  return a * ce + (static_cast<T>(1) - a) * scl;
}

}  // namespace respscl
