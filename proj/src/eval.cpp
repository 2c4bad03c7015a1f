#include "respscl/eval.h"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace respscl {

MetricCounts MetricCounts::zeros(int n_classes, int normal_class) {
  MetricCounts c;
  c.confusion = Confusion::Zero(n_classes, n_classes);
  c.normal_class = normal_class;
  return c;
}

ScoreReport score(const Confusion& confusion, int normal_class, bool lenient_binary) {
  const int c = static_cast<int>(confusion.rows());
  if (c < 2 || confusion.cols() != c) {
    throw std::invalid_argument("score: confusion matrix must be CxC with C >= 2");
  }
  if (normal_class < 0 || normal_class >= c) {
    throw std::invalid_argument("score: normal class index out of range");
  }

  const int normal_support = confusion.row(normal_class).sum();
  int anomaly_support = 0;
  int anomaly_correct = 0;
  for (int i = 0; i < c; ++i) {
    if (i == normal_class) {
      continue;
    }
    anomaly_support += confusion.row(i).sum();
    if (lenient_binary) {
      for (int j = 0; j < c; ++j) {
        if (j != normal_class) {
          anomaly_correct += confusion(i, j);
        }
      }
    } else {
      anomaly_correct += confusion(i, i);
    }
  }
  if (normal_support == 0 || anomaly_support == 0) {
    throw std::runtime_error("degenerate test set: missing normal or anomaly support");
  }

  ScoreReport r;
  r.sp = 100.0 * confusion(normal_class, normal_class) / normal_support;
  r.se = 100.0 * anomaly_correct / anomaly_support;
  r.sc = (r.se + r.sp) / 2.0;
  r.hs = (r.se + r.sp) > 0 ? 2.0 * r.se * r.sp / (r.se + r.sp) : 0.0;
  return r;
}

ScoreReport score_from_rates(double se_pct, double sp_pct) {
  ScoreReport r;
  r.se = se_pct;
  r.sp = sp_pct;
  r.sc = (se_pct + sp_pct) / 2.0;
  r.hs = (se_pct + sp_pct) > 0 ? 2.0 * se_pct * sp_pct / (se_pct + sp_pct) : 0.0;
  return r;
}

double balanced_accuracy(const Confusion& confusion) {
  const int c = static_cast<int>(confusion.rows());
  double acc = 0;
  int counted = 0;
  for (int i = 0; i < c; ++i) {
    const int support = confusion.row(i).sum();
    if (support == 0) {
      continue;
    }
    acc += static_cast<double>(confusion(i, i)) / support;
    ++counted;
  }
  if (counted == 0) {
    throw std::runtime_error("balanced_accuracy: empty confusion matrix");
  }
  return acc / counted;
}

std::pair<int, ScoreReport> track_best(
    const std::vector<std::pair<int, ScoreReport>>& history) {
  if (history.empty()) {
    throw std::invalid_argument("track_best: empty history");
  }
  size_t best = 0;
  for (size_t i = 1; i < history.size(); ++i) {
    if (history[i].second.sc > history[best].second.sc) {
      best = i;
    }
  }
  return history[best];
}

AggregateReport aggregate_runs(const std::vector<ScoreReport>& reports) {
  if (reports.empty()) {
    throw std::invalid_argument("aggregate_runs: need at least one run");
  }
  AggregateReport out;
  out.n_runs = static_cast<int>(reports.size());
  auto agg = [&](auto field) {
    double mean = 0;
    for (const auto& r : reports) {
      mean += r.*field;
    }
    mean /= static_cast<double>(reports.size());
    double ss = 0;
    for (const auto& r : reports) {
      ss += (r.*field - mean) * (r.*field - mean);
    }
    const double sd =
        reports.size() > 1 ? std::sqrt(ss / static_cast<double>(reports.size() - 1)) : 0.0;
    return std::pair<double, double>{mean, sd};
  };
  std::tie(out.mean.se, out.stddev.se) = agg(&ScoreReport::se);
  std::tie(out.mean.sp, out.stddev.sp) = agg(&ScoreReport::sp);
  std::tie(out.mean.sc, out.stddev.sc) = agg(&ScoreReport::sc);
  std::tie(out.mean.hs, out.stddev.hs) = agg(&ScoreReport::hs);
  return out;
}

std::string format_report(const ScoreReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "Se %.2f  Sp %.2f  Sc %.2f  HS %.2f", r.se, r.sp,
                r.sc, r.hs);
  return buf;
}

std::string format_report(const AggregateReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "Se %.2f±%.2f  Sp %.2f±%.2f  Sc %.2f±%.2f  HS %.2f±%.2f (%d runs)",
                r.mean.se, r.stddev.se, r.mean.sp, r.stddev.sp, r.mean.sc, r.stddev.sc,
                r.mean.hs, r.stddev.hs, r.n_runs);
  return buf;
}

}  // namespace respscl
