#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace respscl {

// Row = true class, column = predicted class.
using Confusion = Eigen::MatrixXi;

struct MetricCounts {
  Confusion confusion;
  int normal_class = 0;

  void add(int true_class, int pred_class) { confusion(true_class, pred_class)++; }
  static MetricCounts zeros(int n_classes, int normal_class = 0);
};

// Challenge metrics as percentages. Sp is recall of the normal class; Se is
// the fraction of anomalous cycles assigned their exact anomaly class
// (lenient = any anomaly counts); Sc and HS are their arithmetic and
// harmonic means.
struct ScoreReport {
  double se = 0;
  double sp = 0;
  double sc = 0;
  double hs = 0;
};

ScoreReport score(const Confusion& confusion, int normal_class,
                  bool lenient_binary = false);
ScoreReport score_from_rates(double se_pct, double sp_pct);

// Macro-averaged recall, in [0, 1].
double balanced_accuracy(const Confusion& confusion);

// Best epoch by Sc; ties resolve to the earliest epoch.
std::pair<int, ScoreReport> track_best(
    const std::vector<std::pair<int, ScoreReport>>& history);

struct AggregateReport {
  ScoreReport mean;
  ScoreReport stddev;  // sample standard deviation
  int n_runs = 0;
};

AggregateReport aggregate_runs(const std::vector<ScoreReport>& reports);

// Two-decimal "Se Sp Sc HS" table row, mean +/- std when aggregated.
std::string format_report(const ScoreReport& r);
std::string format_report(const AggregateReport& r);

}  // namespace respscl
