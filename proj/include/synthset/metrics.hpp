#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "synthset/common.hpp"
#include "synthset/dataset.hpp"

namespace synthset {

struct PredictionRow {
  std::string sample_id;
  std::string actual;
  std::string predicted;
};

/// Lines of `sample_id,actual,predicted`; an identical header line is skipped.
std::vector<PredictionRow> parse_predictions(std::string_view text);
std::vector<PredictionRow> read_predictions_file(const std::string& path);

using CountMatrix = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>;

/// Rows are actual classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  CountMatrix counts;
  Eigen::MatrixXd row_normalized;  // zero rows stay zero
};

/// Tallies predictions over `classes`. Throws Input for an empty set or a
/// class name outside `classes` (the message names the row).
ConfusionMatrix confusion(const std::vector<PredictionRow>& rows,
                          const std::vector<std::string>& classes);

/// Row normalization of a count matrix.
Eigen::MatrixXd normalize_rows(const CountMatrix& counts);

/// trace / total.
double accuracy(const ConfusionMatrix& cm);
double accuracy(const std::vector<PredictionRow>& rows, const std::vector<std::string>& classes);

/// Diagonal of the row-normalized matrix, keyed by class.
std::map<std::string, double> per_class_accuracy(const ConfusionMatrix& cm);

/// Mean of the per-class accuracies over classes that occur.
double macro_accuracy(const ConfusionMatrix& cm);

/// Two-decimal cell as printed in the confusion table: "-" for a zero count,
/// otherwise the row share rounded half-up to 0.01.
std::string format_share(long count, double share);

/// Table of row-normalized shares, two decimals, "-" for empty cells.
std::string render_normalized(const ConfusionMatrix& cm);
std::string render_counts(const ConfusionMatrix& cm);

// ---------------------------------------------------------------------------

struct RunPoint {
  long dataset_size = 0;
  std::vector<double> accuracies;  // one per repetition
};

struct RunSeries {
  std::vector<RunPoint> points;
};

/// CSV lines `dataset_size,accuracy`, one per repetition; optional header
/// `dataset_size,accuracy`. Rows with the same size are grouped.
RunSeries parse_runs(std::string_view text);
RunSeries read_runs_file(const std::string& path);

enum class StdKind { Population, Sample };

struct CurvePoint {
  long dataset_size = 0;
  std::size_t repetitions = 0;
  double mean = 0.0;
  double std = 0.0;
  double band_low = 0.0;   // mean - std
  double band_high = 0.0;  // mean + std
};

/// Mean and one-std band per dataset size, sorted by size.
std::vector<CurvePoint> aggregate_runs(const RunSeries& series,
                                       StdKind kind = StdKind::Population);

std::string render_curve_table(const std::vector<CurvePoint>& curve);
std::string render_curve_csv(const std::vector<CurvePoint>& curve);
/// Log-x line plot with the shaded band.
std::string render_curve_svg(const std::vector<CurvePoint>& curve);

// ---------------------------------------------------------------------------

struct ModeThroughput {
  std::size_t images = 0;
  double total_seconds = 0.0;
  double mean_seconds = 0.0;
};

struct ThroughputReport {
  std::size_t images = 0;
  double wall_seconds = 0.0;  // summed per-image latency
  double mean_seconds_per_image = 0.0;
  std::map<Mode, ModeThroughput> per_mode;
};

ThroughputReport throughput_report(const std::vector<SampleRecord>& records);
std::string render_throughput(const ThroughputReport& report);

}  // namespace synthset
