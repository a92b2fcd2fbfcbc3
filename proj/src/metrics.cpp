#include "synthset/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace synthset {

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Input, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<PredictionRow> parse_predictions(std::string_view text) {
  std::vector<PredictionRow> rows;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (rows.empty() && line == "sample_id,actual,predicted") continue;
    const auto f = split(line, ',');
    if (f.size() != 3)
      throw Error(ErrorKind::Parse, "predictions line " + std::to_string(line_no) +
                                        ": expected sample_id,actual,predicted");
    rows.push_back({trim(f[0]), trim(f[1]), trim(f[2])});
  }
  return rows;
}

std::vector<PredictionRow> read_predictions_file(const std::string& path) {
  return parse_predictions(slurp(path));
}

Eigen::MatrixXd normalize_rows(const CountMatrix& counts) {
  Eigen::MatrixXd out = counts.cast<double>();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double total = out.row(i).sum();
    if (total > 0.0) out.row(i) /= total;
  }
  return out;
}

ConfusionMatrix confusion(const std::vector<PredictionRow>& rows,
                          const std::vector<std::string>& classes) {
  if (rows.empty()) throw Error(ErrorKind::Input, "prediction set is empty");
  const auto index_of = [&](const std::string& name, std::size_t row) {
    const auto it = std::find(classes.begin(), classes.end(), name);
    if (it == classes.end())
      throw Error(ErrorKind::Input, "row " + std::to_string(row + 1) + ": unknown class '" + name + "'");
    return static_cast<Eigen::Index>(it - classes.begin());
  };
  ConfusionMatrix cm;
  cm.classes = classes;
  const auto n = static_cast<Eigen::Index>(classes.size());
  cm.counts = CountMatrix::Zero(n, n);
  for (std::size_t i = 0; i < rows.size(); ++i)
    ++cm.counts(index_of(rows[i].actual, i), index_of(rows[i].predicted, i));
  cm.row_normalized = normalize_rows(cm.counts);
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const long total = cm.counts.sum();
  return total == 0 ? 0.0 : static_cast<double>(cm.counts.trace()) / static_cast<double>(total);
}

double accuracy(const std::vector<PredictionRow>& rows, const std::vector<std::string>& classes) {
  return accuracy(confusion(rows, classes));
}

std::map<std::string, double> per_class_accuracy(const ConfusionMatrix& cm) {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < cm.classes.size(); ++i)
    out[cm.classes[i]] = cm.row_normalized(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
  return out;
}

double macro_accuracy(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int present = 0;
  for (Eigen::Index i = 0; i < cm.counts.rows(); ++i) {
    if (cm.counts.row(i).sum() == 0) continue;
    sum += cm.row_normalized(i, i);
    ++present;
  }
  return present ? sum / present : 0.0;
}

std::string format_share(long count, double share) {
  if (count == 0) return "-";
  // Nudge by a few ulps so shares like 0.035 stored as 0.0349999... round up.
  const double scaled = share * 100.0;
  const long cents = round_half_up(scaled + 1e-9 * std::max(1.0, std::abs(scaled)));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%ld.%02ld", cents / 100, cents % 100);
  return buf;
}

namespace {

std::string render_grid(const ConfusionMatrix& cm, bool shares) {
  const std::string corner = "actual\\pred";
  std::size_t label_width = corner.size(), cell_width = 4;
  for (const auto& c : cm.classes) {
    label_width = std::max(label_width, c.size());
    cell_width = std::max(cell_width, c.size());
  }
  std::ostringstream os;
  const auto left = [&](const std::string& s) { os << s << std::string(label_width - s.size(), ' '); };
  const auto right = [&](const std::string& s) {
    os << std::string(cell_width + 2 - std::min(s.size(), cell_width), ' ') << s;
  };
  left(corner);
  for (const auto& c : cm.classes) right(c);
  os << "\n";
  for (Eigen::Index i = 0; i < cm.counts.rows(); ++i) {
    left(cm.classes[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < cm.counts.cols(); ++j)
      right(shares ? format_share(cm.counts(i, j), cm.row_normalized(i, j)) : std::to_string(cm.counts(i, j)));
    os << "\n";
  }
  return os.str();
}

}  // namespace

std::string render_normalized(const ConfusionMatrix& cm) { return render_grid(cm, true); }
std::string render_counts(const ConfusionMatrix& cm) { return render_grid(cm, false); }

// ---------------------------------------------------------------------------

RunSeries parse_runs(std::string_view text) {
  std::map<long, std::vector<double>> grouped;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#' || line == "dataset_size,accuracy") continue;
    const auto f = split(line, ',');
    const std::string where = "runs line " + std::to_string(line_no);
    if (f.size() != 2) throw Error(ErrorKind::Parse, where + ": expected dataset_size,accuracy");
    long size = 0;
    const std::string s = trim(f[0]);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), size);
    if (ec != std::errc{} || ptr != s.data() + s.size() || size <= 0)
      throw Error(ErrorKind::Parse, where + ": bad dataset size '" + s + "'");
    double acc = 0.0;
    try {
      std::size_t used = 0;
      const std::string a = trim(f[1]);
      acc = std::stod(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Parse, where + ": bad accuracy '" + f[1] + "'");
    }
    grouped[size].push_back(acc);
  }
  RunSeries series;
  for (auto& [size, accs] : grouped) series.points.push_back({size, std::move(accs)});
  return series;
}

RunSeries read_runs_file(const std::string& path) { return parse_runs(slurp(path)); }

std::vector<CurvePoint> aggregate_runs(const RunSeries& series, StdKind kind) {
  std::vector<CurvePoint> curve;
  for (const auto& p : series.points) {
    if (p.accuracies.empty())
      throw Error(ErrorKind::Input, "dataset size " + std::to_string(p.dataset_size) +
                                        " has no repetitions");
    // Sorted input makes the result independent of repetition order.
    std::vector<double> xs = p.accuracies;
    std::sort(xs.begin(), xs.end());
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (double x : xs) {  // Welford
      ++n;
      const double delta = x - mean;
      mean += delta / static_cast<double>(n);
      m2 += delta * (x - mean);
    }
    const double denom = kind == StdKind::Population ? static_cast<double>(n)
                                                     : static_cast<double>(n > 1 ? n - 1 : 1);
    const double sd = std::sqrt(m2 / denom);
    curve.push_back({p.dataset_size, n, mean, sd, mean - sd, mean + sd});
  }
  std::sort(curve.begin(), curve.end(),
            [](const CurvePoint& a, const CurvePoint& b) { return a.dataset_size < b.dataset_size; });
  return curve;
}

std::string render_curve_table(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%12s %5s %8s %8s %8s %8s\n", "dataset_size", "reps", "mean",
                "std", "low", "high");
  os << buf;
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%12ld %5zu %8.4f %8.4f %8.4f %8.4f\n", p.dataset_size,
                  p.repetitions, p.mean, p.std, p.band_low, p.band_high);
    os << buf;
  }
  return os.str();
}

std::string render_curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << "dataset_size,repetitions,mean,std,band_low,band_high\n";
  char buf[160];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%ld,%zu,%.6f,%.6f,%.6f,%.6f\n", p.dataset_size, p.repetitions,
                  p.mean, p.std, p.band_low, p.band_high);
    os << buf;
  }
  return os.str();
}

std::string render_curve_svg(const std::vector<CurvePoint>& curve) {
  const double W = 640, H = 360, left = 60, right = 20, top = 20, bottom = 40;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (curve.empty()) {
    os << "</svg>\n";
    return os.str();
  }
  double xmin = std::log10(static_cast<double>(curve.front().dataset_size));
  double xmax = std::log10(static_cast<double>(curve.back().dataset_size));
  if (xmax - xmin < 1e-9) xmax = xmin + 1.0;
  double ymin = 1.0, ymax = 0.0;
  for (const auto& p : curve) {
    ymin = std::min(ymin, p.band_low);
    ymax = std::max(ymax, p.band_high);
  }
  ymin = std::floor(ymin * 20.0) / 20.0;
  ymax = std::ceil(ymax * 20.0) / 20.0;
  if (ymax - ymin < 1e-9) ymax = ymin + 0.05;
  const auto px = [&](long size) {
    return left + (std::log10(static_cast<double>(size)) - xmin) / (xmax - xmin) * (W - left - right);
  };
  const auto py = [&](double v) { return top + (ymax - v) / (ymax - ymin) * (H - top - bottom); };

  os << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\""
     << H - bottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<polygon fill=\"orange\" fill-opacity=\"0.2\" points=\"";
  for (const auto& p : curve) os << px(p.dataset_size) << "," << py(p.band_high) << " ";
  for (auto it = curve.rbegin(); it != curve.rend(); ++it)
    os << px(it->dataset_size) << "," << py(it->band_low) << " ";
  os << "\"/>\n<polyline fill=\"none\" stroke=\"orange\" stroke-width=\"2\" points=\"";
  for (const auto& p : curve) os << px(p.dataset_size) << "," << py(p.mean) << " ";
  os << "\"/>\n";
  for (const auto& p : curve) {
    os << "<text x=\"" << px(p.dataset_size) << "\" y=\"" << H - bottom + 16
       << "\" font-size=\"11\" text-anchor=\"middle\">" << p.dataset_size << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = ymin + (ymax - ymin) * k / 4.0;
    char label[16];
    std::snprintf(label, sizeof label, "%.2f", v);
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4
       << "\" font-size=\"11\" text-anchor=\"end\">" << label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------

ThroughputReport throughput_report(const std::vector<SampleRecord>& records) {
  ThroughputReport report;
  for (const auto& r : records) {
    ++report.images;
    report.wall_seconds += r.latency_seconds;
    auto& m = report.per_mode[r.mode];
    ++m.images;
    m.total_seconds += r.latency_seconds;
  }
  if (report.images) report.mean_seconds_per_image = report.wall_seconds / report.images;
  for (auto& [mode, m] : report.per_mode) m.mean_seconds = m.total_seconds / m.images;
  return report;
}

std::string render_throughput(const ThroughputReport& report) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "images: %zu\nseconds: %.3f\nmean seconds/image: %.3f\n",
                report.images, report.wall_seconds, report.mean_seconds_per_image);
  os << buf;
  for (const auto& [mode, m] : report.per_mode) {
    std::snprintf(buf, sizeof buf, "  %s: %zu images, mean %.3f s\n",
                  std::string(to_string(mode)).c_str(), m.images, m.mean_seconds);
    os << buf;
  }
  return os.str();
}

}  // namespace synthset
