#include "psog/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace psog {
namespace {

std::vector<double> sample_errors(const std::vector<GazeSample>& predictions,
                                  const std::vector<GazeSample>& truths) {
  if (predictions.empty()) throw ConfigError("accuracy over an empty sample set");
  if (predictions.size() != truths.size())
    throw ConfigError("prediction/truth length mismatch");
  std::vector<double> e(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    e[i] = std::hypot(predictions[i].x_deg - truths[i].x_deg,
                      predictions[i].y_deg - truths[i].y_deg);
  }
  return e;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

double spatial_accuracy(const std::vector<GazeSample>& predictions,
                        const std::vector<GazeSample>& truths) {
  return mean_of(sample_errors(predictions, truths));
}

SpatialAccuracyMap accuracy_map(const std::vector<GazeSample>& predictions,
                                const std::vector<GazeSample>& truths, int grid_rows,
                                int grid_cols, double range_x_deg, double range_y_deg) {
  if (grid_rows < 1 || grid_cols < 1) throw ConfigError("accuracy map grid must be at least 1x1");
  if (range_x_deg <= 0.0 || range_y_deg <= 0.0)
    throw ConfigError("accuracy map ranges must be positive");
  auto errors = sample_errors(predictions, truths);

  SpatialAccuracyMap map;
  map.grid_rows = grid_rows;
  map.grid_cols = grid_cols;
  map.range_x_deg = range_x_deg;
  map.range_y_deg = range_y_deg;
  auto cells = static_cast<std::size_t>(grid_rows * grid_cols);
  map.mean.assign(cells, 0.0);
  map.stddev.assign(cells, 0.0);
  map.count.assign(cells, 0);

  std::vector<double> sum(cells, 0.0), sum_sq(cells, 0.0);
  auto cell_of = [](double v, double range, int n) {
    auto k = static_cast<int>(std::floor((v + range) / (2.0 * range) * n));
    return std::clamp(k, 0, n - 1);
  };
  for (std::size_t i = 0; i < truths.size(); ++i) {
    int r = cell_of(truths[i].y_deg, range_y_deg, grid_rows);
    int c = cell_of(truths[i].x_deg, range_x_deg, grid_cols);
    auto k = static_cast<std::size_t>(r * grid_cols + c);
    sum[k] += errors[i];
    sum_sq[k] += errors[i] * errors[i];
    ++map.count[k];
  }
  for (std::size_t k = 0; k < cells; ++k) {
    if (map.count[k] == 0) continue;
    auto n = static_cast<double>(map.count[k]);
    map.mean[k] = sum[k] / n;
    double var = sum_sq[k] / n - map.mean[k] * map.mean[k];
    map.stddev[k] = std::sqrt(std::max(var, 0.0));
  }
  return map;
}

std::string format_accuracy_map(const SpatialAccuracyMap& map) {
  std::ostringstream out;
  char buf[64];
  for (int r = 0; r < map.grid_rows; ++r) {
    for (int c = 0; c < map.grid_cols; ++c) {
      auto k = static_cast<std::size_t>(r * map.grid_cols + c);
      if (map.count[k] == 0) {
        std::snprintf(buf, sizeof(buf), "%14s", "--");
      } else {
        std::snprintf(buf, sizeof(buf), "%5.2f+-%-4.2f(%zu)", map.mean[k], map.stddev[k],
                      map.count[k]);
      }
      out << buf << (c + 1 == map.grid_cols ? "" : "  ");
    }
    out << "\n";
  }
  return out.str();
}

std::optional<double> BinAccuracy::delta_vs_b1(ShiftBin bin) const {
  auto b1 = mean[0];
  auto b = mean[static_cast<std::size_t>(static_cast<int>(bin))];
  if (!b1.has_value() || !b.has_value()) return std::nullopt;
  return *b - *b1;
}

BinAccuracy accuracy_by_shift_bin(const std::vector<GazeSample>& predictions,
                                  const std::vector<GazeSample>& truths,
                                  const std::vector<Shift2D>& shifts) {
  if (shifts.size() != predictions.size())
    throw ConfigError("one shift per sample is required");
  auto errors = sample_errors(predictions, truths);
  BinAccuracy acc;
  std::array<double, kNumShiftBins> sum{};
  for (std::size_t i = 0; i < errors.size(); ++i) {
    auto b = static_cast<std::size_t>(static_cast<int>(bin_shift(shifts[i])));
    sum[b] += errors[i];
    ++acc.count[b];
  }
  for (std::size_t b = 0; b < kNumShiftBins; ++b) {
    if (acc.count[b] > 0) acc.mean[b] = sum[b] / static_cast<double>(acc.count[b]);
  }
  return acc;
}

double relative_change(double baseline_deg, double comparison_deg) {
  if (baseline_deg <= 0.0) throw ConfigError("relative change needs a positive baseline");
  return 100.0 * (comparison_deg - baseline_deg) / baseline_deg;
}

AccuracyReport build_report(const std::vector<GazeSample>& predictions,
                            const std::vector<GazeSample>& truths,
                            const std::vector<Shift2D>& shifts,
                            const std::vector<int>& subject_ids) {
  if (subject_ids.size() != predictions.size())
    throw ConfigError("one subject id per sample is required");
  AccuracyReport report;
  report.overall = spatial_accuracy(predictions, truths);
  report.by_bin = accuracy_by_shift_bin(predictions, truths, shifts);
  auto errors = sample_errors(predictions, truths);
  std::map<int, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    auto& slot = acc[subject_ids[i]];
    slot.first += errors[i];
    slot.second += 1;
  }
  for (const auto& [id, slot] : acc)
    report.per_subject[id] = slot.first / static_cast<double>(slot.second);
  return report;
}

}  // namespace psog
