#include "psog/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace psog {
namespace {

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

double kahan_mean(const std::vector<double>& vals) {
  double sum = 0.0, comp = 0.0;
  for (double v : vals) {
    double y = v - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum / static_cast<double>(vals.size());
}

std::string sensor_column_name(int r, int c) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%d%d", r, c);
  return buf;
}

}  // namespace

std::vector<int> Dataset::subject_ids() const {
  std::set<int> ids;
  for (const auto& r : records) ids.insert(r.subject_id);
  return {ids.begin(), ids.end()};
}

void SplitSpec::validate() const {
  if (train < 0.0 || validation < 0.0 || test < 0.0)
    throw ConfigError("split fractions must be non-negative");
  if (std::abs(train + validation + test - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");
}

std::array<std::size_t, 3> largest_remainder_sizes(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n == 0) throw ConfigError("cannot split an empty dataset");
  std::array<double, 3> frac = {spec.train, spec.validation, spec.test};
  std::array<std::size_t, 3> size{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double target = frac[static_cast<std::size_t>(i)] * static_cast<double>(n);
    size[static_cast<std::size_t>(i)] = static_cast<std::size_t>(std::floor(target));
    remainder[static_cast<std::size_t>(i)] = target - std::floor(target);
    assigned += size[static_cast<std::size_t>(i)];
  }
  // Hand out the leftover records by descending fractional remainder,
  // earlier part winning ties, so sizes are fully deterministic.
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return remainder[static_cast<std::size_t>(a)] > remainder[static_cast<std::size_t>(b)];
  });
  for (std::size_t k = 0; assigned < n; ++k) {
    ++size[static_cast<std::size_t>(order[k % 3])];
    ++assigned;
  }
  for (int i = 0; i < 3; ++i) {
    if (frac[static_cast<std::size_t>(i)] > 0.0 && size[static_cast<std::size_t>(i)] == 0) {
      throw ConfigError("a split part with positive fraction received zero records");
    }
  }
  return size;
}

namespace {

Splits split_indices(std::vector<std::size_t> idx, const SplitSpec& spec) {
  auto sizes = largest_remainder_sizes(idx.size(), spec);
  Rng rng(spec.seed);
  rng.shuffle(idx);
  Splits s;
  auto it = idx.begin();
  s.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
  it += static_cast<std::ptrdiff_t>(sizes[0]);
  s.validation.assign(it, it + static_cast<std::ptrdiff_t>(sizes[1]));
  it += static_cast<std::ptrdiff_t>(sizes[1]);
  s.test.assign(it, it + static_cast<std::ptrdiff_t>(sizes[2]));
  s.train = sorted(std::move(s.train));
  s.validation = sorted(std::move(s.validation));
  s.test = sorted(std::move(s.test));
  return s;
}

}  // namespace

Splits split_random(const Dataset& dataset, const SplitSpec& spec) {
  std::vector<std::size_t> idx(dataset.records.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return split_indices(std::move(idx), spec);
}

Splits split_shift_binned(const Dataset& dataset, const SplitSpec& spec) {
  spec.validate();
  std::array<std::vector<std::size_t>, kNumShiftBins> by_bin;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    by_bin[static_cast<std::size_t>(static_cast<int>(dataset.records[i].bin))].push_back(i);
  }
  Splits s = split_indices(by_bin[0], spec);
  s.bin_tests[0] = s.test;
  for (int b = 1; b < kNumShiftBins; ++b) {
    s.bin_tests[static_cast<std::size_t>(b)] = by_bin[static_cast<std::size_t>(b)];
  }
  for (int b = 0; b < kNumShiftBins; ++b) {
    if (by_bin[static_cast<std::size_t>(b)].empty()) {
      s.warnings.push_back(std::string("shift bin ") + bin_label(static_cast<ShiftBin>(b)) +
                           " has no records");
    }
  }
  return s;
}

Splits subset_training(const Splits& splits, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) throw ConfigError("training fraction must be in (0,1]");
  auto n = static_cast<double>(splits.train.size());
  auto keep = static_cast<std::size_t>(std::llround(fraction * n));
  if (keep == 0) throw ConfigError("training fraction keeps zero records");
  // One fixed permutation per seed; every fraction takes a prefix of it, so
  // smaller subsets are contained in larger ones.
  std::vector<std::size_t> perm = splits.train;
  Rng rng(derive_seed(seed, {0x55}));
  rng.shuffle(perm);
  Splits out = splits;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(keep));
  out.train = sorted(std::move(out.train));
  return out;
}

NormStats compute_norm_stats(const Dataset& dataset, const std::vector<std::size_t>& train_idx) {
  if (train_idx.empty()) throw ConfigError("normalization needs a non-empty training set");
  int ns = dataset.sensor_count();
  NormStats stats;
  stats.mean.assign(static_cast<std::size_t>(ns), 0.0);
  stats.stddev.assign(static_cast<std::size_t>(ns), 0.0);
  std::vector<double> chan(train_idx.size());
  for (int s = 0; s < ns; ++s) {
    for (std::size_t k = 0; k < train_idx.size(); ++k)
      chan[k] = dataset.records[train_idx[k]].sensors[static_cast<std::size_t>(s)];
    double mean = kahan_mean(chan);
    for (double& v : chan) v = (v - mean) * (v - mean);
    double var = kahan_mean(chan);
    stats.mean[static_cast<std::size_t>(s)] = mean;
    stats.stddev[static_cast<std::size_t>(s)] = std::max(std::sqrt(var), 1e-8);
  }
  return stats;
}

Dataset normalize(const Dataset& dataset, const NormStats& stats) {
  if (stats.mean.size() != static_cast<std::size_t>(dataset.sensor_count()))
    throw ConfigError("normalization stats do not match the sensor count");
  Dataset out = dataset;
  for (auto& rec : out.records) {
    for (std::size_t s = 0; s < rec.sensors.size(); ++s) {
      rec.sensors[s] = (rec.sensors[s] - stats.mean[s]) / stats.stddev[s];
    }
  }
  out.normalized = true;
  out.norm_stats = stats;
  return out;
}

Dataset normalize(const Dataset& dataset, const std::vector<std::size_t>& train_idx) {
  return normalize(dataset, compute_norm_stats(dataset, train_idx));
}

Dataset build_dataset(const SessionPlan& plan, const ArrayLayout& layout,
                      const ReceptiveKernel& kernel, const DatasetBuildOptions& opts,
                      BuildStats* stats) {
  layout.validate(plan.image);
  if (opts.cross_product && opts.shifts.kind != ShiftDistribution::Kind::Grid)
    throw ConfigError("cross-product pairing requires the grid shift distribution");

  auto n_samples = static_cast<std::int64_t>(plan.samples.size());
  std::vector<Shift2D> grid;
  std::int64_t per_sample = 1;
  if (opts.cross_product) {
    grid = grid_shifts(opts.shifts.grid_range_mm, opts.shifts.grid_n_per_axis);
    per_sample = static_cast<std::int64_t>(grid.size());
  }

  std::vector<std::optional<Record>> slots(
      static_cast<std::size_t>(n_samples * per_sample));
  std::uint64_t boundary_resamples = 0, boundary_drops = 0, attempts = 0, accepted = 0;
  // Exceptions must not unwind out of the parallel region; record and
  // rethrow after it.
  std::uint64_t exhausted = 0;

#pragma omp parallel for schedule(static) \
    reduction(+ : boundary_resamples, boundary_drops, attempts, accepted, exhausted)
  for (std::int64_t i = 0; i < n_samples; ++i) {
    const PlannedSample& ps = plan.samples[static_cast<std::size_t>(i)];
    Image img = render_sample(plan, ps);
    Rng shift_rng(derive_seed(opts.seed, {4, static_cast<std::uint64_t>(i)}));
    for (std::int64_t j = 0; j < per_sample; ++j) {
      Record rec;
      rec.subject_id = plan.subject_id;
      rec.gaze = ps.gaze;
      bool ok = false;
      if (opts.cross_product) {
        Shift2D sh = mm_to_px(grid[static_cast<std::size_t>(j)], plan.image.scale_px_per_mm);
        ++attempts;
        try {
          SensorFrame f = simulate_frame(img, plan.image, layout, kernel, sh, ps.head_dx_px,
                                         ps.head_dy_px, opts.compensate_head);
          rec.sensors = std::move(f.values);
          rec.shift = sh;
          ok = true;
          ++accepted;
        } catch (const BoundaryError&) {
          ++boundary_drops;
        }
      } else {
        for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
          ShiftSampleStats ss;
          Shift2D sh = mm_to_px(sample_shift(opts.shifts, shift_rng, &ss),
                                plan.image.scale_px_per_mm);
          attempts += ss.attempts;
          try {
            SensorFrame f = simulate_frame(img, plan.image, layout, kernel, sh, ps.head_dx_px,
                                           ps.head_dy_px, opts.compensate_head);
            rec.sensors = std::move(f.values);
            rec.shift = sh;
            ok = true;
            ++accepted;
          } catch (const BoundaryError&) {
            if (opts.shifts.kind == ShiftDistribution::Kind::Grid) {
              ++boundary_drops;
              break;  // grid pairs are rejected, not resampled
            }
            ++boundary_resamples;
          }
        }
        if (!ok && opts.shifts.kind == ShiftDistribution::Kind::Gaussian) ++exhausted;
      }
      if (ok) {
        rec.bin = bin_shift(rec.shift, opts.bin_max_norm);
        slots[static_cast<std::size_t>(i * per_sample + j)] = std::move(rec);
      }
    }
  }
  if (exhausted > 0)
    throw BoundaryError("could not draw an in-bounds shift after 1000 attempts");

  Dataset ds;
  ds.sensor_rows = layout.rows;
  ds.sensor_cols = layout.cols;
  ds.records.reserve(slots.size());
  for (auto& slot : slots) {
    if (slot.has_value()) ds.records.push_back(std::move(*slot));
  }
  if (stats != nullptr) {
    stats->boundary_resamples += boundary_resamples;
    stats->boundary_drops += boundary_drops;
    stats->shift_stats.attempts += attempts;
    stats->shift_stats.accepted += accepted;
  }
  return ds;
}

Dataset merge_datasets(const std::vector<Dataset>& parts) {
  if (parts.empty()) throw ConfigError("cannot merge zero datasets");
  Dataset out;
  out.sensor_rows = parts.front().sensor_rows;
  out.sensor_cols = parts.front().sensor_cols;
  for (const auto& p : parts) {
    if (p.sensor_rows != out.sensor_rows || p.sensor_cols != out.sensor_cols)
      throw ConfigError("cannot merge datasets with different sensor grids");
    if (p.normalized) throw ConfigError("refusing to merge normalized datasets");
    out.records.insert(out.records.end(), p.records.begin(), p.records.end());
  }
  return out;
}

void write_dataset_csv(const std::string& path, const Dataset& dataset, double scale_px_per_mm,
                       const std::string& extra_comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", scale_px_per_mm);
  out << "# scale_px_per_mm=" << buf;
  if (!extra_comment.empty()) out << " " << extra_comment;
  out << "\n";
  out << "subject,x_deg,y_deg,dx_mm,dy_mm,bin";
  for (int r = 0; r < dataset.sensor_rows; ++r)
    for (int c = 0; c < dataset.sensor_cols; ++c) out << "," << sensor_column_name(r, c);
  out << "\n";
  for (const auto& rec : dataset.records) {
    out << rec.subject_id;
    std::snprintf(buf, sizeof(buf), ",%.17g", rec.gaze.x_deg);
    out << buf;
    std::snprintf(buf, sizeof(buf), ",%.17g", rec.gaze.y_deg);
    out << buf;
    std::snprintf(buf, sizeof(buf), ",%.17g", rec.shift.dx_mm);
    out << buf;
    std::snprintf(buf, sizeof(buf), ",%.17g", rec.shift.dy_mm);
    out << buf;
    out << "," << bin_label(rec.bin);
    for (double v : rec.sensors) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::string line;
  double scale = 0.0;
  // Optional comment lines first; the scale lets us recompute pixel shifts.
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto pos = line.find("scale_px_per_mm=");
      if (pos != std::string::npos) scale = std::strtod(line.c_str() + pos + 16, nullptr);
      continue;
    }
    break;
  }
  if (line.rfind("subject,", 0) != 0) throw std::runtime_error("missing dataset CSV header");
  // Infer the sensor grid from the header names s{row}{col}.
  int max_r = -1, max_c = -1;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (col.size() == 3 && col[0] == 's' && std::isdigit(static_cast<unsigned char>(col[1])) &&
          std::isdigit(static_cast<unsigned char>(col[2]))) {
        max_r = std::max(max_r, col[1] - '0');
        max_c = std::max(max_c, col[2] - '0');
      }
    }
  }
  if (max_r < 0 || max_c < 0) throw std::runtime_error("dataset CSV header has no sensor columns");

  Dataset ds;
  ds.sensor_rows = max_r + 1;
  ds.sensor_cols = max_c + 1;
  int ns = ds.sensor_count();
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string field;
    Record rec;
    auto next = [&]() {
      if (!std::getline(ss, field, ',')) throw std::runtime_error("truncated dataset CSV row");
      return field;
    };
    rec.subject_id = std::stoi(next());
    rec.gaze.x_deg = std::strtod(next().c_str(), nullptr);
    rec.gaze.y_deg = std::strtod(next().c_str(), nullptr);
    rec.shift.dx_mm = std::strtod(next().c_str(), nullptr);
    rec.shift.dy_mm = std::strtod(next().c_str(), nullptr);
    rec.bin = bin_from_label(next());
    rec.sensors.resize(static_cast<std::size_t>(ns));
    for (int s = 0; s < ns; ++s) rec.sensors[static_cast<std::size_t>(s)] = std::strtod(next().c_str(), nullptr);
    if (scale > 0.0) rec.shift = mm_to_px(rec.shift, scale);
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

void write_splits_csv(const std::string& path, const Splits& splits,
                      const std::string& extra_comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  if (!extra_comment.empty()) out << "# " << extra_comment << "\n";
  out << "part,record_index\n";
  auto dump = [&](const char* name, const std::vector<std::size_t>& idx) {
    for (std::size_t i : idx) out << name << "," << i << "\n";
  };
  dump("train", splits.train);
  dump("validation", splits.validation);
  dump("test", splits.test);
  for (int b = 0; b < kNumShiftBins; ++b) {
    std::string name = std::string("test_") + bin_label(static_cast<ShiftBin>(b));
    dump(name.c_str(), splits.bin_tests[static_cast<std::size_t>(b)]);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Splits read_splits_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::string line;
  Splits s;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "part,record_index") throw std::runtime_error("missing splits CSV header");
      saw_header = true;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("malformed splits CSV row");
    std::string part = line.substr(0, comma);
    auto idx = static_cast<std::size_t>(std::stoull(line.substr(comma + 1)));
    if (part == "train") {
      s.train.push_back(idx);
    } else if (part == "validation") {
      s.validation.push_back(idx);
    } else if (part == "test") {
      s.test.push_back(idx);
    } else if (part.rfind("test_", 0) == 0) {
      s.bin_tests[static_cast<std::size_t>(static_cast<int>(bin_from_label(part.substr(5))))]
          .push_back(idx);
    } else {
      throw std::runtime_error("unknown split part: " + part);
    }
  }
  if (!saw_header) throw std::runtime_error("empty splits CSV");
  return s;
}

}  // namespace psog
