#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "psog/common.hpp"
#include "psog/eye_model.hpp"
#include "psog/sensor_array.hpp"
#include "psog/shift.hpp"

namespace psog {

/// One supervised example: sensor readout plus gaze truth and provenance.
struct Record {
  std::vector<double> sensors;  // row-major rows x cols
  GazeSample gaze{};
  int subject_id = 0;
  Shift2D shift;
  ShiftBin bin = ShiftBin::B1;
};

/// Per-sensor z-score statistics, always derived from training records only.
struct NormStats {
  std::vector<double> mean, stddev;
};

struct Dataset {
  int sensor_rows = 3;
  int sensor_cols = 5;
  std::vector<Record> records;
  bool normalized = false;
  NormStats norm_stats;  // set when normalized

  int sensor_count() const { return sensor_rows * sensor_cols; }
  std::vector<int> subject_ids() const;  // sorted, unique
};

struct SplitSpec {
  double train = 0.6;
  double validation = 0.1;
  double test = 0.3;
  std::uint64_t seed = 0;
  enum class Mode { Random, ShiftBinned } mode = Mode::Random;

  void validate() const;  // fractions non-negative, sum 1 +- 1e-9
};

/// Index sets into Dataset::records. All lists are kept sorted ascending.
/// In shift-binned mode `test` equals the B1 benchmark set and bin_tests
/// holds all four per-bin test sets (B2..B4 records never train).
struct Splits {
  std::vector<std::size_t> train, validation, test;
  std::array<std::vector<std::size_t>, kNumShiftBins> bin_tests;
  std::vector<std::string> warnings;
};

/// Deterministic largest-remainder apportionment of n records to the given
/// fractions; throws when a positive fraction receives zero records.
std::array<std::size_t, 3> largest_remainder_sizes(std::size_t n, const SplitSpec& spec);

Splits split_random(const Dataset& dataset, const SplitSpec& spec);

/// B1 records are split by the configured fractions; every B2..B4 record
/// lands in its dedicated test set.
Splits split_shift_binned(const Dataset& dataset, const SplitSpec& spec);

/// Shrinks the training set to round(fraction * size) indices. Subsets at a
/// fixed seed are nested: subset(0.2) is contained in subset(0.4), etc.
Splits subset_training(const Splits& splits, double fraction, std::uint64_t seed);

NormStats compute_norm_stats(const Dataset& dataset, const std::vector<std::size_t>& train_idx);

/// Copy of the dataset with z-scored sensors and the stats recorded.
Dataset normalize(const Dataset& dataset, const NormStats& stats);
Dataset normalize(const Dataset& dataset, const std::vector<std::size_t>& train_idx);

struct DatasetBuildOptions {
  ShiftDistribution shifts;
  bool cross_product = false;  // pair every image with every grid shift
  bool compensate_head = true;
  bool bin_max_norm = false;  // classify shifts by max norm instead of Euclidean
  std::uint64_t seed = 0;     // shift-draw stream, independent of the session seed
};

struct BuildStats {
  std::uint64_t boundary_resamples = 0;
  std::uint64_t boundary_drops = 0;  // grid mode only
  ShiftSampleStats shift_stats;
};

/// Renders each planned sample on demand, draws its shift(s), and reads out
/// the sensor frame. Gaussian-mode boundary violations are resampled from
/// the per-sample stream; grid-mode violations drop the pair.
Dataset build_dataset(const SessionPlan& plan, const ArrayLayout& layout,
                      const ReceptiveKernel& kernel, const DatasetBuildOptions& opts,
                      BuildStats* stats = nullptr);

Dataset merge_datasets(const std::vector<Dataset>& parts);

/// CSV persistence. The header comment records scale_px_per_mm so realized
/// pixel shifts are recomputed exactly on read; %.17g round-trips doubles
/// bit-exactly.
void write_dataset_csv(const std::string& path, const Dataset& dataset, double scale_px_per_mm,
                       const std::string& extra_comment = "");
Dataset read_dataset_csv(const std::string& path);

void write_splits_csv(const std::string& path, const Splits& splits,
                      const std::string& extra_comment = "");
Splits read_splits_csv(const std::string& path);

}  // namespace psog
