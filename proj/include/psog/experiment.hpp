#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "psog/dataset.hpp"
#include "psog/eye_model.hpp"
#include "psog/sensor_array.hpp"
#include "psog/shift.hpp"
#include "psog/trainer.hpp"

namespace psog {

/// Full description of a study run. Everything random hangs off master_seed;
/// the struct round-trips losslessly through JSON and unknown keys are
/// rejected on load.
struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  int seeds = 5;     // independent repetitions per grid point
  int subjects = 12; // synthetic cohort size

  ImageSpec image;
  ArrayLayout array;
  StimulusSpec stimulus;
  ShiftDistribution shifts;         // training-time shift model
  double extended_sigma_mm = 2.5;   // extended-range study
  SplitSpec split;                  // protocol for the shift-bin study
  SplitSpec scale_split;            // protocol for the data-scale study
  SplitSpec extended_split;         // protocol for the extended-range study
  TrainConfig train;
  int curve_max_epochs = 300;       // epoch-curve study trains this long, no early stop
  std::vector<std::string> regimens = {"FS", "FT"};
  std::vector<double> data_fractions = {0.2, 0.4, 0.6, 0.8, 1.0};
  std::string window_mode = "side"; // "side": window_side_px is a side length;
                                    // "area": it is a total pixel count
  std::string bin_norm = "euclidean";  // or "max"

  void validate() const;
  /// Window side in pixels after applying window_mode.
  int resolved_window_side() const;
};

ExperimentConfig default_config();

/// Strict JSON (de)serialization: load rejects unknown keys anywhere in the
/// tree and the canonical dump is stable, so hashes are reproducible.
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);
std::uint64_t config_hash(const ExperimentConfig& cfg);

/// Comment line placed at the top of every output file.
std::string output_header(const ExperimentConfig& cfg);

/// One leakage-audit row, written for every pre-training pool assembled.
struct LeakageAuditRow {
  std::string experiment;
  int target_subject = 0;
  int seed_index = 0;
  std::vector<int> pool_subjects;
  std::size_t pool_records = 0;
  std::size_t target_records_in_pool = 0;  // scan result; must be 0
};

struct LeakageScan {
  std::vector<LeakageAuditRow> rows;
  std::size_t violations = 0;
};

LeakageScan scan_leakage_audit(const std::string& csv_path);

/// Executes the studies, caching per-subject datasets and pre-trained
/// weights across them. Grid points run on a small worker pool; output files
/// are byte-identical for any worker count.
class ExperimentRunner {
 public:
  ExperimentRunner(ExperimentConfig cfg, std::string out_dir, int jobs = 1);

  void run_data_scale();
  void run_shift_bins();
  void run_extended_range();
  void run_epoch_curves();
  void run_all();

  /// Names of runs that failed (recorded, excluded from outputs).
  const std::vector<std::string>& failures() const { return failures_; }

  // Building blocks shared with the CLI.
  EyeModelParams subject_eye(int subject_id) const;
  SessionPlan subject_plan(int subject_id) const;
  enum class Variant { Main, ZeroShift, Extended };
  const Dataset& subject_dataset(int subject_id, Variant variant);
  const BuildStats& build_stats(int subject_id, Variant variant);
  const std::vector<double>& pretrained(int target_subject, int seed_index, Variant variant);
  ArrayLayout layout() const;
  const ExperimentConfig& config() const { return cfg_; }

 private:
  void run_tasks(std::vector<std::function<void()>>& tasks);
  void write_manifest(const std::string& experiment, const std::vector<std::string>& outputs);
  void append_audit(const std::vector<LeakageAuditRow>& rows);
  Splits subject_splits(int subject_id, Variant variant, const SplitSpec& spec) const;
  TrainConfig train_config(std::uint64_t run_seed, bool curves) const;

  ExperimentConfig cfg_;
  std::string out_dir_;
  int jobs_;
  ReceptiveKernel kernel_;
  std::map<std::pair<int, int>, Dataset> dataset_cache_;
  std::map<std::pair<int, int>, BuildStats> stats_cache_;
  std::map<std::tuple<int, int, int>, std::vector<double>> pretrain_cache_;
  std::vector<LeakageAuditRow> audit_rows_;
  std::vector<std::string> failures_;
};

}  // namespace psog
