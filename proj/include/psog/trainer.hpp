#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "psog/dataset.hpp"
#include "psog/network.hpp"
#include "psog/optimizer.hpp"

namespace psog {

/// Disables patience-based early stopping.
inline constexpr int kNoEarlyStop = std::numeric_limits<int>::max();

struct TrainConfig {
  nn::AdamConfig adam;
  int batch_size = 32;
  int max_epochs = 300;
  int patience = 40;  // epochs without a validation-accuracy improvement
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  double train_loss = 0.0;  // sample-weighted mean of minibatch losses
  double val_loss = 0.0;
  double val_accuracy = 0.0;  // degrees
};

struct TrainHistory {
  EpochStats epoch0;  // initial parameters, before any update
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 0 means the initial parameters won
  double best_val_accuracy = 0.0;
};

struct Provenance {
  std::string regimen;  // "FS" or "FT"
  int subject_id = -1;
  double data_fraction = 1.0;
  std::uint64_t seed = 0;
  std::vector<int> pool_subjects;  // FT only: pre-training pool
};

struct TrainedModel {
  std::vector<double> params;
  NormStats norm;
  TrainHistory history;
  Provenance provenance;
};

/// Normalized input/target matrices for the whole dataset (n x 15, n x 2).
struct Matrices {
  std::vector<double> inputs;
  std::vector<double> targets;
  std::size_t n = 0;
};

Matrices build_matrices(const Dataset& raw, const NormStats& stats);

struct EvalResult {
  double accuracy = 0.0;  // degrees
  double loss = 0.0;
  std::vector<GazeSample> predictions;  // in index order
};

EvalResult evaluate_model(const std::vector<double>& params, const NormStats& stats,
                          const Dataset& raw, const std::vector<std::size_t>& indices);

/// Subject-specific training from random initialization. Normalization
/// stats come from the given training split; early stopping tracks
/// validation spatial accuracy and the best checkpoint is restored.
TrainedModel train_fs(const Dataset& subject_data, const Splits& splits,
                      const TrainConfig& config);

/// Per-subject datasets for everyone except the target subject.
struct PretrainPool {
  std::vector<Dataset> subjects;
  int target_subject_id = -1;

  /// Scans every record; throws LeakageError if the target appears.
  void assert_no_leakage() const;
  std::vector<int> subject_ids() const;
};

/// Trains one model on the pooled out-of-subject data (internal 85/15
/// train/validation split) and returns the weights only.
std::vector<double> pretrain_loso(const PretrainPool& pool, const TrainConfig& config);

/// Identical loop to train_fs but initialized from pretrained weights;
/// normalization stats are recomputed from the subject's training split.
TrainedModel fine_tune(const std::vector<double>& pretrained, const Dataset& subject_data,
                       const Splits& splits, const TrainConfig& config);

}  // namespace psog
