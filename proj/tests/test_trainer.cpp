#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "psog/common.hpp"
#include "psog/dataset.hpp"
#include "psog/eye_model.hpp"
#include "psog/network.hpp"
#include "psog/sensor_array.hpp"
#include "psog/trainer.hpp"

using namespace psog;

namespace {

Dataset subject_dataset(int subject_id, std::uint64_t master_seed, int per_fix = 3) {
  StimulusSpec stim;
  stim.grid_x = 3;
  stim.grid_y = 3;
  stim.min_samples_per_fixation = per_fix;
  stim.max_samples_per_fixation = per_fix + 2;
  const EyeModelParams eye = make_subject(subject_id, master_seed);
  const SessionPlan plan =
      plan_session(subject_id, eye, ImageSpec{}, stim, derive_seed(master_seed, {0x5u, static_cast<std::uint64_t>(subject_id)}));
  const ArrayLayout layout;
  const auto kernel = receptive_kernel(layout.window_side_px);
  DatasetBuildOptions opts;
  opts.shifts.sigma_mm = 1.0;
  opts.seed = derive_seed(master_seed, {0x6u, static_cast<std::uint64_t>(subject_id)});
  return build_dataset(plan, layout, kernel, opts);
}

Splits default_splits(const Dataset& ds, std::uint64_t seed) {
  SplitSpec spec;
  spec.seed = seed;
  return split_random(ds, spec);
}

NormStats identity_stats() {
  NormStats st;
  st.mean.assign(15, 0.0);
  st.stddev.assign(15, 1.0);
  return st;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.validate();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.max_epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.patience = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.adam.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("matrix building normalizes inputs and copies targets") {
  Dataset ds;
  ds.records.resize(2);
  for (auto& r : ds.records) r.sensors.assign(15, 0.5);
  ds.records[0].sensors[3] = 0.9;
  ds.records[0].gaze = {1.5, -2.5};
  ds.records[1].gaze = {0.0, 4.0};

  NormStats st = identity_stats();
  st.mean[3] = 0.5;
  st.stddev[3] = 0.2;
  const Matrices m = build_matrices(ds, st);
  CHECK(m.n == 2);
  CHECK(m.inputs.size() == 2 * 15);
  CHECK(m.targets.size() == 2 * 2);
  CHECK(m.inputs[3] == doctest::Approx(2.0).epsilon(1e-12));  // (0.9 - 0.5) / 0.2
  CHECK(m.inputs[0] == 0.5);
  CHECK(m.targets[0] == 1.5);
  CHECK(m.targets[1] == -2.5);
  CHECK(m.targets[2] == 0.0);
  CHECK(m.targets[3] == 4.0);

  NormStats wrong;
  wrong.mean.assign(3, 0.0);
  wrong.stddev.assign(3, 1.0);
  CHECK_THROWS_AS(build_matrices(ds, wrong), ConfigError);

  Dataset small;
  small.sensor_rows = 1;
  small.sensor_cols = 2;
  small.records.resize(1);
  small.records[0].sensors = {0.1, 0.2};
  NormStats two;
  two.mean.assign(2, 0.0);
  two.stddev.assign(2, 1.0);
  CHECK_THROWS_AS(build_matrices(small, two), ConfigError);
}

TEST_CASE("evaluation with zero weights reports the target norms in order") {
  Dataset ds;
  ds.records.resize(3);
  for (auto& r : ds.records) r.sensors.assign(15, 0.1);
  ds.records[0].gaze = {3.0, 4.0};
  ds.records[1].gaze = {0.0, 0.0};
  ds.records[2].gaze = {-6.0, 8.0};

  const std::vector<double> zeros(static_cast<std::size_t>(nn::kParamCount), 0.0);
  const auto ev = evaluate_model(zeros, identity_stats(), ds, {0, 1, 2});
  REQUIRE(ev.predictions.size() == 3);
  for (const auto& p : ev.predictions) {
    CHECK(p.x_deg == 0.0);
    CHECK(p.y_deg == 0.0);
  }
  CHECK(ev.accuracy == doctest::Approx((5.0 + 0.0 + 10.0) / 3.0).epsilon(1e-12));
  CHECK(ev.loss == doctest::Approx((12.5 + 0.0 + 50.0) / 3.0).epsilon(1e-12));

  // Index order is respected, including duplicates.
  const auto ev2 = evaluate_model(zeros, identity_stats(), ds, {2, 0});
  CHECK(ev2.accuracy == doctest::Approx(7.5));

  CHECK_THROWS_AS(evaluate_model(zeros, identity_stats(), ds, {}), ConfigError);
}

TEST_CASE("subject training is deterministic and respects epoch accounting") {
  const Dataset ds = subject_dataset(1, 31);
  const Splits splits = default_splits(ds, 5);

  TrainConfig cfg;
  cfg.max_epochs = 12;
  cfg.patience = kNoEarlyStop;
  cfg.seed = 70;

  const TrainedModel a = train_fs(ds, splits, cfg);
  const TrainedModel b = train_fs(ds, splits, cfg);
  CHECK(a.params == b.params);
  CHECK(a.history.epochs.size() == 12);
  CHECK(a.history.best_val_accuracy == b.history.best_val_accuracy);
  CHECK(a.provenance.regimen == "FS");
  CHECK(a.provenance.subject_id == 1);

  TrainConfig other = cfg;
  other.seed = 71;
  const TrainedModel c = train_fs(ds, splits, other);
  CHECK(a.params != c.params);

  // Training must see raw sensors so it can own the normalization.
  const Dataset normed = normalize(ds, splits.train);
  CHECK_THROWS_AS(train_fs(normed, splits, cfg), ConfigError);

  Splits empty_train = splits;
  empty_train.train.clear();
  CHECK_THROWS_AS(train_fs(ds, empty_train, cfg), ConfigError);
}

TEST_CASE("early stopping restores the best validation checkpoint") {
  const Dataset ds = subject_dataset(2, 31, 5);
  const Splits splits = default_splits(ds, 6);

  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.patience = 5;
  cfg.seed = 81;

  const TrainedModel m = train_fs(ds, splits, cfg);
  const auto& h = m.history;
  CHECK(h.epochs.size() <= 60);
  const bool stopped_early = h.epochs.size() < 60;
  if (stopped_early) {
    CHECK(static_cast<int>(h.epochs.size()) - h.best_epoch == cfg.patience);
  }

  // best_val_accuracy is the minimum over epoch 0 and every epoch.
  double best = h.epoch0.val_accuracy;
  for (const auto& e : h.epochs) best = std::min(best, e.val_accuracy);
  CHECK(h.best_val_accuracy == best);
  if (h.best_epoch > 0) {
    CHECK(h.epochs[static_cast<std::size_t>(h.best_epoch - 1)].val_accuracy == best);
  }

  // The returned weights really are the best checkpoint.
  const auto ev = evaluate_model(m.params, m.norm, ds, splits.validation);
  CHECK(ev.accuracy == doctest::Approx(h.best_val_accuracy).epsilon(1e-12));
}

TEST_CASE("zero-epoch runs return the initial parameters untouched") {
  const Dataset ds = subject_dataset(1, 32);
  const Splits splits = default_splits(ds, 7);

  TrainConfig cfg;
  cfg.max_epochs = 0;
  cfg.seed = 17;

  const auto pre = nn::init_params(derive_seed(99, {2}));
  const TrainedModel ft = fine_tune(pre, ds, splits, cfg);
  CHECK(ft.params == pre);
  CHECK(ft.history.epochs.empty());
  CHECK(ft.history.best_epoch == 0);
  CHECK(ft.provenance.regimen == "FT");

  const TrainedModel fs = train_fs(ds, splits, cfg);
  CHECK(fs.params == nn::init_params(derive_seed(cfg.seed, {1})));
}

TEST_CASE("fine-tuning differs from subject-specific training only via the init") {
  const Dataset ds = subject_dataset(1, 33);
  const Splits splits = default_splits(ds, 8);

  TrainConfig cfg;
  cfg.max_epochs = 6;
  cfg.patience = kNoEarlyStop;
  cfg.seed = 41;

  const TrainedModel fs = train_fs(ds, splits, cfg);
  // Seeding the fine-tune with the FS init reproduces FS bit for bit: the
  // loop, shuffles, and normalization are shared.
  const TrainedModel ft_same = fine_tune(nn::init_params(derive_seed(cfg.seed, {1})), ds, splits, cfg);
  CHECK(ft_same.params == fs.params);

  const TrainedModel ft_other = fine_tune(nn::init_params(derive_seed(123, {1})), ds, splits, cfg);
  CHECK(ft_other.params != fs.params);

  std::vector<double> short_ckpt(10, 0.0);
  CHECK_THROWS_AS(fine_tune(short_ckpt, ds, splits, cfg), ConfigError);
}

TEST_CASE("pre-training pool rejects target leakage and mirrors a one-subject fit") {
  const Dataset d1 = subject_dataset(1, 34);
  const Dataset d2 = subject_dataset(2, 34);

  PretrainPool pool;
  pool.subjects = {d1, d2};
  pool.target_subject_id = 3;
  pool.assert_no_leakage();
  CHECK(pool.subject_ids() == std::vector<int>{1, 2});

  pool.target_subject_id = 2;
  CHECK_THROWS_AS(pool.assert_no_leakage(), LeakageError);

  TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.patience = kNoEarlyStop;
  cfg.seed = 55;
  CHECK_THROWS_AS(pretrain_loso(pool, cfg), LeakageError);
  CHECK_THROWS_AS(pretrain_loso(PretrainPool{}, cfg), ConfigError);

  // A pool of one subject reduces to training that subject with the pool's
  // internal 85/15 split and seed derivation.
  PretrainPool solo;
  solo.subjects = {d1};
  solo.target_subject_id = 2;
  const auto weights = pretrain_loso(solo, cfg);

  SplitSpec spec;
  spec.train = 0.85;
  spec.validation = 0.15;
  spec.test = 0.0;
  spec.seed = derive_seed(cfg.seed, {7});
  const TrainedModel manual = train_fs(d1, split_random(d1, spec), cfg);
  CHECK(weights == manual.params);
}

TEST_CASE("an absurd learning rate raises a divergence error") {
  const Dataset ds = subject_dataset(1, 35);
  const Splits splits = default_splits(ds, 9);

  TrainConfig cfg;
  cfg.max_epochs = 8;
  cfg.patience = kNoEarlyStop;
  cfg.adam.learning_rate = 1e120;
  cfg.seed = 3;
  CHECK_THROWS_AS(train_fs(ds, splits, cfg), DivergenceError);
}
