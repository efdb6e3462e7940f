#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "psog/common.hpp"
#include "psog/experiment.hpp"
#include "psog/io.hpp"

using namespace psog;
using nlohmann::json;

namespace {

ExperimentConfig sample_config() {
  ExperimentConfig c = default_config();
  c.master_seed = 42;
  c.seeds = 3;
  c.subjects = 4;
  c.shifts.sigma_mm = 1.7;
  c.bin_norm = "max";
  c.data_fractions = {0.5, 1.0};
  c.train.max_epochs = 25;
  return c;
}

}  // namespace

TEST_CASE("defaults describe the full study and validate cleanly") {
  const ExperimentConfig c = default_config();
  c.validate();
  CHECK(c.master_seed == 1);
  CHECK(c.seeds == 5);
  CHECK(c.subjects == 12);
  CHECK(c.stimulus.min_samples_per_fixation == 16);
  CHECK(c.stimulus.max_samples_per_fixation == 32);
  CHECK(c.split.mode == SplitSpec::Mode::ShiftBinned);
  CHECK(c.split.train == doctest::Approx(0.56));
  CHECK(c.split.validation == doctest::Approx(0.14));
  CHECK(c.scale_split.mode == SplitSpec::Mode::Random);
  CHECK(c.scale_split.train == doctest::Approx(0.60));
  CHECK(c.extended_split.train == doctest::Approx(0.24));
  CHECK(c.extended_split.validation == doctest::Approx(0.06));
  CHECK(c.extended_split.test == doctest::Approx(0.70));
  CHECK(c.curve_max_epochs == 300);
  CHECK(c.train.batch_size == 32);
  CHECK(c.train.max_epochs == 300);
  CHECK(c.train.patience == 40);
  CHECK(c.train.adam.learning_rate == doctest::Approx(4e-3));
  CHECK(c.regimens == std::vector<std::string>{"FS", "FT"});
  CHECK(c.data_fractions == std::vector<double>{0.2, 0.4, 0.6, 0.8, 1.0});
  CHECK(c.window_mode == "side");
  CHECK(c.bin_norm == "euclidean");
  CHECK(c.extended_sigma_mm == doctest::Approx(2.5));
}

TEST_CASE("config JSON round-trips losslessly") {
  const ExperimentConfig c = sample_config();
  const std::string text = config_to_json_text(c);
  const ExperimentConfig back = config_from_json_text(text);
  CHECK(config_to_json_text(back) == text);
  CHECK(config_hash(back) == config_hash(c));

  // The canonical dump is stable, so hashing is reproducible.
  CHECK(config_to_json_text(c) == text);
  CHECK(config_hash(c) != config_hash(default_config()));
}

TEST_CASE("unknown keys are rejected at every scope") {
  const std::string text = config_to_json_text(sample_config());
  const json base = json::parse(text);

  json root = base;
  root["bogus"] = 1;
  CHECK_THROWS_AS(config_from_json_text(root.dump()), ConfigError);

  for (const char* scope : {"image", "array", "stimulus", "shifts", "split", "scale_split",
                            "extended_split", "train"}) {
    json j = base;
    j[scope]["bogus"] = 1;
    CHECK_THROWS_AS(config_from_json_text(j.dump()), ConfigError);
  }

  CHECK_THROWS_AS(config_from_json_text("not json at all"), ConfigError);
  json missing = base;
  missing.erase("seeds");
  CHECK_THROWS(config_from_json_text(missing.dump()));

  json bad_mode = base;
  bad_mode["split"]["mode"] = "sorted";
  CHECK_THROWS_AS(config_from_json_text(bad_mode.dump()), ConfigError);
  json bad_kind = base;
  bad_kind["shifts"]["kind"] = "cauchy";
  CHECK_THROWS_AS(config_from_json_text(bad_kind.dump()), ConfigError);
}

TEST_CASE("validation rejects inconsistent studies") {
  auto expect_invalid = [](auto mutate) {
    ExperimentConfig c = sample_config();
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  expect_invalid([](ExperimentConfig& c) { c.seeds = 0; });
  expect_invalid([](ExperimentConfig& c) { c.subjects = 0; });
  expect_invalid([](ExperimentConfig& c) { c.subjects = 1; });  // FT needs a pool
  expect_invalid([](ExperimentConfig& c) { c.regimens = {"XX"}; });
  expect_invalid([](ExperimentConfig& c) { c.regimens.clear(); });
  expect_invalid([](ExperimentConfig& c) { c.split.mode = SplitSpec::Mode::Random; });
  expect_invalid([](ExperimentConfig& c) { c.extended_sigma_mm = 0.0; });
  expect_invalid([](ExperimentConfig& c) { c.curve_max_epochs = 0; });
  expect_invalid([](ExperimentConfig& c) { c.data_fractions = {1.5}; });
  expect_invalid([](ExperimentConfig& c) { c.data_fractions.clear(); });
  expect_invalid([](ExperimentConfig& c) { c.window_mode = "diag"; });
  expect_invalid([](ExperimentConfig& c) { c.bin_norm = "l1"; });
  expect_invalid([](ExperimentConfig& c) { c.array.array_center_x_px = 100; });
  expect_invalid([](ExperimentConfig& c) { c.train.batch_size = 0; });
  expect_invalid([](ExperimentConfig& c) { c.stimulus.head_max_mm = 2.0; });

  // FS-only studies are fine with a single subject.
  ExperimentConfig solo = sample_config();
  solo.regimens = {"FS"};
  solo.subjects = 1;
  solo.validate();
}

TEST_CASE("window area mode resolves to the nearest odd side") {
  ExperimentConfig c = sample_config();
  CHECK(c.resolved_window_side() == 121);  // side mode: taken literally

  c.window_mode = "area";
  c.array.window_side_px = 14641;  // 121^2
  CHECK(c.resolved_window_side() == 121);
  c.validate();

  c.array.window_side_px = 14400;  // sqrt = 120: ties resolve downward
  CHECK(c.resolved_window_side() == 119);
  c.array.window_side_px = 15000;  // sqrt ~ 122.47: nearest odd is 123
  CHECK(c.resolved_window_side() == 123);
  c.array.window_side_px = 2;
  CHECK(c.resolved_window_side() == 1);
}

TEST_CASE("output header names the config hash, master seed, and seed list") {
  ExperimentConfig c = sample_config();
  c.master_seed = 7;
  const std::string header = output_header(c);
  char want[64];
  std::snprintf(want, sizeof(want), "# config=%016llx master_seed=7 seeds=0,1,2",
                static_cast<unsigned long long>(config_hash(c)));
  CHECK(header == want);
}

TEST_CASE("configs load from disk and reject missing files") {
  const std::string path = "tmp_experiment_config.json";
  const ExperimentConfig c = sample_config();
  {
    std::ofstream out(path);
    out << config_to_json_text(c);
  }
  const ExperimentConfig back = load_config(path);
  CHECK(config_hash(back) == config_hash(c));
  std::remove(path.c_str());
  CHECK_THROWS(load_config(path));
}

TEST_CASE("leakage audits parse and count violations") {
  const std::string path = "tmp_leakage_audit.csv";
  {
    std::ofstream out(path);
    out << "# config=deadbeef\n";
    out << "experiment,target_subject,seed_index,pool_subjects,pool_records,target_records_in_pool\n";
    out << "data-scale,3,0,1;2;4,1200,0\n";
    out << "shift-bins,2,1,1;3,800,0\n";
  }
  const LeakageScan clean = scan_leakage_audit(path);
  CHECK(clean.rows.size() == 2);
  CHECK(clean.violations == 0);
  CHECK(clean.rows[0].experiment == "data-scale");
  CHECK(clean.rows[0].target_subject == 3);
  CHECK(clean.rows[0].pool_subjects == std::vector<int>{1, 2, 4});
  CHECK(clean.rows[0].pool_records == 1200);

  {
    std::ofstream out(path);
    out << "experiment,target_subject,seed_index,pool_subjects,pool_records,target_records_in_pool\n";
    out << "data-scale,2,0,1;2,900,0\n";   // target listed in its own pool
    out << "epoch-curves,4,0,1;2,700,12\n";  // target records leaked
  }
  const LeakageScan dirty = scan_leakage_audit(path);
  CHECK(dirty.rows.size() == 2);
  CHECK(dirty.violations == 2);

  {
    std::ofstream out(path);
    out << "# only comments\n";
  }
  CHECK_THROWS(scan_leakage_audit(path));
  std::remove(path.c_str());
  CHECK_THROWS(scan_leakage_audit(path));
}
