// psog: synthetic PS-OG gaze-mapping workbench.
//
// Pipeline stages are separate subcommands so intermediate artifacts stay
// inspectable: generate (synthetic datasets), simulate (sensor readout from
// external images), train, evaluate, sweep (full studies), report.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "psog/dataset.hpp"
#include "psog/experiment.hpp"
#include "psog/io.hpp"
#include "psog/metrics.hpp"
#include "psog/trainer.hpp"

namespace {

using namespace psog;

ExperimentConfig resolve_config(const std::string& config_path, std::uint64_t seed_override,
                                bool has_seed) {
  ExperimentConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
  if (has_seed) cfg.master_seed = seed_override;
  cfg.validate();
  return cfg;
}

std::string g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ExperimentRunner::Variant parse_variant(const std::string& name) {
  if (name == "main") return ExperimentRunner::Variant::Main;
  if (name == "zero-shift") return ExperimentRunner::Variant::ZeroShift;
  if (name == "extended") return ExperimentRunner::Variant::Extended;
  throw ConfigError("unknown variant: " + name);
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seed_override, bool has_seed, const std::string& variant_name,
                 int pgm_frames) {
  ExperimentConfig cfg = resolve_config(config_path, seed_override, has_seed);
  ExperimentRunner runner(cfg, out_dir, 1);
  auto variant = parse_variant(variant_name);

  std::ofstream cfg_out(out_dir + "/config.json");
  cfg_out << config_to_json_text(cfg);
  cfg_out.close();

  for (int s = 1; s <= cfg.subjects; ++s) {
    const Dataset& ds = runner.subject_dataset(s, variant);
    const BuildStats& bs = runner.build_stats(s, variant);
    char name[64];
    std::snprintf(name, sizeof(name), "/dataset_s%02d.csv", s);
    write_dataset_csv(out_dir + name, ds, cfg.image.scale_px_per_mm, output_header(cfg));
    std::cout << "subject " << s << ": " << ds.records.size() << " records, rejection rate "
              << bs.shift_stats.rejection_rate() << ", boundary resamples "
              << bs.boundary_resamples << "\n";
  }

  if (pgm_frames > 0) {
    SessionPlan plan = runner.subject_plan(1);
    int n = std::min<int>(pgm_frames, static_cast<int>(plan.samples.size()));
    for (int i = 0; i < n; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "/frame_s01_%03d.pgm", i);
      write_pgm(out_dir + name, render_sample(plan, plan.samples[static_cast<std::size_t>(i)]));
    }
    std::cout << "wrote " << n << " preview frames for subject 1\n";
  }
  std::cout << "config hash " << std::hex << config_hash(cfg) << std::dec << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& manifest,
                 const std::string& out_file, std::uint64_t seed_override, bool has_seed) {
  ExperimentConfig cfg = resolve_config(config_path, seed_override, has_seed);
  ArrayLayout layout = cfg.array;
  layout.window_side_px = cfg.resolved_window_side();
  ReceptiveKernel kernel = receptive_kernel(layout.window_side_px);
  Dataset ds = ingest_image_dataset(manifest, layout, kernel);
  write_dataset_csv(out_file, ds, cfg.image.scale_px_per_mm, output_header(cfg));
  std::cout << "simulated " << ds.records.size() << " frames -> " << out_file << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_ckpt, std::uint64_t seed_override, bool has_seed,
              const std::string& regimen, const std::string& pretrained_path,
              const std::string& split_mode) {
  ExperimentConfig cfg = resolve_config(config_path, seed_override, has_seed);
  Dataset ds = read_dataset_csv(data_path);

  SplitSpec spec = cfg.scale_split;
  if (split_mode == "shift_binned") {
    spec = cfg.split;
    spec.mode = SplitSpec::Mode::ShiftBinned;
  } else if (split_mode != "random") {
    throw ConfigError("unknown split mode: " + split_mode);
  }
  spec.seed = derive_seed(cfg.master_seed, {0x5711});
  Splits splits = spec.mode == SplitSpec::Mode::ShiftBinned ? split_shift_binned(ds, spec)
                                                            : split_random(ds, spec);
  for (const auto& w : splits.warnings) std::cerr << "warning: " << w << "\n";

  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.master_seed, {0xE1});
  TrainedModel model;
  if (regimen == "FS") {
    model = train_fs(ds, splits, tc);
  } else if (regimen == "FT") {
    if (pretrained_path.empty())
      throw ConfigError("FT needs --pretrained (a checkpoint from pre-training)");
    Checkpoint ckpt = load_checkpoint(pretrained_path);
    model = fine_tune(ckpt.params, ds, splits, tc);
  } else {
    throw ConfigError("unknown regimen: " + regimen);
  }

  std::map<std::string, std::string> meta;
  meta["regimen"] = regimen;
  meta["seed"] = std::to_string(tc.seed);
  meta["config_hash"] = std::to_string(config_hash(cfg));
  meta["data"] = std::filesystem::path(data_path).filename().string();
  meta["best_epoch"] = std::to_string(model.history.best_epoch);
  save_checkpoint(out_ckpt, model.params, model.norm, meta);

  EvalResult test = evaluate_model(model.params, model.norm, ds, splits.test);
  std::cout << "trained " << regimen << ": best epoch " << model.history.best_epoch
            << ", validation accuracy " << g17(model.history.best_val_accuracy)
            << " deg, test accuracy " << g17(test.accuracy) << " deg\n";
  std::cout << "checkpoint -> " << out_ckpt << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& data_path,
                 const std::string& model_path, const std::string& out_file,
                 std::uint64_t seed_override, bool has_seed) {
  ExperimentConfig cfg = resolve_config(config_path, seed_override, has_seed);
  Dataset ds = read_dataset_csv(data_path);
  Checkpoint ckpt = load_checkpoint(model_path);

  std::vector<std::size_t> all(ds.records.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  EvalResult res = evaluate_model(ckpt.params, ckpt.norm, ds, all);

  std::vector<GazeSample> truths;
  std::vector<Shift2D> shifts;
  std::vector<int> subjects;
  truths.reserve(all.size());
  for (const auto& rec : ds.records) {
    truths.push_back(rec.gaze);
    shifts.push_back(rec.shift);
    subjects.push_back(rec.subject_id);
  }
  AccuracyReport report = build_report(res.predictions, truths, shifts, subjects);
  SpatialAccuracyMap map =
      accuracy_map(res.predictions, truths, 4, 4, cfg.stimulus.range_x_deg,
                   cfg.stimulus.range_y_deg);

  std::ostringstream text;
  text << output_header(cfg) << "\n";
  text << "records: " << ds.records.size() << "\n";
  text << "overall accuracy: " << g17(report.overall) << " deg (loss " << g17(res.loss)
       << " deg^2)\n\n";
  text << "accuracy map (deg, rows top to bottom):\n" << format_accuracy_map(map) << "\n";
  text << "per shift bin:\n";
  for (int b = 0; b < kNumShiftBins; ++b) {
    auto bin = static_cast<ShiftBin>(b);
    auto bi = static_cast<std::size_t>(b);
    text << "  " << bin_label(bin) << ": ";
    if (report.by_bin.mean[bi].has_value()) {
      text << g17(*report.by_bin.mean[bi]) << " deg (n=" << report.by_bin.count[bi] << ")";
      if (auto d = report.by_bin.delta_vs_b1(bin); d.has_value() && b > 0)
        text << ", delta vs B1 " << g17(*d) << " deg";
    } else {
      text << "no samples";
    }
    text << "\n";
  }
  if (report.per_subject.size() > 1) {
    text << "per subject:\n";
    for (const auto& [id, acc] : report.per_subject)
      text << "  s" << id << ": " << g17(acc) << " deg\n";
  }

  if (!out_file.empty()) {
    std::ofstream out(out_file);
    if (!out) throw std::runtime_error("cannot open for write: " + out_file);
    out << text.str();
  }
  std::cout << text.str();
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              std::uint64_t seed_override, bool has_seed, int jobs,
              const std::string& experiment) {
  ExperimentConfig cfg = resolve_config(config_path, seed_override, has_seed);
  ExperimentRunner runner(cfg, out_dir, jobs);
  if (experiment == "data-scale") {
    runner.run_data_scale();
  } else if (experiment == "shift-bins") {
    runner.run_shift_bins();
  } else if (experiment == "extended-range") {
    runner.run_extended_range();
  } else if (experiment == "epoch-curves") {
    runner.run_epoch_curves();
  } else if (experiment == "all") {
    runner.run_all();
  } else {
    throw ConfigError("unknown experiment: " + experiment);
  }
  for (const auto& f : runner.failures()) std::cerr << "warning: failed run: " << f << "\n";
  std::cout << "sweep '" << experiment << "' complete -> " << out_dir << " ("
            << runner.failures().size() << " failed runs)\n";
  return runner.failures().empty() ? 0 : 1;
}

int cmd_report(const std::string& out_dir, const std::string& report_file) {
  std::ostringstream text;
  bool any = false;
  for (const char* name :
       {"data_scale_summary.csv", "shift_bins_summary.csv", "extended_range_summary.csv",
        "epoch_curves_summary.csv"}) {
    std::ifstream in(out_dir + "/" + name);
    if (!in) continue;
    any = true;
    text << "== " << name << " ==\n" << in.rdbuf() << "\n";
  }
  std::string audit_path = out_dir + "/leakage_audit.csv";
  if (std::ifstream(audit_path).good()) {
    LeakageScan scan = scan_leakage_audit(audit_path);
    text << "== leakage audit ==\n"
         << scan.rows.size() << " pre-training pools scanned, " << scan.violations
         << " violations\n";
    any = true;
    if (scan.violations > 0) {
      std::cerr << "error: leakage audit found " << scan.violations << " violations\n";
    }
  }
  if (!any) {
    std::cerr << "no sweep outputs found in " << out_dir << "\n";
    return 1;
  }
  if (!report_file.empty()) {
    std::ofstream out(report_file);
    if (!out) throw std::runtime_error("cannot open for write: " + report_file);
    out << text.str();
  }
  std::cout << text.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic PS-OG gaze-mapping workbench"};
  app.require_subcommand(1);

  std::string config_path, out_path, manifest, data_path, model_path, pretrained_path;
  std::string variant = "main", regimen = "FS", split_mode = "random", experiment = "all";
  std::uint64_t seed = 0;
  int jobs = 1, pgm_frames = 0;

  auto* gen = app.add_subcommand("generate", "Render the synthetic cohort into dataset CSVs");
  gen->add_option("--config", config_path, "Experiment config JSON (defaults used if omitted)");
  gen->add_option("--out", out_path, "Output directory")->required();
  auto* gen_seed = gen->add_option("--seed", seed, "Master seed override");
  gen->add_option("--variant", variant, "Shift variant: main, zero-shift, extended")
      ->check(CLI::IsMember({"main", "zero-shift", "extended"}));
  gen->add_option("--pgm", pgm_frames, "Also write this many preview frames as PGM");

  auto* sim = app.add_subcommand("simulate", "Sensor readout for externally rendered images");
  sim->add_option("--config", config_path, "Experiment config JSON");
  sim->add_option("--manifest", manifest, "Image manifest CSV")->required();
  sim->add_option("--out", out_path, "Output dataset CSV")->required();
  auto* sim_seed = sim->add_option("--seed", seed, "Master seed override");

  auto* trn = app.add_subcommand("train", "Train one model on a dataset CSV");
  trn->add_option("--config", config_path, "Experiment config JSON");
  trn->add_option("--data", data_path, "Dataset CSV")->required();
  trn->add_option("--out", out_path, "Checkpoint output path")->required();
  auto* trn_seed = trn->add_option("--seed", seed, "Master seed override");
  trn->add_option("--regimen", regimen, "FS or FT")->check(CLI::IsMember({"FS", "FT"}));
  trn->add_option("--pretrained", pretrained_path, "Checkpoint to fine-tune from (FT)");
  trn->add_option("--split", split_mode, "random or shift_binned")
      ->check(CLI::IsMember({"random", "shift_binned"}));

  auto* evl = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset CSV");
  evl->add_option("--config", config_path, "Experiment config JSON");
  evl->add_option("--data", data_path, "Dataset CSV")->required();
  evl->add_option("--model", model_path, "Checkpoint path")->required();
  evl->add_option("--out", out_path, "Write the text report here too");
  auto* evl_seed = evl->add_option("--seed", seed, "Master seed override");

  auto* swp = app.add_subcommand("sweep", "Run the configured studies end-to-end");
  swp->add_option("--config", config_path, "Experiment config JSON");
  swp->add_option("--out", out_path, "Output directory")->required();
  auto* swp_seed = swp->add_option("--seed", seed, "Master seed override");
  swp->add_option("--jobs", jobs, "Worker threads (outputs identical for any value)")
      ->check(CLI::PositiveNumber);
  swp->add_option("--experiment", experiment,
                  "data-scale, shift-bins, extended-range, epoch-curves, all")
      ->check(CLI::IsMember({"data-scale", "shift-bins", "extended-range", "epoch-curves", "all"}));

  auto* rep = app.add_subcommand("report", "Summarize sweep outputs in one text report");
  rep->add_option("--out", out_path, "Sweep output directory")->required();
  rep->add_option("--report", data_path, "Write the report to this file as well");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_generate(config_path, out_path, seed, !gen_seed->empty(), variant, pgm_frames);
    if (sim->parsed())
      return cmd_simulate(config_path, manifest, out_path, seed, !sim_seed->empty());
    if (trn->parsed())
      return cmd_train(config_path, data_path, out_path, seed, !trn_seed->empty(), regimen,
                       pretrained_path, split_mode);
    if (evl->parsed())
      return cmd_evaluate(config_path, data_path, model_path, out_path, seed, !evl_seed->empty());
    if (swp->parsed())
      return cmd_sweep(config_path, out_path, seed, !swp_seed->empty(), jobs, experiment);
    if (rep->parsed()) return cmd_report(out_path, data_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
