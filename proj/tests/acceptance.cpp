// End-to-end acceptance gate: one pass/fail line per criterion, exit code 0
// only if every criterion holds. Training-based criteria use a reduced
// cohort so the whole gate stays inside a desk-scale time budget; each line
// reports the measured values and wall time.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "psog/dataset.hpp"
#include "psog/experiment.hpp"
#include "psog/eye_model.hpp"
#include "psog/io.hpp"
#include "psog/metrics.hpp"
#include "psog/network.hpp"
#include "psog/reference.hpp"
#include "psog/rng.hpp"
#include "psog/sensor_array.hpp"
#include "psog/shift.hpp"
#include "psog/trainer.hpp"

using namespace psog;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int index, const char* name, bool ok, const std::string& detail, double secs) {
  std::printf("[%s] criterion %2d %-24s %s (%.1fs)\n", ok ? "PASS" : "FAIL", index, name,
              detail.c_str(), secs);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- criterion 1

// A finite-difference probe is only meaningful away from rectifier kinks:
// crossing one inside the +-step interval produces an O(1) one-sided error.
// Draws whose smallest pre-activation magnitude is below the step scale are
// redrawn (deterministically) rather than compared.
struct GradDraw {
  std::vector<double> params, inputs, targets;
  std::vector<std::size_t> rows;
};

GradDraw well_conditioned_draw(std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    GradDraw d;
    Rng rng(derive_seed(seed, {attempt}));
    d.params = nn::init_params(rng.next_u64());
    const int batch = 8;
    double min_pre = 1e9;
    for (int i = 0; i < batch; ++i) {
      std::vector<double> in(nn::kInSize);
      for (auto& x : in) x = rng.normal();
      d.inputs.insert(d.inputs.end(), in.begin(), in.end());
      d.targets.push_back(rng.uniform(-20.51, 20.51));
      d.targets.push_back(rng.uniform(-16.7, 16.7));
      d.rows.push_back(static_cast<std::size_t>(i));
      nn::Workspace ws;
      nn::forward(d.params, in.data(), ws);
      for (double p : ws.conv1_pre) min_pre = std::min(min_pre, std::abs(p));
      for (double p : ws.conv2_pre) min_pre = std::min(min_pre, std::abs(p));
      for (const auto& layer : ws.fc_pre)
        for (double p : layer) min_pre = std::min(min_pre, std::abs(p));
    }
    if (min_pre > 1e-4) return d;
  }
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const GradDraw d = well_conditioned_draw(static_cast<std::uint64_t>(1000 + trial));
    std::vector<double> grad;
    nn::BatchScratch scratch;
    nn::batch_loss_grad(d.params, d.inputs, d.targets, d.rows, grad, scratch);
    const auto fd = fd_gradient(d.params, d.inputs, d.targets, d.rows, 1e-5);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double denom = std::max(std::abs(fd[i]), std::abs(grad[i]));
      const double err = denom < 1e-8 ? std::abs(grad[i] - fd[i])
                                      : std::abs(grad[i] - fd[i]) / denom;
      worst = std::max(worst, err);
    }
  }
  const double secs = seconds_since(t0);
  report(1, "gradient-check", worst < 1e-4 && secs < 60.0,
         fmt("max relative error %.2e over 20 draws (< 1e-4)", worst), secs);
}

// ---------------------------------------------------------------- criterion 2

void criterion_forward_oracle() {
  const auto t0 = Clock::now();
  Rng rng(2);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto params = nn::init_params(rng.next_u64());
    std::vector<double> in(nn::kInSize);
    for (auto& x : in) x = rng.normal();
    nn::Workspace ws;
    nn::forward(params, in.data(), ws);
    const auto ref = ref_forward(params, in.data());
    worst = std::max(worst, std::abs(ws.out[0] - ref[0]));
    worst = std::max(worst, std::abs(ws.out[1] - ref[1]));
  }
  const double secs = seconds_since(t0);
  report(2, "forward-oracle", worst <= 1e-10 && secs < 10.0,
         fmt("max |fast - naive| %.2e over 100 frames (<= 1e-10)", worst), secs);
}

// ---------------------------------------------------------------- criterion 3

void criterion_kernel_normalization() {
  const auto t0 = Clock::now();
  const ImageSpec spec;
  const ArrayLayout layout;
  const auto kernel = receptive_kernel(layout.window_side_px);
  const double v = 0.7;
  const Image img(spec.width, spec.height, v);

  double worst = 0.0;
  Rng rng(3);
  std::vector<Shift2D> shifts;
  for (double dx : {-5.0, 0.0, 5.0})
    for (double dy : {-5.0, 0.0, 5.0}) {
      Shift2D s;
      s.dx_mm = dx;
      s.dy_mm = dy;
      shifts.push_back(s);
    }
  for (int i = 0; i < 16; ++i) {
    Shift2D s;
    s.dx_mm = rng.uniform(-5.0, 5.0);
    s.dy_mm = rng.uniform(-5.0, 5.0);
    shifts.push_back(s);
  }
  for (Shift2D s : shifts) {
    s = mm_to_px(s, spec.scale_px_per_mm);
    const auto frame = simulate_frame(img, spec, layout, kernel, s);
    for (double val : frame.values) worst = std::max(worst, std::abs(val - v));
  }
  report(3, "kernel-normalization", worst < 1e-9,
         fmt("max |sensor - 0.7| %.2e over %zu shifts (< 1e-9)", worst, shifts.size()),
         seconds_since(t0));
}

// ---------------------------------------------------------------- criterion 4

void criterion_shift_statistics() {
  const auto t0 = Clock::now();
  Rng rng(4);
  const int n = 100000;
  int in_x = 0, in_y = 0;
  double sx = 0.0, sx2 = 0.0, sy = 0.0, sy2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Shift2D s = sample_gaussian_shift(1.0, rng);
    if (std::abs(s.dx_mm) <= 2.0) ++in_x;
    if (std::abs(s.dy_mm) <= 2.0) ++in_y;
    sx += s.dx_mm;
    sx2 += s.dx_mm * s.dx_mm;
    sy += s.dy_mm;
    sy2 += s.dy_mm * s.dy_mm;
  }
  const double fx = static_cast<double>(in_x) / n;
  const double fy = static_cast<double>(in_y) / n;
  const double std_x = std::sqrt(sx2 / n - (sx / n) * (sx / n));
  const double std_y = std::sqrt(sy2 / n - (sy / n) * (sy / n));
  const bool ok = std::abs(fx - 0.9545) < 0.005 && std::abs(fy - 0.9545) < 0.005 &&
                  std::abs(std_x - 1.0) < 0.01 && std::abs(std_y - 1.0) < 0.01;
  report(4, "shift-statistics", ok,
         fmt("|d|<=2mm fractions %.4f/%.4f (0.9545 +- 0.005), std %.4f/%.4f (1.00 +- 1%%)",
             fx, fy, std_x, std_y),
         seconds_since(t0));
}

// ---------------------------------------------------------------- criterion 5

void criterion_parameter_budget() {
  const auto t0 = Clock::now();
  const auto params = nn::init_params(1);
  const bool ok = nn::kParamCount == 2710 && params.size() == 2710;
  report(5, "parameter-budget", ok, fmt("network has %d parameters (== 2710)", nn::kParamCount),
         seconds_since(t0));
}

// -------------------------------------------------- shared training fixtures

ExperimentConfig small_config() {
  ExperimentConfig cfg = default_config();
  cfg.subjects = 6;  // reduced cohort: keeps the gate inside a desk-scale budget
  return cfg;
}

TrainConfig run_config(const ExperimentConfig& cfg, std::uint64_t tag, int subject, int seed_idx) {
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.master_seed, {tag, static_cast<std::uint64_t>(subject),
                                          static_cast<std::uint64_t>(seed_idx)});
  return tc;
}

Splits random_splits(const ExperimentConfig& cfg, const Dataset& ds, int subject) {
  SplitSpec spec = cfg.scale_split;
  spec.seed = derive_seed(cfg.master_seed, {0xACC0, static_cast<std::uint64_t>(subject)});
  return split_random(ds, spec);
}

// ---------------------------------------------------------------- criterion 6

void criterion_shift_robustness(ExperimentRunner& runner) {
  const auto t0 = Clock::now();
  const auto& cfg = runner.config();
  std::vector<double> ratios;
  std::string detail;
  for (int subject : {1, 2}) {
    const Dataset& shifted = runner.subject_dataset(subject, ExperimentRunner::Variant::Main);
    const Dataset& zero = runner.subject_dataset(subject, ExperimentRunner::Variant::ZeroShift);
    const Splits sp_shift = random_splits(cfg, shifted, subject);
    const Splits sp_zero = random_splits(cfg, zero, subject);
    for (int k = 0; k < 5; ++k) {
      const TrainConfig tc = run_config(cfg, 0xC6, subject, k);
      const TrainedModel m_shift = train_fs(shifted, sp_shift, tc);
      const TrainedModel m_zero = train_fs(zero, sp_zero, tc);
      const double a_shift =
          evaluate_model(m_shift.params, m_shift.norm, shifted, sp_shift.test).accuracy;
      const double a_zero =
          evaluate_model(m_zero.params, m_zero.norm, shifted, sp_shift.test).accuracy;
      ratios.push_back(a_zero / a_shift);
    }
  }
  const double med = median(ratios);
  const double secs = seconds_since(t0);
  report(6, "shift-robustness", med >= 2.0 && secs < 1800.0,
         fmt("zero-shift-trained / shift-trained error ratio median %.2fx (>= 2x, 10 runs)", med),
         secs);
}

// ---------------------------------------------------------------- criterion 7

void criterion_data_scale(ExperimentRunner& runner) {
  const auto t0 = Clock::now();
  const auto& cfg = runner.config();
  const std::vector<double> fractions = {0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> curve;  // median over seeds of mean-over-subjects accuracy
  std::vector<std::vector<double>> per_seed(5, std::vector<double>());

  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    std::vector<double> seed_means(5, 0.0);
    for (int k = 0; k < 5; ++k) {
      double total = 0.0;
      int count = 0;
      for (int subject : {1, 2}) {
        const Dataset& ds = runner.subject_dataset(subject, ExperimentRunner::Variant::Main);
        const Splits full = random_splits(cfg, ds, subject);
        const std::uint64_t sub_seed =
            derive_seed(cfg.master_seed, {0xDF, static_cast<std::uint64_t>(subject),
                                          static_cast<std::uint64_t>(k)});
        const Splits part = subset_training(full, fractions[fi], sub_seed);
        TrainConfig tc = run_config(cfg, 0xC7, subject, k);
        tc.seed = derive_seed(tc.seed, {static_cast<std::uint64_t>(fi)});
        const TrainedModel m = train_fs(ds, part, tc);
        total += evaluate_model(m.params, m.norm, ds, part.test).accuracy;
        ++count;
      }
      seed_means[static_cast<std::size_t>(k)] = total / count;
    }
    curve.push_back(median(seed_means));
  }

  bool non_increasing = true;
  for (std::size_t i = 1; i < curve.size(); ++i)
    non_increasing = non_increasing && curve[i] <= curve[i - 1] + 0.05;
  const bool ends_ok = curve.back() <= curve.front();
  report(7, "data-scale-trend", non_increasing && ends_ok,
         fmt("accuracy at 20..100%%: %.3f %.3f %.3f %.3f %.3f deg (non-increasing +- 0.05)",
             curve[0], curve[1], curve[2], curve[3], curve[4]),
         seconds_since(t0));
}

// ---------------------------------------------------------------- criterion 8

void criterion_shift_bins(ExperimentRunner& runner) {
  const auto t0 = Clock::now();
  const auto& cfg = runner.config();
  std::array<std::vector<double>, kNumShiftBins> per_bin;
  for (int subject : {1, 2}) {
    const Dataset& ds = runner.subject_dataset(subject, ExperimentRunner::Variant::Main);
    SplitSpec spec = cfg.split;
    spec.seed = derive_seed(cfg.master_seed, {0xACC8, static_cast<std::uint64_t>(subject)});
    const Splits splits = split_shift_binned(ds, spec);
    for (int k = 0; k < 5; ++k) {
      const TrainConfig tc = run_config(cfg, 0xC8, subject, k);
      const TrainedModel m = train_fs(ds, splits, tc);
      for (int b = 0; b < kNumShiftBins; ++b) {
        const auto& idx = splits.bin_tests[static_cast<std::size_t>(b)];
        if (idx.empty()) continue;
        per_bin[static_cast<std::size_t>(b)].push_back(
            evaluate_model(m.params, m.norm, ds, idx).accuracy);
      }
    }
  }
  std::array<double, kNumShiftBins> med{};
  bool have_all = true;
  for (int b = 0; b < kNumShiftBins; ++b) {
    have_all = have_all && !per_bin[static_cast<std::size_t>(b)].empty();
    if (have_all) med[static_cast<std::size_t>(b)] = median(per_bin[static_cast<std::size_t>(b)]);
  }
  const bool ordered = have_all && med[0] < med[1] && med[1] <= med[2] && med[2] <= med[3];
  const bool deltas = have_all && (med[3] - med[0]) > (med[1] - med[0]);
  report(8, "shift-bin-ordering", ordered && deltas,
         fmt("bin medians %.3f < %.3f <= %.3f <= %.3f deg; B4 delta %.3f > B2 delta %.3f",
             med[0], med[1], med[2], med[3], med[3] - med[0], med[1] - med[0]),
         seconds_since(t0));
}

// ---------------------------------------------------------------- criterion 9

void criterion_epoch_pattern(ExperimentRunner& runner) {
  const auto t0 = Clock::now();
  const auto& cfg = runner.config();
  const int cohort = cfg.subjects;
  const int epochs = cfg.curve_max_epochs;
  std::vector<double> ft_first, fs_first, ft_final, fs_final;  // per-seed cohort means
  for (int k = 0; k < 5; ++k) {
    double f1 = 0.0, s1 = 0.0, fE = 0.0, sE = 0.0;
    for (int subject = 1; subject <= cohort; ++subject) {
      const Dataset& ds = runner.subject_dataset(subject, ExperimentRunner::Variant::Main);
      const Splits splits = random_splits(cfg, ds, subject);
      TrainConfig tc = run_config(cfg, 0xC9, subject, k);
      tc.patience = kNoEarlyStop;
      tc.max_epochs = epochs;
      const auto& pre = runner.pretrained(subject, k, ExperimentRunner::Variant::Main);
      const TrainedModel ft = fine_tune(pre, ds, splits, tc);
      const TrainedModel fs_model = train_fs(ds, splits, tc);
      f1 += ft.history.epochs.front().val_accuracy / cohort;
      s1 += fs_model.history.epochs.front().val_accuracy / cohort;
      fE += ft.history.epochs.back().val_accuracy / cohort;
      sE += fs_model.history.epochs.back().val_accuracy / cohort;
    }
    ft_first.push_back(f1);
    fs_first.push_back(s1);
    ft_final.push_back(fE);
    fs_final.push_back(sE);
  }
  const double ft1 = median(ft_first), fs1 = median(fs_first);
  const double ftE = median(ft_final), fsE = median(fs_final);
  const bool ok = ft1 < fs1 && fsE <= ftE;
  report(9, "epoch-pattern", ok,
         fmt("epoch 1: FT %.3f < FS %.3f; epoch %d: FS %.3f <= FT %.3f (cohort-mean medians, "
             "5 seeds)",
             ft1, fs1, epochs, fsE, ftE),
         seconds_since(t0));
}

// ------------------------------------------------------- criteria 10 and 11

ExperimentConfig tiny_config() {
  ExperimentConfig cfg = default_config();
  cfg.subjects = 2;
  cfg.seeds = 1;
  cfg.stimulus.grid_x = 3;
  cfg.stimulus.grid_y = 3;
  cfg.stimulus.min_samples_per_fixation = 8;
  cfg.stimulus.max_samples_per_fixation = 16;
  cfg.curve_max_epochs = 120;
  return cfg;
}

std::vector<fs::path> sorted_outputs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension();
    if (ext == ".csv" || ext == ".svg") files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void criteria_determinism_and_leakage() {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = tiny_config();
  const fs::path dir1 = "acceptance_scratch/sweep_jobs1";
  const fs::path dir2 = "acceptance_scratch/sweep_jobs2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  {
    ExperimentRunner r1(cfg, dir1.string(), 1);
    r1.run_all();
    ExperimentRunner r2(cfg, dir2.string(), 2);
    r2.run_all();
  }
  const auto files1 = sorted_outputs(dir1);
  const auto files2 = sorted_outputs(dir2);
  bool identical = files1 == files2 && !files1.empty();
  std::string first_diff = "none";
  if (identical) {
    for (const auto& rel : files1) {
      if (slurp(dir1 / rel) != slurp(dir2 / rel)) {
        identical = false;
        first_diff = rel.string();
        break;
      }
    }
  } else {
    first_diff = "file sets differ";
  }
  report(10, "determinism", identical,
         fmt("%zu output files byte-identical across --jobs 1 vs 2 (first diff: %s)",
             files1.size(), first_diff.c_str()),
         seconds_since(t0));

  const auto t1 = Clock::now();
  const LeakageScan scan = scan_leakage_audit((dir2 / "leakage_audit.csv").string());
  const bool ok = !scan.rows.empty() && scan.violations == 0;
  report(11, "leakage-freedom", ok,
         fmt("%zu pre-training pools audited across a full sweep, %zu violations",
             scan.rows.size(), scan.violations),
         seconds_since(t1));
}

}  // namespace

int main() {
  std::printf("acceptance gate: 11 criteria\n");
  const auto t0 = Clock::now();

  criterion_gradients();
  criterion_forward_oracle();
  criterion_kernel_normalization();
  criterion_shift_statistics();
  criterion_parameter_budget();

  criteria_determinism_and_leakage();

  ExperimentRunner runner(small_config(), "acceptance_scratch/cohort", 1);
  criterion_shift_robustness(runner);
  criterion_data_scale(runner);
  criterion_shift_bins(runner);
  criterion_epoch_pattern(runner);

  std::printf("%d/11 criteria passed (total %.0fs)\n", 11 - g_failures, seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
