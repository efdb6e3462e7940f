#include "psog/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "psog/io.hpp"
#include "psog/metrics.hpp"
#include "psog/svg.hpp"

namespace psog {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& scope,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw ConfigError("unknown config key: " + scope + "." + key);
    }
  }
}

json split_to_json(const SplitSpec& s) {
  return json{{"mode", s.mode == SplitSpec::Mode::Random ? "random" : "shift_binned"},
              {"train", s.train},
              {"validation", s.validation},
              {"test", s.test}};
}

SplitSpec split_from_json(const json& j, const std::string& scope) {
  check_keys(j, scope, {"mode", "train", "validation", "test"});
  SplitSpec s;
  std::string mode = j.at("mode").get<std::string>();
  if (mode == "random") {
    s.mode = SplitSpec::Mode::Random;
  } else if (mode == "shift_binned") {
    s.mode = SplitSpec::Mode::ShiftBinned;
  } else {
    throw ConfigError("unknown split mode: " + mode);
  }
  s.train = j.at("train").get<double>();
  s.validation = j.at("validation").get<double>();
  s.test = j.at("test").get<double>();
  return s;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["master_seed"] = c.master_seed;
  j["seeds"] = c.seeds;
  j["subjects"] = c.subjects;
  j["image"] = {{"width", c.image.width},
                {"height", c.image.height},
                {"scale_px_per_mm", c.image.scale_px_per_mm}};
  j["array"] = {{"rows", c.array.rows},
                {"cols", c.array.cols},
                {"window_side_px", c.array.window_side_px},
                {"pitch_px", c.array.pitch_px},
                {"center_x_px", c.array.array_center_x_px},
                {"center_y_px", c.array.array_center_y_px}};
  j["stimulus"] = {{"grid_x", c.stimulus.grid_x},
                   {"grid_y", c.stimulus.grid_y},
                   {"range_x_deg", c.stimulus.range_x_deg},
                   {"range_y_deg", c.stimulus.range_y_deg},
                   {"min_samples_per_fixation", c.stimulus.min_samples_per_fixation},
                   {"max_samples_per_fixation", c.stimulus.max_samples_per_fixation},
                   {"gaze_jitter_deg", c.stimulus.gaze_jitter_deg},
                   {"head_walk_step_mm", c.stimulus.head_walk_step_mm},
                   {"head_max_mm", c.stimulus.head_max_mm}};
  j["shifts"] = {{"kind", c.shifts.kind == ShiftDistribution::Kind::Gaussian ? "gaussian" : "grid"},
                 {"sigma_mm", c.shifts.sigma_mm},
                 {"grid_range_mm", c.shifts.grid_range_mm},
                 {"grid_n_per_axis", c.shifts.grid_n_per_axis},
                 {"max_component_mm", c.shifts.max_component_mm}};
  j["extended_sigma_mm"] = c.extended_sigma_mm;
  j["split"] = split_to_json(c.split);
  j["scale_split"] = split_to_json(c.scale_split);
  j["extended_split"] = split_to_json(c.extended_split);
  j["train"] = {{"learning_rate", c.train.adam.learning_rate},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"epsilon", c.train.adam.epsilon},
                {"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience}};
  j["curve_max_epochs"] = c.curve_max_epochs;
  j["regimens"] = c.regimens;
  j["data_fractions"] = c.data_fractions;
  j["window_mode"] = c.window_mode;
  j["bin_norm"] = c.bin_norm;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, "config",
             {"master_seed", "seeds", "subjects", "image", "array", "stimulus", "shifts",
              "extended_sigma_mm", "split", "scale_split", "extended_split", "train",
              "curve_max_epochs", "regimens", "data_fractions", "window_mode", "bin_norm"});
  ExperimentConfig c = default_config();
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.seeds = j.at("seeds").get<int>();
  c.subjects = j.at("subjects").get<int>();
  {
    const json& i = j.at("image");
    check_keys(i, "image", {"width", "height", "scale_px_per_mm"});
    c.image.width = i.at("width").get<int>();
    c.image.height = i.at("height").get<int>();
    c.image.scale_px_per_mm = i.at("scale_px_per_mm").get<double>();
  }
  {
    const json& a = j.at("array");
    check_keys(a, "array",
               {"rows", "cols", "window_side_px", "pitch_px", "center_x_px", "center_y_px"});
    c.array.rows = a.at("rows").get<int>();
    c.array.cols = a.at("cols").get<int>();
    c.array.window_side_px = a.at("window_side_px").get<int>();
    c.array.pitch_px = a.at("pitch_px").get<int>();
    c.array.array_center_x_px = a.at("center_x_px").get<int>();
    c.array.array_center_y_px = a.at("center_y_px").get<int>();
  }
  {
    const json& s = j.at("stimulus");
    check_keys(s, "stimulus",
               {"grid_x", "grid_y", "range_x_deg", "range_y_deg", "min_samples_per_fixation",
                "max_samples_per_fixation", "gaze_jitter_deg", "head_walk_step_mm",
                "head_max_mm"});
    c.stimulus.grid_x = s.at("grid_x").get<int>();
    c.stimulus.grid_y = s.at("grid_y").get<int>();
    c.stimulus.range_x_deg = s.at("range_x_deg").get<double>();
    c.stimulus.range_y_deg = s.at("range_y_deg").get<double>();
    c.stimulus.min_samples_per_fixation = s.at("min_samples_per_fixation").get<int>();
    c.stimulus.max_samples_per_fixation = s.at("max_samples_per_fixation").get<int>();
    c.stimulus.gaze_jitter_deg = s.at("gaze_jitter_deg").get<double>();
    c.stimulus.head_walk_step_mm = s.at("head_walk_step_mm").get<double>();
    c.stimulus.head_max_mm = s.at("head_max_mm").get<double>();
  }
  {
    const json& s = j.at("shifts");
    check_keys(s, "shifts",
               {"kind", "sigma_mm", "grid_range_mm", "grid_n_per_axis", "max_component_mm"});
    std::string kind = s.at("kind").get<std::string>();
    if (kind == "gaussian") {
      c.shifts.kind = ShiftDistribution::Kind::Gaussian;
    } else if (kind == "grid") {
      c.shifts.kind = ShiftDistribution::Kind::Grid;
    } else {
      throw ConfigError("unknown shift distribution kind: " + kind);
    }
    c.shifts.sigma_mm = s.at("sigma_mm").get<double>();
    c.shifts.grid_range_mm = s.at("grid_range_mm").get<double>();
    c.shifts.grid_n_per_axis = s.at("grid_n_per_axis").get<int>();
    c.shifts.max_component_mm = s.at("max_component_mm").get<double>();
  }
  c.extended_sigma_mm = j.at("extended_sigma_mm").get<double>();
  c.split = split_from_json(j.at("split"), "split");
  c.scale_split = split_from_json(j.at("scale_split"), "scale_split");
  c.extended_split = split_from_json(j.at("extended_split"), "extended_split");
  {
    const json& t = j.at("train");
    check_keys(t, "train",
               {"learning_rate", "beta1", "beta2", "epsilon", "batch_size", "max_epochs",
                "patience"});
    c.train.adam.learning_rate = t.at("learning_rate").get<double>();
    c.train.adam.beta1 = t.at("beta1").get<double>();
    c.train.adam.beta2 = t.at("beta2").get<double>();
    c.train.adam.epsilon = t.at("epsilon").get<double>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.max_epochs = t.at("max_epochs").get<int>();
    c.train.patience = t.at("patience").get<int>();
  }
  c.curve_max_epochs = j.at("curve_max_epochs").get<int>();
  c.regimens = j.at("regimens").get<std::vector<std::string>>();
  c.data_fractions = j.at("data_fractions").get<std::vector<double>>();
  c.window_mode = j.at("window_mode").get<std::string>();
  c.bin_norm = j.at("bin_norm").get<std::string>();
  c.validate();
  return c;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t n = 0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  r.n = v.size();
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - r.mean) * (x - r.mean);
  r.stddev = std::sqrt(acc / static_cast<double>(v.size()));
  return r;
}

std::string join_ints(const std::vector<int>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds < 1) throw ConfigError("need at least one seed");
  if (subjects < 1) throw ConfigError("need at least one subject");
  image.validate();
  stimulus.validate();
  split.validate();
  scale_split.validate();
  extended_split.validate();
  train.validate();
  if (split.mode != SplitSpec::Mode::ShiftBinned)
    throw ConfigError("the shift-bin study requires split.mode = shift_binned");
  if (extended_sigma_mm <= 0.0) throw ConfigError("extended sigma must be positive");
  if (curve_max_epochs < 1) throw ConfigError("curve_max_epochs must be at least 1");
  if (regimens.empty()) throw ConfigError("at least one regimen is required");
  for (const auto& r : regimens) {
    if (r != "FS" && r != "FT") throw ConfigError("unknown regimen: " + r);
    if (r == "FT" && subjects < 2)
      throw ConfigError("FT needs at least two subjects for the pre-training pool");
  }
  if (data_fractions.empty()) throw ConfigError("at least one data fraction is required");
  for (double f : data_fractions) {
    if (f <= 0.0 || f > 1.0) throw ConfigError("data fractions must lie in (0,1]");
  }
  if (window_mode != "side" && window_mode != "area")
    throw ConfigError("window_mode must be 'side' or 'area'");
  if (bin_norm != "euclidean" && bin_norm != "max")
    throw ConfigError("bin_norm must be 'euclidean' or 'max'");
  ArrayLayout resolved = array;
  resolved.window_side_px = resolved_window_side();
  resolved.validate(image);
}

int ExperimentConfig::resolved_window_side() const {
  if (window_mode == "side") return array.window_side_px;
  // "area": the configured value counts total pixels; use the nearest odd
  // side length.
  double root = std::sqrt(static_cast<double>(array.window_side_px));
  auto s = static_cast<int>(std::llround(root));
  if (s % 2 == 0) s = (root - (s - 1) <= (s + 1) - root) ? s - 1 : s + 1;
  return std::max(s, 1);
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  // ~24 samples per fixation x 25 fixations gives ~600 records per subject.
  c.stimulus.min_samples_per_fixation = 16;
  c.stimulus.max_samples_per_fixation = 32;
  c.split.mode = SplitSpec::Mode::ShiftBinned;
  c.split.train = 0.56;
  c.split.validation = 0.14;
  c.split.test = 0.30;
  c.scale_split.mode = SplitSpec::Mode::Random;
  c.scale_split.train = 0.60;
  c.scale_split.validation = 0.10;
  c.scale_split.test = 0.30;
  c.extended_split.mode = SplitSpec::Mode::Random;
  c.extended_split.train = 0.24;
  c.extended_split.validation = 0.06;
  c.extended_split.test = 0.70;
  return c;
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
  return config_to_json(cfg).dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  return fnv1a64(config_to_json(cfg).dump());
}

std::string output_header(const ExperimentConfig& cfg) {
  std::string seeds;
  for (int k = 0; k < cfg.seeds; ++k) {
    if (k > 0) seeds += ",";
    seeds += std::to_string(k);
  }
  return "# config=" + hex64(config_hash(cfg)) + " master_seed=" +
         std::to_string(cfg.master_seed) + " seeds=" + seeds;
}

LeakageScan scan_leakage_audit(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open for read: " + csv_path);
  LeakageScan scan;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      saw_header = true;  // column header
      continue;
    }
    std::stringstream ss(line);
    std::string field;
    LeakageAuditRow row;
    std::getline(ss, row.experiment, ',');
    std::getline(ss, field, ',');
    row.target_subject = std::stoi(field);
    std::getline(ss, field, ',');
    row.seed_index = std::stoi(field);
    std::getline(ss, field, ',');
    {
      std::stringstream ps(field);
      std::string id;
      while (std::getline(ps, id, ';')) {
        if (!id.empty()) row.pool_subjects.push_back(std::stoi(id));
      }
    }
    std::getline(ss, field, ',');
    row.pool_records = std::stoull(field);
    std::getline(ss, field, ',');
    row.target_records_in_pool = std::stoull(field);
    bool in_list = std::find(row.pool_subjects.begin(), row.pool_subjects.end(),
                             row.target_subject) != row.pool_subjects.end();
    if (row.target_records_in_pool > 0 || in_list) ++scan.violations;
    scan.rows.push_back(std::move(row));
  }
  if (!saw_header) throw std::runtime_error("empty leakage audit: " + csv_path);
  return scan;
}

ExperimentRunner::ExperimentRunner(ExperimentConfig cfg, std::string out_dir, int jobs)
    : cfg_(std::move(cfg)), out_dir_(std::move(out_dir)), jobs_(std::max(jobs, 1)) {
  cfg_.validate();
  kernel_ = receptive_kernel(cfg_.resolved_window_side());
  std::filesystem::create_directories(out_dir_);
}

ArrayLayout ExperimentRunner::layout() const {
  ArrayLayout l = cfg_.array;
  l.window_side_px = cfg_.resolved_window_side();
  return l;
}

EyeModelParams ExperimentRunner::subject_eye(int subject_id) const {
  return make_subject(subject_id, cfg_.master_seed);
}

SessionPlan ExperimentRunner::subject_plan(int subject_id) const {
  return plan_session(subject_id, subject_eye(subject_id), cfg_.image, cfg_.stimulus,
                      derive_seed(cfg_.master_seed, {0x5E55, static_cast<std::uint64_t>(subject_id)}));
}

const Dataset& ExperimentRunner::subject_dataset(int subject_id, Variant variant) {
  auto key = std::make_pair(subject_id, static_cast<int>(variant));
  auto it = dataset_cache_.find(key);
  if (it != dataset_cache_.end()) return it->second;

  DatasetBuildOptions opts;
  switch (variant) {
    case Variant::Main:
      opts.shifts = cfg_.shifts;
      break;
    case Variant::ZeroShift:
      opts.shifts.kind = ShiftDistribution::Kind::Grid;
      opts.shifts.grid_range_mm = 0.0;
      opts.shifts.grid_n_per_axis = 1;
      break;
    case Variant::Extended:
      opts.shifts.kind = ShiftDistribution::Kind::Gaussian;
      opts.shifts.sigma_mm = cfg_.extended_sigma_mm;
      break;
  }
  opts.bin_max_norm = cfg_.bin_norm == "max";
  opts.seed = derive_seed(cfg_.master_seed, {0xDA7A, static_cast<std::uint64_t>(subject_id),
                                             static_cast<std::uint64_t>(variant)});
  BuildStats stats;
  Dataset ds = build_dataset(subject_plan(subject_id), layout(), kernel_, opts, &stats);
  stats_cache_[key] = stats;
  return dataset_cache_.emplace(key, std::move(ds)).first->second;
}

const BuildStats& ExperimentRunner::build_stats(int subject_id, Variant variant) {
  subject_dataset(subject_id, variant);
  return stats_cache_.at(std::make_pair(subject_id, static_cast<int>(variant)));
}

Splits ExperimentRunner::subject_splits(int subject_id, Variant variant,
                                        const SplitSpec& spec) const {
  SplitSpec s = spec;
  s.seed = derive_seed(cfg_.master_seed, {0x5711, static_cast<std::uint64_t>(subject_id),
                                          static_cast<std::uint64_t>(variant)});
  // const_cast-free: the caller passes the dataset through subject_dataset.
  return s.mode == SplitSpec::Mode::ShiftBinned
             ? split_shift_binned(
                   const_cast<ExperimentRunner*>(this)->subject_dataset(subject_id, variant), s)
             : split_random(
                   const_cast<ExperimentRunner*>(this)->subject_dataset(subject_id, variant), s);
}

TrainConfig ExperimentRunner::train_config(std::uint64_t run_seed, bool curves) const {
  TrainConfig t = cfg_.train;
  t.seed = run_seed;
  if (curves) {
    t.patience = kNoEarlyStop;
    t.max_epochs = cfg_.curve_max_epochs;
  }
  return t;
}

const std::vector<double>& ExperimentRunner::pretrained(int target_subject, int seed_index,
                                                        Variant variant) {
  auto key = std::make_tuple(target_subject, seed_index, static_cast<int>(variant));
  auto it = pretrain_cache_.find(key);
  if (it != pretrain_cache_.end()) return it->second;

  PretrainPool pool;
  pool.target_subject_id = target_subject;
  for (int s = 1; s <= cfg_.subjects; ++s) {
    if (s == target_subject) continue;
    pool.subjects.push_back(subject_dataset(s, variant));
  }
  TrainConfig tc = train_config(
      derive_seed(cfg_.master_seed, {0xF7, static_cast<std::uint64_t>(target_subject),
                                     static_cast<std::uint64_t>(seed_index),
                                     static_cast<std::uint64_t>(variant)}),
      false);
  std::vector<double> params = pretrain_loso(pool, tc);
  return pretrain_cache_.emplace(key, std::move(params)).first->second;
}

void ExperimentRunner::run_tasks(std::vector<std::function<void()>>& tasks) {
  if (jobs_ <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      tasks[i]();
    }
  };
  std::vector<std::thread> pool;
  int n = std::min<int>(jobs_, static_cast<int>(tasks.size()));
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

void ExperimentRunner::append_audit(const std::vector<LeakageAuditRow>& rows) {
  audit_rows_.insert(audit_rows_.end(), rows.begin(), rows.end());
  std::ofstream out(out_dir_ + "/leakage_audit.csv");
  if (!out) throw std::runtime_error("cannot write leakage audit");
  out << output_header(cfg_) << "\n";
  out << "experiment,target_subject,seed_index,pool_subjects,pool_records,target_records_in_pool\n";
  for (const auto& r : audit_rows_) {
    out << r.experiment << "," << r.target_subject << "," << r.seed_index << ","
        << join_ints(r.pool_subjects, ';') << "," << r.pool_records << ","
        << r.target_records_in_pool << "\n";
  }
}

void ExperimentRunner::write_manifest(const std::string& experiment,
                                      const std::vector<std::string>& outputs) {
  json m;
  m["experiment"] = experiment;
  m["config_hash"] = hex64(config_hash(cfg_));
  m["master_seed"] = cfg_.master_seed;
  std::vector<int> seed_idx(static_cast<std::size_t>(cfg_.seeds));
  for (int k = 0; k < cfg_.seeds; ++k) seed_idx[static_cast<std::size_t>(k)] = k;
  m["seeds"] = seed_idx;
  m["config"] = config_to_json(cfg_);
  m["outputs"] = outputs;
  m["failures"] = failures_;
  json fp;
  for (const auto& [key, ds] : dataset_cache_) {
    fp[std::to_string(key.first) + "/" + std::to_string(key.second)] =
        hex64(dataset_fingerprint(ds));
  }
  m["dataset_fingerprints"] = fp;
  std::ofstream out(out_dir_ + "/" + experiment + "_manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest");
  out << m.dump(2) << "\n";
}

namespace {

/// Audit bookkeeping for one FT pool: which subjects fed it and whether the
/// target leaked in.
LeakageAuditRow make_audit_row(const std::string& experiment, int target, int seed_index,
                               const std::vector<Dataset>& pool) {
  LeakageAuditRow row;
  row.experiment = experiment;
  row.target_subject = target;
  row.seed_index = seed_index;
  std::set<int> ids;
  for (const auto& ds : pool) {
    row.pool_records += ds.records.size();
    for (const auto& rec : ds.records) {
      ids.insert(rec.subject_id);
      if (rec.subject_id == target) ++row.target_records_in_pool;
    }
  }
  row.pool_subjects.assign(ids.begin(), ids.end());
  return row;
}

}  // namespace

void ExperimentRunner::run_data_scale() {
  const std::string exp = "data_scale";
  bool want_ft = std::find(cfg_.regimens.begin(), cfg_.regimens.end(), "FT") != cfg_.regimens.end();

  // Materialize shared state serially; tasks only read it.
  std::vector<LeakageAuditRow> audits;
  for (int s = 1; s <= cfg_.subjects; ++s) subject_dataset(s, Variant::Main);
  if (want_ft) {
    for (int s = 1; s <= cfg_.subjects; ++s) {
      std::vector<Dataset> pool;
      for (int o = 1; o <= cfg_.subjects; ++o) {
        if (o != s) pool.push_back(subject_dataset(o, Variant::Main));
      }
      for (int k = 0; k < cfg_.seeds; ++k) {
        pretrained(s, k, Variant::Main);
        audits.push_back(make_audit_row(exp, s, k, pool));
      }
    }
  }

  struct Row {
    int subject, seed, fraction_idx;
    std::string regimen;
    bool ok = false;
    std::string error;
    double accuracy = 0.0;
    int best_epoch = 0;
    std::size_t train_records = 0;
  };
  std::vector<Row> rows;
  for (int s = 1; s <= cfg_.subjects; ++s) {
    for (const auto& regimen : cfg_.regimens) {
      for (int k = 0; k < cfg_.seeds; ++k) {
        for (std::size_t fi = 0; fi < cfg_.data_fractions.size(); ++fi) {
          rows.push_back(Row{s, k, static_cast<int>(fi), regimen});
        }
      }
    }
  }

  std::vector<std::function<void()>> tasks;
  tasks.reserve(rows.size());
  for (auto& row : rows) {
    tasks.emplace_back([this, &row] {
      try {
        const Dataset& ds = subject_dataset(row.subject, Variant::Main);
        Splits full = subject_splits(row.subject, Variant::Main, cfg_.scale_split);
        double fraction = cfg_.data_fractions[static_cast<std::size_t>(row.fraction_idx)];
        Splits sub = subset_training(
            full, fraction,
            derive_seed(cfg_.master_seed, {0xDF, static_cast<std::uint64_t>(row.subject),
                                           static_cast<std::uint64_t>(row.seed)}));
        TrainConfig tc = train_config(
            derive_seed(cfg_.master_seed,
                        {0xE1, static_cast<std::uint64_t>(row.subject),
                         static_cast<std::uint64_t>(row.seed),
                         static_cast<std::uint64_t>(row.fraction_idx)}),
            false);
        TrainedModel model =
            row.regimen == "FS"
                ? train_fs(ds, sub, tc)
                : fine_tune(pretrained(row.subject, row.seed, Variant::Main), ds, sub, tc);
        model.provenance.data_fraction = fraction;
        row.accuracy = evaluate_model(model.params, model.norm, ds, full.test).accuracy;
        row.best_epoch = model.history.best_epoch;
        row.train_records = sub.train.size();
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    });
  }
  run_tasks(tasks);

  std::vector<std::string> outputs;
  {
    std::ofstream out(out_dir_ + "/data_scale.csv");
    out << output_header(cfg_) << "\n";
    out << "subject,regimen,seed,fraction,train_records,test_accuracy_deg,best_epoch\n";
    for (const auto& r : rows) {
      if (!r.ok) {
        failures_.push_back("data_scale subject=" + std::to_string(r.subject) + " regimen=" +
                            r.regimen + " seed=" + std::to_string(r.seed) + " fraction_idx=" +
                            std::to_string(r.fraction_idx) + ": " + r.error);
        continue;
      }
      out << r.subject << "," << r.regimen << "," << r.seed << ","
          << g17(cfg_.data_fractions[static_cast<std::size_t>(r.fraction_idx)]) << ","
          << r.train_records << "," << g17(r.accuracy) << "," << r.best_epoch << "\n";
    }
    outputs.push_back("data_scale.csv");
  }
  {
    std::ofstream out(out_dir_ + "/data_scale_summary.csv");
    out << output_header(cfg_) << "\n";
    out << "regimen,fraction,mean_accuracy_deg,std_accuracy_deg,n\n";
    PlotSpec plot;
    plot.title = "Spatial accuracy vs training data";
    plot.x_label = "training fraction";
    plot.y_label = "accuracy (deg)";
    for (const auto& regimen : cfg_.regimens) {
      PlotSeries series;
      series.label = regimen;
      for (std::size_t fi = 0; fi < cfg_.data_fractions.size(); ++fi) {
        std::vector<double> acc;
        for (const auto& r : rows) {
          if (r.ok && r.regimen == regimen && r.fraction_idx == static_cast<int>(fi))
            acc.push_back(r.accuracy);
        }
        if (acc.empty()) continue;
        MeanStd ms = mean_std(acc);
        out << regimen << "," << g17(cfg_.data_fractions[fi]) << "," << g17(ms.mean) << ","
            << g17(ms.stddev) << "," << ms.n << "\n";
        series.x.push_back(cfg_.data_fractions[fi]);
        series.y.push_back(ms.mean);
        series.yerr.push_back(ms.stddev);
      }
      if (!series.x.empty()) plot.series.push_back(std::move(series));
    }
    outputs.push_back("data_scale_summary.csv");
    write_svg_plot(out_dir_ + "/data_scale.svg", plot, output_header(cfg_));
    outputs.push_back("data_scale.svg");
  }
  if (!audits.empty()) append_audit(audits);
  if (!audits.empty()) outputs.push_back("leakage_audit.csv");
  write_manifest(exp, outputs);
}

void ExperimentRunner::run_shift_bins() {
  const std::string exp = "shift_bins";
  bool want_ft = std::find(cfg_.regimens.begin(), cfg_.regimens.end(), "FT") != cfg_.regimens.end();

  std::vector<LeakageAuditRow> audits;
  for (int s = 1; s <= cfg_.subjects; ++s) subject_dataset(s, Variant::Main);
  if (want_ft) {
    for (int s = 1; s <= cfg_.subjects; ++s) {
      std::vector<Dataset> pool;
      for (int o = 1; o <= cfg_.subjects; ++o) {
        if (o != s) pool.push_back(subject_dataset(o, Variant::Main));
      }
      for (int k = 0; k < cfg_.seeds; ++k) {
        pretrained(s, k, Variant::Main);
        audits.push_back(make_audit_row(exp, s, k, pool));
      }
    }
  }

  struct Row {
    int subject, seed;
    std::string regimen;
    bool ok = false;
    std::string error;
    std::array<double, kNumShiftBins> accuracy{};
    std::array<std::size_t, kNumShiftBins> count{};
  };
  std::vector<Row> rows;
  for (int s = 1; s <= cfg_.subjects; ++s) {
    for (const auto& regimen : cfg_.regimens) {
      for (int k = 0; k < cfg_.seeds; ++k) rows.push_back(Row{s, k, regimen});
    }
  }

  std::vector<std::function<void()>> tasks;
  tasks.reserve(rows.size());
  for (auto& row : rows) {
    tasks.emplace_back([this, &row] {
      try {
        const Dataset& ds = subject_dataset(row.subject, Variant::Main);
        Splits splits = subject_splits(row.subject, Variant::Main, cfg_.split);
        TrainConfig tc = train_config(
            derive_seed(cfg_.master_seed, {0xE2, static_cast<std::uint64_t>(row.subject),
                                           static_cast<std::uint64_t>(row.seed)}),
            false);
        TrainedModel model =
            row.regimen == "FS"
                ? train_fs(ds, splits, tc)
                : fine_tune(pretrained(row.subject, row.seed, Variant::Main), ds, splits, tc);
        for (int b = 0; b < kNumShiftBins; ++b) {
          const auto& idx = splits.bin_tests[static_cast<std::size_t>(b)];
          row.count[static_cast<std::size_t>(b)] = idx.size();
          if (!idx.empty()) {
            row.accuracy[static_cast<std::size_t>(b)] =
                evaluate_model(model.params, model.norm, ds, idx).accuracy;
          }
        }
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    });
  }
  run_tasks(tasks);

  std::vector<std::string> outputs;
  {
    std::ofstream out(out_dir_ + "/shift_bins.csv");
    out << output_header(cfg_) << "\n";
    out << "subject,regimen,seed,bin,benchmark,count,accuracy_deg,delta_vs_b1_deg\n";
    for (const auto& r : rows) {
      if (!r.ok) {
        failures_.push_back("shift_bins subject=" + std::to_string(r.subject) + " regimen=" +
                            r.regimen + " seed=" + std::to_string(r.seed) + ": " + r.error);
        continue;
      }
      for (int b = 0; b < kNumShiftBins; ++b) {
        auto bi = static_cast<std::size_t>(b);
        if (r.count[bi] == 0) continue;
        out << r.subject << "," << r.regimen << "," << r.seed << ","
            << bin_label(static_cast<ShiftBin>(b)) << "," << (b == 0 ? 1 : 0) << "," << r.count[bi]
            << "," << g17(r.accuracy[bi]) << "," << g17(r.accuracy[bi] - r.accuracy[0]) << "\n";
      }
    }
    outputs.push_back("shift_bins.csv");
  }
  {
    std::ofstream out(out_dir_ + "/shift_bins_summary.csv");
    out << output_header(cfg_) << "\n";
    out << "regimen,bin,mean_accuracy_deg,std_accuracy_deg,mean_delta_vs_b1_deg,n\n";
    PlotSpec plot;
    plot.title = "Spatial accuracy vs shift range";
    plot.x_label = "shift bin";
    plot.y_label = "accuracy (deg)";
    for (const auto& regimen : cfg_.regimens) {
      PlotSeries series;
      series.label = regimen;
      for (int b = 0; b < kNumShiftBins; ++b) {
        std::vector<double> acc, delta;
        for (const auto& r : rows) {
          if (r.ok && r.regimen == regimen && r.count[static_cast<std::size_t>(b)] > 0) {
            acc.push_back(r.accuracy[static_cast<std::size_t>(b)]);
            delta.push_back(r.accuracy[static_cast<std::size_t>(b)] - r.accuracy[0]);
          }
        }
        if (acc.empty()) continue;
        MeanStd ms = mean_std(acc);
        MeanStd md = mean_std(delta);
        out << regimen << "," << bin_label(static_cast<ShiftBin>(b)) << "," << g17(ms.mean) << ","
            << g17(ms.stddev) << "," << g17(md.mean) << "," << ms.n << "\n";
        series.x.push_back(b + 1);
        series.y.push_back(ms.mean);
        series.yerr.push_back(ms.stddev);
      }
      if (!series.x.empty()) plot.series.push_back(std::move(series));
    }
    outputs.push_back("shift_bins_summary.csv");
    write_svg_plot(out_dir_ + "/shift_bins.svg", plot, output_header(cfg_));
    outputs.push_back("shift_bins.svg");
  }
  if (!audits.empty()) append_audit(audits);
  if (!audits.empty()) outputs.push_back("leakage_audit.csv");
  write_manifest(exp, outputs);
}

void ExperimentRunner::run_extended_range() {
  const std::string exp = "extended_range";
  bool want_ft = std::find(cfg_.regimens.begin(), cfg_.regimens.end(), "FT") != cfg_.regimens.end();

  std::vector<LeakageAuditRow> audits;
  for (int s = 1; s <= cfg_.subjects; ++s) subject_dataset(s, Variant::Extended);
  if (want_ft) {
    for (int s = 1; s <= cfg_.subjects; ++s) {
      std::vector<Dataset> pool;
      for (int o = 1; o <= cfg_.subjects; ++o) {
        if (o != s) pool.push_back(subject_dataset(o, Variant::Extended));
      }
      for (int k = 0; k < cfg_.seeds; ++k) {
        pretrained(s, k, Variant::Extended);
        audits.push_back(make_audit_row(exp, s, k, pool));
      }
    }
  }

  struct Row {
    int subject, seed;
    std::string regimen;
    bool ok = false;
    std::string error;
    double accuracy = 0.0;
  };
  std::vector<Row> rows;
  for (int s = 1; s <= cfg_.subjects; ++s) {
    for (const auto& regimen : cfg_.regimens) {
      for (int k = 0; k < cfg_.seeds; ++k) rows.push_back(Row{s, k, regimen});
    }
  }

  std::vector<std::function<void()>> tasks;
  tasks.reserve(rows.size());
  for (auto& row : rows) {
    tasks.emplace_back([this, &row] {
      try {
        const Dataset& ds = subject_dataset(row.subject, Variant::Extended);
        Splits splits = subject_splits(row.subject, Variant::Extended, cfg_.extended_split);
        TrainConfig tc = train_config(
            derive_seed(cfg_.master_seed, {0xE3, static_cast<std::uint64_t>(row.subject),
                                           static_cast<std::uint64_t>(row.seed)}),
            false);
        TrainedModel model =
            row.regimen == "FS"
                ? train_fs(ds, splits, tc)
                : fine_tune(pretrained(row.subject, row.seed, Variant::Extended), ds, splits, tc);
        row.accuracy = evaluate_model(model.params, model.norm, ds, splits.test).accuracy;
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    });
  }
  run_tasks(tasks);

  std::vector<std::string> outputs;
  {
    std::ofstream out(out_dir_ + "/extended_range.csv");
    out << output_header(cfg_) << "\n";
    out << "subject,regimen,seed,test_accuracy_deg,shift_rejection_rate,boundary_resamples\n";
    for (const auto& r : rows) {
      if (!r.ok) {
        failures_.push_back("extended_range subject=" + std::to_string(r.subject) + " regimen=" +
                            r.regimen + " seed=" + std::to_string(r.seed) + ": " + r.error);
        continue;
      }
      const BuildStats& bs = build_stats(r.subject, Variant::Extended);
      out << r.subject << "," << r.regimen << "," << r.seed << "," << g17(r.accuracy) << ","
          << g17(bs.shift_stats.rejection_rate()) << "," << bs.boundary_resamples << "\n";
    }
    outputs.push_back("extended_range.csv");
  }
  {
    std::ofstream out(out_dir_ + "/extended_range_summary.csv");
    out << output_header(cfg_) << "\n";
    out << "regimen,mean_accuracy_deg,std_accuracy_deg,n\n";
    for (const auto& regimen : cfg_.regimens) {
      std::vector<double> acc;
      for (const auto& r : rows) {
        if (r.ok && r.regimen == regimen) acc.push_back(r.accuracy);
      }
      if (acc.empty()) continue;
      MeanStd ms = mean_std(acc);
      out << regimen << "," << g17(ms.mean) << "," << g17(ms.stddev) << "," << ms.n << "\n";
    }
    outputs.push_back("extended_range_summary.csv");
  }
  if (!audits.empty()) append_audit(audits);
  if (!audits.empty()) outputs.push_back("leakage_audit.csv");
  write_manifest(exp, outputs);
}

void ExperimentRunner::run_epoch_curves() {
  const std::string exp = "epoch_curves";
  bool want_ft = std::find(cfg_.regimens.begin(), cfg_.regimens.end(), "FT") != cfg_.regimens.end();

  std::vector<LeakageAuditRow> audits;
  for (int s = 1; s <= cfg_.subjects; ++s) subject_dataset(s, Variant::Main);
  if (want_ft) {
    for (int s = 1; s <= cfg_.subjects; ++s) {
      std::vector<Dataset> pool;
      for (int o = 1; o <= cfg_.subjects; ++o) {
        if (o != s) pool.push_back(subject_dataset(o, Variant::Main));
      }
      for (int k = 0; k < cfg_.seeds; ++k) {
        pretrained(s, k, Variant::Main);
        audits.push_back(make_audit_row(exp, s, k, pool));
      }
    }
  }

  struct Row {
    int subject, seed;
    std::string regimen;
    bool ok = false;
    std::string error;
    std::vector<EpochStats> curve;  // index 0 = epoch 0
  };
  std::vector<Row> rows;
  for (int s = 1; s <= cfg_.subjects; ++s) {
    for (const auto& regimen : cfg_.regimens) {
      for (int k = 0; k < cfg_.seeds; ++k) rows.push_back(Row{s, k, regimen});
    }
  }

  std::vector<std::function<void()>> tasks;
  tasks.reserve(rows.size());
  for (auto& row : rows) {
    tasks.emplace_back([this, &row] {
      try {
        const Dataset& ds = subject_dataset(row.subject, Variant::Main);
        Splits splits = subject_splits(row.subject, Variant::Main, cfg_.scale_split);
        TrainConfig tc = train_config(
            derive_seed(cfg_.master_seed, {0xE4, static_cast<std::uint64_t>(row.subject),
                                           static_cast<std::uint64_t>(row.seed)}),
            true);
        TrainedModel model =
            row.regimen == "FS"
                ? train_fs(ds, splits, tc)
                : fine_tune(pretrained(row.subject, row.seed, Variant::Main), ds, splits, tc);
        row.curve.push_back(model.history.epoch0);
        for (const auto& e : model.history.epochs) row.curve.push_back(e);
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    });
  }
  run_tasks(tasks);

  std::vector<std::string> outputs;
  {
    std::ofstream out(out_dir_ + "/epoch_curves.csv");
    out << output_header(cfg_) << "\n";
    out << "subject,regimen,seed,epoch,train_loss,val_loss,val_accuracy_deg\n";
    for (const auto& r : rows) {
      if (!r.ok) {
        failures_.push_back("epoch_curves subject=" + std::to_string(r.subject) + " regimen=" +
                            r.regimen + " seed=" + std::to_string(r.seed) + ": " + r.error);
        continue;
      }
      for (std::size_t e = 0; e < r.curve.size(); ++e) {
        out << r.subject << "," << r.regimen << "," << r.seed << "," << e << ","
            << g17(r.curve[e].train_loss) << "," << g17(r.curve[e].val_loss) << ","
            << g17(r.curve[e].val_accuracy) << "\n";
      }
    }
    outputs.push_back("epoch_curves.csv");
  }
  {
    std::ofstream out(out_dir_ + "/epoch_curves_summary.csv");
    out << output_header(cfg_) << "\n";
    out << "regimen,epoch,mean_val_accuracy_deg,std_val_accuracy_deg,n\n";
    PlotSpec plot;
    plot.title = "Validation accuracy vs training epochs";
    plot.x_label = "epoch";
    plot.y_label = "accuracy (deg)";
    std::size_t max_len = 0;
    for (const auto& r : rows) {
      if (r.ok) max_len = std::max(max_len, r.curve.size());
    }
    for (const auto& regimen : cfg_.regimens) {
      PlotSeries series;
      series.label = regimen;
      for (std::size_t e = 0; e < max_len; ++e) {
        std::vector<double> acc;
        for (const auto& r : rows) {
          if (r.ok && r.regimen == regimen && e < r.curve.size())
            acc.push_back(r.curve[e].val_accuracy);
        }
        if (acc.empty()) continue;
        MeanStd ms = mean_std(acc);
        out << regimen << "," << e << "," << g17(ms.mean) << "," << g17(ms.stddev) << "," << ms.n
            << "\n";
        series.x.push_back(static_cast<double>(e));
        series.y.push_back(ms.mean);
      }
      if (!series.x.empty()) plot.series.push_back(std::move(series));
    }
    outputs.push_back("epoch_curves_summary.csv");
    write_svg_plot(out_dir_ + "/epoch_curves.svg", plot, output_header(cfg_));
    outputs.push_back("epoch_curves.svg");
  }
  if (want_ft) {
    // Per-subject FT curves (seed-mean), including the epoch-0 point coming
    // from pre-training alone.
    PlotSpec plot;
    plot.title = "Per-subject fine-tuning curves";
    plot.x_label = "epoch";
    plot.y_label = "accuracy (deg)";
    std::ofstream out(out_dir_ + "/epoch_curves_subjects.csv");
    out << output_header(cfg_) << "\n";
    out << "subject,epoch,mean_val_accuracy_deg,n\n";
    for (int s = 1; s <= cfg_.subjects; ++s) {
      PlotSeries series;
      series.label = "s" + std::to_string(s);
      for (std::size_t e = 0;; ++e) {
        std::vector<double> acc;
        for (const auto& r : rows) {
          if (r.ok && r.regimen == "FT" && r.subject == s && e < r.curve.size())
            acc.push_back(r.curve[e].val_accuracy);
        }
        if (acc.empty()) break;
        MeanStd ms = mean_std(acc);
        out << s << "," << e << "," << g17(ms.mean) << "," << ms.n << "\n";
        series.x.push_back(static_cast<double>(e));
        series.y.push_back(ms.mean);
      }
      if (!series.x.empty()) plot.series.push_back(std::move(series));
    }
    outputs.push_back("epoch_curves_subjects.csv");
    if (!plot.series.empty()) {
      write_svg_plot(out_dir_ + "/epoch_curves_subjects.svg", plot, output_header(cfg_));
      outputs.push_back("epoch_curves_subjects.svg");
    }
  }
  if (!audits.empty()) append_audit(audits);
  if (!audits.empty()) outputs.push_back("leakage_audit.csv");
  write_manifest(exp, outputs);
}

void ExperimentRunner::run_all() {
  run_data_scale();
  run_shift_bins();
  run_extended_range();
  run_epoch_curves();
}

}  // namespace psog
