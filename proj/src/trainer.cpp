#include "psog/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "psog/metrics.hpp"

namespace psog {
namespace {

struct EvalOnMatrices {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<GazeSample> predictions;
};

EvalOnMatrices eval_on(const std::vector<double>& params, const Matrices& m,
                       const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ConfigError("evaluation over an empty index set");
  EvalOnMatrices r;
  r.predictions.resize(indices.size());
  auto n = static_cast<std::int64_t>(indices.size());
  std::vector<double> err2(indices.size()), dist(indices.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) {
    nn::Workspace ws;
    std::size_t row = indices[static_cast<std::size_t>(k)];
    nn::forward(params, m.inputs.data() + row * nn::kInSize, ws);
    const double* tg = m.targets.data() + row * nn::kOut;
    r.predictions[static_cast<std::size_t>(k)] = GazeSample{ws.out[0], ws.out[1]};
    double dx = ws.out[0] - tg[0];
    double dy = ws.out[1] - tg[1];
    err2[static_cast<std::size_t>(k)] = (dx * dx + dy * dy) / 2.0;
    dist[static_cast<std::size_t>(k)] = std::hypot(dx, dy);
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    r.loss += err2[k];
    r.accuracy += dist[k];
  }
  r.loss /= static_cast<double>(indices.size());
  r.accuracy /= static_cast<double>(indices.size());
  return r;
}

/// Shared FS/FT loop; `params` carries the initial weights in and the best
/// (by validation spatial accuracy) weights out.
TrainHistory run_training(std::vector<double>& params, const Matrices& m,
                          const std::vector<std::size_t>& train_idx,
                          const std::vector<std::size_t>& val_idx, const TrainConfig& config) {
  config.validate();
  if (train_idx.empty()) throw ConfigError("training needs a non-empty train split");

  nn::Adam adam(params.size(), config.adam);
  nn::BatchScratch scratch;
  std::vector<double> grad;

  TrainHistory history;
  auto ev0 = eval_on(params, m, val_idx);
  history.epoch0 = EpochStats{0.0, ev0.loss, ev0.accuracy};
  std::vector<double> best_params = params;
  history.best_epoch = 0;
  history.best_val_accuracy = ev0.accuracy;

  std::vector<std::size_t> order = train_idx;
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, {9, static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::vector<std::size_t> batch;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(config.batch_size)) {
      auto hi = std::min(order.size(), lo + static_cast<std::size_t>(config.batch_size));
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(lo),
                   order.begin() + static_cast<std::ptrdiff_t>(hi));
      double loss = nn::batch_loss_grad(params, m.inputs, m.targets, batch, grad, scratch);
      loss_sum += loss * static_cast<double>(batch.size());
      adam.step(params, grad);
    }

    auto ev = eval_on(params, m, val_idx);
    if (!std::isfinite(ev.loss)) {
      throw DivergenceError("validation loss became non-finite at epoch " +
                            std::to_string(epoch));
    }
    history.epochs.push_back(
        EpochStats{loss_sum / static_cast<double>(order.size()), ev.loss, ev.accuracy});

    if (ev.accuracy < history.best_val_accuracy) {
      history.best_val_accuracy = ev.accuracy;
      history.best_epoch = epoch;
      best_params = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  params = best_params;
  return history;
}

TrainedModel train_common(std::vector<double> init, const Dataset& subject_data,
                          const Splits& splits, const TrainConfig& config, Provenance prov) {
  if (subject_data.normalized)
    throw ConfigError("training expects raw sensor values; dataset is already normalized");
  NormStats stats = compute_norm_stats(subject_data, splits.train);
  Matrices m = build_matrices(subject_data, stats);

  TrainedModel model;
  model.params = std::move(init);
  model.norm = stats;
  model.provenance = std::move(prov);
  model.history = run_training(model.params, m, splits.train, splits.validation, config);
  return model;
}

}  // namespace

void TrainConfig::validate() const {
  adam.validate();
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (max_epochs < 0) throw ConfigError("max epochs must be non-negative");
  if (patience < 1) throw ConfigError("patience must be at least 1");
}

Matrices build_matrices(const Dataset& raw, const NormStats& stats) {
  if (stats.mean.size() != static_cast<std::size_t>(raw.sensor_count()))
    throw ConfigError("normalization stats do not match the sensor count");
  Matrices m;
  m.n = raw.records.size();
  m.inputs.resize(m.n * nn::kInSize);
  m.targets.resize(m.n * nn::kOut);
  if (raw.sensor_count() != nn::kInSize)
    throw ConfigError("dataset sensor grid does not match the network input");
  for (std::size_t i = 0; i < m.n; ++i) {
    const Record& rec = raw.records[i];
    for (int s = 0; s < nn::kInSize; ++s) {
      m.inputs[i * nn::kInSize + static_cast<std::size_t>(s)] =
          (rec.sensors[static_cast<std::size_t>(s)] - stats.mean[static_cast<std::size_t>(s)]) /
          stats.stddev[static_cast<std::size_t>(s)];
    }
    m.targets[i * nn::kOut + 0] = rec.gaze.x_deg;
    m.targets[i * nn::kOut + 1] = rec.gaze.y_deg;
  }
  return m;
}

EvalResult evaluate_model(const std::vector<double>& params, const NormStats& stats,
                          const Dataset& raw, const std::vector<std::size_t>& indices) {
  Matrices m = build_matrices(raw, stats);
  auto ev = eval_on(params, m, indices);
  EvalResult r;
  r.accuracy = ev.accuracy;
  r.loss = ev.loss;
  r.predictions = std::move(ev.predictions);
  return r;
}

TrainedModel train_fs(const Dataset& subject_data, const Splits& splits,
                      const TrainConfig& config) {
  Provenance prov;
  prov.regimen = "FS";
  auto ids = subject_data.subject_ids();
  prov.subject_id = ids.size() == 1 ? ids.front() : -1;
  prov.seed = config.seed;
  return train_common(nn::init_params(derive_seed(config.seed, {1})), subject_data, splits,
                      config, std::move(prov));
}

void PretrainPool::assert_no_leakage() const {
  for (const auto& ds : subjects) {
    for (const auto& rec : ds.records) {
      if (rec.subject_id == target_subject_id) {
        throw LeakageError("target subject " + std::to_string(target_subject_id) +
                           " found in the pre-training pool");
      }
    }
  }
}

std::vector<int> PretrainPool::subject_ids() const {
  std::set<int> ids;
  for (const auto& ds : subjects)
    for (const auto& rec : ds.records) ids.insert(rec.subject_id);
  return {ids.begin(), ids.end()};
}

std::vector<double> pretrain_loso(const PretrainPool& pool, const TrainConfig& config) {
  if (pool.subjects.empty()) throw ConfigError("pre-training pool is empty");
  pool.assert_no_leakage();
  Dataset merged = merge_datasets(pool.subjects);

  SplitSpec spec;
  spec.train = 0.85;
  spec.validation = 0.15;
  spec.test = 0.0;
  spec.seed = derive_seed(config.seed, {7});
  Splits splits = split_random(merged, spec);

  Provenance prov;
  prov.regimen = "pretrain";
  prov.seed = config.seed;
  TrainedModel model = train_common(nn::init_params(derive_seed(config.seed, {1})), merged,
                                    splits, config, std::move(prov));
  return std::move(model.params);
}

TrainedModel fine_tune(const std::vector<double>& pretrained, const Dataset& subject_data,
                       const Splits& splits, const TrainConfig& config) {
  if (pretrained.size() != static_cast<std::size_t>(nn::kParamCount))
    throw ConfigError("pretrained checkpoint does not match the network shape");
  Provenance prov;
  prov.regimen = "FT";
  auto ids = subject_data.subject_ids();
  prov.subject_id = ids.size() == 1 ? ids.front() : -1;
  prov.seed = config.seed;
  return train_common(pretrained, subject_data, splits, config, std::move(prov));
}

}  // namespace psog
