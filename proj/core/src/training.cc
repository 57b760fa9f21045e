// Copyright 2026 The Reinformer-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "reinformer/training.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "reinformer/errors.h"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace reinformer {
namespace {

std::mt19937_64 StepRng(uint64_t seed, int64_t step) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(step), static_cast<uint32_t>(step >> 32)};
  return std::mt19937_64(seq);
}

// Every step allocates and frees the same set of activation-sized buffers.
// glibc would hand them back to the kernel each time; keep them instead.
void KeepLargeAllocations() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
  }();
  (void)done;
#endif
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

bool ExcludedFromLayerAdaptation(const std::string& name) {
  auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with(".bias") || ends_with(".gain") || name.rfind("head.return.", 0) == 0;
}

void TrainConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
  if (!(m > 0.0 && m < 1.0)) fail("m must lie in (0, 1)");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (steps <= 0) fail("steps must be positive");
  if (batch_size <= 0) fail("batch_size must be positive");
  if (grad_clip && !(*grad_clip > 0.0)) fail("grad_clip must be positive");
  if (eval_interval <= 0) fail("eval_interval must be positive");
  if (!(initial_lambda > 0.0)) fail("initial_lambda must be positive");
  if (weight_decay < 0.0) fail("weight_decay must be non-negative");
}

std::string FormatMetricRow(const MetricRow& r) {
  return std::to_string(r.step) + "," + FormatDouble(r.total_loss) + "," +
         FormatDouble(r.action_loss) + "," + FormatDouble(r.return_loss) + "," +
         FormatDouble(r.lambda) + "," + FormatDouble(r.entropy);
}

MetricRow ParseMetricRow(const std::string& line, int line_number) {
  std::istringstream in(line);
  std::string cell;
  std::vector<std::string> cells;
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (cells.size() != 6) throw ParseError("metric row needs 6 columns", line_number);
  try {
    MetricRow r;
    r.step = std::stoll(cells[0]);
    r.total_loss = std::stod(cells[1]);
    r.action_loss = std::stod(cells[2]);
    r.return_loss = std::stod(cells[3]);
    r.lambda = std::stod(cells[4]);
    r.entropy = std::stod(cells[5]);
    return r;
  } catch (const std::exception&) {
    throw ParseError("malformed metric row", line_number);
  }
}

void WriteMetricsCsv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ContractError("cannot write metrics " + path);
  out << kMetricCsvHeader << '\n';
  for (const MetricRow& r : rows) out << FormatMetricRow(r) << '\n';
}

std::vector<MetricRow> ReadMetricsCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open metrics " + path, 0);
  std::string line;
  std::vector<MetricRow> rows;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1 || line.empty()) continue;
    rows.push_back(ParseMetricRow(line, n));
  }
  return rows;
}

Trainer::Trainer(ReinformerModel& model, const Dataset& dataset,
                 const TrainConfig& config)
    : model_(model), config_(config) {
  config_.Validate();
  KeepLargeAllocations();
  if (dataset.empty()) throw ContractError("training dataset is empty");
  data_ = ComputeReturnsToGo(dataset);
  for (size_t i = 0; i < data_.size(); ++i) {
    const Trajectory& t = data_[i].trajectory;
    if (t.state_dim() != model_.config().state_dim ||
        t.action_kind() != model_.config().action_kind() ||
        t.action_width() != model_.config().action_width()) {
      throw DimensionError("trajectory " + std::to_string(i) +
                           " does not match the model's state/action shape");
    }
    for (int64_t s = 0; s < t.length(); ++s) {
      index_.emplace_back(static_cast<int32_t>(i), static_cast<int32_t>(s));
    }
  }
  for (const auto& [name, t] : model_.NamedParameters()) {
    params_.push_back(t);
    plain_.push_back(ExcludedFromLayerAdaptation(name) ? 1 : 0);
  }
  model_opt_.weight_decay = config_.weight_decay;
  model_opt_.Init(params_);
  temperature_ = TemperatureState::Create(
      config_.initial_lambda,
      TargetEntropy(model_.config(), config_.discrete_entropy_fraction));
  temperature_opt_.Init(std::span<const Tensor>(&temperature_.log_lambda, 1));
}

std::vector<TokenWindow> Trainer::SampleBatch(int64_t step) const {
  std::mt19937_64 rng = StepRng(config_.seed, step);
  std::uniform_int_distribution<size_t> pick(0, index_.size() - 1);
  std::vector<TokenWindow> batch;
  batch.reserve(config_.batch_size);
  for (int64_t b = 0; b < config_.batch_size; ++b) {
    const auto [traj, t] = index_[pick(rng)];
    batch.push_back(SampleWindow(data_[traj], t, model_.config().context));
  }
  return batch;
}

MetricRow Trainer::Step() {
  const std::vector<TokenWindow> batch = SampleBatch(step_);
  const double lambda = temperature_.lambda();

  // Separate stream from the batch sampler so dropout never shifts batches.
  std::mt19937_64 dropout_rng = StepRng(config_.seed ^ 0x9e3779b97f4a7c15ULL, step_);
  ModelOutput out = model_.Forward(batch, &dropout_rng);
  Tensor return_loss =
      ReturnLoss(out, batch, config_.m, model_.config().return_scale);
  ActionLossResult action = ActionLoss(PolicyTermsFor(out, batch), out.valid, lambda);
  Tensor total = Add(action.loss, return_loss);

  MetricRow row;
  row.step = step_ + 1;
  row.total_loss = total.item();
  row.action_loss = action.loss.item();
  row.return_loss = return_loss.item();
  row.lambda = lambda;
  row.entropy = action.mean_entropy;
  if (!std::isfinite(row.total_loss)) {
    throw NumericError("non-finite loss at step " + std::to_string(row.step));
  }

  for (Tensor& p : params_) p.ZeroGrad();
  Backward(total);
  if (config_.grad_clip) ClipGradNorm(params_, *config_.grad_clip);
  LambStep(params_, model_opt_, config_.learning_rate, plain_);

  temperature_.log_lambda.ZeroGrad();
  Backward(TemperatureLoss(action.mean_entropy, temperature_));
  const uint8_t plain_flag = 1;
  LambStep(std::span<Tensor>(&temperature_.log_lambda, 1), temperature_opt_,
           config_.learning_rate, std::span<const uint8_t>(&plain_flag, 1));

  ++step_;
  return row;
}

std::vector<MetricRow> Trainer::Run(
    const std::function<void(int64_t step)>& on_checkpoint) {
  std::vector<MetricRow> rows;
  while (step_ < config_.steps) {
    rows.push_back(Step());
    if (on_checkpoint &&
        (step_ % config_.eval_interval == 0 || step_ == config_.steps)) {
      on_checkpoint(step_);
    }
  }
  return rows;
}

Checkpoint Trainer::MakeCheckpoint() const {
  Checkpoint ckpt = reinformer::MakeCheckpoint(model_);
  ckpt.Put("train.step", Tensor::Scalar(static_cast<double>(step_)));
  ckpt.Put("train.log_lambda", Tensor::Scalar(temperature_.log_lambda.item()));
  ckpt.Put("opt.temperature",
           Tensor::FromData({3}, {temperature_opt_.first_moment[0][0],
                                  temperature_opt_.second_moment[0][0],
                                  static_cast<double>(temperature_opt_.step)}));
  ckpt.Put("opt.step", Tensor::Scalar(static_cast<double>(model_opt_.step)));
  const auto& named = model_.NamedParameters();
  for (size_t i = 0; i < named.size(); ++i) {
    const Shape& shape = named[i].second.shape();
    ckpt.Put("opt.m." + named[i].first,
             Tensor::FromData(shape, model_opt_.first_moment[i]));
    ckpt.Put("opt.v." + named[i].first,
             Tensor::FromData(shape, model_opt_.second_moment[i]));
  }
  return ckpt;
}

void Trainer::Restore(const Checkpoint& ckpt) {
  if (!(ckpt.config == model_.config())) {
    throw ConfigError("checkpoint model config differs from the trainer's model");
  }
  model_.LoadParameters(ckpt.tensors);
  auto need = [&](const std::string& name) -> const Tensor& {
    const Tensor* t = ckpt.Find(name);
    if (!t) throw ParseError("checkpoint lacks training state '" + name + "'", 0);
    return *t;
  };
  step_ = static_cast<int64_t>(need("train.step").item());
  temperature_.log_lambda.mutable_data()[0] = need("train.log_lambda").item();
  const Tensor& temp = need("opt.temperature");
  temperature_opt_.first_moment[0][0] = temp.at(0);
  temperature_opt_.second_moment[0][0] = temp.at(1);
  temperature_opt_.step = static_cast<int64_t>(temp.at(2));
  model_opt_.step = static_cast<int64_t>(need("opt.step").item());
  const auto& named = model_.NamedParameters();
  for (size_t i = 0; i < named.size(); ++i) {
    const Tensor& m = need("opt.m." + named[i].first);
    const Tensor& v = need("opt.v." + named[i].first);
    model_opt_.first_moment[i].assign(m.data().begin(), m.data().end());
    model_opt_.second_moment[i].assign(v.data().begin(), v.data().end());
  }
}

std::vector<MetricRow> Train(ReinformerModel& model, const Dataset& dataset,
                             const TrainConfig& config) {
  Trainer trainer(model, dataset, config);
  return trainer.Run();
}

}  // namespace reinformer
