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

// Training loop: sample windows, sum the action and return losses with equal
// weight, step LAMB on the model and Adam on the entropy temperature.

#ifndef REINFORMER_TRAINING_H_
#define REINFORMER_TRAINING_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "reinformer/checkpoint.h"
#include "reinformer/lamb.h"
#include "reinformer/losses.h"
#include "reinformer/model.h"
#include "reinformer/seq_data.h"

namespace reinformer {

struct TrainConfig {
  double m = 0.99;
  double learning_rate = 1e-3;
  int64_t steps = 2000;
  int64_t batch_size = 64;
  uint64_t seed = 0;
  std::optional<double> grad_clip = 0.25;
  int64_t eval_interval = 500;  // checkpoint cadence
  double initial_lambda = 0.1;
  double weight_decay = 1e-4;
  // Target entropy of categorical heads as a fraction of log(action_count).
  double discrete_entropy_fraction = 0.25;

  void Validate() const;
};

struct MetricRow {
  int64_t step = 0;
  double total_loss = 0.0;
  double action_loss = 0.0;
  double return_loss = 0.0;
  double lambda = 0.0;
  double entropy = 0.0;

  bool operator==(const MetricRow&) const = default;
};

inline constexpr const char* kMetricCsvHeader =
    "step,total_loss,action_loss,return_loss,lambda,entropy";
std::string FormatMetricRow(const MetricRow& row);
MetricRow ParseMetricRow(const std::string& line, int line_number);
void WriteMetricsCsv(const std::string& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> ReadMetricsCsv(const std::string& path);

// Biases, layer-norm parameters and the zero-initialised return head get plain
// Adam steps: a trust ratio built from a zero or near-zero weight norm would
// freeze them.
bool ExcludedFromLayerAdaptation(const std::string& name);

// Owns the optimiser and temperature state for one model. The dataset must
// already be state-normalised.
class Trainer {
 public:
  Trainer(ReinformerModel& model, const Dataset& dataset,
          const TrainConfig& config);

  // Runs one optimisation step. Throws NumericError on a non-finite loss or
  // gradient, leaving parameters untouched.
  MetricRow Step();

  // Runs until `config.steps` total steps. `on_checkpoint` fires every
  // eval_interval steps and after the last one.
  std::vector<MetricRow> Run(
      const std::function<void(int64_t step)>& on_checkpoint = {});

  // Windows for step `step`, drawn uniformly over all (trajectory, t).
  std::vector<TokenWindow> SampleBatch(int64_t step) const;

  int64_t step() const { return step_; }
  const TemperatureState& temperature() const { return temperature_; }
  const TrainConfig& config() const { return config_; }

  // Model parameters plus optimiser, temperature and step counter.
  Checkpoint MakeCheckpoint() const;
  // Restores the state written by MakeCheckpoint into this trainer's model.
  void Restore(const Checkpoint& checkpoint);

 private:
  ReinformerModel& model_;
  TrainConfig config_;
  std::vector<ReturnAugmentedTrajectory> data_;
  std::vector<std::pair<int32_t, int32_t>> index_;  // (trajectory, t)
  std::vector<Tensor> params_;
  std::vector<uint8_t> plain_;
  LambState model_opt_;
  LambState temperature_opt_;
  TemperatureState temperature_;
  int64_t step_ = 0;
};

// Convenience wrapper: builds a Trainer and runs it to completion.
std::vector<MetricRow> Train(ReinformerModel& model, const Dataset& dataset,
                             const TrainConfig& config);

}  // namespace reinformer

#endif  // REINFORMER_TRAINING_H_
