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

#include "reinformer/checkpoint.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "reinformer/errors.h"

namespace reinformer {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void Put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    bytes_.append(buf, sizeof(T));
  }
  void PutBytes(std::string_view s) { bytes_.append(s); }
  std::string Take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T Get() {
    Need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string_view GetBytes(size_t n) {
    Need(n);
    std::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  void Need(size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError("checkpoint truncated at byte " + std::to_string(pos_), 0);
    }
  }
  std::string_view bytes_;
  size_t pos_ = 0;
};

void PutConfig(Writer& w, const ModelConfig& c) {
  w.Put<int64_t>(c.state_dim);
  w.Put<int64_t>(c.action_dim);
  w.Put<uint8_t>(c.action_head == ActionHeadKind::kCategorical ? 1 : 0);
  w.Put<int64_t>(c.hidden_dim);
  w.Put<int64_t>(c.n_layers);
  w.Put<int64_t>(c.n_heads);
  w.Put<int64_t>(c.context);
  w.Put<double>(c.log_std_min);
  w.Put<double>(c.log_std_max);
  w.Put<int64_t>(c.max_timestep);
  w.Put<double>(c.return_scale);
  w.Put<double>(c.dropout);
}

ModelConfig GetConfig(Reader& r) {
  ModelConfig c;
  c.state_dim = r.Get<int64_t>();
  c.action_dim = r.Get<int64_t>();
  const uint8_t head = r.Get<uint8_t>();
  if (head > 1) throw ParseError("checkpoint has unknown action head kind", 0);
  c.action_head = head == 1 ? ActionHeadKind::kCategorical : ActionHeadKind::kGaussian;
  c.hidden_dim = r.Get<int64_t>();
  c.n_layers = r.Get<int64_t>();
  c.n_heads = r.Get<int64_t>();
  c.context = r.Get<int64_t>();
  c.log_std_min = r.Get<double>();
  c.log_std_max = r.Get<double>();
  c.max_timestep = r.Get<int64_t>();
  c.return_scale = r.Get<double>();
  c.dropout = r.Get<double>();
  return c;
}

}  // namespace

const Tensor* Checkpoint::Find(std::string_view name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

void Checkpoint::Put(const std::string& name, Tensor tensor) {
  for (auto& [n, t] : tensors) {
    if (n == name) {
      t = std::move(tensor);
      return;
    }
  }
  tensors.emplace_back(name, std::move(tensor));
}

std::string SerializeCheckpoint(const Checkpoint& checkpoint) {
  Writer w;
  w.PutBytes(kCheckpointMagic);
  w.Put<uint32_t>(kCheckpointVersion);
  PutConfig(w, checkpoint.config);
  w.Put<uint64_t>(checkpoint.tensors.size());
  for (const auto& [name, t] : checkpoint.tensors) {
    w.Put<uint32_t>(static_cast<uint32_t>(name.size()));
    w.PutBytes(name);
    w.Put<uint32_t>(static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) w.Put<int64_t>(d);
    for (double v : t.data()) w.Put<double>(v);
  }
  return w.Take();
}

Checkpoint ParseCheckpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.GetBytes(4) != kCheckpointMagic) {
    throw ParseError("not a checkpoint (bad magic)", 0);
  }
  const uint32_t version = r.Get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  }
  Checkpoint ckpt;
  ckpt.config = GetConfig(r);
  const uint64_t count = r.Get<uint64_t>();
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.Get<uint32_t>();
    std::string name(r.GetBytes(name_len));
    const uint32_t rank = r.Get<uint32_t>();
    if (rank > 8) throw ParseError("tensor " + name + " has implausible rank", 0);
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.Get<int64_t>();
      if (d <= 0 || d > (int64_t{1} << 32)) {
        throw ParseError("tensor " + name + " has invalid dimension", 0);
      }
    }
    const int64_t n = NumElements(shape);
    std::vector<double> values(n);
    for (double& v : values) v = r.Get<double>();
    ckpt.tensors.emplace_back(std::move(name),
                              Tensor::FromData(std::move(shape), std::move(values)));
  }
  if (!r.AtEnd()) throw ParseError("trailing bytes after checkpoint", 0);
  return ckpt;
}

void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ContractError("cannot write checkpoint " + tmp);
    const std::string bytes = SerializeCheckpoint(checkpoint);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ContractError("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path, 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseCheckpoint(buf.str());
}

Checkpoint MakeCheckpoint(const ReinformerModel& model) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  for (const auto& [name, t] : model.NamedParameters()) {
    ckpt.tensors.emplace_back(name, t.Detach());
  }
  return ckpt;
}

ReinformerModel ModelFromCheckpoint(const Checkpoint& checkpoint) {
  ReinformerModel model(checkpoint.config, 0);
  model.LoadParameters(checkpoint.tensors);
  return model;
}

void PutStats(Checkpoint& checkpoint, const DatasetStats& stats) {
  const int64_t sd = static_cast<int64_t>(stats.state_mean.size());
  checkpoint.Put("stats.state_mean", Tensor::FromData({sd}, stats.state_mean));
  checkpoint.Put("stats.state_std", Tensor::FromData({sd}, stats.state_std));
  checkpoint.Put("stats.returns",
                 Tensor::FromData({8}, {stats.max_dataset_return,
                                        stats.min_dataset_return,
                                        stats.max_return_to_go,
                                        stats.min_return_to_go, stats.ref_min,
                                        stats.ref_max, stats.reward_scale,
                                        stats.reward_shift}));
}

std::optional<DatasetStats> GetStats(const Checkpoint& checkpoint) {
  const Tensor* mean = checkpoint.Find("stats.state_mean");
  const Tensor* std = checkpoint.Find("stats.state_std");
  const Tensor* ret = checkpoint.Find("stats.returns");
  if (!mean || !std || !ret) return std::nullopt;
  if (ret->size() != 8 || mean->size() != std->size()) {
    throw ParseError("checkpoint stats tensors are malformed", 0);
  }
  DatasetStats s;
  s.state_mean.assign(mean->data().begin(), mean->data().end());
  s.state_std.assign(std->data().begin(), std->data().end());
  s.max_dataset_return = ret->at(0);
  s.min_dataset_return = ret->at(1);
  s.max_return_to_go = ret->at(2);
  s.min_return_to_go = ret->at(3);
  s.ref_min = ret->at(4);
  s.ref_max = ret->at(5);
  s.reward_scale = ret->at(6);
  s.reward_shift = ret->at(7);
  return s;
}

}  // namespace reinformer
