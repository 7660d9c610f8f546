// Copyright 2026 The NMoE Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nmoe/run_config.h"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nmoe/error.h"

namespace nmoe {
namespace {

using nlohmann::json;

json SgdToJson(const SgdOptions& s) {
  return {{"lr", s.lr},
          {"batch_size", s.batch_size},
          {"weight_decay", s.weight_decay},
          {"grad_max_norm",
           s.max_grad_norm ? json(*s.max_grad_norm) : json(nullptr)}};
}

SgdOptions SgdFromJson(const json& j) {
  SgdOptions s;
  s.lr = j.at("lr").get<double>();
  s.batch_size = j.at("batch_size").get<std::size_t>();
  s.weight_decay = j.at("weight_decay").get<double>();
  if (!j.at("grad_max_norm").is_null()) {
    s.max_grad_norm = j.at("grad_max_norm").get<double>();
  }
  return s;
}

std::vector<std::string> PathStrings(
    const std::vector<std::filesystem::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

json ToJson(const RunConfig& c) {
  const auto& syn = c.data.synthetic;
  const auto& part = c.data.partition;
  const char* source = c.data.source == DataSource::kSynthetic ? "synthetic"
                       : c.data.source == DataSource::kCifar10 ? "cifar10"
                                                               : "container";
  json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  j["k"] = c.k;
  j["bytes_per_scalar"] = c.bytes_per_scalar;
  j["data"] = {
      {"source", source},
      {"synthetic",
       {{"num_classes", syn.num_classes},
        {"dim", syn.dim},
        {"samples_per_class", syn.samples_per_class},
        {"spread", syn.spread},
        {"radius", syn.radius}}},
      {"cifar10_paths", PathStrings(c.data.cifar10_paths)},
      {"container_path", c.data.container_path.string()},
      {"partition",
       {{"num_clients", part.num_clients},
        {"tau", part.tau},
        {"train_per_client", part.train_per_client},
        {"test_per_client", part.test_per_client},
        {"test_matches_train", part.test_matches_train},
        {"iid", part.iid}}}};
  j["model"] = {{"fe_hidden", c.model.fe_hidden},
                {"latent_dim", c.model.latent_dim},
                {"expert_hidden", c.model.expert_hidden},
                {"activation", std::string(ActivationName(c.model.activation))}};
  const auto& s1 = c.stage1;
  j["stage1"] = {{"method", std::string(Stage1MethodName(s1.method))},
                 {"rounds", s1.schedule.rounds},
                 {"local_epochs", s1.schedule.local_epochs},
                 {"sgd", SgdToJson(s1.schedule.sgd)},
                 {"dp_noise_std", s1.fedsc.dp_noise_std},
                 {"augment",
                  {{"noise_std", s1.fedsc.augment.noise_std},
                   {"mask_prob", s1.fedsc.augment.mask_prob}}}};
  j["stage2"] = {{"epochs", c.stage2.options.epochs},
                 {"sgd", SgdToJson(c.stage2.options.sgd)},
                 {"warm_start_from_fedce", c.stage2.warm_start_from_fedce}};
  const auto& fg = c.stage3.fedgate;
  const auto& rg = c.stage3.rollgate;
  j["stage3"] = {
      {"strategy", std::string(GateStrategyName(c.stage3.strategy))},
      {"gate_noise_std", c.stage3.gate_noise_std},
      {"fedgate",
       {{"rounds", fg.rounds},
        {"local_epochs", fg.local_epochs},
        {"sgd", SgdToJson(fg.sgd)},
        {"lambda_load", fg.lambda_load},
        {"load_multiplier",
         fg.load_multiplier ? json(*fg.load_multiplier) : json(nullptr)},
        {"client_fraction", fg.client_fraction}}},
      {"rollgate",
       {{"p", rg.p},
        {"epochs_per_client", rg.epochs_per_client},
        {"max_passes", rg.max_passes},
        {"tolerance", rg.tolerance},
        {"sgd", SgdToJson(rg.sgd)}}},
      {"rangate", {{"distribution", c.stage3.rangate_distribution}}}};
  j["baselines"] = {{"epochs", c.baselines.epochs},
                    {"sgd", SgdToJson(c.baselines.sgd)},
                    {"lambda_load", c.baselines.lambda_load}};
  return j;
}

RunConfig FromJson(const json& j) {
  RunConfig c;
  c.version = j.at("version").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.k = j.at("k").get<std::size_t>();
  c.bytes_per_scalar = j.at("bytes_per_scalar").get<std::size_t>();
  const json& d = j.at("data");
  const auto source = d.at("source").get<std::string>();
  if (source == "synthetic") {
    c.data.source = DataSource::kSynthetic;
  } else if (source == "cifar10") {
    c.data.source = DataSource::kCifar10;
  } else if (source == "container") {
    c.data.source = DataSource::kContainer;
  } else {
    Fail(ErrorCode::kConfig, "data.source must be synthetic, cifar10 or "
                             "container, got '" + source + "'");
  }
  const json& syn = d.at("synthetic");
  c.data.synthetic.num_classes = syn.at("num_classes").get<int>();
  c.data.synthetic.dim = syn.at("dim").get<std::size_t>();
  c.data.synthetic.samples_per_class =
      syn.at("samples_per_class").get<std::size_t>();
  c.data.synthetic.spread = syn.at("spread").get<double>();
  c.data.synthetic.radius = syn.at("radius").get<double>();
  for (const auto& p : d.at("cifar10_paths")) {
    c.data.cifar10_paths.emplace_back(p.get<std::string>());
  }
  c.data.container_path = d.at("container_path").get<std::string>();
  const json& part = d.at("partition");
  c.data.partition.num_clients = part.at("num_clients").get<std::size_t>();
  c.data.partition.tau = part.at("tau").get<double>();
  c.data.partition.train_per_client =
      part.at("train_per_client").get<std::size_t>();
  c.data.partition.test_per_client =
      part.at("test_per_client").get<std::size_t>();
  c.data.partition.test_matches_train =
      part.at("test_matches_train").get<bool>();
  c.data.partition.iid = part.at("iid").get<bool>();

  const json& mo = j.at("model");
  c.model.fe_hidden = mo.at("fe_hidden").get<std::vector<std::size_t>>();
  c.model.latent_dim = mo.at("latent_dim").get<std::size_t>();
  c.model.expert_hidden =
      mo.at("expert_hidden").get<std::vector<std::size_t>>();
  c.model.activation = ParseActivation(mo.at("activation").get<std::string>());

  const json& s1 = j.at("stage1");
  c.stage1.method = ParseStage1Method(s1.at("method").get<std::string>());
  c.stage1.schedule.rounds = s1.at("rounds").get<std::size_t>();
  c.stage1.schedule.local_epochs = s1.at("local_epochs").get<std::size_t>();
  c.stage1.schedule.sgd = SgdFromJson(s1.at("sgd"));
  c.stage1.fedsc.dp_noise_std = s1.at("dp_noise_std").get<double>();
  c.stage1.fedsc.augment.noise_std =
      s1.at("augment").at("noise_std").get<double>();
  c.stage1.fedsc.augment.mask_prob =
      s1.at("augment").at("mask_prob").get<double>();

  const json& s2 = j.at("stage2");
  c.stage2.options.epochs = s2.at("epochs").get<std::size_t>();
  c.stage2.options.sgd = SgdFromJson(s2.at("sgd"));
  c.stage2.warm_start_from_fedce = s2.at("warm_start_from_fedce").get<bool>();

  const json& s3 = j.at("stage3");
  c.stage3.strategy = ParseGateStrategy(s3.at("strategy").get<std::string>());
  c.stage3.gate_noise_std = s3.at("gate_noise_std").get<double>();
  const json& fg = s3.at("fedgate");
  c.stage3.fedgate.rounds = fg.at("rounds").get<std::size_t>();
  c.stage3.fedgate.local_epochs = fg.at("local_epochs").get<std::size_t>();
  c.stage3.fedgate.sgd = SgdFromJson(fg.at("sgd"));
  c.stage3.fedgate.lambda_load = fg.at("lambda_load").get<double>();
  if (!fg.at("load_multiplier").is_null()) {
    c.stage3.fedgate.load_multiplier = fg.at("load_multiplier").get<double>();
  }
  c.stage3.fedgate.client_fraction = fg.at("client_fraction").get<double>();
  const json& rg = s3.at("rollgate");
  c.stage3.rollgate.p = rg.at("p").get<double>();
  c.stage3.rollgate.epochs_per_client =
      rg.at("epochs_per_client").get<std::size_t>();
  c.stage3.rollgate.max_passes = rg.at("max_passes").get<std::size_t>();
  c.stage3.rollgate.tolerance = rg.at("tolerance").get<double>();
  c.stage3.rollgate.sgd = SgdFromJson(rg.at("sgd"));
  c.stage3.rangate_distribution =
      s3.at("rangate").at("distribution").get<std::vector<double>>();

  const json& b = j.at("baselines");
  c.baselines.epochs = b.at("epochs").get<std::size_t>();
  c.baselines.sgd = SgdFromJson(b.at("sgd"));
  c.baselines.lambda_load = b.at("lambda_load").get<double>();

  // Shared knobs mirrored into the per-stage option structs.
  c.stage1.schedule.bytes_per_scalar = c.bytes_per_scalar;
  c.stage3.fedgate.k = c.k;
  c.stage3.fedgate.bytes_per_scalar = c.bytes_per_scalar;
  c.stage3.rollgate.bytes_per_scalar = c.bytes_per_scalar;
  return c;
}

bool SameKind(const json& want, const json& got) {
  if (want.is_null()) return got.is_null() || got.is_number();
  if (want.is_number()) return got.is_number();
  return want.type() == got.type();
}

// Overlays `user` onto `base`, rejecting keys `base` does not have.
void Merge(json& base, const json& user, const std::string& where) {
  Require(user.is_object(), ErrorCode::kConfig,
          "config" + where + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = where + "." + key;
    Require(base.contains(key), ErrorCode::kConfig,
            "unknown config key '" + path.substr(1) + "'");
    json& slot = base[key];
    Require(SameKind(slot, value), ErrorCode::kConfig,
            "config key '" + path.substr(1) + "' has the wrong type");
    if (slot.is_object()) {
      Merge(slot, value, path);
    } else {
      slot = value;
    }
  }
}

void RequireSgd(const SgdOptions& s, const std::string& what) {
  Require(s.lr > 0.0 && s.batch_size > 0 && s.weight_decay >= 0.0,
          ErrorCode::kConfig,
          what + ": lr and batch_size must be positive, weight_decay >= 0");
  Require(!s.max_grad_norm || *s.max_grad_norm > 0.0, ErrorCode::kConfig,
          what + ": grad_max_norm must be positive");
}

}  // namespace

std::string_view Stage1MethodName(Stage1Method m) {
  return m == Stage1Method::kFedCe ? "fedce" : "fedsc";
}

std::string_view GateStrategyName(GateStrategy g) {
  switch (g) {
    case GateStrategy::kRanGate:
      return "rangate";
    case GateStrategy::kRollGate:
      return "rollgate";
    case GateStrategy::kFedGate:
      return "fedgate";
  }
  return "unknown";
}

GateStrategy ParseGateStrategy(std::string_view name) {
  if (name == "rangate") return GateStrategy::kRanGate;
  if (name == "rollgate") return GateStrategy::kRollGate;
  if (name == "fedgate") return GateStrategy::kFedGate;
  Fail(ErrorCode::kConfig, "gate strategy must be rangate, rollgate or "
                           "fedgate, got '" + std::string(name) + "'");
}

Stage1Method ParseStage1Method(std::string_view name) {
  if (name == "fedce") return Stage1Method::kFedCe;
  if (name == "fedsc") return Stage1Method::kFedSc;
  Fail(ErrorCode::kConfig, "stage1 method must be fedce or fedsc, got '" +
                               std::string(name) + "'");
}

MlpSpec ModelConfig::FeSpec(std::size_t input_dim) const {
  std::vector<std::size_t> widths = {input_dim};
  widths.insert(widths.end(), fe_hidden.begin(), fe_hidden.end());
  widths.push_back(latent_dim);
  return MlpSpec::Make(widths, activation);
}

MlpSpec ModelConfig::ExpertSpec(std::size_t num_classes) const {
  std::vector<std::size_t> widths = {latent_dim};
  widths.insert(widths.end(), expert_hidden.begin(), expert_hidden.end());
  widths.push_back(num_classes);
  return MlpSpec::Make(widths, activation);
}

void RunConfig::Validate() const {
  Require(version == kConfigVersion, ErrorCode::kConfig,
          "config version " + std::to_string(version) + " is not supported (" +
              std::to_string(kConfigVersion) + " expected)");
  const std::size_t m = data.partition.num_clients;
  Require(m >= 1, ErrorCode::kConfig, "data.partition.num_clients must be >= 1");
  Require(k >= 1 && k <= m, ErrorCode::kConfig,
          "k = " + std::to_string(k) + " must satisfy 1 <= k <= num_clients = " +
              std::to_string(m));
  Require(data.partition.tau > 0.0 && data.partition.tau <= 1.0,
          ErrorCode::kConfig, "data.partition.tau must lie in (0, 1]");
  Require(data.partition.train_per_client > 0 &&
              data.partition.test_per_client > 0,
          ErrorCode::kConfig, "per-client train and test sizes must be > 0");
  Require(bytes_per_scalar > 0, ErrorCode::kConfig,
          "bytes_per_scalar must be > 0");
  switch (data.source) {
    case DataSource::kSynthetic:
      Require(data.synthetic.num_classes >= 2 && data.synthetic.dim > 0 &&
                  data.synthetic.samples_per_class > 0 &&
                  data.synthetic.spread >= 0.0 && data.synthetic.radius > 0.0,
              ErrorCode::kConfig, "invalid data.synthetic parameters");
      break;
    case DataSource::kCifar10:
      Require(!data.cifar10_paths.empty(), ErrorCode::kConfig,
              "data.cifar10_paths is empty");
      for (const auto& p : data.cifar10_paths) {
        Require(std::filesystem::exists(p), ErrorCode::kConfig,
                "data.cifar10_paths entry does not exist: " + p.string());
      }
      break;
    case DataSource::kContainer:
      Require(std::filesystem::exists(data.container_path), ErrorCode::kConfig,
              "data.container_path does not exist: " +
                  data.container_path.string());
      break;
  }
  Require(model.latent_dim > 0, ErrorCode::kConfig,
          "model.latent_dim must be > 0");
  for (auto w : model.fe_hidden) {
    Require(w > 0, ErrorCode::kConfig, "model.fe_hidden widths must be > 0");
  }
  for (auto w : model.expert_hidden) {
    Require(w > 0, ErrorCode::kConfig,
            "model.expert_hidden widths must be > 0");
  }
  Require(stage1.schedule.rounds > 0 && stage1.schedule.local_epochs > 0,
          ErrorCode::kConfig, "stage1 rounds and local_epochs must be > 0");
  RequireSgd(stage1.schedule.sgd, "stage1.sgd");
  stage1.fedsc.augment.Validate();
  Require(stage1.fedsc.dp_noise_std >= 0.0, ErrorCode::kConfig,
          "stage1.dp_noise_std must be >= 0");
  RequireSgd(stage2.options.sgd, "stage2.sgd");
  Require(stage3.gate_noise_std >= 0.0, ErrorCode::kConfig,
          "stage3.gate_noise_std must be >= 0");
  const auto& fg = stage3.fedgate;
  Require(fg.rounds > 0 && fg.local_epochs > 0, ErrorCode::kConfig,
          "stage3.fedgate rounds and local_epochs must be > 0");
  Require(fg.client_fraction > 0.0 && fg.client_fraction <= 1.0,
          ErrorCode::kConfig, "stage3.fedgate.client_fraction must lie in (0, 1]");
  Require(fg.lambda_load >= 0.0, ErrorCode::kConfig,
          "stage3.fedgate.lambda_load must be >= 0");
  RequireSgd(fg.sgd, "stage3.fedgate.sgd");
  const auto& rg = stage3.rollgate;
  Require(rg.p > 0.0 && rg.p < 1.0, ErrorCode::kConfig,
          "stage3.rollgate.p must lie in (0, 1)");
  Require(rg.max_passes > 0 && rg.epochs_per_client > 0, ErrorCode::kConfig,
          "stage3.rollgate passes and epochs must be > 0");
  Require(stage3.strategy != GateStrategy::kRollGate || m >= 2,
          ErrorCode::kConfig, "RollGate needs at least two clients");
  RequireSgd(rg.sgd, "stage3.rollgate.sgd");
  if (!stage3.rangate_distribution.empty()) {
    Require(stage3.rangate_distribution.size() == m, ErrorCode::kConfig,
            "stage3.rangate.distribution needs one entry per client");
    RandomGate{stage3.rangate_distribution}.Validate(k);
  }
  Require(baselines.epochs > 0, ErrorCode::kConfig,
          "baselines.epochs must be > 0");
  RequireSgd(baselines.sgd, "baselines.sgd");
}

RunConfig ParseRunConfig(const std::string& json_text) {
  json user;
  try {
    user = json::parse(json_text);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kConfig, std::string("config is not valid JSON: ") +
                                 e.what());
  }
  json merged = ToJson(RunConfig{});
  Merge(merged, user, "");
  try {
    return FromJson(merged);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kConfig, std::string("bad config value: ") + e.what());
  }
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  Require(in.is_open(), ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseRunConfig(buf.str());
}

std::string RunConfigToJson(const RunConfig& config, int indent) {
  return ToJson(config).dump(indent);
}

std::string ConfigHash(const RunConfig& config) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : RunConfigToJson(config)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return HashHex(h);
}

}  // namespace nmoe
