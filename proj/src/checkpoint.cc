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

#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "nmoe/error.h"
#include "nmoe/moe.h"

namespace nmoe {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'N', 'M', 'O', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

json SpecToJson(const MlpSpec& spec) {
  json acts = json::array();
  for (auto a : spec.activations) acts.push_back(std::string(ActivationName(a)));
  return {{"widths", spec.widths}, {"activations", acts}};
}

MlpSpec SpecFromJson(const json& j) {
  MlpSpec spec;
  spec.widths = j.at("widths").get<std::vector<std::size_t>>();
  for (const auto& a : j.at("activations")) {
    spec.activations.push_back(ParseActivation(a.get<std::string>()));
  }
  spec.Validate();
  return spec;
}

// Tensors are stored in a fixed walk order: fe, gate, expert 0..m-1.
template <typename Fn>
void ForEachGroup(const NmoeModel& model, Fn&& fn) {
  fn("fe", model.fe);
  if (const auto* g = std::get_if<LinearGate>(&model.gate)) fn("gate", g->params);
  for (std::size_t e = 0; e < model.experts.size(); ++e) {
    fn("expert" + std::to_string(e), model.experts[e]);
  }
}

}  // namespace

void SaveCheckpoint(const NmoeModel& model, const std::string& config_hash,
                    const std::filesystem::path& path) {
  model.Validate();
  json header;
  header["config_hash"] = config_hash;
  header["fe_spec"] = SpecToJson(model.fe_spec);
  header["expert_spec"] = SpecToJson(model.expert_spec);
  header["num_experts"] = model.experts.size();
  if (const auto* g = std::get_if<LinearGate>(&model.gate)) {
    header["gate"] = {{"type", "linear"}, {"noise_std", g->noise_std}};
  } else {
    header["gate"] = {{"type", "random"},
                      {"distribution", std::get<RandomGate>(model.gate).distribution}};
  }
  json table = json::array();
  ForEachGroup(model, [&](const std::string& group, const ParamSet& p) {
    for (const auto& e : p.entries()) {
      table.push_back({{"group", group},
                       {"name", e.name},
                       {"rows", e.tensor.rows()},
                       {"cols", e.tensor.cols()}});
    }
  });
  header["tensors"] = table;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.is_open(), ErrorCode::kIo, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  ForEachGroup(model, [&](const std::string&, const ParamSet& p) {
    for (const auto& e : p.entries()) {
      const auto d = e.tensor.data();
      out.write(reinterpret_cast<const char*>(d.data()),
                static_cast<std::streamsize>(d.size() * sizeof(double)));
    }
  });
  Require(out.good(), ErrorCode::kIo, "short write to " + path.string());
}

LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.is_open(), ErrorCode::kIo, "cannot open " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  Require(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          ErrorCode::kFormat, path.string() + ": not a checkpoint");
  Require(version == kVersion, ErrorCode::kFormat,
          path.string() + ": unsupported checkpoint version " +
              std::to_string(version));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  Require(in.good(), ErrorCode::kFormat, path.string() + ": truncated header");

  LoadedCheckpoint loaded;
  try {
    const json header = json::parse(text);
    loaded.config_hash = header.at("config_hash").get<std::string>();
    NmoeModel& model = loaded.model;
    model.fe_spec = SpecFromJson(header.at("fe_spec"));
    model.expert_spec = SpecFromJson(header.at("expert_spec"));
    model.experts.resize(header.at("num_experts").get<std::size_t>());
    const json& gate = header.at("gate");
    LinearGate linear;
    const bool is_linear = gate.at("type") == "linear";
    if (is_linear) {
      linear.noise_std = gate.at("noise_std").get<double>();
    } else {
      model.gate = RandomGate{gate.at("distribution").get<std::vector<double>>()};
    }
    for (const auto& t : header.at("tensors")) {
      const auto group = t.at("group").get<std::string>();
      const auto rows = t.at("rows").get<std::size_t>();
      const auto cols = t.at("cols").get<std::size_t>();
      std::vector<double> values(rows * cols);
      in.read(reinterpret_cast<char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
      Require(in.good(), ErrorCode::kFormat, path.string() + ": truncated");
      Tensor2 tensor(rows, cols, std::move(values));
      ParamSet* target = nullptr;
      if (group == "fe") {
        target = &model.fe;
      } else if (group == "gate") {
        target = &linear.params;
      } else if (group.rfind("expert", 0) == 0) {
        const std::size_t e = std::stoul(group.substr(6));
        Require(e < model.experts.size(), ErrorCode::kFormat,
                "expert index out of range in checkpoint");
        target = &model.experts[e];
      } else {
        Fail(ErrorCode::kFormat, "unknown tensor group '" + group + "'");
      }
      target->Add(t.at("name").get<std::string>(), std::move(tensor));
    }
    if (is_linear) model.gate = std::move(linear);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kFormat, path.string() + ": bad checkpoint header: " +
                                 e.what());
  }
  loaded.model.Validate();
  return loaded;
}

}  // namespace nmoe
