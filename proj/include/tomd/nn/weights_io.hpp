// Copyright 2026 The tomd Authors
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

// Weights directory:
//   manifest.json  {"format": 1, "config": ..., "fusion": ..., "tensors":
//                   {name: {"shape", "dtype": "float32", "offset"}, ...}}
//   weights.bin    float32 little-endian, tensors concatenated in manifest
//                  order; offsets count elements, not bytes

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tomd/chromaticity_fusion.hpp"
#include "tomd/error.hpp"
#include "tomd/nn/dcm.hpp"
#include "tomd/nn/network.hpp"
#include "tomd/nn/normalization.hpp"
#include "tomd/nn/parameters.hpp"

namespace tomd::nn {

static_assert(std::endian::native == std::endian::little,
              "weights.bin is written in host byte order");

/// Everything needed to run inference on raw frames.
struct Model {
  DcmConfig config;
  FusionSpec spec;
  InputNormalization normalization;
  double max_depth = 100.0;
  double threshold = 0.5;
  Parameters<float> weights;
};

inline nlohmann::ordered_json fusion_spec_to_json(const FusionSpec& s) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(s.mode);
  j["depth"] = s.depth ? nlohmann::ordered_json(to_string(*s.depth))
                       : nlohmann::ordered_json();
  j["input1"] = to_string(s.stream1());
  j["input2"] = to_string(s.stream2());
  return j;
}

inline FusionSpec fusion_spec_from_json(const nlohmann::json& j) {
  FusionSpec s;
  s.mode = parse_fusion_mode(j.at("mode").get<std::string>());
  if (j.contains("depth") && !j["depth"].is_null()) {
    s.depth = parse_depth_kind(j["depth"].get<std::string>());
  } else {
    s.depth.reset();
  }
  return s;
}

inline void save_model(const std::filesystem::path& dir, const Model& m) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["format"] = 1;
  manifest["config"] = nlohmann::json(m.config);
  manifest["fusion"] = fusion_spec_to_json(m.spec);
  manifest["normalization"] = nlohmann::json(m.normalization);
  manifest["max_depth"] = m.max_depth;
  manifest["threshold"] = m.threshold;
  manifest["tensors"] = nlohmann::ordered_json::object();

  std::ofstream bin(dir / "weights.bin", std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(bin), ErrorCode::kIoError,
          "cannot write " + (dir / "weights.bin").string());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < m.weights.count(); ++i) {
    const auto& t = m.weights.tensors()[i];
    manifest["tensors"][m.weights.names()[i]] = {
        {"shape", t.shape}, {"dtype", "float32"}, {"offset", offset}};
    bin.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    offset += t.data.size();
  }
  require(static_cast<bool>(bin), ErrorCode::kIoError, "short write to weights.bin");

  std::ofstream js(dir / "manifest.json", std::ios::trunc);
  require(static_cast<bool>(js), ErrorCode::kIoError,
          "cannot write " + (dir / "manifest.json").string());
  js << manifest.dump(2) << '\n';
}

inline Model load_model(const std::filesystem::path& dir) {
  std::ifstream js(dir / "manifest.json");
  require(static_cast<bool>(js), ErrorCode::kIoError,
          "cannot open " + (dir / "manifest.json").string());
  std::ifstream bin(dir / "weights.bin", std::ios::binary);
  require(static_cast<bool>(bin), ErrorCode::kIoError,
          "cannot open " + (dir / "weights.bin").string());

  Model m;
  try {
    const auto manifest = nlohmann::json::parse(js);
    m.config = manifest.at("config").get<DcmConfig>();
    m.spec = fusion_spec_from_json(manifest.at("fusion"));
    if (manifest.contains("normalization")) {
      m.normalization = manifest["normalization"].get<InputNormalization>();
    }
    m.max_depth = manifest.value("max_depth", 100.0);
    m.threshold = manifest.value("threshold", 0.5);
    // Object key order is not preserved by every reader; offsets are.
    std::vector<std::pair<std::size_t, std::string>> order;
    for (const auto& [name, entry] : manifest.at("tensors").items()) {
      order.emplace_back(entry.at("offset").get<std::size_t>(), name);
    }
    std::sort(order.begin(), order.end());
    std::size_t expected = 0;
    for (const auto& [offset, name] : order) {
      const auto& entry = manifest["tensors"][name];
      require(entry.at("dtype").get<std::string>() == "float32",
              ErrorCode::kParseError, "unsupported dtype");
      require(offset == expected, ErrorCode::kParseError,
              "non-contiguous tensor offsets");
      auto& t = m.weights.add(name, entry.at("shape").get<std::vector<int>>());
      bin.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(float)));
      require(static_cast<bool>(bin), ErrorCode::kParseError,
              "weights.bin is shorter than the manifest");
      expected += t.data.size();
    }
    require(bin.peek() == std::char_traits<char>::eof(), ErrorCode::kParseError,
            "weights.bin is longer than the manifest");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, (dir / "manifest.json").string() + ": " + e.what());
  }
  m.config.validate();
  require(init_network<float>(m.config, m.spec, 0).same_layout(m.weights),
          ErrorCode::kShapeMismatch,
          "stored tensors do not match the configured network");
  return m;
}

}  // namespace tomd::nn
