// Copyright 2026 The GPCIS Authors.
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

#include "gpcis/checkpoint.hpp"

#include <fmt/format.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>
#include <string>

#include "gpcis/errors.hpp"
#include "gpcis/image.hpp"

namespace gpcis {
namespace {

constexpr char kMagic[4] = {'G', 'P', 'I', 'S'};
constexpr std::size_t kPreamble = 4 + 4 + 8;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

nlohmann::ordered_json config_json(const ModelConfig& c) {
  return {{"feature_dim", c.feature_dim},
          {"hidden", c.hidden},
          {"bases", c.bases},
          {"sigma2", c.sigma2},
          {"concat_image", c.concat_image},
          {"fixed_kernel", c.fixed_kernel},
          {"fixed_weight_space", c.fixed_weight_space},
          {"previous_mask_channel", c.previous_mask_channel}};
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig c;
  c.feature_dim = j.at("feature_dim").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.bases = j.at("bases").get<int>();
  c.sigma2 = j.at("sigma2").get<double>();
  c.concat_image = j.at("concat_image").get<bool>();
  c.fixed_kernel = j.at("fixed_kernel").get<bool>();
  c.fixed_weight_space = j.at("fixed_weight_space").get<bool>();
  c.previous_mask_channel = j.at("previous_mask_channel").get<bool>();
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelCheckpoint& model_in) {
  ModelCheckpoint model = model_in;
  nlohmann::ordered_json header;
  header["feature_recipe_version"] = model.feature_recipe_version;
  header["config"] = config_json(model.config);
  header["sigma2"] = model.head.sigma2;
  nlohmann::ordered_json meta;
  meta["epochs"] = model.metadata.epochs;
  meta["seed"] = std::to_string(model.metadata.seed);
  meta["skipped_images"] = model.metadata.skipped_images;
  nlohmann::ordered_json trace = nlohmann::ordered_json::array();
  for (const LossRecord& r : model.metadata.loss_trace) trace.push_back({r.epoch, r.nfl, r.vi, r.total});
  meta["loss_trace"] = trace;
  header["metadata"] = meta;

  std::vector<std::uint8_t> payload;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (const ParameterRef& p : parameter_refs(model)) {
    tensors.push_back({{"name", p.name}, {"shape", {p.rows, p.cols}}, {"offset", payload.size()}});
    for (Eigen::Index i = 0; i < p.rows; ++i) {
      for (Eigen::Index j = 0; j < p.cols; ++j) put(payload, static_cast<float>(p.data[j * p.rows + i]));
    }
  }
  header["tensors"] = tensors;
  header["order"] = "row-major";
  header["dtype"] = "float32-le";
  header["payload_bytes"] = payload.size();

  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint64_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

ModelCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPreamble || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a model checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion) {
    throw FormatError(fmt::format("checkpoint version {} is not supported (expected {})", version, kCheckpointVersion));
  }
  const auto header_len = get<std::uint64_t>(bytes, 8);
  if (header_len > bytes.size() - kPreamble) throw FormatError("checkpoint truncated inside the header");
  const std::size_t payload_start = kPreamble + static_cast<std::size_t>(header_len);

  try {
    const nlohmann::json header =
        nlohmann::json::parse(bytes.begin() + kPreamble, bytes.begin() + static_cast<std::ptrdiff_t>(payload_start));
    const auto payload_bytes = header.at("payload_bytes").get<std::size_t>();
    if (bytes.size() - payload_start != payload_bytes) throw FormatError("checkpoint payload size mismatch");
    if (header.at("order").get<std::string>() != "row-major" || header.at("dtype").get<std::string>() != "float32-le") {
      throw FormatError("unsupported tensor layout");
    }
    const int recipe = header.at("feature_recipe_version").get<int>();
    if (recipe != kFeatureRecipeVersion) {
      throw FormatError(fmt::format("feature recipe version {} is not supported", recipe));
    }

    ModelCheckpoint model = init_model(config_from(header.at("config")), 0);
    model.head.sigma2 = header.at("sigma2").get<double>();
    const nlohmann::json& meta = header.at("metadata");
    model.metadata.epochs = meta.at("epochs").get<int>();
    model.metadata.seed = std::stoull(meta.at("seed").get<std::string>());
    model.metadata.skipped_images = meta.at("skipped_images").get<int>();
    for (const nlohmann::json& r : meta.at("loss_trace")) {
      model.metadata.loss_trace.push_back(
          {r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>()});
    }

    const nlohmann::json& tensors = header.at("tensors");
    std::vector<ParameterRef> refs = parameter_refs(model);
    if (tensors.size() != refs.size()) throw FormatError("checkpoint tensor list does not match the model");
    const std::span<const std::uint8_t> payload = bytes.subspan(payload_start);
    for (std::size_t k = 0; k < refs.size(); ++k) {
      const nlohmann::json& t = tensors[k];
      const ParameterRef& p = refs[k];
      if (t.at("name").get<std::string>() != p.name || t.at("shape").at(0).get<Eigen::Index>() != p.rows ||
          t.at("shape").at(1).get<Eigen::Index>() != p.cols) {
        throw FormatError(fmt::format("checkpoint tensor {} has an unexpected name or shape", k));
      }
      const auto offset = t.at("offset").get<std::size_t>();
      const std::size_t count = static_cast<std::size_t>(p.size());
      if (offset > payload.size() || count * sizeof(float) > payload.size() - offset) {
        throw FormatError(fmt::format("checkpoint tensor {} lies outside the payload", p.name));
      }
      for (Eigen::Index i = 0; i < p.rows; ++i) {
        for (Eigen::Index j = 0; j < p.cols; ++j) {
          const float v = get<float>(payload, offset + sizeof(float) * static_cast<std::size_t>(i * p.cols + j));
          if (!std::isfinite(v)) throw FormatError(fmt::format("checkpoint tensor {} holds a non-finite value", p.name));
          p.data[j * p.rows + i] = static_cast<double>(v);
        }
      }
    }
    return model;
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(fmt::format("corrupt checkpoint header: {}", e.what()));
  }
}

void save_checkpoint(const ModelCheckpoint& model, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(model));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  return decode_checkpoint(bytes);
}

}  // namespace gpcis
