/* Copyright (c) 2026 The MarrNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include "marrnet/model/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace marrnet::model {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'M', 'R', 'N', 'E', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

ordered_json arch_to_json(const ArchConfig& a) {
  return ordered_json{{"input_length", a.input_length},
                      {"encoder_blocks", a.encoder_blocks},
                      {"base_channels", a.base_channels},
                      {"bottleneck_dim", a.bottleneck_dim},
                      {"kernel_size", a.kernel_size},
                      {"siamese_channels", a.siamese_channels},
                      {"embedding_dim", a.embedding_dim},
                      {"disc_blocks", a.disc_blocks}};
}

ArchConfig arch_from_json(const ordered_json& j) {
  ArchConfig a;
  a.input_length = j.at("input_length").get<int>();
  a.encoder_blocks = j.at("encoder_blocks").get<int>();
  a.base_channels = j.at("base_channels").get<int>();
  a.bottleneck_dim = j.at("bottleneck_dim").get<int>();
  a.kernel_size = j.at("kernel_size").get<int>();
  const auto sc = j.at("siamese_channels").get<std::vector<int>>();
  if (sc.size() != 3) throw MalformedFile("checkpoint: siamese_channels must have 3 entries");
  a.siamese_channels = {sc[0], sc[1], sc[2]};
  a.embedding_dim = j.at("embedding_dim").get<int>();
  a.disc_blocks = j.at("disc_blocks").get<int>();
  a.validate();
  return a;
}

template <typename Params>
std::vector<ArchiveEntry> collect_entries(const Params& params) {
  std::vector<ArchiveEntry> entries;
  params.visit_all([&](const std::string& name, Param& p) {
    entries.push_back({name, p.shape, p.value});
  });
  return entries;
}

template <typename Params>
void restore_entries(Params& params, const std::vector<ArchiveEntry>& entries) {
  std::map<std::string, const ArchiveEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  params.visit_all([&](const std::string& name, Param& p) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw MalformedFile("checkpoint: missing tensor " + name);
    if (it->second->data.size() != p.value.size())
      throw MalformedFile("checkpoint: size mismatch for " + name);
    p.value = it->second->data;
  });
}

}  // namespace

void save_archive(const std::filesystem::path& path, const Archive& archive) {
  ordered_json header;
  header["format"] = archive.format;
  header["role"] = archive.role;
  header["arch"] = arch_to_json(archive.arch);
  header["extra"] = archive.extra_json.empty()
                        ? ordered_json::object()
                        : ordered_json::parse(archive.extra_json);
  header["tensors"] = ordered_json::array();
  for (const auto& e : archive.entries)
    header["tensors"].push_back({{"name", e.name}, {"shape", e.shape}});
  const std::string hs = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& e : archive.entries)
    out.write(reinterpret_cast<const char*>(e.data.data()),
              static_cast<std::streamsize>(e.data.size() * sizeof(double)));
  if (!out) throw IoError("write failed for " + path.string());
}

Archive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw MalformedFile(path.string() + ": bad magic");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kVersion) throw MalformedFile(path.string() + ": unsupported version");
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw MalformedFile(path.string() + ": truncated header");

  ordered_json header;
  try {
    header = ordered_json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(path.string() + ": " + e.what());
  }

  Archive a;
  a.format = header.at("format").get<std::string>();
  a.role = header.at("role").get<std::string>();
  a.arch = arch_from_json(header.at("arch"));
  a.extra_json = header.at("extra").dump();
  for (const auto& t : header.at("tensors")) {
    ArchiveEntry e;
    e.name = t.at("name").get<std::string>();
    e.shape = t.at("shape").get<std::vector<int>>();
    size_t count = 1;
    for (int d : e.shape) count *= static_cast<size_t>(d);
    e.data.resize(count);
    in.read(reinterpret_cast<char*>(e.data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw MalformedFile(path.string() + ": truncated tensor " + e.name);
    a.entries.push_back(std::move(e));
  }
  return a;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  Archive a;
  a.format = "checkpoint";
  a.role = "full";
  a.arch = params.cfg();
  a.entries = collect_entries(params);
  save_archive(path, a);
}

void save_checkpoint(const std::filesystem::path& path, const InferenceParams& params) {
  Archive a;
  a.format = "checkpoint";
  a.role = "inference";
  a.arch = params.cfg();
  a.entries = collect_entries(params);
  save_archive(path, a);
}

std::unique_ptr<ModelParams> load_full_checkpoint(const std::filesystem::path& path) {
  Archive a = load_archive(path);
  if (a.format != "checkpoint") throw MalformedFile(path.string() + ": not a checkpoint");
  if (a.role != "full")
    throw MalformedFile(path.string() + ": role '" + a.role + "' cannot be loaded as full model");
  auto params = std::make_unique<ModelParams>(a.arch);
  restore_entries(*params, a.entries);
  return params;
}

std::unique_ptr<InferenceParams> load_inference_checkpoint(const std::filesystem::path& path) {
  Archive a = load_archive(path);
  if (a.format != "checkpoint") throw MalformedFile(path.string() + ": not a checkpoint");
  auto params = std::make_unique<InferenceParams>(a.arch);
  restore_entries(*params, a.entries);  // extra tensors in a full checkpoint are ignored
  return params;
}

}  // namespace marrnet::model
