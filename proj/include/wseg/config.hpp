// Copyright 2026 The wseg Authors. All Rights Reserved.
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

// Flat key=value run configuration.
//
// A value resolves as: explicit setting, else the variant preset, else the
// registry default. Values are canonicalised when set, so the resolved text
// and its digest do not depend on how a number was spelled.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wseg/data.hpp"
#include "wseg/network.hpp"
#include "wseg/training.hpp"

namespace wseg {

enum class ValueKind { integer, uint64, real, boolean, text, int_list, real_list, choice };

struct ConfigKey {
  std::string key;
  std::string default_value;
  ValueKind kind;
  std::vector<std::string> choices;  // ValueKind::choice only
  bool digest;  // part of the model/training identity
  std::string help;
};

const std::vector<ConfigKey>& config_keys();
const ConfigKey* find_config_key(std::string_view key);

class RunConfig {
 public:
  // Throws ConfigError for an unknown key or an unparsable value.
  void set(const std::string& key, const std::string& value);
  // key=value lines; '#' starts a comment; blank lines are skipped.
  void merge_text(std::string_view text, std::string_view origin);
  void load_file(const std::filesystem::path& path);

  bool is_set(const std::string& key) const { return explicit_.count(key) > 0; }
  const std::map<std::string, std::string>& explicit_values() const { return explicit_; }
  std::string get(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  // Every key in registry order as key=value lines.
  std::string resolved_text() const;
  // FNV-1a over the resolved lines of digest keys.
  std::uint64_t digest() const;

 private:
  std::map<std::string, std::string> explicit_;
};

// Values the variant fixes unless set explicitly.
std::map<std::string, std::string> variant_preset(Variant v);

NetworkConfig network_config(const RunConfig& rc);
AugConfig aug_config(const RunConfig& rc);
TrainConfig train_config(const RunConfig& rc);
SceneSpec scene_config(const RunConfig& rc);

std::string format_double(double v);

}  // namespace wseg
