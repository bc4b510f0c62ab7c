/*
 * Copyright 2026 The sweepnav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SWEEPNAV_CONFIG_HPP_
#define SWEEPNAV_CONFIG_HPP_

// Flat dotted-key configuration. Precedence: defaults < JSON file < flags.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sweepnav {

class Config {
 public:
  enum class Type { kBool, kInt, kDouble, kString };

  struct Entry {
    Type type = Type::kString;
    nlohmann::json value;
    std::string help;
    std::vector<std::string> aliases;  // extra flag names, without dashes
  };

  void define(const std::string& key, Type type, nlohmann::json value, std::string help,
              std::vector<std::string> aliases = {});

  bool has(const std::string& key) const { return entries_.contains(key); }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  // Type-checked assignment; unknown keys are a ValidationError naming the key.
  void set(const std::string& key, const nlohmann::json& value);
  void set_text(const std::string& key, const std::string& text);
  // Accepts {"rae.k": 5} as well as {"rae": {"k": 5}}.
  void merge_json(const nlohmann::json& j, const std::string& source);
  void merge_file(const std::filesystem::path& path);

  bool flag(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  double number(const std::string& key) const;
  std::string str(const std::string& key) const;

  nlohmann::ordered_json to_json() const;

 private:
  const Entry& entry(const std::string& key) const;
  std::map<std::string, Entry> entries_;
};

// Every key understood by the commands, with defaults.
Config default_config();

}  // namespace sweepnav

#endif  // SWEEPNAV_CONFIG_HPP_
