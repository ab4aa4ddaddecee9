// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace memdef::cli {

/// Bad configuration or command line; the CLI maps it to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* help;
};

/// Every recognised key with its default.
const std::vector<ConfigKey>& config_keys();

/// Flat key/value run configuration. Files hold `key = value` lines; `#`
/// starts a comment. Unknown or repeated keys are errors.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_text(const std::string& text, const std::string& source);
  static RunConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  const std::string& str(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  double number(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::int64_t> integers(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<std::string> strings(const std::string& key) const;

  /// Every key with its current value, sorted.
  nlohmann::json echo() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Parses "0.03", "25/255" or "1e-2". Throws UsageError naming `what`.
double parse_number(const std::string& text, const std::string& what);

}  // namespace memdef::cli
