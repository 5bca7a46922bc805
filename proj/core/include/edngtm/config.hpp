#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "edngtm/dcp.hpp"
#include "edngtm/hazesim.hpp"
#include "edngtm/net.hpp"
#include "edngtm/trainer.hpp"

namespace edngtm::io {

/// Flat key=value settings. Blank lines and text after '#' are ignored.
/// Every key must be one of known_keys(); each key read is logged once.
class RunConfig {
 public:
  RunConfig() = default;

  /// `source` names the text in error messages.
  static RunConfig parse(const std::string& text, const std::string& source = "config");
  static RunConfig load(const std::string& path);

  static const std::set<std::string>& known_keys();

  /// Sets or replaces a value (the key must be known).
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  const std::string* lookup(const std::string& key) const;
  void note(const std::string& key, const std::string& shown, bool defaulted) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> logged_;
};

net::NetSpec net_spec_from(const RunConfig& config);
dcp::DcpParams dcp_params_from(const RunConfig& config);
haze::HazeParams haze_params_from(const RunConfig& config);
train::TrainConfig train_config_from(const RunConfig& config);

}  // namespace edngtm::io
