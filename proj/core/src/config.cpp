#include "edngtm/config.hpp"

#include <spdlog/spdlog.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "edngtm/error.hpp"

namespace edngtm::io {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ContractViolation("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

}  // namespace

const std::set<std::string>& RunConfig::known_keys() {
  static const std::set<std::string> keys{
      "epochs",        "lr0",           "decay_start_epoch", "batch_size",       "input_size",
      "critic_steps",  "seed",          "w_adv",             "w_mse",            "w_per",
      "w_critic",      "sign_mode",     "adam_beta1",        "adam_beta2",       "adam_eps",
      "weight_clip",   "feature_weights", "dataset_root",    "out_dir",          "checkpoint_interval",
      "augment",       "guidance_mode", "net.depth",         "net.base_width",   "net.spp_kernels",
      "net.use_spp",   "net.guidance",  "net.instance_norm", "net.upsample",     "dcp.patch",
      "dcp.omega",     "dcp.airlight_fraction", "dcp.t0",    "dcp.gf_radius",    "dcp.gf_eps",
      "haze.beta_min", "haze.beta_max", "haze.beta",         "haze.airlight",    "infer.pad",
  };
  return keys;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  RunConfig config;
  std::size_t offset = 0;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    const std::size_t line_offset = offset;
    offset += raw.size() + 1;
    std::string line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source + ": line without '=': '" + line + "'", line_offset);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(source + ": line with empty key", line_offset);
    if (!known_keys().count(key)) throw ParseError(source + ": unknown key '" + key + "'", line_offset);
    if (config.values_.count(key)) throw ParseError(source + ": duplicate key '" + key + "'", line_offset);
    config.values_.emplace(key, value);
  }
  return config;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  require(known_keys().count(key) != 0, "unknown config key '", key, "'");
  values_[key] = value;
}

const std::string* RunConfig::lookup(const std::string& key) const {
  require(known_keys().count(key) != 0, "unknown config key '", key, "'");
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

void RunConfig::note(const std::string& key, const std::string& shown, bool defaulted) const {
  if (logged_.insert(key).second) spdlog::info("config {} = {}{}", key, shown, defaulted ? " (default)" : "");
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  const std::string* v = lookup(key);
  note(key, v ? *v : fallback, !v);
  return v ? *v : fallback;
}

std::int64_t RunConfig::get_int(const std::string& key, std::int64_t fallback) const {
  const std::string* v = lookup(key);
  if (!v) {
    note(key, std::to_string(fallback), true);
    return fallback;
  }
  std::int64_t out = 0;
  const auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || end != v->data() + v->size()) bad_value(key, *v, "an integer");
  note(key, *v, false);
  return out;
}

std::uint64_t RunConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
  const std::string* v = lookup(key);
  if (!v) {
    note(key, std::to_string(fallback), true);
    return fallback;
  }
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || end != v->data() + v->size()) bad_value(key, *v, "a non-negative integer");
  note(key, *v, false);
  return out;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const std::string* v = lookup(key);
  if (!v) {
    note(key, std::to_string(fallback), true);
    return fallback;
  }
  double out = 0;
  const auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || end != v->data() + v->size()) bad_value(key, *v, "a number");
  note(key, *v, false);
  return out;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const std::string* v = lookup(key);
  if (!v) {
    note(key, fallback ? "true" : "false", true);
    return fallback;
  }
  bool out = false;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on")
    out = true;
  else if (!(*v == "false" || *v == "0" || *v == "no" || *v == "off"))
    bad_value(key, *v, "a boolean");
  note(key, *v, false);
  return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& key, const std::vector<int>& fallback) const {
  const std::string* v = lookup(key);
  if (!v) {
    std::string shown;
    for (int k : fallback) shown += (shown.empty() ? "" : ",") + std::to_string(k);
    note(key, shown, true);
    return fallback;
  }
  std::vector<int> out;
  std::istringstream in(*v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    int k = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), k);
    if (item.empty() || ec != std::errc{} || end != item.data() + item.size())
      bad_value(key, *v, "a comma-separated integer list");
    out.push_back(k);
  }
  note(key, *v, false);
  return out;
}

net::NetSpec net_spec_from(const RunConfig& c) {
  net::NetSpec spec;
  spec.depth = static_cast<int>(c.get_int("net.depth", spec.depth));
  spec.base_width = static_cast<int>(c.get_int("net.base_width", spec.base_width));
  spec.spp_kernels = c.get_int_list("net.spp_kernels", spec.spp_kernels);
  spec.use_spp = c.get_bool("net.use_spp", spec.use_spp);
  spec.guidance = c.get_bool("net.guidance", spec.guidance);
  spec.in_channels = spec.guidance ? 4 : 3;
  spec.instance_norm = c.get_bool("net.instance_norm", spec.instance_norm);
  const std::string up = c.get_string("net.upsample", "nearest-conv");
  if (up == "nearest-conv")
    spec.upsample = net::UpsampleMode::NearestConv;
  else if (up == "transposed")
    spec.upsample = net::UpsampleMode::Transposed;
  else
    bad_value("net.upsample", up, "nearest-conv or transposed");
  spec.validate();
  return spec;
}

dcp::DcpParams dcp_params_from(const RunConfig& c) {
  dcp::DcpParams p;
  p.patch = static_cast<int>(c.get_int("dcp.patch", p.patch));
  p.omega = c.get_double("dcp.omega", p.omega);
  p.airlight_fraction = c.get_double("dcp.airlight_fraction", p.airlight_fraction);
  p.t0 = c.get_double("dcp.t0", p.t0);
  p.gf_radius = static_cast<int>(c.get_int("dcp.gf_radius", p.gf_radius));
  p.gf_eps = c.get_double("dcp.gf_eps", p.gf_eps);
  p.validate();
  return p;
}

haze::HazeParams haze_params_from(const RunConfig& c) {
  haze::HazeParams p;
  p.beta_range.first = c.get_double("haze.beta_min", p.beta_range.first);
  p.beta_range.second = c.get_double("haze.beta_max", p.beta_range.second);
  if (c.has("haze.beta")) p.beta = c.get_double("haze.beta", 0.0);
  const double a = c.get_double("haze.airlight", p.airlight[0]);
  p.airlight = {static_cast<float>(a), static_cast<float>(a), static_cast<float>(a)};
  p.seed = c.get_uint("seed", p.seed);
  p.validate();
  return p;
}

train::TrainConfig train_config_from(const RunConfig& c) {
  train::TrainConfig t;
  t.epochs = static_cast<int>(c.get_int("epochs", t.epochs));
  t.lr0 = c.get_double("lr0", t.lr0);
  if (c.has("decay_start_epoch")) t.decay_start_epoch = static_cast<int>(c.get_int("decay_start_epoch", 0));
  t.batch_size = static_cast<int>(c.get_int("batch_size", t.batch_size));
  t.input_size = static_cast<int>(c.get_int("input_size", t.input_size));
  t.critic_steps = static_cast<int>(c.get_int("critic_steps", t.critic_steps));
  t.seed = c.get_uint("seed", t.seed);
  t.weights.adversarial = c.get_double("w_adv", t.weights.adversarial);
  t.weights.mse = c.get_double("w_mse", t.weights.mse);
  t.weights.perceptual = c.get_double("w_per", t.weights.perceptual);
  t.weights.critic = c.get_double("w_critic", t.weights.critic);
  const std::string sign = c.get_string("sign_mode", "functional");
  if (sign == "functional")
    t.sign_mode = loss::SignMode::Functional;
  else if (sign == "paper-verbatim")
    t.sign_mode = loss::SignMode::PaperVerbatim;
  else
    bad_value("sign_mode", sign, "functional or paper-verbatim");
  t.adam_beta1 = c.get_double("adam_beta1", t.adam_beta1);
  t.adam_beta2 = c.get_double("adam_beta2", t.adam_beta2);
  t.adam_eps = c.get_double("adam_eps", t.adam_eps);
  if (c.has("weight_clip")) t.weight_clip = c.get_double("weight_clip", 0.0);
  t.net = net_spec_from(c);
  t.dcp = dcp_params_from(c);
  const std::string mode = c.get_string("guidance_mode", "t");
  if (mode == "t")
    t.guidance_mode = dcp::GuidanceMode::Transmission;
  else if (mode == "1-t")
    t.guidance_mode = dcp::GuidanceMode::OneMinusTransmission;
  else
    bad_value("guidance_mode", mode, "t or 1-t");
  t.feature_weights = c.get_string("feature_weights", t.feature_weights);
  t.dataset_root = c.get_string("dataset_root", t.dataset_root);
  t.out_dir = c.get_string("out_dir", t.out_dir);
  t.checkpoint_interval = static_cast<int>(c.get_int("checkpoint_interval", t.checkpoint_interval));
  t.augment = c.get_bool("augment", t.augment);
  t.validate();
  return t;
}

}  // namespace edngtm::io
