/*
 * Copyright 2026 The ARMIN Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "armin/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace armin {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string where(const ConfigEntry& e) {
  return e.line > 0 ? "line " + std::to_string(e.line) + ": " : "--set " + e.key + ": ";
}

long parse_long(const ConfigEntry& e) {
  long v = 0;
  const char* end = e.value.data() + e.value.size();
  auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(where(e) + "key '" + e.key + "' expects an integer, got '" + e.value + "'", e.line);
  }
  return v;
}

double parse_double(const ConfigEntry& e) {
  double v = 0;
  const char* end = e.value.data() + e.value.size();
  auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(where(e) + "key '" + e.key + "' expects a number, got '" + e.value + "'", e.line);
  }
  return v;
}

bool parse_bool(const ConfigEntry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  throw ConfigError(where(e) + "key '" + e.key + "' expects true or false, got '" + e.value + "'", e.line);
}

using Setter = std::function<void(TrainConfig&, const ConfigEntry&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto integer = [](auto field) {
      return [field](TrainConfig& c, const ConfigEntry& e) { field(c) = parse_long(e); };
    };
    auto real = [](auto field) {
      return [field](TrainConfig& c, const ConfigEntry& e) { field(c) = parse_double(e); };
    };
    t["model"] = [](TrainConfig& c, const ConfigEntry& e) { c.model = parse_model_kind(e.value); };
    t["task"] = [](TrainConfig& c, const ConfigEntry& e) { c.task = TaskSpec::named(e.value); };
    t["mode"] = [](TrainConfig& c, const ConfigEntry& e) { c.gumbel.mode = parse_address_mode(e.value); };
    t["corpus"] = [](TrainConfig& c, const ConfigEntry& e) { c.corpus = e.value; };
    t["stop_when_solved"] = [](TrainConfig& c, const ConfigEntry& e) { c.stop_when_solved = parse_bool(e); };
    t["seed"] = [](TrainConfig& c, const ConfigEntry& e) { c.seed = static_cast<std::uint64_t>(parse_long(e)); };
    t["val_seed"] = [](TrainConfig& c, const ConfigEntry& e) {
      c.val_seed = static_cast<std::uint64_t>(parse_long(e));
    };
    t["d_h"] = integer([](TrainConfig& c) -> Index& { return c.d_h; });
    t["d_r"] = integer([](TrainConfig& c) -> Index& { return c.d_r; });
    t["n_mem"] = integer([](TrainConfig& c) -> Index& { return c.n_mem; });
    t["length_min"] = integer([](TrainConfig& c) -> Index& { return c.task.length.lo; });
    t["length_max"] = integer([](TrainConfig& c) -> Index& { return c.task.length.hi; });
    t["repeats_min"] = integer([](TrainConfig& c) -> Index& { return c.task.repeats.lo; });
    t["repeats_max"] = integer([](TrainConfig& c) -> Index& { return c.task.repeats.hi; });
    t["pairs_min"] = integer([](TrainConfig& c) -> Index& { return c.task.pairs.lo; });
    t["pairs_max"] = integer([](TrainConfig& c) -> Index& { return c.task.pairs.hi; });
    t["n_in"] = integer([](TrainConfig& c) -> Index& { return c.task.n_in; });
    t["n_out"] = integer([](TrainConfig& c) -> Index& { return c.task.n_out; });
    t["iterations"] = integer([](TrainConfig& c) -> long& { return c.iterations; });
    t["val_interval"] = integer([](TrainConfig& c) -> long& { return c.val_interval; });
    t["val_samples"] = integer([](TrainConfig& c) -> Index& { return c.val_samples; });
    t["anneal_iters"] = integer([](TrainConfig& c) -> long& { return c.gumbel.anneal_iters; });
    t["batch"] = integer([](TrainConfig& c) -> Index& { return c.batch; });
    t["chunk"] = integer([](TrainConfig& c) -> Index& { return c.chunk; });
    t["val_chars"] = integer([](TrainConfig& c) -> Index& { return c.val_chars; });
    t["lr"] = real([](TrainConfig& c) -> double& { return c.adam.lr; });
    t["beta1"] = real([](TrainConfig& c) -> double& { return c.adam.beta1; });
    t["beta2"] = real([](TrainConfig& c) -> double& { return c.adam.beta2; });
    t["eps"] = real([](TrainConfig& c) -> double& { return c.adam.eps; });
    t["clip"] = real([](TrainConfig& c) -> double& { return c.clip; });
    t["tau_max"] = real([](TrainConfig& c) -> double& { return c.gumbel.tau_max; });
    t["tau_min"] = real([](TrainConfig& c) -> double& { return c.gumbel.tau_min; });
    t["val_fraction"] = real([](TrainConfig& c) -> double& { return c.val_fraction; });
    return t;
  }();
  return table;
}

}  // namespace

std::vector<ConfigEntry> parse_config(std::istream& in) {
  std::vector<ConfigEntry> out;
  std::map<std::string, int> seen;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'", line);
    ConfigEntry e{trim(text.substr(0, eq)), trim(text.substr(eq + 1)), line};
    if (e.key.empty()) throw ConfigError("line " + std::to_string(line) + ": missing key", line);
    if (auto it = seen.find(e.key); it != seen.end()) {
      throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + e.key + "' (first set on line " +
                            std::to_string(it->second) + ")",
                        line);
    }
    seen[e.key] = line;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ConfigEntry> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse_config(in);
}

ConfigEntry parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + text + "'");
  ConfigEntry e{trim(text.substr(0, eq)), trim(text.substr(eq + 1)), 0};
  if (e.key.empty()) throw ConfigError("--set expects key=value, got '" + text + "'");
  return e;
}

void apply_config(TrainConfig& config, const std::vector<ConfigEntry>& entries) {
  const auto& table = setters();
  auto apply = [&](const ConfigEntry& e) {
    auto it = table.find(e.key);
    if (it == table.end()) throw ConfigError(where(e) + "unknown key '" + e.key + "'", e.line);
    try {
      it->second(config, e);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& err) {
      throw ConfigError(where(e) + "key '" + e.key + "': " + err.what(), e.line);
    }
  };
  for (const auto& e : entries) {
    if (e.key == "task") apply(e);
  }
  for (const auto& e : entries) {
    if (e.key != "task") apply(e);
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : setters()) keys.push_back(k);
  return keys;
}

std::string format_config(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "model = " << to_string(c.model) << '\n'
     << "task = " << c.task.name() << '\n'
     << "d_h = " << c.d_h << '\n'
     << "d_r = " << c.d_r << '\n'
     << "n_mem = " << c.n_mem << '\n'
     << "length_min = " << c.task.length.lo << '\n'
     << "length_max = " << c.task.length.hi << '\n'
     << "repeats_min = " << c.task.repeats.lo << '\n'
     << "repeats_max = " << c.task.repeats.hi << '\n'
     << "pairs_min = " << c.task.pairs.lo << '\n'
     << "pairs_max = " << c.task.pairs.hi << '\n'
     << "n_in = " << c.task.n_in << '\n'
     << "n_out = " << c.task.n_out << '\n'
     << "lr = " << c.adam.lr << '\n'
     << "beta1 = " << c.adam.beta1 << '\n'
     << "beta2 = " << c.adam.beta2 << '\n'
     << "eps = " << c.adam.eps << '\n'
     << "clip = " << c.clip << '\n'
     << "iterations = " << c.iterations << '\n'
     << "val_interval = " << c.val_interval << '\n'
     << "val_samples = " << c.val_samples << '\n'
     << "val_seed = " << c.val_seed << '\n'
     << "seed = " << c.seed << '\n'
     << "stop_when_solved = " << (c.stop_when_solved ? "true" : "false") << '\n'
     << "tau_max = " << c.gumbel.tau_max << '\n'
     << "tau_min = " << c.gumbel.tau_min << '\n'
     << "anneal_iters = " << c.gumbel.anneal_iters << '\n'
     << "mode = " << to_string(c.gumbel.mode) << '\n'
     << "batch = " << c.batch << '\n'
     << "chunk = " << c.chunk << '\n'
     << "val_fraction = " << c.val_fraction << '\n'
     << "val_chars = " << c.val_chars << '\n';
  if (!c.corpus.empty()) os << "corpus = " << c.corpus << '\n';
  return os.str();
}

}  // namespace armin
