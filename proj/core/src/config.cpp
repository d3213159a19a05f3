#include "qnet/config.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace qnet {

namespace {

using json = nlohmann::json;

void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0) throw ConfigError(path + "." + key, "unknown key");
  }
}

double number(const json& obj, const std::string& path, const char* key, std::optional<double> fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    throw ConfigError(path + "." + key, "missing required number");
  }
  if (!it->is_number()) throw ConfigError(path + "." + key, "expected a number");
  return it->get<double>();
}

std::string text(const json& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(path + "." + key, "missing required string");
  if (!it->is_string()) throw ConfigError(path + "." + key, "expected a string");
  return it->get<std::string>();
}

const json& array(const json& root, const char* key, bool required) {
  static const json empty = json::array();
  const auto it = root.find(key);
  if (it == root.end()) {
    if (required) throw ConfigError(key, "missing required array");
    return empty;
  }
  if (!it->is_array()) throw ConfigError(key, "expected an array");
  return *it;
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t a = 0; a < byte && a < text.size(); ++a) {
    if (text[a] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

}  // namespace

RunConfig parse_config_text(const std::string& source_text, const std::string& source) {
  json root;
  try {
    root = json::parse(source_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ":" + line_column(source_text, e.byte == 0 ? 0 : e.byte - 1), "syntax error");
  }
  allow_keys(root, "config", {"nodes", "links", "blocks", "initial"});

  RunConfig cfg;
  std::map<std::string, std::size_t> node_names;
  const json& nodes = array(root, "nodes", true);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    allow_keys(nodes[i], path, {"name", "lambda", "mu_exit"});
    NodeSpec n;
    n.name = nodes[i].contains("name") ? text(nodes[i], path, "name") : "n" + std::to_string(i + 1);
    n.lambda = number(nodes[i], path, "lambda", 0.0);
    n.mu_exit = number(nodes[i], path, "mu_exit", 0.0);
    if (!node_names.emplace(n.name, i).second) throw ConfigError(path + ".name", "duplicate node name '" + n.name + "'");
    cfg.spec.nodes.push_back(std::move(n));
  }

  std::map<std::string, std::size_t> block_names;
  const json& blocks = array(root, "blocks", false);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string path = "blocks[" + std::to_string(b) + "]";
    allow_keys(blocks[b], path, {"name", "q_down_to_up", "q_up_to_down"});
    BlockSpec s;
    s.name = blocks[b].contains("name") ? text(blocks[b], path, "name") : "b" + std::to_string(b + 1);
    if (s.name == "ALWAYS_UP") throw ConfigError(path + ".name", "ALWAYS_UP is reserved");
    s.q0 = number(blocks[b], path, "q_down_to_up", std::nullopt);
    s.q1 = number(blocks[b], path, "q_up_to_down", std::nullopt);
    if (!block_names.emplace(s.name, b).second) throw ConfigError(path + ".name", "duplicate block name '" + s.name + "'");
    cfg.spec.blocks.push_back(std::move(s));
  }

  auto endpoint = [&](const json& link, const std::string& path, const char* key) -> std::size_t {
    const auto it = link.find(key);
    if (it == link.end()) throw ConfigError(path + "." + key, "missing link endpoint");
    if (it->is_string()) {
      const auto found = node_names.find(it->get<std::string>());
      if (found == node_names.end()) throw ConfigError(path + "." + key, "unknown node '" + it->get<std::string>() + "'");
      return found->second;
    }
    if (it->is_number_integer()) {
      const auto v = it->get<long long>();
      if (v < 1 || static_cast<std::size_t>(v) > cfg.spec.nodes.size()) {
        throw ConfigError(path + "." + key, "node index " + std::to_string(v) + " outside 1.." +
                                                std::to_string(cfg.spec.nodes.size()));
      }
      return static_cast<std::size_t>(v - 1);
    }
    throw ConfigError(path + "." + key, "expected a node name or 1-based index");
  };

  const json& links = array(root, "links", false);
  for (std::size_t a = 0; a < links.size(); ++a) {
    const std::string path = "links[" + std::to_string(a) + "]";
    allow_keys(links[a], path, {"from", "to", "mu", "f", "block", "bidirectional"});
    LinkSpec l;
    l.from = endpoint(links[a], path, "from");
    l.to = endpoint(links[a], path, "to");
    l.mu = number(links[a], path, "mu", std::nullopt);
    l.f = number(links[a], path, "f", 1.0);
    if (links[a].contains("block")) {
      const std::string b = text(links[a], path, "block");
      if (b != "ALWAYS_UP") {
        const auto found = block_names.find(b);
        if (found == block_names.end()) throw ConfigError(path + ".block", "unknown block '" + b + "'");
        l.block = found->second;
      }
    }
    if (links[a].contains("bidirectional")) {
      if (!links[a]["bidirectional"].is_boolean()) throw ConfigError(path + ".bidirectional", "expected true or false");
      l.bidirectional = links[a]["bidirectional"].get<bool>();
    }
    cfg.spec.links.push_back(l);
  }

  cfg.initial.counts.assign(cfg.spec.nodes.size(), 0U);
  if (root.contains("initial")) {
    const json& init = root["initial"];
    allow_keys(init, "initial", {"counts", "background"});
    if (init.contains("counts")) {
      const json& counts = init["counts"];
      if (!counts.is_array() || counts.size() != cfg.spec.nodes.size()) {
        throw ConfigError("initial.counts", "expected an array with one count per node");
      }
      for (std::size_t i = 0; i < counts.size(); ++i) {
        if (!counts[i].is_number_unsigned()) {
          throw ConfigError("initial.counts[" + std::to_string(i) + "]", "expected a non-negative integer");
        }
        cfg.initial.counts[i] = counts[i].get<unsigned>();
      }
    }
    if (init.contains("background")) {
      const json& bg = init["background"];
      if (bg.is_string()) {
        if (bg.get<std::string>() != "stationary") throw ConfigError("initial.background", "expected \"stationary\" or a per-block object");
      } else if (bg.is_object()) {
        const std::size_t k_count = cfg.spec.blocks.size();
        std::size_t state = 0;
        std::set<std::string> seen;
        for (const auto& [name, value] : bg.items()) {
          const std::string path = "initial.background." + name;
          const auto found = block_names.find(name);
          if (found == block_names.end()) throw ConfigError(path, "unknown block");
          if (!value.is_string() || (value != "up" && value != "down")) throw ConfigError(path, "expected \"up\" or \"down\"");
          if (value == "up") state |= std::size_t{1} << (k_count - 1 - found->second);
          seen.insert(name);
        }
        if (seen.size() != k_count) throw ConfigError("initial.background", "every block needs an up/down status");
        cfg.initial.background = state;
      } else {
        throw ConfigError("initial.background", "expected \"stationary\" or a per-block object");
      }
    }
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string to_config_text(const NetworkSpec& spec) {
  json root;
  root["nodes"] = json::array();
  for (const auto& n : spec.nodes) root["nodes"].push_back({{"name", n.name}, {"lambda", n.lambda}, {"mu_exit", n.mu_exit}});
  root["blocks"] = json::array();
  for (const auto& b : spec.blocks) {
    root["blocks"].push_back({{"name", b.name}, {"q_down_to_up", b.q0}, {"q_up_to_down", b.q1}});
  }
  root["links"] = json::array();
  for (const auto& l : spec.links) {
    json j{{"from", l.from + 1}, {"to", l.to + 1}, {"mu", l.mu}, {"f", l.f}};
    j["block"] = l.block ? spec.blocks.at(*l.block).name : std::string("ALWAYS_UP");
    if (l.bidirectional) j["bidirectional"] = true;
    root["links"].push_back(std::move(j));
  }
  return root.dump(2) + "\n";
}

}  // namespace qnet
