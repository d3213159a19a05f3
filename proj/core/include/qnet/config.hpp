#pragma once

#include "qnet/model.hpp"
#include "qnet/moments.hpp"

#include <stdexcept>
#include <string>

namespace qnet {

/// Malformed or unknown configuration content. `where` is a line:column for
/// syntax errors or a field path such as links[2].f.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& message)
      : std::runtime_error(where + ": " + message), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

struct RunConfig {
  NetworkSpec spec;
  /// Counts default to zero; background defaults to stationary.
  InitialCondition initial;
};

/// Strict parse: top-level keys nodes, links, blocks, initial; unknown keys are errors.
/// Link endpoints are node names or 1-based indices; a link's block is a block
/// name, "ALWAYS_UP", or absent. Node counts in `initial` are checked here;
/// model constraints are left to validate().
RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
RunConfig parse_config_file(const std::string& path);

/// Inverse of parse_config_text for a spec (links written directed).
std::string to_config_text(const NetworkSpec& spec);

}  // namespace qnet
