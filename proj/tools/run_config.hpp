#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "centile/catchup.hpp"
#include "centile/conditional.hpp"
#include "centile/reference.hpp"
#include "centile/splines.hpp"

namespace centile::cli {

/// Settings shared by all subcommands.  Every field has a default; a config
/// file overrides the defaults and command-line flags override the file.
struct RunConfig {
  KnotVector marginal_knots = default_infancy_knots();
  KnotVector conditional_knots = default_infancy_knots();
  KnotVector catchup_knots = default_catchup_knots();
  std::vector<double> taus;
  ConditionalModelSpec conditional;
  ScreeningTaus screening;
  ReferenceCriteria reference;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  nlohmann::json generator = nlohmann::json::object();  // generator params, seed optional
};

RunConfig default_run_config();

/// Parses a config document.  Unknown keys and malformed values throw
/// ValidationError naming the offending key.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config_file(const std::string& path);

void validate(const RunConfig& config);

}  // namespace centile::cli
