#pragma once

#include <iosfwd>
#include <string>
#include <variant>

#include "centile/catchup.hpp"
#include "centile/charts.hpp"
#include "centile/conditional.hpp"

namespace centile {

using AnyModel = std::variant<MarginalChart, ConditionalModel, CatchupModel>;

inline constexpr const char* kMarginalScheme = "marginal-chart-v1";
inline constexpr const char* kConditionalScheme = "conditional-v1";
inline constexpr const char* kCatchupScheme = "catchup-v1";

/// Model files are JSON documents tagged with a top-level "scheme".  Numbers
/// are written in shortest round-trip form, so loading reproduces every
/// double bit for bit.
std::string model_to_json(const AnyModel& model);
AnyModel model_from_json(const std::string& text);

void save_model(std::ostream& out, const AnyModel& model);
void save_model_file(const std::string& path, const AnyModel& model);

/// Throws SchemaError (naming the field path) for malformed input.
AnyModel load_model(std::istream& in);
AnyModel load_model_file(const std::string& path);

/// Typed loaders; ModelTypeError when the file holds another model kind.
MarginalChart load_chart_file(const std::string& path);
ConditionalModel load_conditional_file(const std::string& path);
CatchupModel load_catchup_file(const std::string& path);

MarginalChart as_chart(AnyModel model);
ConditionalModel as_conditional(AnyModel model);
CatchupModel as_catchup(AnyModel model);

}  // namespace centile
