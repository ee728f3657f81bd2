#pragma once

#include <string>
#include <utility>
#include <vector>

#include "drmatch/diagnostics.hpp"
#include "drmatch/estimators.hpp"
#include "drmatch/simulation.hpp"

namespace drmatch {

/// Ordered key/value echo of the run configuration. The library version is
/// added by every writer.
using Provenance = std::vector<std::pair<std::string, std::string>>;

/// Six significant digits; "nan" / "inf" for non-finite values.
std::string format_number(double value);

// CSV writers put provenance in leading '#' comment lines. JSON writers add a
// "metadata" object holding the only non-reproducible fields.

std::string estimates_csv(const std::vector<EffectEstimate>& estimates, const Provenance& provenance);
std::string estimates_json(const std::vector<EffectEstimate>& estimates, const Provenance& provenance,
                           const std::vector<std::string>& errors = {}, const BalanceReport* balance = nullptr);

std::string balance_csv(const BalanceReport& report, const Provenance& provenance);
/// One row per stage with mean, unbalanced mean and maximum.
std::string balance_summary_csv(const BalanceReport& report, const Provenance& provenance);
std::string balance_json(const BalanceReport& report, const Provenance& provenance);

std::string summary_csv(const SimulationSummary& summary, const Provenance& provenance);
std::string summary_json(const SimulationSummary& summary, const Provenance& provenance);

std::string grid_csv(const std::vector<GridCell>& cells, const Provenance& provenance);
std::string grid_json(const std::vector<GridCell>& cells, const Provenance& provenance);

std::string rate_csv(const std::vector<RatePoint>& points, const Provenance& provenance);

}  // namespace drmatch
