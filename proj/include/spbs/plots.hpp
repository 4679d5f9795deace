#pragma once

#include <string>
#include <vector>

#include "spbs/evaluation.hpp"

namespace spbs {

// Grouped MAP/F1 bar chart over breakdown bins, written as a standalone SVG.
void write_breakdown_chart(const std::vector<BreakdownRow>& rows, const std::string& title,
                           const std::string& path);

}  // namespace spbs
