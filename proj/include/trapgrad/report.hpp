#pragma once

#include <string>

#include "trapgrad/scenario.hpp"

namespace trapgrad {

// One JSON record per replicate plus one with "aggregate": true. Field values
// are full precision; a re-run with the same config and master seed dumps
// byte-identical text.
std::string report_to_jsonl(const ScenarioReport& report);
ScenarioReport report_from_jsonl(const std::string& text);

void save_report_jsonl(const ScenarioReport& report, const std::string& path);
ScenarioReport load_report_jsonl(const std::string& path);

// Aggregate row with 1-decimal percentages: Clean F1 / AUC / FPR / TPR /
// Attack ACC (plus revealed ratio when defined).
std::string report_to_table(const ScenarioReport& report);

}  // namespace trapgrad
