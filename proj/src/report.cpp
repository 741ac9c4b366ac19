#include "trapgrad/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "trapgrad/error.hpp"

namespace trapgrad {

namespace {

using json = nlohmann::ordered_json;

json record_to_json(const ScenarioReport& report, const ReplicateResult& r, bool aggregate) {
  json j;
  j["scenario"] = report.scenario;
  if (aggregate) {
    j["aggregate"] = true;
    j["seed"] = report.master_seed;
    j["replicates"] = report.replicates.size();
  } else {
    j["seed"] = r.seed;
    j["replicate"] = r.replicate;
  }
  j["clean_f1"] = r.clean_f1;
  j["baseline_f1"] = r.baseline_f1;
  j["detect_auc"] = r.detect_auc;
  j["tpr"] = r.tpr;
  j["fpr"] = r.fpr;
  j["attack_acc"] = r.attack_acc;
  j["ue_auc"] = r.ue_auc;
  if (r.revealed_ratio.has_value()) {
    j["revealed_ratio"] = *r.revealed_ratio;
  } else {
    j["revealed_ratio"] = nullptr;
  }
  if (aggregate) j["config"] = report.config_text;
  return j;
}

ReplicateResult record_from_json(const json& j) {
  ReplicateResult r;
  r.seed = j.value("seed", std::uint64_t{0});
  r.replicate = j.value("replicate", 0);
  r.clean_f1 = j.value("clean_f1", 0.0);
  r.baseline_f1 = j.value("baseline_f1", 0.0);
  r.detect_auc = j.value("detect_auc", 0.0);
  r.tpr = j.value("tpr", 0.0);
  r.fpr = j.value("fpr", 0.0);
  r.attack_acc = j.value("attack_acc", 0.0);
  r.ue_auc = j.value("ue_auc", 0.0);
  if (j.contains("revealed_ratio") && !j["revealed_ratio"].is_null()) {
    r.revealed_ratio = j["revealed_ratio"].get<double>();
  }
  return r;
}

}  // namespace

std::string report_to_jsonl(const ScenarioReport& report) {
  std::ostringstream out;
  for (const auto& r : report.replicates) {
    out << record_to_json(report, r, false).dump() << '\n';
  }
  out << record_to_json(report, report.aggregate, true).dump() << '\n';
  return out.str();
}

ScenarioReport report_from_jsonl(const std::string& text) {
  ScenarioReport report;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool saw_aggregate = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      fail(Errc::parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.value("aggregate", false)) {
      report.aggregate = record_from_json(j);
      report.master_seed = j.value("seed", std::uint64_t{0});
      report.config_text = j.value("config", "");
      saw_aggregate = true;
    } else {
      report.replicates.push_back(record_from_json(j));
    }
    if (report.scenario.empty()) report.scenario = j.value("scenario", "");
  }
  require(!report.replicates.empty() || saw_aggregate, Errc::empty_input, "empty report");
  return report;
}

void save_report_jsonl(const ScenarioReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // byte-identical reruns: no newline translation
  require(out.good(), Errc::io, "cannot write report: " + path);
  out << report_to_jsonl(report);
  require(out.good(), Errc::io, "write failed: " + path);
}

ScenarioReport load_report_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::io, "cannot open report: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return report_from_jsonl(buf.str());
}

std::string report_to_table(const ScenarioReport& report) {
  const ReplicateResult& a = report.aggregate;
  char line[256];
  std::ostringstream out;
  out << "scenario    reps  clean_f1  detect_auc   fpr    tpr   attack_acc";
  const bool revealed = a.revealed_ratio.has_value();
  if (revealed) out << "  revealed";
  out << '\n';
  std::snprintf(line, sizeof(line), "%-10s  %4zu  %8.1f  %10.1f  %5.1f  %5.1f  %10.1f",
                report.scenario.c_str(), report.replicates.size(), 100.0 * a.clean_f1,
                100.0 * a.detect_auc, 100.0 * a.fpr, 100.0 * a.tpr, 100.0 * a.attack_acc);
  out << line;
  if (revealed) {
    std::snprintf(line, sizeof(line), "  %8.1f", 100.0 * *a.revealed_ratio);
    out << line;
  }
  out << '\n';
  return out.str();
}

}  // namespace trapgrad
