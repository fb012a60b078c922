#pragma once

#include <json.hpp>

#include "dctmpc/dc_core.hpp"

namespace dctmpc {

using json = nlohmann::json;

struct FitReport {
  double mae = 0.0;
  Vec mae_per_output;
  int n_train = 0;
  int n_test = 0;
  double wall_time = 0.0;
  bool warning = false;
  std::string note;
};

json to_json(const Mat& m);
json to_json(const Vec& v);
Mat mat_from_json(const json& j);
Vec vec_from_json(const json& j);

json to_json(const FitReport& r);
FitReport fit_report_from_json(const json& j);

json to_json(const DcFunction& f);
DcFunction dc_function_from_json(const json& j);

// Self-describing model file; see docs/model_schema.md.
json to_json(const DcModel& m, const std::optional<FitReport>& report = std::nullopt);
DcModel dc_model_from_json(const json& j, std::optional<FitReport>* report = nullptr);

void save_model(const std::string& path, const DcModel& m, const std::optional<FitReport>& report = std::nullopt);
DcModel load_model(const std::string& path, std::optional<FitReport>* report = nullptr);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

}  // namespace dctmpc
