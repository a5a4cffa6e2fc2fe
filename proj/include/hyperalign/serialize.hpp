#pragma once

// JSON / CSV forms of configs and results.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperalign/aligncore.hpp"
#include "hyperalign/datamodel.hpp"
#include "hyperalign/mvpeval.hpp"
#include "hyperalign/trainer.hpp"

namespace hyperalign {

nlohmann::json to_json(const SolverConfig& cfg);
nlohmann::json to_json(const SweepConfig& cfg);
nlohmann::json to_json(const SyntheticSpec& spec);
nlohmann::json to_json(const EvalReport& report);

/// Missing keys keep the values already in `base`. Unknown keys or wrong
/// types raise ConfigError.
SolverConfig solver_config_from_json(const nlohmann::json& j, SolverConfig base = {});
SweepConfig sweep_config_from_json(const nlohmann::json& j, SweepConfig base = {});
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j, SyntheticSpec base = {});
EvalReport eval_report_from_json(const nlohmann::json& j);

/// Writes <dir>/template.bin, <dir>/maps/<id>.bin and the sidecar
/// <dir>/train.json (config, sweep count, objective trace, created).
void save_train_result(const TrainResult& result, const SolverConfig& solver, const SweepConfig& sweep,
                       const std::filesystem::path& dir);
TrainResult load_train_result(const std::filesystem::path& dir);

/// Long-format per-fold rows: fold,held_out,method,accuracy,auc.
void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);

struct EvalCsvRow {
    int fold = 0;
    std::string held_out;
    std::string method;
    double accuracy = 0.0;
    double auc = 0.0;
};
std::vector<EvalCsvRow> read_eval_csv(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

std::string utc_timestamp();

}  // namespace hyperalign
