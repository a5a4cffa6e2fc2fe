#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperalign/datamodel.hpp"
#include "hyperalign/mvpeval.hpp"

namespace hyperalign {

/// Everything a run needs. Loaded from one JSON document; command-line flags
/// are applied on top by the CLI (flags > file > defaults).
struct ExperimentConfig {
    std::optional<std::filesystem::path> dataset;  // manifest path
    std::optional<SyntheticSpec> synthetic;
    SolverConfig solver;
    SweepConfig sweep;
    double classifier_lambda = 1.0;
    std::vector<int> tr_grid;
    std::vector<int> voxel_grid;
    std::vector<Method> methods{Method::Identity, Method::Classical, Method::Ldha};
    std::filesystem::path out_dir = "out";
    std::optional<std::uint64_t> seed;
    int workers = 1;

    EvalConfig eval_config(Method m) const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Loads `dataset`, or generates `synthetic` (with `seed` overriding the
/// generator seed when set). ConfigError if neither is given.
LabeledDataset resolve_dataset(const ExperimentConfig& cfg);

/// Keeps the first tr_count / C rows of every class (rows stay in their
/// original order) and re-standardizes. ConfigError when a class would lose
/// all rows or the result has fewer than 2 rows.
LabeledDataset truncate_trs(const LabeledDataset& ds, int tr_count);

/// Voxel indices ordered by summed per-subject column variance, descending;
/// ties (to 1e-9 relative) keep the original index order. Labels unused.
std::vector<Eigen::Index> rank_voxels_by_variance(const LabeledDataset& ds);

/// Keeps the top voxel_count voxels by variance and re-standardizes.
LabeledDataset select_top_voxels(const LabeledDataset& ds, int voxel_count);

struct SweepRow {
    int tr = 0;
    int voxels = 0;
    std::string method;
    double mean_acc = 0.0;
    double std_acc = 0.0;
    double mean_auc = 0.0;
};

/// Every (tr, voxels, method) cell in grid order; cells run on up to
/// cfg.workers threads, results come back in grid order.
std::vector<SweepRow> run_sweep(const LabeledDataset& ds, const ExperimentConfig& cfg);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

}  // namespace hyperalign
