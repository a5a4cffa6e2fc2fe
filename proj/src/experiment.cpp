#include "hyperalign/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "hyperalign/error.hpp"
#include "hyperalign/serialize.hpp"

namespace hyperalign {

namespace fs = std::filesystem;
using json = nlohmann::json;

EvalConfig ExperimentConfig::eval_config(Method m) const {
    EvalConfig e;
    e.method = m;
    e.solver = solver;
    e.sweep = sweep;
    e.classifier_lambda = classifier_lambda;
    e.workers = 1;
    return e;
}

ExperimentConfig experiment_config_from_json(const json& j, ExperimentConfig base) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    static const std::set<std::string> known{"dataset", "synthetic", "solver",   "sweep", "classifier",
                                             "grids",   "methods",   "out",      "seed",  "workers"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");

    try {
        if (j.contains("dataset")) base.dataset = fs::path(j["dataset"].get<std::string>());
        if (j.contains("synthetic"))
            base.synthetic = synthetic_spec_from_json(j["synthetic"], base.synthetic.value_or(SyntheticSpec{}));
        if (j.contains("solver")) base.solver = solver_config_from_json(j["solver"], base.solver);
        if (j.contains("sweep")) base.sweep = sweep_config_from_json(j["sweep"], base.sweep);
        if (j.contains("classifier")) {
            const auto& c = j["classifier"];
            for (const auto& [key, _] : c.items())
                if (key != "lambda") throw ConfigError("classifier: unknown key '" + key + "'");
            if (c.contains("lambda")) base.classifier_lambda = c["lambda"].get<double>();
        }
        if (j.contains("grids")) {
            const auto& g = j["grids"];
            for (const auto& [key, _] : g.items())
                if (key != "trs" && key != "voxels") throw ConfigError("grids: unknown key '" + key + "'");
            if (g.contains("trs")) base.tr_grid = g["trs"].get<std::vector<int>>();
            if (g.contains("voxels")) base.voxel_grid = g["voxels"].get<std::vector<int>>();
        }
        if (j.contains("methods")) {
            base.methods.clear();
            for (const auto& m : j["methods"]) base.methods.push_back(parse_method(m.get<std::string>()));
        }
        if (j.contains("out")) base.out_dir = j["out"].get<std::string>();
        if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("workers")) base.workers = j["workers"].get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (base.workers < 1) throw ConfigError("config: workers must be >= 1");
    if (!(base.classifier_lambda >= 0.0)) throw ConfigError("config: classifier.lambda must be >= 0");
    return base;
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    if (cfg.dataset) j["dataset"] = cfg.dataset->string();
    if (cfg.synthetic) j["synthetic"] = to_json(*cfg.synthetic);
    j["solver"] = to_json(cfg.solver);
    j["sweep"] = to_json(cfg.sweep);
    j["classifier"] = {{"lambda", cfg.classifier_lambda}};
    j["grids"] = {{"trs", cfg.tr_grid}, {"voxels", cfg.voxel_grid}};
    j["methods"] = json::array();
    for (auto m : cfg.methods) j["methods"].push_back(to_string(m));
    j["out"] = cfg.out_dir.string();
    if (cfg.seed) j["seed"] = *cfg.seed;
    j["workers"] = cfg.workers;
    return j;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config '" + path.string() + "'");
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    return experiment_config_from_json(doc);
}

LabeledDataset resolve_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset) return load_dataset(*cfg.dataset);
    if (cfg.synthetic) {
        SyntheticSpec spec = *cfg.synthetic;
        if (cfg.seed) spec.seed = *cfg.seed;
        return generate_synthetic(spec);
    }
    throw ConfigError("config: neither 'dataset' nor 'synthetic' given");
}

namespace {

LabeledDataset with_rows(const LabeledDataset& ds, const std::vector<Eigen::Index>& rows, std::vector<int> labels) {
    std::vector<SubjectData> subjects;
    for (const auto& s : ds.subjects()) subjects.push_back(standardize(s.id(), s.x()(rows, Eigen::all)));
    return LabeledDataset(std::move(subjects), LabelVector(std::move(labels), ds.labels()->num_classes()));
}

}  // namespace

LabeledDataset truncate_trs(const LabeledDataset& ds, int tr_count) {
    if (!ds.labels()) throw ConfigError("truncate_trs: dataset has no labels");
    const LabelVector& y = *ds.labels();
    const int classes = y.num_classes();
    const int per_class = tr_count / classes;
    if (tr_count > ds.t()) throw ConfigError("TR count " + std::to_string(tr_count) + " exceeds T = " + std::to_string(ds.t()));
    if (per_class < 1)
        throw ConfigError("TR count " + std::to_string(tr_count) + " leaves no rows for some of the " +
                          std::to_string(classes) + " classes");
    std::vector<int> taken(static_cast<std::size_t>(classes), 0);
    std::vector<Eigen::Index> rows;
    std::vector<int> labels;
    for (std::size_t t = 0; t < y.size(); ++t) {
        const int c = y[t];
        if (taken[static_cast<std::size_t>(c)] < per_class) {
            ++taken[static_cast<std::size_t>(c)];
            rows.push_back(static_cast<Eigen::Index>(t));
            labels.push_back(c);
        }
    }
    for (int c = 0; c < classes; ++c)
        if (taken[static_cast<std::size_t>(c)] < per_class)
            throw ConfigError("TR count " + std::to_string(tr_count) + ": class " + std::to_string(c) + " has only " +
                              std::to_string(taken[static_cast<std::size_t>(c)]) + " rows");
    if (rows.size() < 2) throw ConfigError("TR truncation leaves fewer than 2 rows");
    return with_rows(ds, rows, std::move(labels));
}

std::vector<Eigen::Index> rank_voxels_by_variance(const LabeledDataset& ds) {
    Vector var = Vector::Zero(ds.v());
    for (const auto& s : ds.subjects()) {
        const Matrix centered = s.x().rowwise() - s.x().colwise().mean();
        var += centered.colwise().squaredNorm().transpose() / static_cast<double>(s.t());
    }
    const double top = var.size() ? var.maxCoeff() : 0.0;
    // Quantize so rounding noise between equal variances does not decide the order.
    std::vector<long long> key(static_cast<std::size_t>(var.size()));
    for (Eigen::Index i = 0; i < var.size(); ++i)
        key[static_cast<std::size_t>(i)] = top > 0.0 ? std::llround(var(i) / top * 1e9) : 0;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(var.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return key[static_cast<std::size_t>(a)] > key[static_cast<std::size_t>(b)];
    });
    return order;
}

LabeledDataset select_top_voxels(const LabeledDataset& ds, int voxel_count) {
    if (voxel_count < 1 || voxel_count > ds.v())
        throw ConfigError("voxel count " + std::to_string(voxel_count) + " outside [1, V = " + std::to_string(ds.v()) + "]");
    auto order = rank_voxels_by_variance(ds);
    order.resize(static_cast<std::size_t>(voxel_count));
    std::sort(order.begin(), order.end());
    std::vector<SubjectData> subjects;
    for (const auto& s : ds.subjects()) subjects.push_back(standardize(s.id(), s.x()(Eigen::all, order)));
    return LabeledDataset(std::move(subjects), ds.labels());
}

std::vector<SweepRow> run_sweep(const LabeledDataset& ds, const ExperimentConfig& cfg) {
    if (cfg.tr_grid.empty() || cfg.voxel_grid.empty()) throw ConfigError("sweep: grids must be non-empty");
    if (cfg.methods.empty()) throw ConfigError("sweep: no methods given");
    for (int tr : cfg.tr_grid)
        if (tr < 1 || tr > ds.t()) throw ConfigError("sweep: TR count " + std::to_string(tr) + " outside [1, T = " + std::to_string(ds.t()) + "]");
    for (int v : cfg.voxel_grid)
        if (v < 1 || v > ds.v()) throw ConfigError("sweep: voxel count " + std::to_string(v) + " outside [1, V = " + std::to_string(ds.v()) + "]");

    struct Cell {
        int tr, voxels;
        Method method;
    };
    std::vector<Cell> cells;
    for (int tr : cfg.tr_grid)
        for (int v : cfg.voxel_grid)
            for (Method m : cfg.methods) cells.push_back({tr, v, m});

    std::vector<SweepRow> rows(cells.size());
    parallel_for(cells.size(), cfg.workers, [&](std::size_t i) {
        const Cell& c = cells[i];
        const LabeledDataset cut = select_top_voxels(truncate_trs(ds, c.tr), c.voxels);
        EvalConfig e = cfg.eval_config(c.method);
        const int limit = static_cast<int>(std::min(cut.t(), cut.v()));
        if (e.solver.k && *e.solver.k > limit) e.solver.k = limit;
        const EvalReport r = loso_evaluate(cut, e);
        rows[i] = {c.tr, c.voxels, r.method, r.accuracy, r.accuracy_std, r.auc};
        spdlog::info("sweep: tr={} voxels={} {} acc={:.2f}", c.tr, c.voxels, r.method, r.accuracy);
    });
    return rows;
}

void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write '" + path.string() + "'");
    os << "tr,voxels,method,mean_acc,std_acc,mean_auc\n";
    for (const auto& r : rows)
        os << r.tr << ',' << r.voxels << ',' << r.method << ',' << format_double(r.mean_acc) << ','
           << format_double(r.std_acc) << ',' << format_double(r.mean_auc) << '\n';
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<SweepRow> read_sweep_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(is, line) || line != "tr,voxels,method,mean_acc,std_acc,mean_auc")
        throw SchemaError("'" + path.string() + "': unexpected header");
    std::vector<SweepRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string f[6];
        for (int i = 0; i < 6; ++i)
            if (!std::getline(ls, f[i], i == 5 ? '\n' : ','))
                throw SchemaError("'" + path.string() + "': malformed row '" + line + "'");
        try {
            rows.push_back({std::stoi(f[0]), std::stoi(f[1]), f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
        } catch (const std::exception&) {
            throw SchemaError("'" + path.string() + "': malformed row '" + line + "'");
        }
    }
    return rows;
}

}  // namespace hyperalign
