#include "hyperalign/serialize.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "hyperalign/error.hpp"

namespace hyperalign {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
}

template <typename T>
void read_opt(const json& j, const char* key, T& out, const char* where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(where) + "." + key + ": " + e.what());
    }
}

}  // namespace

json to_json(const SolverConfig& cfg) {
    json j;
    j["mode"] = to_string(cfg.mode);
    j["ridge"] = cfg.ridge;
    j["floor"] = cfg.floor;
    j["k"] = cfg.k ? json(*cfg.k) : json(nullptr);
    j["between_weight"] = cfg.between_weight ? json(*cfg.between_weight) : json(nullptr);
    j["symmetrize_cross"] = cfg.symmetrize_cross;
    return j;
}

json to_json(const SweepConfig& cfg) {
    return {{"max_sweeps", cfg.max_sweeps}, {"tol", cfg.tol}, {"strategy", to_string(cfg.strategy)}};
}

json to_json(const SyntheticSpec& spec) {
    return {{"num_subjects", spec.num_subjects}, {"t_per_class", spec.t_per_class},
            {"num_classes", spec.num_classes},   {"v", spec.v},
            {"noise_sigma", spec.noise_sigma},   {"seed", spec.seed},
            {"shared_mixing", spec.shared_mixing}};
}

SolverConfig solver_config_from_json(const json& j, SolverConfig base) {
    reject_unknown(j, {"mode", "ridge", "floor", "k", "between_weight", "symmetrize_cross"}, "solver");
    if (j.contains("mode")) {
        try {
            base.mode = parse_solver_mode(j.at("mode").get<std::string>());
        } catch (const std::exception& e) {
            throw ConfigError(std::string("solver.mode: ") + e.what());
        }
    }
    read_opt(j, "ridge", base.ridge, "solver");
    read_opt(j, "floor", base.floor, "solver");
    if (j.contains("k")) {
        if (j["k"].is_null()) {
            base.k.reset();
        } else {
            int k = 0;
            read_opt(j, "k", k, "solver");
            base.k = k;
        }
    }
    if (j.contains("between_weight")) {
        if (j["between_weight"].is_null()) {
            base.between_weight.reset();
        } else {
            double w = 0.0;
            read_opt(j, "between_weight", w, "solver");
            base.between_weight = w;
        }
    }
    read_opt(j, "symmetrize_cross", base.symmetrize_cross, "solver");
    if (!(base.ridge >= 0.0)) throw ConfigError("solver.ridge must be >= 0");
    if (!(base.floor > 0.0)) throw ConfigError("solver.floor must be > 0");
    if (base.k && *base.k < 1) throw ConfigError("solver.k must be >= 1");
    return base;
}

SweepConfig sweep_config_from_json(const json& j, SweepConfig base) {
    reject_unknown(j, {"max_sweeps", "tol", "strategy"}, "sweep");
    read_opt(j, "max_sweeps", base.max_sweeps, "sweep");
    read_opt(j, "tol", base.tol, "sweep");
    if (j.contains("strategy")) {
        try {
            base.strategy = parse_sweep_strategy(j.at("strategy").get<std::string>());
        } catch (const std::exception& e) {
            throw ConfigError(std::string("sweep.strategy: ") + e.what());
        }
    }
    if (base.max_sweeps < 0) throw ConfigError("sweep.max_sweeps must be >= 0");
    if (!(base.tol >= 0.0)) throw ConfigError("sweep.tol must be >= 0");
    return base;
}

SyntheticSpec synthetic_spec_from_json(const json& j, SyntheticSpec base) {
    reject_unknown(j, {"num_subjects", "t_per_class", "num_classes", "v", "noise_sigma", "seed", "shared_mixing"},
                   "synthetic");
    read_opt(j, "num_subjects", base.num_subjects, "synthetic");
    read_opt(j, "t_per_class", base.t_per_class, "synthetic");
    read_opt(j, "num_classes", base.num_classes, "synthetic");
    read_opt(j, "v", base.v, "synthetic");
    read_opt(j, "noise_sigma", base.noise_sigma, "synthetic");
    read_opt(j, "seed", base.seed, "synthetic");
    read_opt(j, "shared_mixing", base.shared_mixing, "synthetic");
    return base;
}

json to_json(const EvalReport& r) {
    json folds = json::array();
    for (const auto& f : r.per_fold)
        folds.push_back({{"held_out_subject_id", f.held_out_subject_id},
                         {"accuracy", f.accuracy},
                         {"auc", f.auc},
                         {"train_isc", f.train_isc},
                         {"sweeps", f.sweeps},
                         {"converged", f.converged}});
    return {{"method", r.method},
            {"accuracy", r.accuracy},
            {"accuracy_std", r.accuracy_std},
            {"auc", r.auc},
            {"auc_std", r.auc_std},
            {"mean_train_isc", r.mean_train_isc},
            {"chance", r.chance},
            {"num_classes", r.num_classes},
            {"t", r.t},
            {"v", r.v},
            {"per_fold", folds},
            {"config",
             {{"method", to_string(r.config.method)},
              {"solver", to_json(r.config.solver)},
              {"sweep", to_json(r.config.sweep)},
              {"classifier_lambda", r.config.classifier_lambda},
              {"workers", r.config.workers}}}};
}

EvalReport eval_report_from_json(const json& j) {
    try {
        EvalReport r;
        r.method = j.at("method").get<std::string>();
        r.accuracy = j.at("accuracy").get<double>();
        r.accuracy_std = j.at("accuracy_std").get<double>();
        r.auc = j.at("auc").get<double>();
        r.auc_std = j.at("auc_std").get<double>();
        r.mean_train_isc = j.at("mean_train_isc").get<double>();
        r.chance = j.at("chance").get<double>();
        r.num_classes = j.at("num_classes").get<int>();
        r.t = j.at("t").get<Eigen::Index>();
        r.v = j.at("v").get<Eigen::Index>();
        for (const auto& f : j.at("per_fold")) {
            FoldResult fold;
            fold.held_out_subject_id = f.at("held_out_subject_id").get<std::string>();
            fold.accuracy = f.at("accuracy").get<double>();
            fold.auc = f.at("auc").get<double>();
            fold.train_isc = f.at("train_isc").get<double>();
            fold.sweeps = f.at("sweeps").get<int>();
            fold.converged = f.at("converged").get<bool>();
            r.per_fold.push_back(std::move(fold));
        }
        const auto& c = j.at("config");
        r.config.method = parse_method(c.at("method").get<std::string>());
        r.config.solver = solver_config_from_json(c.at("solver"));
        r.config.sweep = sweep_config_from_json(c.at("sweep"));
        r.config.classifier_lambda = c.at("classifier_lambda").get<double>();
        r.config.workers = c.at("workers").get<int>();
        return r;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("eval report: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// TrainResult

void save_train_result(const TrainResult& result, const SolverConfig& solver, const SweepConfig& sweep,
                       const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir / "maps", ec);
    if (ec) throw IoError("cannot create '" + (dir / "maps").string() + "': " + ec.message());

    write_matrix(dir / "template.bin", result.tmpl.g);
    json subjects = json::array();
    for (std::size_t i = 0; i < result.maps.size(); ++i) {
        const auto& id = result.tmpl.source_subject_ids.at(i);
        const auto& map = result.maps[i];
        const std::string file = "maps/" + id + ".bin";
        write_matrix(dir / file, map.r);
        subjects.push_back({{"id", id},
                            {"map_file", file},
                            {"canonical_corrs", std::vector<double>(map.canonical_corrs.begin(), map.canonical_corrs.end())},
                            {"regular", std::vector<bool>(map.regular.begin(), map.regular.end())}});
    }
    json doc{{"solver", to_json(solver)},
             {"sweep", to_json(sweep)},
             {"sweeps", result.sweeps},
             {"converged", result.converged},
             {"objective_trace", result.objective_trace},
             {"subjects", subjects},
             {"template",
              {{"file", "template.bin"},
               {"k", result.tmpl.k},
               {"source_subject_ids", result.tmpl.source_subject_ids},
               {"solver_mode", to_string(result.tmpl.solver_mode)},
               {"ridge", result.tmpl.ridge},
               {"floor", result.tmpl.floor}}},
             {"created", utc_timestamp()}};

    std::ofstream os(dir / "train.json", std::ios::trunc);
    if (!os) throw IoError("cannot write '" + (dir / "train.json").string() + "'");
    os << doc.dump(2) << '\n';
}

TrainResult load_train_result(const fs::path& dir) {
    std::ifstream is(dir / "train.json");
    if (!is) throw IoError("cannot open '" + (dir / "train.json").string() + "'");
    try {
        json doc;
        is >> doc;
        TrainResult r;
        r.sweeps = doc.at("sweeps").get<int>();
        r.converged = doc.at("converged").get<bool>();
        r.objective_trace = doc.at("objective_trace").get<std::vector<double>>();
        const auto& t = doc.at("template");
        r.tmpl.g = read_matrix(dir / t.at("file").get<std::string>());
        r.tmpl.k = t.at("k").get<int>();
        r.tmpl.source_subject_ids = t.at("source_subject_ids").get<std::vector<std::string>>();
        r.tmpl.solver_mode = parse_solver_mode(t.at("solver_mode").get<std::string>());
        r.tmpl.ridge = t.at("ridge").get<double>();
        r.tmpl.floor = t.at("floor").get<double>();
        for (const auto& s : doc.at("subjects")) {
            AlignmentMap m;
            m.r = read_matrix(dir / s.at("map_file").get<std::string>());
            m.k = static_cast<int>(m.r.cols());
            m.ridge = r.tmpl.ridge;
            m.floor = r.tmpl.floor;
            const auto corrs = s.at("canonical_corrs").get<std::vector<double>>();
            m.canonical_corrs = Eigen::Map<const Vector>(corrs.data(), static_cast<Eigen::Index>(corrs.size()));
            m.regular = s.at("regular").get<std::vector<bool>>();
            r.maps.push_back(std::move(m));
        }
        if (r.tmpl.g.cols() != r.tmpl.k) throw SchemaError("train.json: template width does not match k");
        return r;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("train.json: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// CSV

void write_eval_csv(const fs::path& path, const std::vector<EvalReport>& reports) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write '" + path.string() + "'");
    os << "fold,held_out,method,accuracy,auc\n";
    for (const auto& r : reports)
        for (std::size_t f = 0; f < r.per_fold.size(); ++f)
            os << f << ',' << r.per_fold[f].held_out_subject_id << ',' << r.method << ','
               << format_double(r.per_fold[f].accuracy) << ',' << format_double(r.per_fold[f].auc) << '\n';
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<EvalCsvRow> read_eval_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(is, line) || line != "fold,held_out,method,accuracy,auc")
        throw SchemaError("'" + path.string() + "': unexpected header");
    std::vector<EvalCsvRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string fold, held, method, acc, auc;
        if (!std::getline(ls, fold, ',') || !std::getline(ls, held, ',') || !std::getline(ls, method, ',') ||
            !std::getline(ls, acc, ',') || !std::getline(ls, auc))
            throw SchemaError("'" + path.string() + "': malformed row '" + line + "'");
        try {
            rows.push_back({std::stoi(fold), held, method, std::stod(acc), std::stod(auc)});
        } catch (const std::exception&) {
            throw SchemaError("'" + path.string() + "': malformed row '" + line + "'");
        }
    }
    return rows;
}

}  // namespace hyperalign
