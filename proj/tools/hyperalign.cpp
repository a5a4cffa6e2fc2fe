#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hyperalign/error.hpp"
#include "hyperalign/experiment.hpp"
#include "hyperalign/serialize.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hyperalign;

namespace {

enum Exit : int { Ok = 0, Failure = 1, BadConfig = 2, BadIo = 3 };

struct Common {
    std::string config;
    std::string dataset;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> methods;
    std::optional<int> workers;
};

void add_common(CLI::App* cmd, Common& c, bool with_methods, bool with_workers) {
    cmd->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--dataset", c.dataset, "dataset manifest (overrides the config)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "seed for synthetic data");
    cmd->add_option("--out", c.out, "output directory");
    if (with_methods) cmd->add_option("--method", c.methods, "identity, classical, ldha")->delimiter(',');
    if (with_workers) cmd->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig build_config(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_experiment_config(c.config);
    if (!c.dataset.empty()) {
        cfg.dataset = fs::path(c.dataset);
        cfg.synthetic.reset();
    }
    if (c.seed) cfg.seed = c.seed;
    if (!c.out.empty()) cfg.out_dir = c.out;
    if (!c.methods.empty()) {
        cfg.methods.clear();
        for (const auto& m : c.methods) cfg.methods.push_back(parse_method(m));
    }
    if (c.workers) cfg.workers = *c.workers;
    if (cfg.methods.empty()) throw ConfigError("no methods given");
    return cfg;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write '" + path.string() + "'");
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

void print_summary(const LabeledDataset& ds, const fs::path& where) {
    std::cout << "dataset: " << ds.size() << " subjects, T=" << ds.t() << ", V=" << ds.v();
    if (ds.labels()) std::cout << ", classes=" << ds.labels()->num_classes();
    std::cout << " -> " << where.string() << '\n';
}

int cmd_generate(const Common& c, const std::optional<SyntheticSpec>& flags_spec) {
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_experiment_config(c.config);
    SyntheticSpec spec = flags_spec ? *flags_spec : cfg.synthetic.value_or(SyntheticSpec{});
    if (c.seed) spec.seed = *c.seed;
    else if (cfg.seed) spec.seed = *cfg.seed;
    const fs::path out = c.out.empty() ? cfg.out_dir : fs::path(c.out);
    const LabeledDataset ds = generate_synthetic(spec);
    ensure_dir(out);
    const fs::path manifest = save_dataset(ds, out);
    print_summary(ds, manifest);
    return Ok;
}

int cmd_import(const std::vector<std::string>& csvs, const std::string& labels, const std::string& out) {
    std::vector<SubjectData> subjects;
    for (const auto& f : csvs) subjects.push_back(standardize(fs::path(f).stem().string(), read_csv_matrix(f)));
    std::optional<LabelVector> y;
    if (!labels.empty()) {
        try {
            y = LabelVector(read_labels(labels));
        } catch (const InvalidInput& e) {
            throw SchemaError(labels + ": " + e.what());
        }
    }
    LabeledDataset ds(std::move(subjects), std::move(y));
    ensure_dir(out);
    print_summary(ds, save_dataset(ds, out));
    return Ok;
}

int cmd_align(const Common& c) {
    const ExperimentConfig cfg = build_config(c);
    const LabeledDataset ds = resolve_dataset(cfg);
    const TrainResult r = fit(ds, cfg.solver, cfg.sweep);
    ensure_dir(cfg.out_dir);
    save_train_result(r, cfg.solver, cfg.sweep, cfg.out_dir);
    std::cout << "sweeps=" << r.sweeps << " converged=" << (r.converged ? "true" : "false") << '\n';
    for (std::size_t i = 0; i < r.objective_trace.size(); ++i)
        std::cout << "sweep " << i + 1 << " isc=" << format_double(r.objective_trace[i]) << '\n';
    return Ok;
}

int cmd_evaluate(const Common& c) {
    const ExperimentConfig cfg = build_config(c);
    const LabeledDataset ds = resolve_dataset(cfg);
    ensure_dir(cfg.out_dir);
    std::vector<EvalReport> reports;
    for (Method m : cfg.methods) {
        EvalConfig e = cfg.eval_config(m);
        e.workers = cfg.workers;
        EvalReport r = loso_evaluate(ds, e);
        json j = to_json(r);
        j["created"] = utc_timestamp();
        write_json(cfg.out_dir / (std::string("eval_") + to_string(m) + ".json"), j);
        std::cout << r.method << ": accuracy " << format_double(r.accuracy) << " ± " << format_double(r.accuracy_std)
                  << ", auc " << format_double(r.auc) << ", train isc " << format_double(r.mean_train_isc) << '\n';
        reports.push_back(std::move(r));
    }
    const fs::path csv = cfg.out_dir / "evaluate.csv";
    write_eval_csv(csv, reports);
    if (read_eval_csv(csv).size() != reports.size() * ds.size())
        throw IoError("'" + csv.string() + "' did not read back");
    return Ok;
}

int cmd_sweep(const Common& c) {
    const ExperimentConfig cfg = build_config(c);
    const LabeledDataset ds = resolve_dataset(cfg);
    const auto rows = run_sweep(ds, cfg);
    ensure_dir(cfg.out_dir);
    const fs::path csv = cfg.out_dir / "sweep.csv";
    write_sweep_csv(csv, rows);
    if (read_sweep_csv(csv).size() != rows.size()) throw IoError("'" + csv.string() + "' did not read back");
    for (const auto& r : rows)
        std::cout << "tr=" << r.tr << " voxels=" << r.voxels << ' ' << r.method << " acc=" << format_double(r.mean_acc)
                  << '\n';
    return Ok;
}

int cmd_report(const std::string& path) {
    const fs::path p(path);
    if (p.extension() == ".json") {
        std::ifstream is(p);
        if (!is) throw IoError("cannot open '" + path + "'");
        json j;
        try {
            is >> j;
        } catch (const json::exception& e) {
            throw SchemaError(path + ": " + e.what());
        }
        const EvalReport r = eval_report_from_json(j);
        std::cout << r.method << " (T=" << r.t << ", V=" << r.v << ", chance " << format_double(r.chance) << ")\n";
        for (const auto& f : r.per_fold)
            std::cout << "  " << f.held_out_subject_id << " acc=" << format_double(f.accuracy)
                      << " auc=" << format_double(f.auc) << '\n';
        std::cout << "  mean acc=" << format_double(r.accuracy) << " ± " << format_double(r.accuracy_std) << '\n';
        return Ok;
    }
    std::ifstream is(p);
    std::string header;
    if (!is || !std::getline(is, header)) throw IoError("cannot read '" + path + "'");
    is.close();
    if (header.rfind("tr,", 0) == 0) {
        std::cout << "tr\tvoxels\tmethod\tmean_acc\tstd_acc\tmean_auc\n";
        for (const auto& r : read_sweep_csv(p))
            std::cout << r.tr << '\t' << r.voxels << '\t' << r.method << '\t' << format_double(r.mean_acc) << '\t'
                      << format_double(r.std_acc) << '\t' << format_double(r.mean_auc) << '\n';
        return Ok;
    }
    const auto rows = read_eval_csv(p);
    std::vector<std::string> order;
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& r : rows) {
        if (!acc.count(r.method)) order.push_back(r.method);
        acc[r.method].first += r.accuracy;
        acc[r.method].second += 1;
    }
    for (const auto& m : order)
        std::cout << m << "\tmean acc=" << format_double(acc[m].first / acc[m].second) << " over " << acc[m].second
                  << " folds\n";
    return Ok;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("hyperalign");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* lvl = std::getenv("HYPERALIGN_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Supervised and classical hyperalignment of multi-subject response matrices"};
    app.require_subcommand(1);

    Common gen_c, align_c, eval_c, sweep_c;
    SyntheticSpec gen_spec;
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
    add_common(gen, gen_c, false, false);
    gen->add_option("--subjects", gen_spec.num_subjects);
    gen->add_option("--classes", gen_spec.num_classes);
    gen->add_option("--t-per-class", gen_spec.t_per_class);
    gen->add_option("--voxels", gen_spec.v);
    gen->add_option("--sigma", gen_spec.noise_sigma);
    gen->add_flag("--shared-mixing", gen_spec.shared_mixing);

    std::vector<std::string> csvs;
    std::string labels, import_out;
    auto* imp = app.add_subcommand("import-csv", "convert per-subject CSV matrices into a dataset");
    imp->add_option("files", csvs, "one CSV per subject (T rows, V columns)")->required()->check(CLI::ExistingFile);
    imp->add_option("--labels", labels, "labels file, one integer per line")->check(CLI::ExistingFile);
    imp->add_option("--out", import_out, "output directory")->required();

    auto* align = app.add_subcommand("align", "fit alignment maps on a whole dataset");
    add_common(align, align_c, false, false);
    auto* eval = app.add_subcommand("evaluate", "leave-one-subject-out classification");
    add_common(eval, eval_c, true, true);
    auto* sweep = app.add_subcommand("sweep", "evaluate over TR and voxel grids");
    add_common(sweep, sweep_c, true, true);

    std::string report_path;
    auto* report = app.add_subcommand("report", "summarize an eval JSON, evaluate.csv or sweep.csv");
    report->add_option("path", report_path)->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*gen) {
            const bool any_flag = gen->count("--subjects") + gen->count("--classes") + gen->count("--t-per-class") +
                                      gen->count("--voxels") + gen->count("--sigma") + gen->count("--shared-mixing") >
                                  0;
            std::optional<SyntheticSpec> flags;
            if (any_flag) {
                // Flags refine the generator settings from the file rather than replace them.
                SyntheticSpec base = gen_c.config.empty()
                                         ? SyntheticSpec{}
                                         : load_experiment_config(gen_c.config).synthetic.value_or(SyntheticSpec{});
                if (gen->count("--subjects")) base.num_subjects = gen_spec.num_subjects;
                if (gen->count("--classes")) base.num_classes = gen_spec.num_classes;
                if (gen->count("--t-per-class")) base.t_per_class = gen_spec.t_per_class;
                if (gen->count("--voxels")) base.v = gen_spec.v;
                if (gen->count("--sigma")) base.noise_sigma = gen_spec.noise_sigma;
                if (gen->count("--shared-mixing")) base.shared_mixing = gen_spec.shared_mixing;
                flags = base;
            }
            return cmd_generate(gen_c, flags);
        }
        if (*imp) return cmd_import(csvs, labels, import_out);
        if (*align) return cmd_align(align_c);
        if (*eval) return cmd_evaluate(eval_c);
        if (*sweep) return cmd_sweep(sweep_c);
        if (*report) return cmd_report(report_path);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return e.kind() == ErrorKind::IoError ? BadIo : BadConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Failure;
    }
    return Failure;
}
