#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hyperalign/datamodel.hpp"
#include "hyperalign/experiment.hpp"
#include "hyperalign/serialize.hpp"

using namespace hyperalign;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path root = fs::temp_directory_path() / "hyperalign_test_cli";

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(HYPERALIGN_CLI) + " " + args + " > " +
                            (root / "stdout.txt").string() + " 2> " + (root / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = root / name;
    std::ofstream os(p);
    os << text;
    return p;
}

const char* kSmall =
    R"({"synthetic":{"num_subjects":4,"t_per_class":5,"num_classes":4,"v":30,"noise_sigma":1.0},"seed":3,"solver":{"k":3}})";

struct Setup {
    Setup() {
        fs::remove_all(root);
        fs::create_directories(root);
    }
};
const Setup setup_once;

}  // namespace

TEST_CASE("generate is byte-identical for a fixed seed") {
    REQUIRE(run("generate --subjects 3 --voxels 20 --t-per-class 3 --classes 2 --sigma 0.5 --seed 4 --out " +
                (root / "gen_a").string()) == 0);
    REQUIRE(run("generate --subjects 3 --voxels 20 --t-per-class 3 --classes 2 --sigma 0.5 --seed 4 --out " +
                (root / "gen_b").string()) == 0);
    CHECK(slurp(root / "stdout.txt").find("3 subjects") != std::string::npos);
    for (const char* f : {"manifest.json", "labels.txt", "sub-01.bin", "sub-03.bin"})
        CHECK(slurp(root / "gen_a" / f) == slurp(root / "gen_b" / f));
    const auto ds = load_dataset(root / "gen_a" / "manifest.json");
    CHECK(ds.size() == 3);
    CHECK(ds.t() == 6);
    CHECK(ds.v() == 20);
}

TEST_CASE("generate flags refine the config") {
    const auto cfg = write_config("gen.json", kSmall);
    REQUIRE(run("generate --config " + cfg.string() + " --subjects 2 --out " + (root / "gen_c").string()) == 0);
    const auto ds = load_dataset(root / "gen_c" / "manifest.json");
    CHECK(ds.size() == 2);
    CHECK(ds.v() == 30);
}

TEST_CASE("invalid generator settings exit nonzero with a message") {
    CHECK(run("generate --t-per-class 20 --voxels 10 --out " + (root / "bad").string()) != 0);
    CHECK(slurp(root / "stderr.txt").find("exceeds") != std::string::npos);
    CHECK(run("generate --bogus") != 0);
    CHECK(run("") != 0);
}

TEST_CASE("CSV import equals a direct load") {
    REQUIRE(run("generate --subjects 3 --voxels 8 --t-per-class 2 --classes 3 --sigma 1 --seed 1 --out " +
                (root / "direct").string()) == 0);
    const auto direct = load_dataset(root / "direct" / "manifest.json");
    std::string files;
    for (const auto& s : direct.subjects()) {
        const fs::path p = root / (s.id() + ".csv");
        std::ofstream os(p);
        for (Eigen::Index r = 0; r < s.t(); ++r)
            for (Eigen::Index c = 0; c < s.v(); ++c) os << format_double(s.x()(r, c)) << (c + 1 < s.v() ? ',' : '\n');
        files += " " + p.string();
    }
    REQUIRE(run("import-csv" + files + " --labels " + (root / "direct" / "labels.txt").string() + " --out " +
                (root / "imported").string()) == 0);
    const auto imported = load_dataset(root / "imported" / "manifest.json");
    REQUIRE(imported.size() == direct.size());
    for (std::size_t i = 0; i < direct.size(); ++i) {
        CHECK(imported.subjects()[i].id() == direct.subjects()[i].id());
        CHECK((imported.subjects()[i].x() - direct.subjects()[i].x()).cwiseAbs().maxCoeff() < 1e-14);
    }
    CHECK(imported.labels()->y() == direct.labels()->y());
}

TEST_CASE("align writes a sidecar that only differs in its timestamp") {
    const auto cfg = write_config("align.json", kSmall);
    REQUIRE(run("align --config " + cfg.string() + " --out " + (root / "align_a").string()) == 0);
    CHECK(slurp(root / "stdout.txt").find("sweep 1 isc=") != std::string::npos);
    REQUIRE(run("align --config " + cfg.string() + " --out " + (root / "align_b").string()) == 0);
    auto a = json::parse(slurp(root / "align_a" / "train.json"));
    auto b = json::parse(slurp(root / "align_b" / "train.json"));
    CHECK(a.contains("created"));
    a.erase("created");
    b.erase("created");
    CHECK(a == b);
    CHECK(slurp(root / "align_a" / "template.bin") == slurp(root / "align_b" / "template.bin"));
    const auto loaded = load_train_result(root / "align_a");
    CHECK(loaded.tmpl.k == 3);
    CHECK(loaded.maps.size() == 4);
}

TEST_CASE("align with zero sweeps") {
    const auto cfg = write_config(
        "zero.json",
        R"({"synthetic":{"num_subjects":3,"t_per_class":3,"num_classes":2,"v":10},"solver":{"k":2},"sweep":{"max_sweeps":0}})");
    REQUIRE(run("align --config " + cfg.string() + " --out " + (root / "zero").string()) == 0);
    CHECK(json::parse(slurp(root / "zero" / "train.json"))["sweeps"] == 0);
}

TEST_CASE("align on a dataset with a missing labels file") {
    REQUIRE(run("generate --subjects 3 --voxels 10 --t-per-class 2 --classes 2 --out " + (root / "nolabels").string()) ==
            0);
    fs::remove(root / "nolabels" / "labels.txt");
    CHECK(run("align --dataset " + (root / "nolabels" / "manifest.json").string() + " --out " +
              (root / "nolabels_out").string()) == 2);
    CHECK(slurp(root / "stderr.txt").find("SchemaError") != std::string::npos);
}

TEST_CASE("evaluate on shared mixing needs no alignment") {
    const auto cfg = write_config(
        "shared.json",
        R"({"synthetic":{"num_subjects":3,"t_per_class":4,"num_classes":3,"v":20,"shared_mixing":true},"methods":["identity"]})");
    REQUIRE(run("evaluate --config " + cfg.string() + " --out " + (root / "shared").string()) == 0);
    const auto j = json::parse(slurp(root / "shared" / "eval_identity.json"));
    CHECK(j["accuracy"].get<double>() == doctest::Approx(100.0));
}

TEST_CASE("evaluate rejects an empty method list") {
    const auto cfg = write_config("empty.json", R"({"synthetic":{"num_subjects":3},"methods":[]})");
    CHECK(run("evaluate --config " + cfg.string() + " --out " + (root / "empty").string()) == 2);
    CHECK(run("evaluate --config " + cfg.string() + " --method svm --out " + (root / "empty").string()) == 2);
}

TEST_CASE("evaluate output is deterministic and matches the reference run") {
    const auto cfg = write_config("eval.json", kSmall);
    REQUIRE(run("evaluate --config " + cfg.string() + " --out " + (root / "eval_a").string()) == 0);
    REQUIRE(run("evaluate --config " + cfg.string() + " --workers 3 --out " + (root / "eval_b").string(),
                "HYPERALIGN_LOG=debug") == 0);
    CHECK(slurp(root / "eval_a" / "evaluate.csv") == slurp(root / "eval_b" / "evaluate.csv"));
    auto a = json::parse(slurp(root / "eval_a" / "eval_ldha.json"));
    auto b = json::parse(slurp(root / "eval_b" / "eval_ldha.json"));
    a.erase("created");
    b.erase("created");
    b["config"]["workers"] = a["config"]["workers"];
    CHECK(a == b);

    const auto rows = read_eval_csv(root / "eval_a" / "evaluate.csv");
    const double acc[12] = {0, 35, 10, 15, 90, 90, 70, 95, 100, 100, 100, 100};
    const double auc[12] = {28, 50.333333333333336, 37.333333333333336, 51, 96.33333333333333, 94.66666666666667,
                            90.66666666666667, 97.66666666666666, 100, 100, 100, 100};
    REQUIRE(rows.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(rows[i].method == (i < 4 ? "identity" : i < 8 ? "classical" : "ldha"));
        CHECK(rows[i].accuracy == doctest::Approx(acc[i]).epsilon(1e-9));
        CHECK(rows[i].auc == doctest::Approx(auc[i]).epsilon(1e-9));
    }
}

TEST_CASE("method flag overrides the config") {
    const auto cfg = write_config("eval2.json", kSmall);
    REQUIRE(run("evaluate --config " + cfg.string() + " --method ldha,identity --seed 5 --out " +
                (root / "eval_c").string()) == 0);
    const auto rows = read_eval_csv(root / "eval_c" / "evaluate.csv");
    REQUIRE(rows.size() == 8);
    CHECK(rows[0].method == "ldha");
    CHECK(rows[4].method == "identity");
    CHECK_FALSE(fs::exists(root / "eval_c" / "eval_classical.json"));
}

TEST_CASE("sweep and report") {
    const auto cfg = write_config(
        "sweep.json",
        R"({"synthetic":{"num_subjects":4,"t_per_class":5,"num_classes":4,"v":30,"noise_sigma":1.0},"seed":3,"solver":{"k":3},"grids":{"trs":[8,20],"voxels":[10,30]},"workers":2})");
    REQUIRE(run("sweep --config " + cfg.string() + " --out " + (root / "sweep").string()) == 0);
    const auto rows = read_sweep_csv(root / "sweep" / "sweep.csv");
    REQUIRE(rows.size() == 12);
    CHECK(rows[4].mean_acc == doctest::Approx(75.0));
    CHECK(run("report " + (root / "sweep" / "sweep.csv").string()) == 0);
    CHECK(slurp(root / "stdout.txt").find("classical") != std::string::npos);
    CHECK(run("report " + (root / "eval_a" / "evaluate.csv").string()) == 0);
    CHECK(run("report " + (root / "eval_a" / "eval_ldha.json").string()) == 0);
    CHECK(slurp(root / "stdout.txt").find("sub-04") != std::string::npos);

    const auto bad = write_config(
        "badgrid.json", R"({"synthetic":{"num_subjects":3,"v":60},"grids":{"trs":[8],"voxels":[61]}})");
    CHECK(run("sweep --config " + bad.string() + " --out " + (root / "badgrid").string()) == 2);
    const auto typo = write_config("typo.json", R"({"sweeps":{}})");
    CHECK(run("sweep --config " + typo.string()) == 2);
}
