#include "hyperalign/trainer.hpp"

#include <algorithm>
#include <optional>

#include <spdlog/spdlog.h>

#include "hyperalign/error.hpp"

namespace hyperalign {

const char* to_string(SweepStrategy s) noexcept { return s == SweepStrategy::Template ? "template" : "pairwise"; }

SweepStrategy parse_sweep_strategy(const std::string& name) {
    if (name == "template") return SweepStrategy::Template;
    if (name == "pairwise") return SweepStrategy::Pairwise;
    throw InvalidInput("unknown sweep strategy '" + name + "'");
}

Matrix compute_template(const std::vector<SubjectData>& subjects, const std::vector<AlignmentMap>& maps) {
    if (subjects.empty() || subjects.size() != maps.size())
        throw InvalidInput("compute_template: need one map per subject");
    Matrix g = Matrix::Zero(subjects.front().t(), maps.front().r.cols());
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        if (maps[i].r.rows() != subjects[i].v() || maps[i].r.cols() != g.cols())
            throw InvalidInput("compute_template: map shape does not match subject '" + subjects[i].id() + "'");
        g += subjects[i].x() * maps[i].r;
    }
    return g / static_cast<double>(subjects.size());
}

namespace {

AlignmentMap identity_map(Eigen::Index v, int k, const SolverConfig& cfg) {
    AlignmentMap m;
    m.r = Matrix::Identity(v, k);
    m.k = k;
    m.ridge = cfg.ridge;
    m.floor = cfg.floor;
    m.canonical_corrs = Vector::Zero(k);
    m.regular.assign(static_cast<std::size_t>(k), true);
    return m;
}

Matrix leave_one_out_mean(const std::vector<Matrix>& mapped, std::size_t skip) {
    Matrix sum = Matrix::Zero(mapped.front().rows(), mapped.front().cols());
    for (std::size_t l = 0; l < mapped.size(); ++l)
        if (l != skip) sum += mapped[l];
    return sum / static_cast<double>(mapped.size() - 1);
}

}  // namespace

TrainResult fit(const LabeledDataset& train, const SolverConfig& cfg, const SweepConfig& sweep_cfg) {
    const auto& subjects = train.subjects();
    const std::size_t s = subjects.size();
    if (s < 2) throw InvalidInput("fit: need at least 2 training subjects");
    if (sweep_cfg.max_sweeps < 0) throw InvalidInput("fit: max_sweeps must be >= 0");
    if (!(sweep_cfg.tol >= 0.0)) throw InvalidInput("fit: tol must be >= 0");
    for (const auto& sub : subjects)
        if (!sub.standardized()) throw InvalidInput("fit: subject '" + sub.id() + "' is not standardized");

    std::optional<NeighborhoodMatrix> alpha;
    if (cfg.mode == SolverMode::Ldha) {
        if (!train.labels()) throw InvalidInput("fit: ldha mode needs training labels");
        alpha = build_alpha(*train.labels());
    }
    const NeighborhoodMatrix* alpha_ptr = alpha ? &*alpha : nullptr;

    const Eigen::Index limit = std::min(train.t(), train.v());
    const int k = cfg.k ? *cfg.k : static_cast<int>(limit);
    if (k < 1 || k > limit)
        throw InvalidInput("fit: k = " + std::to_string(k) + " outside [1, min(T, V) = " + std::to_string(limit) + "]");
    SolverConfig pair_cfg = cfg;
    pair_cfg.k = k;

    TrainResult result;
    result.maps.reserve(s);
    std::vector<Matrix> mapped;
    mapped.reserve(s);
    for (const auto& sub : subjects) {
        result.maps.push_back(identity_map(train.v(), k, cfg));
        mapped.push_back(sub.x() * result.maps.back().r);
    }

    auto relative_change = [](const Matrix& now, const Matrix& before) {
        const double scale = now.norm();
        const double diff = (now - before).norm();
        return scale > 0.0 ? diff / scale : diff;
    };

    for (int sweep = 1; sweep <= sweep_cfg.max_sweeps; ++sweep) {
        double worst = 0.0;
        const std::vector<Matrix> previous = mapped;

        if (sweep_cfg.strategy == SweepStrategy::Template) {
            for (std::size_t i = 0; i < s; ++i) {
                const Matrix reference = standardize_columns(leave_one_out_mean(mapped, i));
                result.maps[i] = solve_against(subjects[i].x(), reference, alpha_ptr, pair_cfg);
                mapped[i] = subjects[i].x() * result.maps[i].r;
            }
        } else {
            for (std::size_t i = 0; i < s; ++i) {
                for (std::size_t l = i + 1; l < s; ++l) {
                    auto sol = solve_pair(subjects[i].x(), subjects[l].x(), alpha_ptr, pair_cfg);
                    result.maps[i] = std::move(sol.left);
                    result.maps[l] = std::move(sol.right);
                }
            }
            for (std::size_t i = 0; i < s; ++i) mapped[i] = subjects[i].x() * result.maps[i].r;
        }

        for (std::size_t i = 0; i < s; ++i) worst = std::max(worst, relative_change(mapped[i], previous[i]));
        result.sweeps = sweep;
        result.objective_trace.push_back(mean_pairwise_isc(mapped));
        spdlog::debug("fit: sweep {} mean ISC {:.6f} max change {:.3e}", sweep, result.objective_trace.back(), worst);
        if (worst <= sweep_cfg.tol) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged && sweep_cfg.max_sweeps > 0)
        spdlog::info("fit: not converged after {} sweeps", sweep_cfg.max_sweeps);

    result.tmpl.g = compute_template(subjects, result.maps);
    result.tmpl.k = k;
    result.tmpl.solver_mode = cfg.mode;
    result.tmpl.ridge = cfg.ridge;
    result.tmpl.floor = cfg.floor;
    for (const auto& sub : subjects) result.tmpl.source_subject_ids.push_back(sub.id());
    return result;
}

AlignmentMap align_test_subject(const SubjectData& xhat, const Template& tmpl) {
    if (!xhat.standardized()) throw InvalidInput("align_test_subject: subject '" + xhat.id() + "' is not standardized");
    if (xhat.t() != tmpl.g.rows())
        throw InvalidInput("align_test_subject: subject has T = " + std::to_string(xhat.t()) + ", template has T = " +
                           std::to_string(tmpl.g.rows()));
    SolverConfig cfg;
    cfg.mode = SolverMode::Classical;
    cfg.ridge = tmpl.ridge;
    cfg.floor = tmpl.floor;
    return solve_against(xhat.x(), standardize_columns(tmpl.g), nullptr, cfg);
}

}  // namespace hyperalign
