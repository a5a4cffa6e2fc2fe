#pragma once

#include <string>
#include <vector>

#include "hyperalign/aligncore.hpp"
#include "hyperalign/datamodel.hpp"

namespace hyperalign {

enum class SweepStrategy {
    /// Each subject is re-solved against the standardized leave-one-out mean
    /// of the other subjects' mapped data (Gauss-Seidel, subject-index order).
    Template,
    /// Literal pairwise reading: for each i and each l > i solve (i, l); the
    /// most recent solution wins for both subjects.
    Pairwise,
};

const char* to_string(SweepStrategy s) noexcept;
SweepStrategy parse_sweep_strategy(const std::string& name);

struct SweepConfig {
    int max_sweeps = 20;
    double tol = 1e-4;
    SweepStrategy strategy = SweepStrategy::Template;
};

/// Shared space G (T × k), the mean of the mapped training subjects. Stored
/// un-standardized. Carries the regularization used so test subjects can be
/// aligned with the same whitening.
struct Template {
    Matrix g;
    int k = 0;
    std::vector<std::string> source_subject_ids;
    SolverMode solver_mode = SolverMode::Ldha;
    double ridge = 0.0;
    double floor = 1e-10;
};

struct TrainResult {
    std::vector<AlignmentMap> maps;  // one per training subject, dataset order
    Template tmpl;
    int sweeps = 0;
    std::vector<double> objective_trace;  // mean pairwise mapped ISC after each sweep
    bool converged = false;
};

/// Mean over subjects of X_i R_i.
Matrix compute_template(const std::vector<SubjectData>& subjects, const std::vector<AlignmentMap>& maps);

/// Iterative multi-subject alignment. Maps start at the first k columns of
/// the identity. Stops when every subject's mapped data moves by at most
/// tol·‖X_i R_i‖_F in one sweep, or after max_sweeps (converged = false).
TrainResult fit(const LabeledDataset& train, const SolverConfig& cfg, const SweepConfig& sweep_cfg);

/// Classical-mode alignment of an unseen subject to a template. Takes no
/// labels by construction.
AlignmentMap align_test_subject(const SubjectData& xhat, const Template& tmpl);

}  // namespace hyperalign
