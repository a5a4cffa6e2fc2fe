#pragma once

#include <optional>
#include <vector>

#include "hyperalign/datamodel.hpp"
#include "hyperalign/numkern.hpp"

namespace hyperalign {

/// Same-class indicator over time points: alpha(m, n) = 1 iff y_m == y_n.
/// The diagonal is 1, so distinct labels give the identity (same-time-point
/// pairing of classical CCA). eta counts every 1-entry including the diagonal.
struct NeighborhoodMatrix {
    Matrix alpha;
    long long eta = 0;

    Eigen::Index t() const noexcept { return alpha.rows(); }
};

NeighborhoodMatrix build_alpha(const LabelVector& labels);

/// Within/between-class cross covariances of a subject pair, in the symmetric
/// two-term form:
///   w = M + Mᵀ,  M = Xiᵀ α Xj
///   b = N + Nᵀ,  N = Xiᵀ (J − α) Xj = colsum(Xi) colsum(Xj)ᵀ − M
///   c_tilde = w − (eta / T²) b
struct PairCovariances {
    Matrix w;
    Matrix b;
    Matrix c_tilde;
    double between_weight = 0.0;
};

/// Both inputs must be T×V with the same V. Unchecked matrix form, also used
/// on unstandardized data in tests.
PairCovariances pair_covariances(const Matrix& xi, const Matrix& xj, const NeighborhoodMatrix& alpha);
PairCovariances pair_covariances(const SubjectData& xi, const SubjectData& xj, const NeighborhoodMatrix& alpha);

/// Directional discriminant cross term M − weight·N (Vi × Vj). This is the
/// i→j half of c_tilde: c_tilde = D + Dᵀ when Vi == Vj.
Matrix discriminant_cross(const Matrix& xi, const Matrix& xj, const NeighborhoodMatrix& alpha, double weight);

/// (1/V) tr(Xiᵀ Xj).
double isc(const Matrix& xi, const Matrix& xj);
/// Requires equal shapes and standardized inputs (InvalidInput otherwise).
double isc(const SubjectData& xi, const SubjectData& xj);
/// ISC of two mapped data sets after column standardization of each.
double mapped_isc(const Matrix& xi_mapped, const Matrix& xj_mapped);
/// Mean ISC over all unordered pairs of mapped data sets (standardized first).
double mean_pairwise_isc(const std::vector<Matrix>& mapped);

enum class SolverMode { Classical, Ldha };

const char* to_string(SolverMode mode) noexcept;
SolverMode parse_solver_mode(const std::string& name);

struct SolverConfig {
    SolverMode mode = SolverMode::Ldha;
    double ridge = 0.01;
    double floor = 1e-10;
    /// Retained components; nullopt means min(T, V).
    std::optional<int> k;
    /// Weight of the between-class term; nullopt means eta / T².
    std::optional<double> between_weight;
    /// Use the literal symmetric c_tilde (W − w·B) instead of the directional
    /// cross term. Only defined when both sides have the same width.
    bool symmetrize_cross = false;
};

struct AlignmentMap {
    Matrix r;  // V × k
    int k = 0;
    double ridge = 0.0;
    double floor = 0.0;
    Vector canonical_corrs;  // non-increasing
    /// Components whose whitened direction avoids floored eigenvalues; only
    /// those satisfy Rᵀ(C + ridge·I)R = I.
    std::vector<bool> regular;
};

struct PairSolution {
    AlignmentMap left;
    AlignmentMap right;
};

/// Pairwise solve via whitened SVD:
///   H = (Ci + ridge)^{-1/2} Ccross (Cj + ridge)^{-1/2} = P Λ Qᵀ
///   Ri = (Ci + ridge)^{-1/2} P[:, :k],  Rj = (Cj + ridge)^{-1/2} Q[:, :k]
/// Classical mode uses Ccross = Xiᵀ Xj; ldha mode the discriminant cross term
/// and requires alpha. The two sides may have different widths.
PairSolution solve_pair(const Matrix& xi, const Matrix& xj, const NeighborhoodMatrix* alpha,
                        const SolverConfig& cfg);
PairSolution solve_pair(const SubjectData& xi, const SubjectData& xj, const NeighborhoodMatrix* alpha,
                        const SolverConfig& cfg);

/// One-sided solve of x against a fixed reference (T × K): the pairwise
/// solution's subject map rotated into the reference's coordinates,
/// R = (C + ridge)^{-1/2} P Qᵀ, so that x R approximates the whitened
/// reference. K must not exceed min(T, V). cfg.k is ignored.
AlignmentMap solve_against(const Matrix& x, const Matrix& reference, const NeighborhoodMatrix* alpha,
                           const SolverConfig& cfg);

}  // namespace hyperalign
