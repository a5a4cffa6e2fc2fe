#include "hyperalign/aligncore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hyperalign/error.hpp"

namespace hyperalign {

NeighborhoodMatrix build_alpha(const LabelVector& labels) {
    const auto t = static_cast<Eigen::Index>(labels.size());
    NeighborhoodMatrix out;
    out.alpha = Matrix::Zero(t, t);
    for (Eigen::Index m = 0; m < t; ++m)
        for (Eigen::Index n = 0; n < t; ++n)
            if (labels[static_cast<std::size_t>(m)] == labels[static_cast<std::size_t>(n)]) out.alpha(m, n) = 1.0;
    for (int c : labels.class_counts()) out.eta += static_cast<long long>(c) * c;
    return out;
}

namespace {

void check_pair_shapes(const Matrix& xi, const Matrix& xj, const NeighborhoodMatrix* alpha, const char* who) {
    if (xi.rows() != xj.rows())
        throw InvalidInput(std::string(who) + ": T mismatch (" + std::to_string(xi.rows()) + " vs " +
                           std::to_string(xj.rows()) + ")");
    if (alpha && alpha->t() != xi.rows())
        throw InvalidInput(std::string(who) + ": alpha is " + std::to_string(alpha->t()) + "x" +
                           std::to_string(alpha->t()) + " but T = " + std::to_string(xi.rows()));
}

void require_standardized(const SubjectData& s, const char* who) {
    if (!s.standardized()) throw InvalidInput(std::string(who) + ": subject '" + s.id() + "' is not standardized");
}

double default_between_weight(const NeighborhoodMatrix& alpha) {
    const double t = static_cast<double>(alpha.t());
    return static_cast<double>(alpha.eta) / (t * t);
}

// M = Xiᵀ α Xj and N = colsum(Xi) colsum(Xj)ᵀ − M.
std::pair<Matrix, Matrix> within_between_halves(const Matrix& xi, const Matrix& xj, const NeighborhoodMatrix& alpha) {
    Matrix m = xi.transpose() * (alpha.alpha * xj);
    Matrix n = xi.colwise().sum().transpose() * xj.colwise().sum() - m;
    return {std::move(m), std::move(n)};
}

}  // namespace

PairCovariances pair_covariances(const Matrix& xi, const Matrix& xj, const NeighborhoodMatrix& alpha) {
    check_pair_shapes(xi, xj, &alpha, "pair_covariances");
    if (xi.cols() != xj.cols()) throw InvalidInput("pair_covariances: V mismatch");
    auto [m, n] = within_between_halves(xi, xj, alpha);

    PairCovariances out;
    out.between_weight = default_between_weight(alpha);
    out.w = m + m.transpose();
    out.b = n + n.transpose();
    out.c_tilde = out.w - out.between_weight * out.b;
    return out;
}

PairCovariances pair_covariances(const SubjectData& xi, const SubjectData& xj, const NeighborhoodMatrix& alpha) {
    require_standardized(xi, "pair_covariances");
    require_standardized(xj, "pair_covariances");
    return pair_covariances(xi.x(), xj.x(), alpha);
}

Matrix discriminant_cross(const Matrix& xi, const Matrix& xj, const NeighborhoodMatrix& alpha, double weight) {
    check_pair_shapes(xi, xj, &alpha, "discriminant_cross");
    auto [m, n] = within_between_halves(xi, xj, alpha);
    return m - weight * n;
}

double isc(const Matrix& xi, const Matrix& xj) {
    if (xi.rows() != xj.rows() || xi.cols() != xj.cols()) throw InvalidInput("isc: shape mismatch");
    if (xi.cols() == 0) throw InvalidInput("isc: no columns");
    return xi.cwiseProduct(xj).sum() / static_cast<double>(xi.cols());
}

double isc(const SubjectData& xi, const SubjectData& xj) {
    require_standardized(xi, "isc");
    require_standardized(xj, "isc");
    return isc(xi.x(), xj.x());
}

double mapped_isc(const Matrix& xi_mapped, const Matrix& xj_mapped) {
    return isc(standardize_columns(xi_mapped), standardize_columns(xj_mapped));
}

double mean_pairwise_isc(const std::vector<Matrix>& mapped) {
    if (mapped.size() < 2) throw InvalidInput("mean_pairwise_isc: need at least two data sets");
    std::vector<Matrix> z;
    z.reserve(mapped.size());
    for (const auto& m : mapped) z.push_back(standardize_columns(m));
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < z.size(); ++a)
        for (std::size_t b = a + 1; b < z.size(); ++b, ++pairs) sum += isc(z[a], z[b]);
    return sum / static_cast<double>(pairs);
}

const char* to_string(SolverMode mode) noexcept { return mode == SolverMode::Classical ? "classical" : "ldha"; }

SolverMode parse_solver_mode(const std::string& name) {
    if (name == "classical") return SolverMode::Classical;
    if (name == "ldha") return SolverMode::Ldha;
    throw InvalidInput("unknown solver mode '" + name + "'");
}

namespace {

struct Whitener {
    Matrix inv_sqrt;
    Matrix floored_basis;  // eigenvectors whose λ + ridge fell below floor
};

Whitener make_whitener(const Matrix& x, double ridge, double floor) {
    const numkern::SymMatrix c(x.transpose() * x);
    const auto eig = numkern::sym_eig(c);
    const Eigen::Index n = eig.values.size();
    const Eigen::Index floored = numkern::count_floored(eig.values, ridge, floor);

    Whitener w;
    Vector g(n);
    for (Eigen::Index i = 0; i < n; ++i) g(i) = 1.0 / std::sqrt(std::max(eig.values(i) + ridge, floor));
    w.inv_sqrt = numkern::SymMatrix(eig.vectors * g.asDiagonal() * eig.vectors.transpose()).matrix();
    // Descending order puts the floored eigenvalues last.
    w.floored_basis = eig.vectors.rightCols(floored);
    return w;
}

bool is_regular(const Whitener& w, const Eigen::Ref<const Vector>& direction) {
    if (w.floored_basis.cols() == 0) return true;
    return (w.floored_basis.transpose() * direction).norm() <= 1e-6;
}

void validate_cfg(const SolverConfig& cfg) {
    if (!(cfg.ridge >= 0.0) || !std::isfinite(cfg.ridge)) throw InvalidInput("solver: ridge must be >= 0");
    if (!(cfg.floor > 0.0) || !std::isfinite(cfg.floor)) throw InvalidInput("solver: floor must be > 0");
    if (cfg.k && *cfg.k < 1) throw InvalidInput("solver: k must be >= 1");
}

// Cross term, whitening and SVD shared by the two-sided and anchored solves.
struct WhitenedSvd {
    Whitener wi, wj;
    numkern::SvdResult svd;
};

WhitenedSvd whitened_svd(const Matrix& xi, const Matrix& xj, const NeighborhoodMatrix* alpha,
                         const SolverConfig& cfg) {
    validate_cfg(cfg);
    check_pair_shapes(xi, xj, alpha, "solve_pair");
    if (!xi.allFinite() || !xj.allFinite()) throw InvalidInput("solve_pair: non-finite input");

    Matrix cross;
    if (cfg.mode == SolverMode::Classical) {
        cross = xi.transpose() * xj;
    } else {
        if (!alpha) throw InvalidInput("solve_pair: ldha mode requires a neighborhood matrix");
        const double weight = cfg.between_weight.value_or(default_between_weight(*alpha));
        if (cfg.symmetrize_cross) {
            if (xi.cols() != xj.cols()) throw InvalidInput("solve_pair: symmetric cross term needs equal widths");
            const Matrix d = discriminant_cross(xi, xj, *alpha, weight);
            cross = d + d.transpose();
        } else {
            cross = discriminant_cross(xi, xj, *alpha, weight);
        }
    }

    WhitenedSvd out;
    out.wi = make_whitener(xi, cfg.ridge, cfg.floor);
    out.wj = make_whitener(xj, cfg.ridge, cfg.floor);
    const Matrix h = out.wi.inv_sqrt * cross * out.wj.inv_sqrt;
    if (!h.allFinite()) throw NumericalError("solve_pair: non-finite whitened cross covariance");
    out.svd = numkern::svd(h);
    return out;
}

AlignmentMap make_map(Matrix r, const Vector& corrs, std::vector<bool> regular, const SolverConfig& cfg) {
    AlignmentMap map;
    map.k = static_cast<int>(r.cols());
    map.r = std::move(r);
    map.ridge = cfg.ridge;
    map.floor = cfg.floor;
    map.canonical_corrs = corrs;
    map.regular = std::move(regular);
    return map;
}

}  // namespace

PairSolution solve_pair(const Matrix& xi, const Matrix& xj, const NeighborhoodMatrix* alpha,
                        const SolverConfig& cfg) {
    const Eigen::Index limit = std::min({xi.rows(), xi.cols(), xj.cols()});
    const Eigen::Index k = cfg.k ? *cfg.k : limit;
    if (k > limit)
        throw InvalidInput("solve_pair: k = " + std::to_string(k) + " exceeds min(T, V) = " + std::to_string(limit));

    const WhitenedSvd ws = whitened_svd(xi, xj, alpha, cfg);
    const Matrix p = ws.svd.u.leftCols(k);
    const Matrix q = ws.svd.vt.topRows(k).transpose();
    const Vector corrs = ws.svd.s.head(k);

    std::vector<bool> reg_i(static_cast<std::size_t>(k)), reg_j(static_cast<std::size_t>(k));
    for (Eigen::Index c = 0; c < k; ++c) {
        reg_i[static_cast<std::size_t>(c)] = is_regular(ws.wi, p.col(c));
        reg_j[static_cast<std::size_t>(c)] = is_regular(ws.wj, q.col(c));
    }

    PairSolution out;
    out.left = make_map(ws.wi.inv_sqrt * p, corrs, std::move(reg_i), cfg);
    out.right = make_map(ws.wj.inv_sqrt * q, corrs, std::move(reg_j), cfg);
    return out;
}

PairSolution solve_pair(const SubjectData& xi, const SubjectData& xj, const NeighborhoodMatrix* alpha,
                        const SolverConfig& cfg) {
    require_standardized(xi, "solve_pair");
    require_standardized(xj, "solve_pair");
    return solve_pair(xi.x(), xj.x(), alpha, cfg);
}

AlignmentMap solve_against(const Matrix& x, const Matrix& reference, const NeighborhoodMatrix* alpha,
                           const SolverConfig& cfg) {
    const Eigen::Index k = reference.cols();
    if (k < 1) throw InvalidInput("solve_against: empty reference");
    if (k > std::min(x.rows(), x.cols()))
        throw InvalidInput("solve_against: reference width " + std::to_string(k) + " exceeds min(T, V) = " +
                           std::to_string(std::min(x.rows(), x.cols())));

    const WhitenedSvd ws = whitened_svd(x, reference, alpha, cfg);
    const Matrix p = ws.svd.u.leftCols(k);
    const Matrix q = ws.svd.vt.topRows(k).transpose();

    bool all_regular = true;
    for (Eigen::Index c = 0; c < k; ++c) all_regular = all_regular && is_regular(ws.wi, p.col(c));

    return make_map(ws.wi.inv_sqrt * p * q.transpose(), ws.svd.s.head(k),
                    std::vector<bool>(static_cast<std::size_t>(k), all_regular), cfg);
}

}  // namespace hyperalign
