#include "hyperalign/numkern.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "hyperalign/error.hpp"

namespace hyperalign {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidInput: return "InvalidInput";
        case ErrorKind::NumericalError: return "NumericalError";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Error";
}

namespace numkern {

namespace {

// Index of the first entry with the largest magnitude.
Eigen::Index argmax_abs(const Eigen::Ref<const Vector>& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (std::abs(v(i)) > std::abs(v(best))) best = i;
    return best;
}

}  // namespace

SymMatrix::SymMatrix(const Matrix& a) {
    if (a.rows() != a.cols()) throw InvalidInput("SymMatrix: matrix is not square");
    if (!all_finite(a)) throw InvalidInput("SymMatrix: non-finite entries");
    m_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index dim) { return SymMatrix(Matrix::Identity(dim, dim)); }

Matrix SvdResult::reconstruct() const { return u * s.asDiagonal() * vt; }

bool all_finite(const Matrix& a) noexcept { return a.allFinite(); }

EigResult sym_eig(const SymMatrix& a) {
    if (!all_finite(a.matrix())) throw InvalidInput("sym_eig: non-finite entries");
    const Eigen::Index n = a.dim();
    EigResult out;
    if (n == 0) return out;

    Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix());
    if (solver.info() != Eigen::Success) throw NumericalError("sym_eig: eigensolver did not converge");

    // Eigen returns ascending order.
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = solver.eigenvalues()(n - 1 - i);
        out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
        if (out.vectors(argmax_abs(out.vectors.col(i)), i) < 0.0) out.vectors.col(i) *= -1.0;
    }
    return out;
}

Eigen::Index count_floored(const Vector& eigenvalues, double ridge, double floor) noexcept {
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
        if (eigenvalues(i) + ridge < floor) ++n;
    return n;
}

SymMatrix inv_sqrt_psd(const SymMatrix& a, double ridge, double floor) {
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InvalidInput("inv_sqrt_psd: ridge must be >= 0");
    if (!(floor > 0.0) || !std::isfinite(floor)) throw InvalidInput("inv_sqrt_psd: floor must be > 0");
    const EigResult eig = sym_eig(a);
    Vector g(eig.values.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = 1.0 / std::sqrt(std::max(eig.values(i) + ridge, floor));
    return SymMatrix(eig.vectors * g.asDiagonal() * eig.vectors.transpose());
}

SvdResult svd(const Matrix& a) {
    if (!all_finite(a)) throw InvalidInput("svd: non-finite entries");
    SvdResult out;
    const Eigen::Index r = std::min(a.rows(), a.cols());
    if (r == 0) {
        out.u.resize(a.rows(), 0);
        out.vt.resize(0, a.cols());
        return out;
    }

    Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success) throw NumericalError("svd: decomposition failed");

    out.u = dec.matrixU();
    out.s = dec.singularValues();
    Matrix v = dec.matrixV();

    // BDCSVD already sorts, but guarantee non-increasing order for ties
    // produced by the divide-and-conquer merge.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index x, Eigen::Index y) { return out.s(x) > out.s(y); });
    Matrix u_sorted(out.u.rows(), r), v_sorted(v.rows(), r);
    Vector s_sorted(r);
    for (Eigen::Index i = 0; i < r; ++i) {
        const Eigen::Index j = order[static_cast<std::size_t>(i)];
        u_sorted.col(i) = out.u.col(j);
        v_sorted.col(i) = v.col(j);
        s_sorted(i) = std::max(out.s(j), 0.0);
    }

    for (Eigen::Index i = 0; i < r; ++i) {
        if (u_sorted(argmax_abs(u_sorted.col(i)), i) < 0.0) {
            u_sorted.col(i) *= -1.0;
            v_sorted.col(i) *= -1.0;
        }
    }
    out.u = std::move(u_sorted);
    out.s = std::move(s_sorted);
    out.vt = v_sorted.transpose();
    return out;
}

}  // namespace numkern
}  // namespace hyperalign
