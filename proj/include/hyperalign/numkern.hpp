#pragma once

// Dense kernels used by the alignment solvers. Everything is double precision
// and pure: no shared state, safe to call from several threads.

#include <Eigen/Dense>

namespace hyperalign {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace numkern {

/// Square symmetric matrix. Construction averages A and Aᵀ so the stored
/// entries are exactly symmetric.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(const Matrix& a);

    static SymMatrix identity(Eigen::Index dim);

    Eigen::Index dim() const noexcept { return m_.rows(); }
    const Matrix& matrix() const noexcept { return m_; }
    double operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

private:
    Matrix m_;
};

struct EigResult {
    Vector values;   // descending
    Matrix vectors;  // orthonormal columns, vectors.col(i) pairs with values(i)
};

struct SvdResult {
    Matrix u;   // rows x r
    Vector s;   // non-negative, non-increasing
    Matrix vt;  // r x cols

    Matrix reconstruct() const;
};

bool all_finite(const Matrix& a) noexcept;

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
/// Each eigenvector is signed so its largest-magnitude entry is positive.
EigResult sym_eig(const SymMatrix& a);

/// M = V diag(max(λ + ridge, floor)^{-1/2}) Vᵀ.
///
/// With ridge = 0 and a well-conditioned A this is the usual inverse square
/// root. The ridge shifts the whole spectrum (large ridge pushes whitening
/// towards a scaled identity, the Procrustes end), the floor keeps the
/// remaining null directions bounded.
SymMatrix inv_sqrt_psd(const SymMatrix& a, double ridge, double floor);

/// Number of eigenvalues for which λ + ridge falls below floor.
Eigen::Index count_floored(const Vector& eigenvalues, double ridge, double floor) noexcept;

/// Thin SVD. Left singular vectors are signed so that their largest-magnitude
/// entry is positive; the matching right vectors are flipped with them.
SvdResult svd(const Matrix& a);

}  // namespace numkern
}  // namespace hyperalign
