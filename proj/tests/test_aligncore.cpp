#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hyperalign/aligncore.hpp"
#include "hyperalign/error.hpp"
#include "oracles.hpp"

using namespace hyperalign;

namespace {

std::vector<int> random_labels(int t, int classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> d(0, classes - 1);
    std::vector<int> y(static_cast<std::size_t>(t));
    for (auto& v : y) v = d(rng);
    // every class must appear
    for (int c = 0; c < classes && c < t; ++c) y[static_cast<std::size_t>(c)] = c;
    return y;
}

NeighborhoodMatrix alpha_of(const std::vector<int>& y) { return build_alpha(LabelVector(y)); }

Matrix std_random(Eigen::Index t, Eigen::Index v, std::uint64_t seed) {
    return standardize_columns(oracle::random_matrix(t, v, seed));
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// Columns of a equal columns of b up to a per-column sign.
double signed_column_gap(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c)
        worst = std::max(worst, std::min(max_abs(a.col(c) - b.col(c)), max_abs(a.col(c) + b.col(c))));
    return worst;
}

}  // namespace

TEST_CASE("neighborhood matrix examples") {
    const auto two = alpha_of({0, 0, 1, 1});
    Matrix expect(4, 4);
    expect << 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1;
    CHECK(two.alpha == expect);
    CHECK(two.eta == 8);

    const auto same = alpha_of({0, 0, 0});
    CHECK(same.alpha == Matrix::Ones(3, 3));
    CHECK(same.eta == 9);

    const auto distinct = alpha_of({0, 1, 2, 3, 4});
    CHECK(distinct.alpha == Matrix::Identity(5, 5));
    CHECK(distinct.eta == 5);
}

TEST_CASE("neighborhood matrix invariants") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto y = random_labels(9, 3, seed);
        const auto a = alpha_of(y);
        CHECK(a.alpha == a.alpha.transpose());
        CHECK(a.alpha.diagonal() == Vector::Ones(9));
        CHECK(a.eta == static_cast<long long>(a.alpha.sum()));
        CHECK(a.alpha == oracle::alpha_from_labels(y));
    }
}

TEST_CASE("two-point example of the covariance sums") {
    Matrix xi(2, 1), xj(2, 1);
    xi << 1, 2;
    xj << 3, 4;
    const auto pc = pair_covariances(xi, xj, alpha_of({0, 0}));
    CHECK(pc.w(0, 0) == doctest::Approx(42.0).epsilon(1e-15));
    CHECK(pc.b(0, 0) == 0.0);
    const auto [w, b] = oracle::literal_w_b(xi, xj, Matrix::Ones(2, 2));
    CHECK(w(0, 0) == 42.0);
    CHECK(b(0, 0) == 0.0);
}

TEST_CASE("matrix form matches the quadruple loop") {
    std::mt19937_64 rng(5);
    for (int inst = 0; inst < 50; ++inst) {
        const int t = 2 + static_cast<int>(rng() % 4), v = 1 + static_cast<int>(rng() % 4);
        const Matrix xi = oracle::random_matrix(t, v, rng()), xj = oracle::random_matrix(t, v, rng());
        const auto y = random_labels(t, 1 + static_cast<int>(rng() % static_cast<unsigned>(t)), rng());
        const auto a = alpha_of(y);
        const auto pc = pair_covariances(xi, xj, a);
        const auto [w, b] = oracle::literal_w_b(xi, xj, a.alpha);
        CHECK(max_abs(pc.w - w) <= 1e-9);
        CHECK(max_abs(pc.b - b) <= 1e-9);
        const double weight = static_cast<double>(a.eta) / (t * t);
        CHECK(pc.between_weight == weight);
        CHECK(max_abs(pc.c_tilde - (w - weight * b)) <= 1e-9);
    }
}

TEST_CASE("identity neighborhoods pair same time points only") {
    const Matrix xi = oracle::random_matrix(5, 3, 1), xj = oracle::random_matrix(5, 3, 2);
    const auto pc = pair_covariances(xi, xj, alpha_of({0, 1, 2, 3, 4}));
    const Matrix f = xi.transpose() * xj;
    CHECK(max_abs(pc.w - (f + f.transpose())) < 1e-12);
    CHECK(max_abs(pc.w - oracle::literal_w_b(xi, xj, Matrix::Identity(5, 5)).first) < 1e-12);
}

TEST_CASE("covariance symmetry and partition identity") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Matrix xi = oracle::random_matrix(7, 4, seed), xj = oracle::random_matrix(7, 4, seed + 100);
        const auto a = alpha_of(random_labels(7, 3, seed));
        const auto pc = pair_covariances(xi, xj, a);
        CHECK(max_abs(pc.w - pc.w.transpose()) <= 1e-10);
        CHECK(max_abs(pc.b - pc.b.transpose()) <= 1e-10);
        CHECK(max_abs(pc.c_tilde - pc.c_tilde.transpose()) <= 1e-10);
        const Matrix f = xi.transpose() * Matrix::Ones(7, 7) * xj;
        CHECK(max_abs(pc.w + pc.b - (f + f.transpose())) <= 1e-9);
        CHECK(max_abs(pc.c_tilde - (pc.w - pc.between_weight * pc.b)) <= 1e-12);
        const Matrix d = discriminant_cross(xi, xj, a, pc.between_weight);
        CHECK(max_abs(d + d.transpose() - pc.c_tilde) <= 1e-10);
    }
}

TEST_CASE("covariance shape checks") {
    const auto a = alpha_of({0, 1, 0});
    CHECK_THROWS_AS(pair_covariances(Matrix::Ones(3, 2), Matrix::Ones(3, 3), a), InvalidInput);
    CHECK_THROWS_AS(pair_covariances(Matrix::Ones(4, 2), Matrix::Ones(4, 2), a), InvalidInput);
    const SubjectData raw("r", oracle::random_matrix(3, 2, 1), false);
    CHECK_THROWS_AS(pair_covariances(raw, raw, a), InvalidInput);
}

TEST_CASE("isc examples") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Matrix x = std_random(8, 5, seed);
        CHECK(isc(x, x) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(isc(x, Matrix(-x)) + 1.0) <= 1e-9);
        const Matrix y = std_random(8, 5, seed + 50);
        CHECK(isc(x, y) == isc(y, x));
        CHECK(isc(x, y) == doctest::Approx(oracle::isc(x, y)).epsilon(1e-12));
        CHECK(std::abs(isc(x, y)) <= 1.0 + 1e-12);
    }
    const Matrix e = standardize_columns(Matrix::Identity(2, 2));
    Matrix swapped = e;
    swapped.row(0) = e.row(1);
    swapped.row(1) = e.row(0);
    CHECK(isc(e, swapped) == doctest::Approx(oracle::isc(e, swapped)));
    CHECK(isc(e, swapped) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(isc(Matrix::Ones(3, 2), Matrix::Ones(3, 3)), InvalidInput);
    const SubjectData raw("r", oracle::random_matrix(3, 2, 1), false);
    CHECK_THROWS_AS(isc(raw, raw), InvalidInput);
}

TEST_CASE("self alignment in classical mode") {
    SolverConfig cfg;
    cfg.mode = SolverMode::Classical;
    cfg.ridge = 0.0;
    const Matrix x = std_random(10, 4, 3);
    const auto sol = solve_pair(x, x, nullptr, cfg);
    REQUIRE(sol.left.k == 4);
    for (Eigen::Index c = 0; c < 4; ++c) CHECK(sol.left.canonical_corrs(c) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(max_abs(x * sol.left.r - x * sol.right.r) <= 1e-6);
    CHECK(mapped_isc(x * sol.left.r, x * sol.right.r) >= isc(x, x) - 1e-12);
}

TEST_CASE("orthogonal mixing is undone") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Matrix xi = std_random(12, 6, seed);
        Eigen::HouseholderQR<Matrix> qr(oracle::random_matrix(6, 6, seed + 1000));
        const Matrix q = qr.householderQ() * Matrix::Identity(6, 6);
        const Matrix xj = xi * q;
        SolverConfig cfg;
        cfg.mode = SolverMode::Classical;
        const auto sol = solve_pair(xi, xj, nullptr, cfg);
        CHECK(mapped_isc(xi * sol.left.r, xj * sol.right.r) == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("ldha with identity neighborhoods and no between term is classical") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Matrix xi = std_random(9, 5, seed), xj = std_random(9, 5, seed + 77);
        const auto a = alpha_of({0, 1, 2, 3, 4, 5, 6, 7, 8});
        SolverConfig classical;
        classical.mode = SolverMode::Classical;
        SolverConfig ldha;
        ldha.between_weight = 0.0;
        const auto c = solve_pair(xi, xj, nullptr, classical);
        const auto l = solve_pair(xi, xj, &a, ldha);
        CHECK(signed_column_gap(c.left.r, l.left.r) <= 1e-9);
        CHECK(signed_column_gap(c.right.r, l.right.r) <= 1e-9);
        CHECK(std::abs(mapped_isc(xi * c.left.r, xj * c.right.r) - mapped_isc(xi * l.left.r, xj * l.right.r)) <= 1e-6);
    }
}

TEST_CASE("whitening constraint holds on regular components") {
    for (double ridge : {0.0, 0.01, 1.0})
        for (Eigen::Index v : {3, 8})
            for (std::uint64_t seed = 1; seed <= 5; ++seed) {
                const Matrix xi = std_random(6, v, seed), xj = std_random(6, v, seed + 9);
                const auto a = alpha_of({0, 0, 1, 1, 2, 2});
                for (SolverMode mode : {SolverMode::Classical, SolverMode::Ldha}) {
                    SolverConfig cfg;
                    cfg.mode = mode;
                    cfg.ridge = ridge;
                    cfg.k = static_cast<int>(std::min<Eigen::Index>(6, v));
                    const auto sol = solve_pair(xi, xj, &a, cfg);
                    for (const auto* side : {&sol.left, &sol.right}) {
                        const Matrix& x = side == &sol.left ? xi : xj;
                        const Matrix c = x.transpose() * x + ridge * Matrix::Identity(v, v);
                        const Matrix g = side->r.transpose() * c * side->r;
                        for (int p = 0; p < side->k; ++p)
                            for (int q = 0; q < side->k; ++q)
                                if (side->regular[static_cast<std::size_t>(p)] && side->regular[static_cast<std::size_t>(q)])
                                    CHECK(std::abs(g(p, q) - (p == q ? 1.0 : 0.0)) <= 1e-5);
                        if (ridge > 0.0)
                            for (bool r : side->regular) CHECK(r);
                        for (Eigen::Index i = 1; i < side->canonical_corrs.size(); ++i)
                            CHECK(side->canonical_corrs(i) <= side->canonical_corrs(i - 1));
                    }
                }
            }
}

TEST_CASE("generalized eigenproblem residual") {
    for (Eigen::Index t : {3, 6})
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const Eigen::Index v = t == 3 ? 2 : 4;
            const Matrix xi = std_random(t, v, seed), xj = std_random(t, v, seed + 31);
            std::vector<int> y(static_cast<std::size_t>(t));
            for (Eigen::Index i = 0; i < t; ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(i % 2);
            const auto a = alpha_of(y);
            for (bool symmetric : {false, true}) {
                SolverConfig cfg;
                cfg.symmetrize_cross = symmetric;
                cfg.k = static_cast<int>(v);
                const auto sol = solve_pair(xi, xj, &a, cfg);
                const double weight = static_cast<double>(a.eta) / static_cast<double>(t * t);
                const Matrix d = discriminant_cross(xi, xj, a, weight);
                const Matrix ct = symmetric ? Matrix(d + d.transpose()) : d;
                const Matrix ci = xi.transpose() * xi + cfg.ridge * Matrix::Identity(v, v);
                const Matrix cj = xj.transpose() * xj + cfg.ridge * Matrix::Identity(v, v);
                const Matrix lhs = ct * cj.inverse() * ct.transpose() * sol.left.r;
                const Vector l2 = sol.left.canonical_corrs.array().square();
                const Matrix rhs = ci * sol.left.r * l2.asDiagonal();
                CHECK((lhs - rhs).norm() <= 1e-6 * ci.norm());
            }
        }
}

TEST_CASE("classical correlations are bounded") {
    SolverConfig cfg;
    cfg.mode = SolverMode::Classical;
    cfg.ridge = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto sol = solve_pair(std_random(10, 4, seed), std_random(10, 4, seed + 3), nullptr, cfg);
        CHECK(sol.left.canonical_corrs.minCoeff() >= 0.0);
        CHECK(sol.left.canonical_corrs.maxCoeff() <= 1.0 + 1e-8);
    }
}

TEST_CASE("scaling before standardization does not change the solution") {
    const Matrix raw_i = oracle::random_matrix(8, 4, 1), raw_j = oracle::random_matrix(8, 4, 2);
    const auto a = alpha_of({0, 0, 1, 1, 2, 2, 3, 3});
    SolverConfig cfg;
    const auto base = solve_pair(standardize("i", raw_i), standardize("j", raw_j), &a, cfg);
    const auto scaled = solve_pair(standardize("i", Matrix(3.7 * raw_i)), standardize("j", Matrix(0.2 * raw_j)), &a, cfg);
    CHECK(max_abs(base.left.r - scaled.left.r) <= 1e-9);
    CHECK(max_abs(base.right.r - scaled.right.r) <= 1e-9);
}

TEST_CASE("solver errors") {
    const Matrix x = std_random(5, 3, 1);
    SolverConfig cfg;
    cfg.mode = SolverMode::Classical;
    cfg.k = 4;
    CHECK_THROWS_AS(solve_pair(x, x, nullptr, cfg), InvalidInput);
    cfg.k = 0;
    CHECK_THROWS_AS(solve_pair(x, x, nullptr, cfg), InvalidInput);
    cfg.k.reset();
    cfg.ridge = -1.0;
    CHECK_THROWS_AS(solve_pair(x, x, nullptr, cfg), InvalidInput);
    SolverConfig ldha;
    CHECK_THROWS_AS(solve_pair(x, x, nullptr, ldha), InvalidInput);
    CHECK_THROWS_AS(solve_pair(x, std_random(6, 3, 2), nullptr, cfg), InvalidInput);
    const SubjectData raw("r", oracle::random_matrix(5, 3, 1), false);
    CHECK_THROWS_AS(solve_pair(raw, raw, nullptr, cfg), InvalidInput);
    SolverConfig huge;
    huge.mode = SolverMode::Classical;
    huge.ridge = 0.0;
    huge.floor = 1e-320;
    // a null direction whitened by the tiny floor blows the cross term up
    Matrix big = 1e100 * oracle::random_matrix(5, 3, 3);
    big.col(2) = big.col(1);
    CHECK_THROWS_AS(solve_pair(big, big, nullptr, huge), NumericalError);
}

TEST_CASE("one-sided solve maps onto the whitened reference") {
    const Matrix x = std_random(10, 6, 4);
    Eigen::HouseholderQR<Matrix> qr(oracle::random_matrix(6, 6, 5));
    const Matrix q = qr.householderQ() * Matrix::Identity(6, 6);
    const Matrix reference = (x * q).leftCols(3);
    SolverConfig cfg;
    cfg.mode = SolverMode::Classical;
    cfg.ridge = 0.0;
    const auto map = solve_against(x, reference, nullptr, cfg);
    CHECK(map.k == 3);
    CHECK(map.r.rows() == 6);
    const Matrix whitened =
        reference * numkern::inv_sqrt_psd(numkern::SymMatrix(reference.transpose() * reference), 0.0, 1e-10).matrix();
    CHECK(max_abs(x * map.r - whitened) <= 1e-8);
    CHECK_THROWS_AS(solve_against(std_random(4, 6, 1), std_random(4, 5, 2), nullptr, cfg), InvalidInput);
}
