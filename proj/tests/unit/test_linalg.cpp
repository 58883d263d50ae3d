#include "koopa/error.hpp"
#include "koopa/linalg.hpp"
#include "koopa/matrix.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

using namespace koopa;
using koopa::testing::gaussian_matrix;
using koopa::testing::random_low_rank;
using koopa::testing::random_matrix;
using koopa::testing::reference_matmul;
using koopa::testing::reference_transpose;

namespace {

Matrix householder_orthogonal(Rng& rng, std::size_t n) {
    Matrix q = Matrix::identity(n);
    for (std::size_t r = 0; r < 3; ++r) {
        Vector v(n);
        double vv = 0.0;
        for (double& x : v) {
            x = rng.normal();
            vv += x * x;
        }
        Matrix h = Matrix::identity(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                h(i, j) -= 2.0 * v[i] * v[j] / vv;
            }
        }
        q = reference_matmul(q, h);
    }
    return q;
}

double laplace_determinant(const Matrix& a) {
    const std::size_t n = a.rows();
    if (n == 1) {
        return a(0, 0);
    }
    double det = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        Matrix minor(n - 1, n - 1);
        for (std::size_t i = 1; i < n; ++i) {
            std::size_t cc = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != c) {
                    minor(i - 1, cc++) = a(i, j);
                }
            }
        }
        det += (c % 2 == 0 ? 1.0 : -1.0) * a(0, c) * laplace_determinant(minor);
    }
    return det;
}

// Greedy matching of two eigenvalue lists; returns the worst distance.
double spectrum_distance(std::vector<std::complex<double>> got, std::vector<std::complex<double>> want) {
    double worst = 0.0;
    for (const auto& w : want) {
        auto it = std::min_element(got.begin(), got.end(),
                                   [&](const auto& x, const auto& y) { return std::abs(x - w) < std::abs(y - w); });
        worst = std::max(worst, std::abs(*it - w));
        got.erase(it);
    }
    return worst;
}

} // namespace

TEST(Matrix, ProductsMatchTripleLoop) {
    Rng rng(11);
    for (auto [m, k, n] : {std::tuple{1, 1, 1}, {3, 5, 2}, {7, 4, 9}, {16, 16, 16}, {33, 17, 5}}) {
        const Matrix a = random_matrix(rng, m, k);
        const Matrix b = random_matrix(rng, k, n);
        EXPECT_LT(max_abs_diff(matmul(a, b), reference_matmul(a, b)), 1e-13);
        EXPECT_LT(max_abs_diff(matmul_tn(reference_transpose(a), b), reference_matmul(a, b)), 1e-13);
        EXPECT_LT(max_abs_diff(matmul_nt(a, reference_transpose(b)), reference_matmul(a, b)), 1e-13);
        EXPECT_EQ(transpose(a), reference_transpose(a));
        const Vector x = random_matrix(rng, k, 1).col(0);
        EXPECT_LT(max_abs_diff(matvec(a, x), reference_matmul(a, Matrix::column(x)).col(0)), 1e-13);
        const Vector y = random_matrix(rng, m, 1).col(0);
        EXPECT_LT(max_abs_diff(matvec_t(a, y), reference_matmul(reference_transpose(a), Matrix::column(y)).col(0)),
                  1e-13);
    }
}

TEST(Matrix, ProductPropagatesNaN) {
    Matrix a = Matrix::identity(3);
    Matrix b(3, 3, 0.0);
    b(1, 1) = std::numeric_limits<double>::quiet_NaN();
    a(0, 0) = 0.0;
    EXPECT_FALSE(matmul(a, b).all_finite());
}

TEST(Matrix, ShapeErrors) {
    EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
    EXPECT_THROW(add(Matrix(2, 3), Matrix(3, 2)), ShapeError);
    EXPECT_THROW(Matrix(2, 2, std::vector<double>(3)), ShapeError);
}

TEST(Matrix, AddOuterAndSlices) {
    Matrix a(2, 3, 1.0);
    const Vector u{1.0, 2.0};
    const Vector v{3.0, 4.0, 5.0};
    add_outer(a, u, v, 2.0);
    EXPECT_DOUBLE_EQ(a(1, 2), 1.0 + 2.0 * 2.0 * 5.0);
    EXPECT_DOUBLE_EQ(a(0, 0), 7.0);
    const Matrix s = a.slice_cols(1, 3);
    EXPECT_EQ(s.cols(), 2u);
    EXPECT_DOUBLE_EQ(s(1, 1), a(1, 2));
    EXPECT_EQ(a.slice_rows(1, 2).row(0)[0], a(1, 0));
}

TEST(Svd, ReconstructsAndIsOrthogonal) {
    Rng rng(3);
    for (auto [m, n] : {std::pair{1, 1}, {5, 3}, {3, 5}, {8, 8}, {40, 6}, {6, 40}, {20, 20}}) {
        const Matrix a = gaussian_matrix(rng, m, n);
        const SvdResult f = svd(a);
        const std::size_t k = std::min(m, n);
        ASSERT_EQ(f.u.cols(), k);
        ASSERT_EQ(f.vt.rows(), k);
        Matrix us = f.u;
        for (std::size_t i = 0; i < us.rows(); ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                us(i, j) *= f.singular_values[j];
            }
        }
        EXPECT_LT(max_abs_diff(reference_matmul(us, f.vt), a), 1e-11);
        EXPECT_LT(max_abs_diff(reference_matmul(reference_transpose(f.u), f.u), Matrix::identity(k)), 1e-11);
        EXPECT_LT(max_abs_diff(reference_matmul(f.vt, reference_transpose(f.vt)), Matrix::identity(k)), 1e-11);
        EXPECT_TRUE(std::is_sorted(f.singular_values.rbegin(), f.singular_values.rend()));
    }
}

TEST(Svd, KnownSingularValues) {
    Rng rng(5);
    const Matrix u = householder_orthogonal(rng, 5);
    const Matrix v = householder_orthogonal(rng, 5);
    const Vector s{9.0, 4.0, 2.5, 1e-3, 0.0};
    const Matrix a = reference_matmul(reference_matmul(u, Matrix::diagonal(s)), reference_transpose(v));
    const SvdResult f = svd(a);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_NEAR(f.singular_values[i], s[i], 1e-12);
    }
}

TEST(Svd, RejectsNonFinite) {
    Matrix a(2, 2, 1.0);
    a(0, 1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(svd(a), NumericError);
}

TEST(Pinv, PenroseConditionsIncludingRankDeficient) {
    Rng rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t m = 1 + rng() % 12;
        const std::size_t n = 1 + rng() % 12;
        const std::size_t rank = 1 + rng() % std::min(m, n);
        const Matrix a = random_low_rank(rng, m, n, rank);
        const Matrix p = pinv(a);
        const Matrix ap = reference_matmul(a, p);
        const Matrix pa = reference_matmul(p, a);
        EXPECT_LT(max_abs_diff(reference_matmul(ap, a), a), 1e-9);
        EXPECT_LT(max_abs_diff(reference_matmul(pa, p), p), 1e-9);
        EXPECT_LT(max_abs_diff(ap, reference_transpose(ap)), 1e-9);
        EXPECT_LT(max_abs_diff(pa, reference_transpose(pa)), 1e-9);
    }
}

TEST(Pinv, InverseOfSquareAndZeroMatrix) {
    const Matrix a = Matrix::from_rows({{4.0, 7.0}, {2.0, 6.0}});
    const Matrix inv = Matrix::from_rows({{0.6, -0.7}, {-0.2, 0.4}});
    EXPECT_LT(max_abs_diff(pinv(a), inv), 1e-14);
    EXPECT_EQ(pinv(Matrix(3, 2, 0.0)), Matrix(2, 3, 0.0));
    EXPECT_THROW(pinv(a, 0.0), ArgumentError);
}

TEST(Eigenvalues, RotationBlocksInRandomBasis) {
    Rng rng(23);
    for (std::size_t n : {2u, 3u, 6u, 9u, 16u}) {
        std::vector<std::complex<double>> want;
        Matrix block(n, n, 0.0);
        std::size_t i = 0;
        while (i + 1 < n) {
            const double r = rng.uniform(0.2, 1.5);
            const double th = rng.uniform(0.1, 3.0);
            block(i, i) = r * std::cos(th);
            block(i, i + 1) = -r * std::sin(th);
            block(i + 1, i) = r * std::sin(th);
            block(i + 1, i + 1) = r * std::cos(th);
            want.emplace_back(r * std::cos(th), r * std::sin(th));
            want.emplace_back(r * std::cos(th), -r * std::sin(th));
            i += 2;
        }
        if (i < n) {
            block(i, i) = -0.7;
            want.emplace_back(-0.7, 0.0);
        }
        const Matrix q = householder_orthogonal(rng, n);
        const Matrix a = reference_matmul(reference_matmul(q, block), reference_transpose(q));
        const ComplexSpectrum spec = eigenvalues(a);
        ASSERT_EQ(spec.eigenvalues.size(), n);
        EXPECT_LT(spectrum_distance(spec.eigenvalues, want), 1e-9) << "n=" << n;
    }
}

TEST(Eigenvalues, CompanionMatrixRoots) {
    // Roots 1, 2, 3, 4: x^4 - 10x^3 + 35x^2 - 50x + 24.
    const Matrix c = Matrix::from_rows({{10.0, -35.0, 50.0, -24.0},
                                        {1.0, 0.0, 0.0, 0.0},
                                        {0.0, 1.0, 0.0, 0.0},
                                        {0.0, 0.0, 1.0, 0.0}});
    const auto spec = eigenvalues(c);
    EXPECT_LT(spectrum_distance(spec.eigenvalues, {{1, 0}, {2, 0}, {3, 0}, {4, 0}}), 1e-9);
}

TEST(Eigenvalues, TraceAndDeterminantOfRandomMatrix) {
    Rng rng(29);
    const Matrix a = gaussian_matrix(rng, 7, 7);
    const auto spec = eigenvalues(a);
    std::complex<double> sum = 0.0;
    std::complex<double> prod = 1.0;
    for (const auto& l : spec.eigenvalues) {
        sum += l;
        prod *= l;
    }
    double trace = 0.0;
    for (std::size_t i = 0; i < 7; ++i) {
        trace += a(i, i);
    }
    EXPECT_NEAR(sum.real(), trace, 1e-9);
    EXPECT_NEAR(sum.imag(), 0.0, 1e-9);
    EXPECT_NEAR(prod.real(), laplace_determinant(a), 1e-8);
}

TEST(Eigenvalues, Errors) {
    EXPECT_THROW(eigenvalues(Matrix(2, 3)), ShapeError);
    Matrix a = Matrix::identity(2);
    a(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(eigenvalues(a), NumericError);
}

TEST(Qr, ThinFactorisation) {
    Rng rng(31);
    const Matrix a = gaussian_matrix(rng, 9, 4);
    const QrResult f = qr_thin(a);
    EXPECT_LT(max_abs_diff(reference_matmul(f.q, f.r), a), 1e-12);
    EXPECT_LT(max_abs_diff(reference_matmul(reference_transpose(f.q), f.q), Matrix::identity(4)), 1e-12);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            EXPECT_EQ(f.r(i, j), 0.0);
        }
    }
    EXPECT_THROW(qr_thin(Matrix(2, 3)), ShapeError);
}

TEST(SolveSpd, SolvesAndRejectsIndefinite) {
    Rng rng(37);
    const Matrix b = gaussian_matrix(rng, 6, 6);
    Matrix a = reference_matmul(reference_transpose(b), b);
    for (std::size_t i = 0; i < 6; ++i) {
        a(i, i) += 0.5;
    }
    const Matrix x = gaussian_matrix(rng, 6, 2);
    const Matrix rhs = reference_matmul(a, x);
    EXPECT_LT(max_abs_diff(solve_spd(a, rhs), x), 1e-10);
    EXPECT_THROW(solve_spd(Matrix::from_rows({{1.0, 2.0}, {2.0, 1.0}}), Matrix(2, 1, 1.0)), NumericError);
}

TEST(Determinant, MatchesLaplaceExpansion) {
    Rng rng(41);
    for (std::size_t n = 1; n <= 6; ++n) {
        const Matrix a = gaussian_matrix(rng, n, n);
        EXPECT_NEAR(determinant(a), laplace_determinant(a), 1e-10 * std::max(1.0, std::abs(laplace_determinant(a))));
    }
    EXPECT_THROW(determinant(Matrix(2, 3)), ShapeError);
}
