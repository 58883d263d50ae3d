#pragma once

#include "koopa/matrix.hpp"

#include <complex>
#include <cstddef>
#include <vector>

namespace koopa {

/// Thin singular value decomposition a = u * diag(singular_values) * vt with
/// k = min(rows, cols). Singular values are non-increasing.
struct SvdResult {
    Matrix u;
    Vector singular_values;
    Matrix vt;
};

struct ComplexSpectrum {
    std::vector<std::complex<double>> eigenvalues;
};

inline constexpr std::size_t kSvdMaxSweeps = 10000;
inline constexpr double kDefaultPinvRcond = 1e-12;

/// One-sided Jacobi SVD (QR-preconditioned for strongly rectangular input).
/// Throws ConvergenceError when the sweep cap is hit and NumericError on
/// non-finite input.
SvdResult svd(const Matrix& a, std::size_t max_sweeps = kSvdMaxSweeps);

/// Moore-Penrose pseudoinverse. Singular values below rcond * s_max are
/// treated as zero.
Matrix pinv(const Matrix& a, double rcond = kDefaultPinvRcond);

/// Full spectrum of a real square matrix (balancing, Hessenberg reduction,
/// Francis double-shift QR). Ordering is unspecified.
ComplexSpectrum eigenvalues(const Matrix& a);

/// Householder QR with thin factors: a (m x n, m >= n) = q (m x n) * r (n x n).
struct QrResult {
    Matrix q;
    Matrix r;
};
QrResult qr_thin(const Matrix& a);

/// Solves a * x = b for symmetric positive definite a (Cholesky). b may have
/// several columns. Throws NumericError if a is not positive definite.
Matrix solve_spd(const Matrix& a, const Matrix& b);

double determinant(const Matrix& a);

} // namespace koopa
