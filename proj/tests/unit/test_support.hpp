#pragma once

#include "koopa/matrix.hpp"
#include "koopa/rng.hpp"

#include <cstddef>

namespace koopa::testing {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) {
        v = rng.uniform(lo, hi);
    }
    return m;
}

inline Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& v : m.data()) {
        v = rng.normal();
    }
    return m;
}

// Triple-loop product used as an oracle for the library kernels.
inline Matrix reference_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            long double s = 0.0L;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                s += static_cast<long double>(a(i, k)) * b(k, j);
            }
            c(i, j) = static_cast<double>(s);
        }
    }
    return c;
}

inline Matrix reference_transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

// Random matrix of the requested rank built as a product of two factors.
inline Matrix random_low_rank(Rng& rng, std::size_t rows, std::size_t cols, std::size_t rank) {
    return reference_matmul(gaussian_matrix(rng, rows, rank), gaussian_matrix(rng, rank, cols));
}

} // namespace koopa::testing
