#include "koopa/linalg.hpp"

#include "koopa/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace koopa {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Columns of `u` (m x k) whose entry in `valid` is false are replaced by unit
// vectors orthogonal to every other column.
void complete_orthonormal_columns(Matrix& u, const std::vector<bool>& valid) {
    const std::size_t m = u.rows();
    const std::size_t k = u.cols();
    std::vector<bool> done = valid;
    for (std::size_t j = 0; j < k; ++j) {
        if (done[j]) {
            continue;
        }
        Vector best;
        double best_norm = -1.0;
        for (std::size_t e = 0; e < m; ++e) {
            Vector cand(m, 0.0);
            cand[e] = 1.0;
            // two passes of classical Gram-Schmidt
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t c = 0; c < k; ++c) {
                    if (!done[c]) {
                        continue;
                    }
                    double proj = 0.0;
                    for (std::size_t r = 0; r < m; ++r) {
                        proj += u(r, c) * cand[r];
                    }
                    for (std::size_t r = 0; r < m; ++r) {
                        cand[r] -= proj * u(r, c);
                    }
                }
            }
            const double nrm = norm2(cand);
            if (nrm > best_norm) {
                best_norm = nrm;
                best = std::move(cand);
            }
            if (best_norm > 0.7) {
                break;
            }
        }
        for (std::size_t r = 0; r < m; ++r) {
            u(r, j) = best[r] / best_norm;
        }
        done[j] = true;
    }
}

// One-sided Jacobi on the columns of `w`, stored transposed: w.row(j) is
// column j of the working matrix. v.row(j) is column j of V.
void jacobi_orthogonalize(Matrix& w, Matrix& v, std::size_t max_sweeps) {
    const std::size_t n = w.rows();
    const std::size_t len = w.cols();
    const double tol = 1e-15;
    std::size_t sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* wp = w.row(p).data();
                double* wq = w.row(q).data();
                double alpha = 0.0;
                double beta = 0.0;
                double gamma = 0.0;
                for (std::size_t i = 0; i < len; ++i) {
                    alpha += wp[i] * wp[i];
                    beta += wq[i] * wq[i];
                    gamma += wp[i] * wq[i];
                }
                if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) {
                    continue;
                }
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < len; ++i) {
                    const double a = wp[i];
                    const double b = wq[i];
                    wp[i] = c * a - s * b;
                    wq[i] = s * a + c * b;
                }
                double* vp = v.row(p).data();
                double* vq = v.row(q).data();
                for (std::size_t i = 0; i < v.cols(); ++i) {
                    const double a = vp[i];
                    const double b = vq[i];
                    vp[i] = c * a - s * b;
                    vq[i] = s * a + c * b;
                }
            }
        }
        if (!rotated) {
            return;
        }
    }
    throw ConvergenceError("svd: one-sided Jacobi did not converge", sweep);
}

// Tall case (m >= n).
SvdResult svd_tall(const Matrix& b, std::size_t max_sweeps) {
    const std::size_t m = b.rows();
    const std::size_t n = b.cols();

    Matrix q;
    Matrix w;
    const bool precondition = m > n;
    if (precondition) {
        QrResult f = qr_thin(b);
        q = std::move(f.q);
        w = transpose(f.r);
    } else {
        w = transpose(b);
    }
    Matrix v = Matrix::identity(n);
    jacobi_orthogonalize(w, v, max_sweeps);

    Vector sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        sigma[j] = norm2(w.row(j));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const std::size_t len = w.cols();
    Matrix uw(len, n);
    std::vector<bool> valid(n, true);
    SvdResult out;
    out.singular_values.resize(n);
    out.vt = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        const double s = sigma[j];
        out.singular_values[k] = s;
        if (s > std::numeric_limits<double>::min()) {
            for (std::size_t i = 0; i < len; ++i) {
                uw(i, k) = w(j, i) / s;
            }
        } else {
            out.singular_values[k] = 0.0;
            valid[k] = false;
        }
        std::copy(v.row(j).begin(), v.row(j).end(), out.vt.row(k).begin());
    }
    if (std::find(valid.begin(), valid.end(), false) != valid.end()) {
        complete_orthonormal_columns(uw, valid);
    }
    out.u = precondition ? matmul(q, uw) : std::move(uw);
    return out;
}

} // namespace

SvdResult svd(const Matrix& a, std::size_t max_sweeps) {
    if (!a.all_finite()) {
        throw NumericError("svd: input " + a.shape_string() + " has non-finite entries");
    }
    if (a.rows() == 0 || a.cols() == 0) {
        return {Matrix(a.rows(), 0), {}, Matrix(0, a.cols())};
    }
    if (a.rows() >= a.cols()) {
        return svd_tall(a, max_sweeps);
    }
    // a^T = U S V^T  =>  a = V S U^T
    SvdResult t = svd_tall(transpose(a), max_sweeps);
    SvdResult out;
    out.u = transpose(t.vt);
    out.singular_values = std::move(t.singular_values);
    out.vt = transpose(t.u);
    return out;
}

Matrix pinv(const Matrix& a, double rcond) {
    if (!(rcond > 0.0)) {
        throw ArgumentError("pinv: rcond must be positive");
    }
    const SvdResult f = svd(a);
    Matrix out(a.cols(), a.rows());
    if (f.singular_values.empty() || f.singular_values.front() == 0.0) {
        return out;
    }
    const double cutoff = rcond * f.singular_values.front();
    for (std::size_t k = 0; k < f.singular_values.size(); ++k) {
        const double s = f.singular_values[k];
        if (s <= cutoff) {
            break;
        }
        // out += v_k u_k^T / s
        for (std::size_t i = 0; i < out.rows(); ++i) {
            const double vi = f.vt(k, i) / s;
            double* row = out.row(i).data();
            for (std::size_t j = 0; j < out.cols(); ++j) {
                row[j] += vi * f.u(j, k);
            }
        }
    }
    return out;
}

QrResult qr_thin(const Matrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    if (m < n) {
        throw ShapeError("qr_thin: needs rows >= cols, got " + a.shape_string());
    }
    Matrix r = a;
    std::vector<Vector> reflectors(n);
    for (std::size_t k = 0; k < n; ++k) {
        Vector v(m - k);
        for (std::size_t i = k; i < m; ++i) {
            v[i - k] = r(i, k);
        }
        const double xnorm = norm2(v);
        if (xnorm == 0.0) {
            continue;
        }
        const double alpha = -std::copysign(xnorm, v[0]);
        v[0] -= alpha;
        const double vnorm = norm2(v);
        for (double& x : v) {
            x /= vnorm;
        }
        for (std::size_t j = k; j < n; ++j) {
            double proj = 0.0;
            for (std::size_t i = k; i < m; ++i) {
                proj += v[i - k] * r(i, j);
            }
            proj *= 2.0;
            for (std::size_t i = k; i < m; ++i) {
                r(i, j) -= proj * v[i - k];
            }
        }
        reflectors[k] = std::move(v);
    }
    Matrix q(m, n);
    for (std::size_t i = 0; i < n; ++i) {
        q(i, i) = 1.0;
    }
    for (std::size_t kk = n; kk-- > 0;) {
        const Vector& v = reflectors[kk];
        if (v.empty()) {
            continue;
        }
        for (std::size_t j = 0; j < n; ++j) {
            double proj = 0.0;
            for (std::size_t i = kk; i < m; ++i) {
                proj += v[i - kk] * q(i, j);
            }
            proj *= 2.0;
            for (std::size_t i = kk; i < m; ++i) {
                q(i, j) -= proj * v[i - kk];
            }
        }
    }
    Matrix rr(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            rr(i, j) = r(i, j);
        }
    }
    return {std::move(q), std::move(rr)};
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
    if (!a.is_square() || a.rows() != b.rows()) {
        throw ShapeError("solve_spd: " + a.shape_string() + " system with right-hand side " + b.shape_string());
    }
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) {
            d -= l(j, k) * l(j, k);
        }
        if (!(d > 0.0)) {
            throw NumericError("solve_spd: matrix is not positive definite (pivot " + std::to_string(j) + ")");
        }
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                s -= l(i, k) * l(j, k);
            }
            l(i, j) = s / l(j, j);
        }
    }
    Matrix x = b;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) {
                s -= l(i, k) * x(k, c);
            }
            x(i, c) = s / l(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x(i, c);
            for (std::size_t k = i + 1; k < n; ++k) {
                s -= l(k, i) * x(k, c);
            }
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

double determinant(const Matrix& a) {
    if (!a.is_square()) {
        throw ShapeError("determinant: matrix " + a.shape_string() + " is not square");
    }
    Matrix lu = a;
    const std::size_t n = a.rows();
    double det = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) {
                piv = i;
            }
        }
        if (lu(piv, k) == 0.0) {
            return 0.0;
        }
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(lu(k, j), lu(piv, j));
            }
            det = -det;
        }
        det *= lu(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = lu(i, k) / lu(k, k);
            for (std::size_t j = k; j < n; ++j) {
                lu(i, j) -= f * lu(k, j);
            }
        }
    }
    return det;
}

// ---------------------------------------------------------------------------
// Eigenvalues. The routines below index 1..n to stay close to the classic
// EISPACK formulation; row/column 0 of the work array is unused.
// ---------------------------------------------------------------------------
namespace {

using Work = std::vector<std::vector<double>>;

void balance(Work& a, int n) {
    constexpr double radix = 2.0;
    constexpr double sqrdx = radix * radix;
    bool done = false;
    while (!done) {
        done = true;
        for (int i = 1; i <= n; ++i) {
            double r = 0.0;
            double c = 0.0;
            for (int j = 1; j <= n; ++j) {
                if (j != i) {
                    c += std::abs(a[j][i]);
                    r += std::abs(a[i][j]);
                }
            }
            if (c != 0.0 && r != 0.0) {
                double g = r / radix;
                double f = 1.0;
                const double s = c + r;
                while (c < g) {
                    f *= radix;
                    c *= sqrdx;
                }
                g = r * radix;
                while (c > g) {
                    f /= radix;
                    c /= sqrdx;
                }
                if ((c + r) / f < 0.95 * s) {
                    done = false;
                    g = 1.0 / f;
                    for (int j = 1; j <= n; ++j) {
                        a[i][j] *= g;
                    }
                    for (int j = 1; j <= n; ++j) {
                        a[j][i] *= f;
                    }
                }
            }
        }
    }
}

// Reduction to upper Hessenberg form by stabilized elementary similarity
// transforms.
void to_hessenberg(Work& a, int n) {
    for (int m = 2; m < n; ++m) {
        double x = 0.0;
        int i = m;
        for (int j = m; j <= n; ++j) {
            if (std::abs(a[j][m - 1]) > std::abs(x)) {
                x = a[j][m - 1];
                i = j;
            }
        }
        if (i != m) {
            for (int j = m - 1; j <= n; ++j) {
                std::swap(a[i][j], a[m][j]);
            }
            for (int j = 1; j <= n; ++j) {
                std::swap(a[j][i], a[j][m]);
            }
        }
        if (x != 0.0) {
            for (i = m + 1; i <= n; ++i) {
                double y = a[i][m - 1];
                if (y != 0.0) {
                    y /= x;
                    a[i][m - 1] = y;
                    for (int j = m; j <= n; ++j) {
                        a[i][j] -= y * a[m][j];
                    }
                    for (int j = 1; j <= n; ++j) {
                        a[j][m] += y * a[j][i];
                    }
                }
            }
        }
    }
    for (int i = 3; i <= n; ++i) {
        for (int j = 1; j < i - 1; ++j) {
            a[i][j] = 0.0;
        }
    }
}

void hessenberg_qr(Work& a, int n, std::vector<double>& wr, std::vector<double>& wi) {
    constexpr int max_its = 60;
    double anorm = 0.0;
    for (int i = 1; i <= n; ++i) {
        for (int j = std::max(i - 1, 1); j <= n; ++j) {
            anorm += std::abs(a[i][j]);
        }
    }
    int nn = n;
    double t = 0.0;
    std::size_t total_its = 0;
    while (nn >= 1) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l >= 2; --l) {
                double s = std::abs(a[l - 1][l - 1]) + std::abs(a[l][l]);
                if (s == 0.0) {
                    s = anorm;
                }
                if (std::abs(a[l][l - 1]) <= kEps * s) {
                    a[l][l - 1] = 0.0;
                    break;
                }
            }
            double x = a[nn][nn];
            if (l == nn) {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                --nn;
            } else {
                double y = a[nn - 1][nn - 1];
                double w = a[nn][nn - 1] * a[nn - 1][nn];
                if (l == nn - 1) {
                    const double p = 0.5 * (y - x);
                    const double q = p * p + w;
                    double z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + std::copysign(z, p);
                        wr[nn - 1] = wr[nn] = x + z;
                        if (z != 0.0) {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                } else {
                    if (its == max_its) {
                        throw ConvergenceError("eigenvalues: Hessenberg QR did not converge", total_its);
                    }
                    if (its == 10 || its == 20 || its == 40) {
                        // exceptional shift
                        t += x;
                        for (int i = 1; i <= nn; ++i) {
                            a[i][i] -= x;
                        }
                        const double s = std::abs(a[nn][nn - 1]) + std::abs(a[nn - 1][nn - 2]);
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    ++total_its;
                    int m = nn - 2;
                    double p = 0.0;
                    double q = 0.0;
                    double r = 0.0;
                    double z = 0.0;
                    for (; m >= l; --m) {
                        z = a[m][m];
                        r = x - z;
                        double s = y - z;
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s;
                        r = a[m + 2][m + 1];
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) {
                            break;
                        }
                        const double u = std::abs(a[m][m - 1]) * (std::abs(q) + std::abs(r));
                        const double v = std::abs(p) * (std::abs(a[m - 1][m - 1]) + std::abs(z) + std::abs(a[m + 1][m + 1]));
                        if (u <= kEps * v) {
                            break;
                        }
                    }
                    for (int i = m + 2; i <= nn; ++i) {
                        a[i][i - 2] = 0.0;
                        if (i != m + 2) {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    for (int k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if (k != nn - 1) {
                                r = a[k + 2][k - 1];
                            }
                            x = std::abs(p) + std::abs(q) + std::abs(r);
                            if (x != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        const double s = std::copysign(std::sqrt(p * p + q * q + r * r), p);
                        if (s != 0.0) {
                            if (k == m) {
                                if (l != m) {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for (int j = k; j <= nn; ++j) {
                                p = a[k][j] + q * a[k + 1][j];
                                if (k != nn - 1) {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            const int mmin = nn < k + 3 ? nn : k + 3;
                            for (int i = l; i <= mmin; ++i) {
                                p = x * a[i][k] + y * a[i][k + 1];
                                if (k != nn - 1) {
                                    p += z * a[i][k + 2];
                                    a[i][k + 2] -= p * r;
                                }
                                a[i][k + 1] -= p * q;
                                a[i][k] -= p;
                            }
                        }
                    }
                }
            }
        } while (nn >= 1 && l < nn - 1);
    }
}

} // namespace

ComplexSpectrum eigenvalues(const Matrix& a) {
    if (!a.is_square()) {
        throw ShapeError("eigenvalues: matrix " + a.shape_string() + " is not square");
    }
    if (!a.all_finite()) {
        throw NumericError("eigenvalues: input has non-finite entries");
    }
    const int n = static_cast<int>(a.rows());
    ComplexSpectrum out;
    if (n == 0) {
        return out;
    }
    if (n == 1) {
        out.eigenvalues.emplace_back(a(0, 0), 0.0);
        return out;
    }
    Work w(static_cast<std::size_t>(n + 1), std::vector<double>(static_cast<std::size_t>(n + 1), 0.0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            w[i + 1][j + 1] = a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    }
    balance(w, n);
    to_hessenberg(w, n);
    std::vector<double> wr(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<double> wi(static_cast<std::size_t>(n + 1), 0.0);
    hessenberg_qr(w, n, wr, wi);
    out.eigenvalues.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        out.eigenvalues.emplace_back(wr[i], wi[i]);
    }
    return out;
}

} // namespace koopa
