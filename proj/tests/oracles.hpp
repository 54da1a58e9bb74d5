#pragma once

// Test-only oracles, independent of the library's computational paths.

#include <cmath>
#include <vector>

#include "scatterkit/numeric.hpp"
#include "scatterkit/operator_core.hpp"

namespace oracles {

using scatterkit::cxd;
using scatterkit::Matrix;
using scatterkit::Vector;
using scatterkit::kPi;

inline Matrix random_hermitian(std::uint64_t seed, int n, double scale = 1.0) {
    scatterkit::SplitMix64 rng(seed);
    Matrix a = rng.gaussian_matrix(n, n);
    return scale * 0.5 * (a + a.adjoint()) / std::sqrt(static_cast<double>(n));
}

// roots of det(H - lambda I) via sign-change bisection; brute-force
// characteristic-polynomial route for small Hermitian matrices
inline std::vector<double> charpoly_roots(const Matrix& h, double lo, double hi, int scan,
                                          double tol = 1e-12) {
    auto det_at = [&](double lam) {
        Matrix m = h - lam * Matrix::Identity(h.rows(), h.cols());
        return Eigen::PartialPivLU<Matrix>(m).determinant().real();
    };
    std::vector<double> roots;
    double prev_x = lo;
    double prev_f = det_at(lo);
    for (int k = 1; k <= scan; ++k) {
        const double x = lo + (hi - lo) * k / scan;
        const double f = det_at(x);
        if (prev_f == 0.0) roots.push_back(prev_x);
        if (prev_f * f < 0.0) {
            double a = prev_x, b = x, fa = prev_f;
            while (b - a > tol) {
                const double mid = 0.5 * (a + b);
                const double fm = det_at(mid);
                if (fa * fm <= 0.0) {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
        prev_x = x;
        prev_f = f;
    }
    return roots;
}

// windowed time integral int_{-T}^{T} ||G e^{-itH} f||^2 dt via the closed
// form sum_ij conj(fh_i) (G~* G~)_ij fh_j * 2 sin(T(l_i-l_j))/(l_i-l_j)
inline double time_integral_kernel(const Matrix& g, const scatterkit::SpectralResolution& s,
                                   const Vector& f, double t_max) {
    const int n = s.dim();
    const Matrix b = g * s.eigenvectors;
    const Matrix m = b.adjoint() * b;
    const Vector fh = s.eigenvectors.adjoint() * f;
    cxd total = 0.0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double d = s.eigenvalues[i] - s.eigenvalues[j];
            const double k = std::abs(d) < 1e-12 ? 2.0 * t_max : 2.0 * std::sin(t_max * d) / d;
            total += std::conj(fh[i]) * m(i, j) * fh[j] * k;
        }
    }
    return total.real();
}

// the same integral by composite Simpson, a second independent route
inline double time_integral_quadrature(const Matrix& g, const scatterkit::SpectralResolution& s,
                                       const Vector& f, double t_max, int steps) {
    if (steps % 2 != 0) ++steps;
    const double h = 2.0 * t_max / steps;
    double total = 0.0;
    for (int k = 0; k <= steps; ++k) {
        const double t = -t_max + k * h;
        double c = (k == 0 || k == steps) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        total += c * (g * (scatterkit::propagator(s, t) * f)).squaredNorm();
    }
    return total * h / 3.0;
}

// R(l +- i eps) = +- i int_0^T e^{-eps t +- i l t} U_H(+-t) dt by Simpson,
// with U_H(t) = e^{-itH}: the +-branch damps e^{-itH}, the --branch e^{+itH}
inline Matrix resolvent_time_quadrature(const scatterkit::SpectralResolution& s, double lambda,
                                        double eps, bool plus, double t_max, int steps) {
    if (steps % 2 != 0) ++steps;
    const int n = s.dim();
    const double h = t_max / steps;
    const double sgn = plus ? 1.0 : -1.0;
    Matrix acc = Matrix::Zero(n, n);
    for (int k = 0; k <= steps; ++k) {
        const double t = k * h;
        double c = (k == 0 || k == steps) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        const cxd env = std::exp(cxd(-eps * t, sgn * lambda * t));
        acc += c * env * scatterkit::propagator(s, sgn * t);
    }
    return cxd(0.0, sgn) * acc * (h / 3.0);
}

// Simpson value of i int_s^w e^{itH1} K e^{-itH} dt with Richardson step
// halving; returns the extrapolated matrix
inline Matrix duhamel_integral_oracle(const scatterkit::SpectralResolution& s1,
                                      const scatterkit::SpectralResolution& s, const Matrix& k,
                                      double a, double b, int steps) {
    auto simpson = [&](int m) {
        if (m % 2 != 0) ++m;
        const double h = (b - a) / m;
        Matrix acc = Matrix::Zero(k.rows(), k.cols());
        for (int j = 0; j <= m; ++j) {
            const double t = a + j * h;
            double c = (j == 0 || j == m) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
            acc += c * (scatterkit::propagator(s1, -t) * k * scatterkit::propagator(s, t));
        }
        return Matrix(cxd(0.0, 1.0) * acc * (h / 3.0));
    };
    const Matrix coarse = simpson(steps);
    const Matrix fine = simpson(2 * steps);
    return fine + (fine - coarse) / 15.0;
}

}  // namespace oracles
