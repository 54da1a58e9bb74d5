#include "scatterkit/trace_space.hpp"

#include <algorithm>
#include <cmath>

namespace scatterkit {

TraceWeight::TraceWeight(RealVector weights) : w_(std::move(weights)) {
    for (Eigen::Index i = 0; i < w_.size(); ++i)
        if (!(w_[i] > 0.0)) throw ValidationError("TraceWeight: weights must be positive");
}

cxd trace(const Matrix& a, const TraceWeight& w) {
    if (a.rows() != a.cols() || a.rows() != w.dim())
        throw ValidationError("trace: dimension mismatch");
    cxd t = 0.0;
    for (int i = 0; i < w.dim(); ++i) t += w.weights()[i] * a(i, i);
    return t;
}

RealVector singular_values(const Matrix& a) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() == n &&
        norm_max(a - a.adjoint()) <= 1e-13 * std::max(1.0, norm_max(a))) {
        // Hermitian input: |eigenvalues| carry full precision, unlike the
        // square root of the Gram spectrum
        SpectralResolution eg = spectral_decompose(HermitianOperator(hermitize(a)));
        RealVector sv(n);
        for (int i = 0; i < n; ++i) sv[i] = std::abs(eg.eigenvalues[i]);
        std::sort(sv.begin(), sv.end(), std::greater<double>());
        return sv;
    }
    const Matrix gram = hermitize(a.adjoint() * a);
    SpectralResolution eg = spectral_decompose(HermitianOperator(gram, 1e-8));
    RealVector sv(n);
    for (int i = 0; i < n; ++i) sv[i] = std::sqrt(std::max(0.0, eg.eigenvalues[n - 1 - i]));
    return sv;
}

double schatten_norm(const Matrix& a, double p, const TraceWeight& w) {
    if (a.rows() != a.cols() || a.rows() != w.dim())
        throw ValidationError("schatten_norm: dimension mismatch");
    if (!(p >= 1.0)) throw std::invalid_argument("schatten_norm: p must be >= 1");
    if (norm_max(a) == 0.0) return 0.0;
    if (std::isinf(p)) return norm_op(a);
    if (p == 2.0) {
        // ||A||_2^2 = tau(A* A)
        return std::sqrt(std::real(trace(Matrix(a.adjoint() * a), w)));
    }
    bool uniform = true;
    for (int i = 1; i < w.dim(); ++i)
        if (w.weights()[i] != w.weights()[0]) uniform = false;
    if (uniform) {
        const RealVector sv = singular_values(a);
        double sum = 0.0;
        for (int i = 0; i < sv.size(); ++i) sum += std::pow(sv[i], p);
        return std::pow(w.weights()[0] * sum, 1.0 / p);
    }
    // tau(|A|^p) through the eigenpairs of |A|
    const Matrix gram = hermitize(a.adjoint() * a);
    SpectralResolution eg = spectral_decompose(HermitianOperator(gram, 1e-8));
    const int n = eg.dim();
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        const double sig = std::sqrt(std::max(0.0, eg.eigenvalues[k]));
        if (sig == 0.0) continue;
        double diag_weight = 0.0;  // tau(v_k v_k*)
        for (int i = 0; i < n; ++i) diag_weight += w.weights()[i] * std::norm(eg.eigenvectors(i, k));
        sum += std::pow(sig, p) * diag_weight;
    }
    return std::pow(sum, 1.0 / p);
}

double schatten_norm(const Matrix& a, double p) {
    return schatten_norm(a, p, TraceWeight::uniform(static_cast<int>(a.rows())));
}

CommutatorFactorization factor_commutator(const Matrix& t, double support_tol) {
    if (t.rows() != t.cols()) throw ValidationError("factor_commutator: matrix must be square");
    if (!is_finite(t)) throw ValidationError("factor_commutator: non-finite entries");
    const int n = static_cast<int>(t.rows());
    CommutatorFactorization out;
    out.T = t;
    if (norm_max(t) == 0.0) {
        out.G = Matrix::Zero(n, n);
        out.G1 = Matrix::Zero(n, n);
        return out;
    }
    const Matrix gram = hermitize(t.adjoint() * t);
    SpectralResolution eg = spectral_decompose(HermitianOperator(gram, 1e-8));
    RealVector sig(n), inv_sig(n);
    const double sig_max = std::sqrt(std::max(0.0, eg.eigenvalues[n - 1]));
    for (int i = 0; i < n; ++i) {
        sig[i] = std::sqrt(std::max(0.0, eg.eigenvalues[i]));
        inv_sig[i] = sig[i] > support_tol * sig_max ? 1.0 / sig[i] : 0.0;
    }
    const Matrix& v = eg.eigenvectors;
    Vector half(n);
    for (int i = 0; i < n; ++i) half[i] = std::sqrt(sig[i]);
    const Matrix mod_half = v * half.asDiagonal() * v.adjoint();  // |T|^{1/2}
    // polar partial isometry V_pol = T |T|^+
    Vector inv(n);
    for (int i = 0; i < n; ++i) inv[i] = inv_sig[i];
    const Matrix pol = t * (v * inv.asDiagonal() * v.adjoint());
    out.G = mod_half;
    out.G1 = mod_half * pol.adjoint();  // so G1* = V_pol |T|^{1/2}
    return out;
}

}  // namespace scatterkit
