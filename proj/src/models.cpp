#include "scatterkit/models.hpp"

#include <algorithm>
#include <cmath>

#include "scatterkit/trace_space.hpp"

namespace scatterkit {

RealVector path_laplacian_eigenvalues(int dim) {
    RealVector ev(dim);
    for (int k = 1; k <= dim; ++k) ev[k - 1] = 2.0 - 2.0 * std::cos(k * kPi / (dim + 1));
    return ev;
}

double path_laplacian_density(double lambda) {
    if (lambda <= 0.0 || lambda >= 4.0) return 0.0;
    return 1.0 / (kPi * std::sqrt(lambda * (4.0 - lambda)));
}

HermitianOperator build_operator(const ModelSpec& spec) {
    if (spec.dim < 2) throw ValidationError("build_operator: dim must be >= 2");
    const int n = spec.dim;
    Matrix m = Matrix::Zero(n, n);
    switch (spec.kind) {
        case ModelSpec::Kind::PathLaplacian:
            for (int i = 0; i < n; ++i) {
                m(i, i) = 2.0;
                if (i + 1 < n) {
                    m(i, i + 1) = -1.0;
                    m(i + 1, i) = -1.0;
                }
            }
            break;
        case ModelSpec::Kind::Multiplication:
            for (int k = 1; k <= n; ++k) {
                const double x = static_cast<double>(k) / n;
                m(k - 1, k - 1) = spec.lo + (spec.hi - spec.lo) * x;
            }
            break;
        case ModelSpec::Kind::DiagonalCustom:
            if (static_cast<int>(spec.values.size()) != n)
                throw ValidationError("build_operator: diagonal_custom needs dim values");
            for (int i = 0; i < n; ++i) m(i, i) = spec.values[i];
            break;
    }
    return HermitianOperator(m);
}

HermitianOperator build_perturbation(const PerturbationSpec& spec) {
    if (spec.dim < 1) throw ValidationError("build_perturbation: dim must be >= 1");
    if (spec.strength < 0.0) throw ValidationError("build_perturbation: strength must be >= 0");
    const int n = spec.dim;
    if (spec.strength == 0.0) return HermitianOperator(Matrix::Zero(n, n));

    switch (spec.kind) {
        case PerturbationSpec::Kind::RankK: {
            if (spec.rank < 1 || spec.rank > n)
                throw ValidationError("build_perturbation: invalid rank");
            if (spec.rank == 1 && spec.site >= 0) {
                if (spec.site >= n) throw ValidationError("build_perturbation: site out of range");
                Matrix m = Matrix::Zero(n, n);
                m(spec.site, spec.site) = spec.strength;
                return HermitianOperator(m);
            }
            // seeded orthonormal directions, singular values strength * 2^-j
            SplitMix64 rng(spec.seed);
            Matrix basis = rng.gaussian_matrix(n, spec.rank);
            basis = Eigen::HouseholderQR<Matrix>(basis).householderQ() *
                    Matrix::Identity(n, spec.rank);
            Matrix m = Matrix::Zero(n, n);
            for (int j = 0; j < spec.rank; ++j) {
                const double sign = (rng.next() & 1ull) ? 1.0 : -1.0;
                const double s = spec.strength * std::pow(2.0, -j) * sign;
                m.noalias() += s * basis.col(j) * basis.col(j).adjoint();
            }
            return HermitianOperator(hermitize(m));
        }
        case PerturbationSpec::Kind::LocalPotential: {
            if (spec.site < 0 || spec.width < 1 || spec.site + spec.width > n)
                throw ValidationError("build_perturbation: local potential out of range");
            Matrix m = Matrix::Zero(n, n);
            for (int i = spec.site; i < spec.site + spec.width; ++i)
                m(i, i) = spec.strength;
            return HermitianOperator(m);
        }
        case PerturbationSpec::Kind::RandomTraceClass: {
            // singular values strength * 2^-j: a summable profile mimicking
            // trace-class decay
            SplitMix64 rng(spec.seed);
            Matrix basis = rng.gaussian_matrix(n, n);
            basis = Eigen::HouseholderQR<Matrix>(basis).householderQ() * Matrix::Identity(n, n);
            Matrix m = Matrix::Zero(n, n);
            for (int j = 0; j < n; ++j) {
                const double sign = (rng.next() & 1ull) ? 1.0 : -1.0;
                const double s = spec.strength * std::pow(2.0, -j) * sign;
                m.noalias() += s * basis.col(j) * basis.col(j).adjoint();
            }
            return HermitianOperator(hermitize(m));
        }
    }
    throw ValidationError("build_perturbation: unknown kind");
}

Matrix build_coupling(const CouplingSpec& spec, int dim, const SpectralResolution* s) {
    switch (spec.kind) {
        case CouplingSpec::Kind::Identity:
            return Matrix::Identity(dim, dim);
        case CouplingSpec::Kind::BandLimited: {
            if (std::abs(spec.c) > 1.0)
                throw ValidationError("build_coupling: band_limited needs |c| <= 1");
            if (s == nullptr)
                throw ValidationError("build_coupling: band_limited needs a spectral resolution");
            const BorelSet win = BorelSet::closed(spec.window_lo, spec.window_hi);
            const Matrix e = spectral_projection(*s, win).matrix();
            return e + spec.c * (Matrix::Identity(dim, dim) - e);
        }
        case CouplingSpec::Kind::Contraction: {
            SplitMix64 rng(spec.seed);
            Matrix m = rng.gaussian_matrix(dim, dim);
            // exact top singular value via the Gram eigenproblem, then scale
            const RealVector sv = singular_values(m);
            const double smax = sv.size() > 0 ? sv[0] : 0.0;
            if (smax == 0.0) return m;
            return m / smax;
        }
    }
    throw ValidationError("build_coupling: unknown kind");
}

}  // namespace scatterkit
