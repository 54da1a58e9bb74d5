#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scatterkit/numeric.hpp"
#include "scatterkit/operator_core.hpp"

namespace scatterkit {

// Deterministic builders for benchmark operators; fixed seed implies
// bit-identical output.

struct ModelSpec {
    enum class Kind { PathLaplacian, Multiplication, DiagonalCustom };
    Kind kind = Kind::PathLaplacian;
    int dim = 2;
    // multiplication: eigenvalue k/dim mapped affinely to [lo, hi]
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> values;  // diagonal_custom
    std::uint64_t seed = 0;
};

HermitianOperator build_operator(const ModelSpec& spec);

struct PerturbationSpec {
    enum class Kind { RankK, LocalPotential, RandomTraceClass };
    Kind kind = Kind::RankK;
    int dim = 2;
    int rank = 1;
    int site = 0;          // rank-1 at a site when rank == 1 and site >= 0
    int width = 1;         // local_potential: sites [site, site+width)
    double strength = 0.0;
    std::uint64_t seed = 1;
};

HermitianOperator build_perturbation(const PerturbationSpec& spec);

struct CouplingSpec {
    enum class Kind { Identity, BandLimited, Contraction };
    Kind kind = Kind::Identity;
    double c = 0.0;        // band_limited off-band factor, |c| <= 1
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::uint64_t seed = 2;
};

// band_limited needs the spectral resolution of the operator whose band it
// respects; pass nullptr otherwise.
Matrix build_coupling(const CouplingSpec& spec, int dim, const SpectralResolution* s);

// closed-form path-Laplacian spectrum: 2 - 2 cos(k pi / (dim+1)), k = 1..dim
RealVector path_laplacian_eigenvalues(int dim);

// continuum spectral density (eigenvalue fraction per unit lambda) of the
// path Laplacian: 1 / (pi sqrt(lambda (4 - lambda)))
double path_laplacian_density(double lambda);

}  // namespace scatterkit
