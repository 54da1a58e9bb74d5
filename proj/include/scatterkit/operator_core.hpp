#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scatterkit/numeric.hpp"

namespace scatterkit {

// Default tolerances. Every report echoes the values it actually used.
namespace defaults {
inline constexpr double hermiticity_tol = 1e-12;
inline constexpr double ortho_tol = 1e-10;
inline constexpr double recon_tol = 1e-9;   // relative to ||H||
inline constexpr double proj_tol = 1e-10;
inline constexpr double unit_tol = 1e-10;
inline constexpr double fc_tol = 1e-10;
inline constexpr double delta_tol = 1e-10;
inline constexpr double psd_tol = 1e-10;
inline constexpr double res_tol = 1e-12;
inline constexpr double resolvent_guard = 1e-12;
inline constexpr double fact_tol = 1e-10;
inline constexpr double stab_tol = 0.02;
inline constexpr int jacobi_max_sweeps = 60;
}  // namespace defaults

// ---------------------------------------------------------------------------
// Dense self-adjoint operator. Stored symmetrized as (A + A*)/2 after the
// hermiticity check.
// ---------------------------------------------------------------------------
class HermitianOperator {
  public:
    explicit HermitianOperator(const Matrix& a, double hermiticity_tol = defaults::hermiticity_tol);

    int dim() const { return static_cast<int>(m_.rows()); }
    const Matrix& matrix() const { return m_; }

  private:
    Matrix m_;
};

// ---------------------------------------------------------------------------
// Eigenvalues ascending, eigenvector columns orthonormal. Immutable after
// construction and safe to share across threads.
// ---------------------------------------------------------------------------
struct SpectralResolution {
    RealVector eigenvalues;  // ascending
    Matrix eigenvectors;     // columns u_i
    Matrix hamiltonian;      // the decomposed operator, kept for residual checks
    int sweeps = 0;

    int dim() const { return static_cast<int>(eigenvalues.size()); }
    double spectral_radius() const;
    // min over consecutive gaps of the full spectrum; infinity for dim 1
    double min_gap() const;
};

// Cyclic Jacobi for Hermitian matrices; deterministic, including the ordering
// of equal eigenvalues (eigenvectors are phase-normalized so their first
// nonzero component is real positive, ties then sorted by that component's
// index and value).
SpectralResolution spectral_decompose(const HermitianOperator& h,
                                      double off_tol = 1e-13,
                                      int max_sweeps = defaults::jacobi_max_sweeps);

// ---------------------------------------------------------------------------
// Finite unions of disjoint real intervals.
// ---------------------------------------------------------------------------
class BorelSet {
  public:
    struct Interval {
        double lo, hi;
        bool lo_closed = true, hi_closed = true;
    };

    BorelSet() = default;  // empty set
    explicit BorelSet(std::vector<Interval> intervals);

    static BorelSet empty() { return BorelSet(); }
    static BorelSet closed(double lo, double hi) { return BorelSet({Interval{lo, hi, true, true}}); }
    static BorelSet real_line();

    const std::vector<Interval>& intervals() const { return intervals_; }
    double measure() const;
    bool contains(double x) const;
    BorelSet intersect(const BorelSet& other) const;
    bool is_empty() const { return intervals_.empty(); }

  private:
    std::vector<Interval> intervals_;
};

class Projection {
  public:
    explicit Projection(const Matrix& p, double proj_tol = defaults::proj_tol);
    static Projection zero(int dim) { return Projection(Matrix::Zero(dim, dim)); }
    static Projection identity(int dim) { return Projection(Matrix::Identity(dim, dim)); }

    int dim() const { return static_cast<int>(m_.rows()); }
    const Matrix& matrix() const { return m_; }

  private:
    Matrix m_;
};

// ---------------------------------------------------------------------------
// Borel functional calculus and friends
// ---------------------------------------------------------------------------

// phi(H) = sum phi(lambda_i) u_i u_i*. Errors if phi is non-finite at an
// eigenvalue.
Matrix apply_function(const SpectralResolution& s, const std::function<cxd(double)>& phi);

Projection spectral_projection(const SpectralResolution& s, const BorelSet& set);

// E((-inf, lam]) as a matrix; building block of the a.c. diagnostics
Matrix spectral_cdf(const SpectralResolution& s, double lam);

// U(t) = exp(-itH)
Matrix propagator(const SpectralResolution& s, double t);

// (H - z)^{-1}; throws SpectralPoleError within `guard` of an eigenvalue
Matrix resolvent(const SpectralResolution& s, cxd z, double guard = defaults::resolvent_guard);

// delta_H(lambda, eps) = (1/2pi i)[R(lam+ie) - R(lam-ie)] = (eps/pi) R+ R- >= 0
HermitianOperator delta_smoothing(const SpectralResolution& s, double lambda, double eps);

struct DensityTrail {
    std::vector<double> eps;     // as evaluated, descending
    std::vector<cxd> values;     // <delta(lam, eps_k) f, g>
    bool stabilized = false;
    cxd final_value{0.0, 0.0};
};

// <delta(lam,eps)f,g> along a descending eps schedule. Non-stabilizing trails
// are reported, not errors; expected near isolated eigenvalues.
DensityTrail spectral_density(const SpectralResolution& s, const Vector& f, const Vector& g,
                              double lambda, const std::vector<double>& eps_schedule,
                              double stab_tol = defaults::stab_tol);

// Projection onto the span of left singular vectors of A with sigma >
// rank_tol * sigma_max. A = 0 gives the zero projection.
Projection range_projection(const Matrix& a, double rank_tol);

// ---------------------------------------------------------------------------
// Operator save/load. JSON, row-major [re, im] pairs printed with 17
// significant digits; round-trips are bit-exact. Schema in the README.
// ---------------------------------------------------------------------------
void save_matrix_json(const std::string& path, const Matrix& a);
Matrix load_matrix_json(const std::string& path);

}  // namespace scatterkit
