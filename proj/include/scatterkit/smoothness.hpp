#pragma once

#include <array>
#include <string>
#include <vector>

#include "scatterkit/numeric.hpp"
#include "scatterkit/operator_core.hpp"

namespace scatterkit {

// ---------------------------------------------------------------------------
// Mesh-regularization of the smoothness suprema. All eps and interval-length
// floors must sit at least 3x above the bulk (median) eigenvalue spacing
// inside the window; the median is used so that a deliberately isolated
// eigenvalue inside the window does not forbid the very scan meant to detect
// it. t_window <= pi / eps_min keeps the time integral on the scale the eps
// floor can resolve.
// ---------------------------------------------------------------------------
struct RegularizationParams {
    double eps_min = 0.1;
    double len_min = 0.1;
    double t_window = 10.0;
    double window_lo = 0.0;
    double window_hi = 1.0;
    int probe_count = 16;
    std::uint64_t probe_seed = 42;

    // validates the invariants against S and throws MeshError on violation
    static RegularizationParams make(const SpectralResolution& s, double window_lo,
                                     double window_hi, double eps_min, double len_min,
                                     double t_window, int probe_count = 16,
                                     std::uint64_t probe_seed = 42);
};

// bulk spacing statistic used by the mesh rule
double median_gap_in_window(const SpectralResolution& s, double lo, double hi);

struct ProbeValue {
    int functional = 0;  // 1..5
    std::string kind;    // "gram" | "random" | "grid" | "interval"
    int index = 0;
    double value = 0.0;  // the gamma_j^2 candidate this probe produced
};

struct SmoothnessReport {
    std::array<double, 5> gamma{};  // gamma_1 .. gamma_5
    RegularizationParams params;
    std::vector<ProbeValue> detail;

    double gamma_max() const;
    double gamma_min() const;
    // (max - min)/max, 0 when all vanish
    double spread() const;
    bool all_finite() const;
};

// The five regularized smoothness functionals of G relative to H.
//   gamma1: (1/2pi) sup_f int_{-T}^{T} ||G e^{-itH} f||^2 dt        (trapezoid)
//   gamma2: (1/2pi)^2 sup_f int (||G R(l+ie)f||^2 + ||G R(l-ie)f||^2) dl
//   gamma3: sup_f int ||G delta(l,e) f||^2 dl
//   gamma4: sup_l ||G delta(l,e) G*||                               (exact)
//   gamma5: sup_Lambda ||G E(Lambda) G*|| / |Lambda|                (exact)
// Suprema over f are approximated by the dominant eigenvectors of each
// functional's Gram operator plus seeded random unit probes, restricted to
// the spectral content of the window (the lambda scans are window-local, so
// an unrestricted gamma1 would be dominated by slow band-edge states the
// other functionals cannot see). gamma4 scans a lambda grid at eps_min;
// gamma5 scans the dyadic subintervals of the window with length >= len_min.
// The lambda integrals for gamma2/gamma3 run over the window widened by
// 6*eps so the Poisson mass of in-window states is not artificially
// truncated. The t and eps scales pair as t_window ~ 1/(2 eps_min): the
// sharp time window then carries the same mass as the Abel weight hidden in
// gamma2.
SmoothnessReport gamma_estimates(const Matrix& g, const SpectralResolution& s,
                                 const RegularizationParams& params);

struct ACReport {
    std::vector<double> grid;
    std::vector<double> cdf_norms;  // ||P E(lam_k) P||
    double max_difference_quotient = 0.0;
    double lipschitz_bound = 0.0;
    bool lipschitz_flag = false;
};

ACReport ac_modulus(const Projection& p, const SpectralResolution& s,
                    const std::vector<double>& grid, double lipschitz_bound);

enum class CutoffFamily {
    Hard,  // indicator of [-n, n]
    Ramp,  // 1 on [-n,n], linear shoulder of width 1, 0 beyond
};

HermitianOperator cutoff_operator(const SpectralResolution& s, int n,
                                  CutoffFamily family = CutoffFamily::Hard);

// Filters f to the spectral set where the delta-smoothing density estimate
// stays below N_bound (and |lambda| <= n_bound): g = E(X) f with X a grid
// approximation at resolution eps/2.
Vector smooth_vector_filter(const SpectralResolution& s, const Vector& f, double n_bound,
                            double big_n_bound, double eps);

struct PacEstimate {
    Projection projection;
    std::vector<SmoothnessReport> reports;
    std::vector<bool> accepted;
};

// Classifies each candidate as mesh-smooth (all gamma finite, spread <=
// smooth_spread_tol) and returns the join of the accepted candidates' adjoint
// ranges. Empty accepted set gives the zero projection.
PacEstimate pac_infty_estimate(const SpectralResolution& s, const std::vector<Matrix>& candidates,
                               const RegularizationParams& params, double smooth_spread_tol,
                               double rank_tol = 1e-7);

// CSV / JSON serialization; schemas documented in the README
void write_smoothness_csv(const std::string& path, const SmoothnessReport& r);
std::string smoothness_json(const SmoothnessReport& r);
void write_ac_csv(const std::string& path, const ACReport& r);
std::string ac_json(const ACReport& r);

}  // namespace scatterkit
