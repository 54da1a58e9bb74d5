#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scatterkit/numeric.hpp"
#include "scatterkit/operator_core.hpp"
#include "scatterkit/smoothness.hpp"

namespace scatterkit {

enum class Sign { Plus, Minus };
enum class WaveMethod { TimeDependent, Weak, Stationary };

const char* to_string(Sign s);
const char* to_string(WaveMethod m);

// ---------------------------------------------------------------------------
// Discretization of t -> +-inf and eps -> 0 limits. Points are stored
// ascending; epsilon schedules are evaluated largest-first.
// ---------------------------------------------------------------------------
struct Schedule {
    enum class Kind { Time, Epsilon };
    Kind kind = Kind::Time;
    std::vector<double> points;             // ascending, positive
    std::optional<double> abel_rate;        // time only

    static Schedule time_grid(double t_max, double dt, std::optional<double> abel_rate);
    static Schedule epsilon_points(std::vector<double> pts);  // any order; sorted ascending
};

// ---------------------------------------------------------------------------
// A scattering pair (H, H1; J) with a.c.-surrogate projections P, P1 that
// commute with H resp. H1. Carries the spectral resolutions of both operators
// since every construction works in the mixed eigenbasis.
// ---------------------------------------------------------------------------
struct ScatteringPair {
    HermitianOperator H;
    HermitianOperator H1;
    Matrix J;
    Projection P;
    Projection P1;
    SpectralResolution S;
    SpectralResolution S1;

    int dim() const { return H.dim(); }

    // P = E_H(window), P1 = E_H1(window): the desk surrogate for the norm
    // absolutely continuous supports.
    static ScatteringPair with_band_window(const HermitianOperator& h, const HermitianOperator& h1,
                                           const Matrix& j, const BorelSet& window,
                                           double proj_tol = defaults::proj_tol);
    static ScatteringPair with_projections(const HermitianOperator& h, const HermitianOperator& h1,
                                           const Matrix& j, const Projection& p,
                                           const Projection& p1,
                                           double proj_tol = defaults::proj_tol);
};

struct WaveResult {
    Matrix W;
    WaveMethod method = WaveMethod::TimeDependent;
    Sign sign = Sign::Plus;
    std::vector<double> schedule_points;  // parameter value per trail entry
    std::vector<double> residual_trail;
    bool converged = false;
    bool recurrence_guard_exceeded = false;
    double recurrence_guard = 0.0;
};

// W_J(t) = e^{itH1} J e^{-itH}. With an Abel rate the result is the
// self-normalized quadrature of 2e int_0^inf e^{-2et} W_J(+-t) P dt over the
// schedule (so a t-independent integrand is reproduced exactly); without one
// it is the last-point W_J(+-t_max) P. The residual trail tracks the change
// of the running estimate between schedule points.
WaveResult time_dependent_wave(const ScatteringPair& pair, Sign sign, const Schedule& sched,
                               double conv_tol = 1e-2);

// Weak variant: P1 W_J(t) P sampled entrywise; trail in max entrywise change.
WaveResult weak_wave(const ScatteringPair& pair, Sign sign, const Schedule& sched,
                     double conv_tol = 1e-2);

// Stationary construction from resolvent sesquilinear forms:
//   entry (f, f1):  int over the grid span of
//     lim_{e->0} (e/pi) <J R_H(l+-ie) P f, R_H1(l+-ie) P1 f1> dl.
// The lambda integral of the rational integrand is evaluated in closed form
// over [grid.front(), grid.back()] (exact for every eps, no quadrature bias),
// and the eps limit is the per-entry linear-fit intercept over the schedule.
// The trail records operator-norm changes between consecutive eps values.
WaveResult stationary_wave(const ScatteringPair& pair, Sign sign,
                           const std::vector<double>& lambda_grid, const Schedule& eps_sched,
                           double conv_tol = 1e-2);

// ||(W_J(w) - W_J(s)) - i int_s^w e^{itH1}(H1 J - J H) e^{-itH} dt||_inf with
// composite Simpson quadrature; exact in finite dimensions up to quadrature
// error.
double duhamel_residual(const ScatteringPair& pair, double s, double w, int quad_steps);

// || J R_H(z) - R_H1(z) J - R_H1(z)(H1 J - J H) R_H(z) ||_max
double resolvent_commutator_residual(const ScatteringPair& pair, cxd z,
                                     double guard = defaults::resolvent_guard);

// || U*(H1,H;J) U(H1,H;J) - U(H,H;J*J) ||_op via two stationary computations
double chain_identity_residual(const ScatteringPair& pair, Sign sign,
                               const std::vector<double>& lambda_grid, const Schedule& eps_sched);

// || E_H1(L) W - W E_H(L) ||_op
double intertwining_residual(const Matrix& w, const ScatteringPair& pair, const BorelSet& set);

// ( ||W*W - P||_op , max(0, lambda_max(W W* - P1)) )
std::pair<double, double> isometry_residuals(const Matrix& w, const ScatteringPair& pair);

struct RadialTrail {
    std::vector<double> eps;
    std::vector<double> trail;  // ||A R(l+-ie_k) P - A R(l+-ie_{k+1}) P||, worse sign
    bool stable = false;
};

// Stabilization probe for A R_H(lambda +- i eps) P along a descending eps
// schedule. Stable in the quasi-continuum at mesh-valid eps, divergent at
// isolated eigenvalues.
RadialTrail radial_limit_probe(const Matrix& a, const SpectralResolution& s, const Projection& p,
                               double lambda, const std::vector<double>& eps_schedule,
                               double stab_tol = 0.15);

// ---------------------------------------------------------------------------
// Kato-Rosenblum pipeline
// ---------------------------------------------------------------------------

struct KRConfig {
    BorelSet window;
    Schedule time_sched;
    Schedule eps_sched;
    std::vector<double> lambda_grid;   // empty -> derived from window and eps
    std::optional<Matrix> coupling;    // defaults to I
    bool use_pac_estimate = false;     // derive P, P1 from box candidates instead of E(window)
    double pac_spread_tol = 0.3;
    double duhamel_s = 0.0;
    double duhamel_w = 5.0;
    int duhamel_steps = 2000;
    std::vector<cxd> resolvent_probes = {cxd(2.0, 1.0), cxd(1.5, -0.8), cxd(2.5, 0.6)};
    std::vector<BorelSet> intertwining_windows;  // empty -> three subwindows of `window`
    double range_rank_tol = 0.5;

    double exact_tol = 1e-8;
    double agreement_tol = 0.05;
    double isometry_tol = 0.05;
    double intertwining_tol = 0.05;
    double conjugation_tol = 0.05;
    double chain_tol = 0.05;
    double conv_tol = 1e-2;
};

struct KRSignReport {
    WaveResult time;
    WaveResult stationary;
    double method_agreement = 0.0;
    double isometry_wsw = 0.0;         // ||W*W - P||
    double isometry_wws_violation = 0.0;  // positive part of W W* - P1
    double conjugation = 0.0;          // ||W H W* - H1 range(W)||
    double chain_identity = 0.0;
    std::vector<double> intertwining;
    bool pass = false;
};

struct KRReport {
    double trace_norm_commutator = 0.0;
    double duhamel = 0.0;
    std::vector<double> resolvent_commutator;
    KRSignReport plus;
    KRSignReport minus;
    bool exact_pass = false;
    bool converged = true;
    bool overall_pass = false;
    KRConfig config;
};

KRReport verify_kato_rosenblum(const HermitianOperator& h, const Matrix& v, const KRConfig& config);

// serialization; stable key order, doubles via shortest round-trip encoding
std::string kr_report_json(const KRReport& r);
void write_kr_trails_csv(const std::string& path, const KRReport& r);
std::string wave_result_json(const WaveResult& w, double j_norm);
void write_wave_trail_csv(const std::string& path, const WaveResult& w);

}  // namespace scatterkit
