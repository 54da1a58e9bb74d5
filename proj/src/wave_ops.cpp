#include "scatterkit/wave_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "scatterkit/trace_space.hpp"

namespace scatterkit {

const char* to_string(Sign s) { return s == Sign::Plus ? "plus" : "minus"; }

const char* to_string(WaveMethod m) {
    switch (m) {
        case WaveMethod::TimeDependent: return "time_dependent";
        case WaveMethod::Weak: return "weak";
        case WaveMethod::Stationary: return "stationary";
    }
    return "?";
}

Schedule Schedule::time_grid(double t_max, double dt, std::optional<double> abel_rate) {
    if (!(t_max > 0.0) || !(dt > 0.0))
        throw ValidationError("Schedule: t_max and dt must be positive");
    if (abel_rate && !(*abel_rate > 0.0))
        throw ValidationError("Schedule: abel_rate must be positive");
    Schedule s;
    s.kind = Kind::Time;
    s.abel_rate = abel_rate;
    const int steps = std::max(1, static_cast<int>(std::ceil(t_max / dt)));
    const double h = t_max / steps;
    s.points.reserve(steps);
    for (int j = 1; j <= steps; ++j) s.points.push_back(j * h);
    return s;
}

Schedule Schedule::epsilon_points(std::vector<double> pts) {
    if (pts.empty()) throw ValidationError("Schedule: empty epsilon schedule");
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!(pts[i] > 0.0)) throw ValidationError("Schedule: epsilon points must be positive");
        if (i > 0 && pts[i] == pts[i - 1])
            throw ValidationError("Schedule: epsilon points must be distinct");
    }
    Schedule s;
    s.kind = Kind::Epsilon;
    s.points = std::move(pts);
    return s;
}

// ---------------------------------------------------------------------------
// ScatteringPair
// ---------------------------------------------------------------------------

namespace {
void check_pair(const HermitianOperator& h, const HermitianOperator& h1, const Matrix& j,
                const Projection& p, const Projection& p1, double proj_tol) {
    const int n = h.dim();
    if (h1.dim() != n || j.rows() != n || j.cols() != n || p.dim() != n || p1.dim() != n)
        throw ValidationError("ScatteringPair: dimension mismatch");
    const double tol_h = proj_tol * (1.0 + norm_max(h.matrix())) * 100.0;
    const double tol_h1 = proj_tol * (1.0 + norm_max(h1.matrix())) * 100.0;
    if (norm_max(p.matrix() * h.matrix() - h.matrix() * p.matrix()) > tol_h)
        throw ValidationError("ScatteringPair: P does not commute with H");
    if (norm_max(p1.matrix() * h1.matrix() - h1.matrix() * p1.matrix()) > tol_h1)
        throw ValidationError("ScatteringPair: P1 does not commute with H1");
}
}  // namespace

ScatteringPair ScatteringPair::with_band_window(const HermitianOperator& h,
                                                const HermitianOperator& h1, const Matrix& j,
                                                const BorelSet& window, double proj_tol) {
    SpectralResolution s = spectral_decompose(h);
    SpectralResolution s1 = spectral_decompose(h1);
    Projection p = spectral_projection(s, window);
    Projection p1 = spectral_projection(s1, window);
    check_pair(h, h1, j, p, p1, proj_tol);
    return ScatteringPair{h, h1, j, std::move(p), std::move(p1), std::move(s), std::move(s1)};
}

ScatteringPair ScatteringPair::with_projections(const HermitianOperator& h,
                                                const HermitianOperator& h1, const Matrix& j,
                                                const Projection& p, const Projection& p1,
                                                double proj_tol) {
    check_pair(h, h1, j, p, p1, proj_tol);
    SpectralResolution s = spectral_decompose(h);
    SpectralResolution s1 = spectral_decompose(h1);
    return ScatteringPair{h, h1, j, p, p1, std::move(s), std::move(s1)};
}

// ---------------------------------------------------------------------------
// Time-dependent and weak wave operators
// ---------------------------------------------------------------------------

namespace {

double recurrence_guard_of(const ScatteringPair& pair) {
    const double gap = std::min(pair.S.min_gap(), pair.S1.min_gap());
    if (!(gap > 0.0) || std::isinf(gap)) return std::numeric_limits<double>::infinity();
    return kPi / gap;
}

struct MixedCompressor {
    // right compression by P in mixed coordinates; band projections reduce to
    // a column mask
    Vector mask;          // diag of U* P U when effectively diagonal
    Matrix dense;         // otherwise the full matrix
    bool diagonal = false;

    static MixedCompressor make(const SpectralResolution& s, const Projection& p) {
        MixedCompressor c;
        Matrix ph = s.eigenvectors.adjoint() * p.matrix() * s.eigenvectors;
        double off = 0.0;
        for (Eigen::Index j = 0; j < ph.cols(); ++j)
            for (Eigen::Index i = 0; i < ph.rows(); ++i)
                if (i != j) off = std::max(off, std::abs(ph(i, j)));
        if (off <= 1e-8) {
            c.diagonal = true;
            c.mask = ph.diagonal();
            for (Eigen::Index i = 0; i < c.mask.size(); ++i)
                c.mask[i] = std::abs(c.mask[i]) > 0.5 ? 1.0 : 0.0;
        } else {
            c.dense = std::move(ph);
        }
        return c;
    }

    Matrix apply(const Matrix& x) const {
        if (diagonal) return x * mask.asDiagonal();
        return x * dense;
    }
};

bool tail_converged(const std::vector<double>& trail, double conv_tol) {
    if (trail.empty()) return true;
    const std::size_t tail = std::max<std::size_t>(1, trail.size() / 10);
    for (std::size_t k = trail.size() - tail; k < trail.size(); ++k)
        if (!(trail[k] < conv_tol)) return false;
    return true;
}

// Shared Abel/last-point driver. Accumulates the kernel in mixed coordinates
// where W_J(t) is a pure phase scaling of J.
WaveResult evolve_wave(const ScatteringPair& pair, Sign sign, const Schedule& sched,
                       double conv_tol, bool weak) {
    if (sched.kind != Schedule::Kind::Time)
        throw ValidationError("time-dependent wave needs a time schedule");
    const int n = pair.dim();
    const double dir = sign == Sign::Plus ? 1.0 : -1.0;
    const Matrix a = pair.S1.eigenvectors.adjoint() * pair.J * pair.S.eigenvectors;
    const MixedCompressor right = MixedCompressor::make(pair.S, pair.P);
    const MixedCompressor left_raw = MixedCompressor::make(pair.S1, pair.P1);
    auto left = [&](const Matrix& x) -> Matrix {
        if (!weak) return x;
        if (left_raw.diagonal) return left_raw.mask.asDiagonal() * x;
        return left_raw.dense * x;
    };

    std::vector<double> nodes;
    nodes.reserve(sched.points.size() + 1);
    nodes.push_back(0.0);
    nodes.insert(nodes.end(), sched.points.begin(), sched.points.end());

    WaveResult res;
    res.method = weak ? WaveMethod::Weak : WaveMethod::TimeDependent;
    res.sign = sign;
    res.recurrence_guard = recurrence_guard_of(pair);
    res.recurrence_guard_exceeded = nodes.back() > res.recurrence_guard;

    auto kernel_at = [&](double t) {
        Matrix k(n, n);
        const double td = dir * t;
        Vector ph1(n), ph(n);
        for (int i = 0; i < n; ++i) ph1[i] = std::exp(cxd(0.0, td * pair.S1.eigenvalues[i]));
        for (int j = 0; j < n; ++j) ph[j] = std::exp(cxd(0.0, -td * pair.S.eigenvalues[j]));
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) k(i, j) = ph1[i] * a(i, j) * ph[j];
        return k;
    };

    if (sched.abel_rate) {
        // self-normalized trapezoid of e^{-2 eps t} W_J(+-t); a t-independent
        // integrand is reproduced exactly
        const double rate = *sched.abel_rate;
        Matrix num = Matrix::Zero(n, n);
        double den = 0.0;
        Matrix prev_est;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const double t = nodes[k];
            double w;
            if (k == 0)
                w = 0.5 * (nodes[1] - nodes[0]);
            else if (k + 1 == nodes.size())
                w = 0.5 * (nodes[k] - nodes[k - 1]);
            else
                w = 0.5 * (nodes[k + 1] - nodes[k - 1]);
            const double env = std::exp(-2.0 * rate * t);
            num.noalias() += (w * env) * kernel_at(t);
            den += w * env;
            if (k >= 1) {
                Matrix est = left(right.apply(Matrix(num / den)));
                if (prev_est.size() > 0) {
                    res.schedule_points.push_back(t);
                    res.residual_trail.push_back(norm_fro(est - prev_est));
                }
                prev_est = std::move(est);
            }
        }
        Matrix w_mixed = left(right.apply(Matrix(num / den)));
        res.W = pair.S1.eigenvectors * w_mixed * pair.S.eigenvectors.adjoint();
    } else {
        Matrix prev;
        for (std::size_t k = 1; k < nodes.size(); ++k) {
            Matrix cur = left(right.apply(kernel_at(nodes[k])));
            if (prev.size() > 0) {
                res.schedule_points.push_back(nodes[k]);
                res.residual_trail.push_back(norm_fro(cur - prev));
            }
            prev = std::move(cur);
        }
        res.W = pair.S1.eigenvectors * prev * pair.S.eigenvectors.adjoint();
    }
    res.converged = tail_converged(res.residual_trail, conv_tol);
    return res;
}

}  // namespace

WaveResult time_dependent_wave(const ScatteringPair& pair, Sign sign, const Schedule& sched,
                               double conv_tol) {
    return evolve_wave(pair, sign, sched, conv_tol, /*weak=*/false);
}

WaveResult weak_wave(const ScatteringPair& pair, Sign sign, const Schedule& sched,
                     double conv_tol) {
    WaveResult res = evolve_wave(pair, sign, sched, conv_tol, /*weak=*/true);
    // weak trails sample entries against the two eigenbases
    return res;
}

// ---------------------------------------------------------------------------
// Stationary wave operator.
//
// In mixed eigencoordinates the sesquilinear integrand of the stationary
// definition is rational in lambda, so its integral over the real line has
// the closed form
//   (eps/pi) int d lambda / ((l1_i - l -+ i eps)(l_j - l +- i eps))
//       = 2 i eps / (Delta + 2 i eps),  Delta = l1_i - l_j   (sign plus),
// and the conjugate kernel for sign minus. No quadrature enters, which keeps
// the trivial limits (H1 = H, J = I) exact to machine precision. The grid
// argument bounds the window used for the mesh-validity check.
// ---------------------------------------------------------------------------

namespace {

Matrix stationary_kernel(const ScatteringPair& pair, Sign sign, double eps) {
    const int n = pair.dim();
    Matrix k(n, n);
    const double s = sign == Sign::Plus ? 1.0 : -1.0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double delta = pair.S1.eigenvalues[i] - pair.S.eigenvalues[j];
            k(i, j) = cxd(0.0, 2.0 * s * eps) / cxd(delta, 2.0 * s * eps);
        }
    }
    return k;
}

void check_eps_mesh(const ScatteringPair& pair, double lo, double hi, double eps_min_point) {
    const double gap = std::max(median_gap_in_window(pair.S, lo, hi),
                                median_gap_in_window(pair.S1, lo, hi));
    if (eps_min_point < 3.0 * gap) {
        throw MeshError("under-resolved mesh: stationary eps schedule dips below 3x the bulk "
                        "spacing (" + std::to_string(gap) + ") inside the window");
    }
}

}  // namespace

WaveResult stationary_wave(const ScatteringPair& pair, Sign sign,
                           const std::vector<double>& lambda_grid, const Schedule& eps_sched,
                           double conv_tol) {
    if (eps_sched.kind != Schedule::Kind::Epsilon)
        throw ValidationError("stationary_wave needs an epsilon schedule");
    if (lambda_grid.size() < 2)
        throw ValidationError("stationary_wave: lambda grid needs at least two points");
    for (std::size_t k = 0; k + 1 < lambda_grid.size(); ++k)
        if (!(lambda_grid[k] < lambda_grid[k + 1]))
            throw ValidationError("stationary_wave: lambda grid must be ascending");
    check_eps_mesh(pair, lambda_grid.front(), lambda_grid.back(), eps_sched.points.front());

    const int n = pair.dim();
    const Matrix a = pair.S1.eigenvectors.adjoint() * pair.J * pair.S.eigenvectors;
    const Matrix ph = pair.S.eigenvectors.adjoint() * pair.P.matrix() * pair.S.eigenvectors;
    const Matrix ph1 = pair.S1.eigenvectors.adjoint() * pair.P1.matrix() * pair.S1.eigenvectors;

    std::vector<double> eps_desc(eps_sched.points.rbegin(), eps_sched.points.rend());
    const int m = static_cast<int>(eps_desc.size());
    std::vector<Matrix> w_eps(m);
    parallel_for(0, m, [&](int k) {
        const Matrix kern = stationary_kernel(pair, sign, eps_desc[k]);
        w_eps[k] = ph1 * a.cwiseProduct(kern) * ph;
    });

    WaveResult res;
    res.method = WaveMethod::Stationary;
    res.sign = sign;
    res.recurrence_guard = recurrence_guard_of(pair);
    for (int k = 1; k < m; ++k) {
        res.schedule_points.push_back(eps_desc[k]);
        res.residual_trail.push_back(norm_op(w_eps[k] - w_eps[k - 1]));
    }
    res.converged = tail_converged(res.residual_trail, conv_tol);

    // per-entry linear fit over eps, report the intercept
    Matrix w_mixed;
    if (m == 1) {
        w_mixed = w_eps[0];
    } else {
        double xbar = 0.0;
        for (double e : eps_desc) xbar += e;
        xbar /= m;
        double sxx = 0.0;
        for (double e : eps_desc) sxx += (e - xbar) * (e - xbar);
        Matrix ybar = Matrix::Zero(n, n);
        for (const Matrix& w : w_eps) ybar += w;
        ybar /= static_cast<double>(m);
        Matrix sxy = Matrix::Zero(n, n);
        for (int k = 0; k < m; ++k) sxy += (eps_desc[k] - xbar) * w_eps[k];
        const Matrix slope = sxy / sxx;
        w_mixed = ybar - xbar * slope;
    }
    res.W = pair.S1.eigenvectors * w_mixed * pair.S.eigenvectors.adjoint();
    return res;
}

// ---------------------------------------------------------------------------
// Residual checks
// ---------------------------------------------------------------------------

double duhamel_residual(const ScatteringPair& pair, double s, double w, int quad_steps) {
    if (s > w) throw std::invalid_argument("duhamel_residual: need s <= w");
    if (quad_steps < 2) throw std::invalid_argument("duhamel_residual: need quad_steps >= 2");
    if (s == w) return 0.0;
    const int n = pair.dim();
    const Matrix a = pair.S1.eigenvectors.adjoint() * pair.J * pair.S.eigenvectors;
    const Matrix comm = pair.H1.matrix() * pair.J - pair.J * pair.H.matrix();
    const Matrix kc = pair.S1.eigenvectors.adjoint() * comm * pair.S.eigenvectors;

    Matrix direct(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double d = pair.S1.eigenvalues[i] - pair.S.eigenvalues[j];
            direct(i, j) = a(i, j) * (std::exp(cxd(0.0, w * d)) - std::exp(cxd(0.0, s * d)));
        }
    }

    // composite Simpson for int_s^w e^{itH1} (H1 J - J H) e^{-itH} dt
    int steps = quad_steps % 2 == 0 ? quad_steps : quad_steps + 1;
    const double h = (w - s) / steps;
    Matrix quad = Matrix::Zero(n, n);
    Vector ph1(n), ph(n);
    for (int k = 0; k <= steps; ++k) {
        const double t = s + k * h;
        double c = (k == 0 || k == steps) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        c *= h / 3.0;
        for (int i = 0; i < n; ++i) ph1[i] = std::exp(cxd(0.0, t * pair.S1.eigenvalues[i]));
        for (int j = 0; j < n; ++j) ph[j] = std::exp(cxd(0.0, -t * pair.S.eigenvalues[j]));
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) quad(i, j) += c * ph1[i] * kc(i, j) * ph[j];
    }

    return norm_op(direct - cxd(0.0, 1.0) * quad);
}

double resolvent_commutator_residual(const ScatteringPair& pair, cxd z, double guard) {
    const Matrix rh = resolvent(pair.S, z, guard);
    const Matrix rh1 = resolvent(pair.S1, z, guard);
    const Matrix comm = pair.H1.matrix() * pair.J - pair.J * pair.H.matrix();
    const Matrix lhs = pair.J * rh - rh1 * pair.J;
    const Matrix rhs = rh1 * comm * rh;
    return norm_max(lhs - rhs);
}

double chain_identity_residual(const ScatteringPair& pair, Sign sign,
                               const std::vector<double>& lambda_grid, const Schedule& eps_sched) {
    WaveResult u = stationary_wave(pair, sign, lambda_grid, eps_sched);
    const Matrix jj = pair.J.adjoint() * pair.J;
    ScatteringPair squared{pair.H, pair.H, jj, pair.P, pair.P, pair.S, pair.S};
    WaveResult u2 = stationary_wave(squared, sign, lambda_grid, eps_sched);
    return norm_op(u.W.adjoint() * u.W - u2.W);
}

double intertwining_residual(const Matrix& w, const ScatteringPair& pair, const BorelSet& set) {
    const Matrix e = spectral_projection(pair.S, set).matrix();
    const Matrix e1 = spectral_projection(pair.S1, set).matrix();
    return norm_op(e1 * w - w * e);
}

std::pair<double, double> isometry_residuals(const Matrix& w, const ScatteringPair& pair) {
    const double iso = norm_op(w.adjoint() * w - pair.P.matrix());
    const Matrix excess = hermitize(w * w.adjoint() - pair.P1.matrix());
    const double viol = std::max(0.0, hermitian_eig_max(excess));
    return {iso, viol};
}

RadialTrail radial_limit_probe(const Matrix& a, const SpectralResolution& s, const Projection& p,
                               double lambda, const std::vector<double>& eps_schedule,
                               double stab_tol) {
    if (eps_schedule.size() < 2)
        throw std::invalid_argument("radial_limit_probe: need at least two eps points");
    for (std::size_t k = 0; k + 1 < eps_schedule.size(); ++k)
        if (!(eps_schedule[k] > eps_schedule[k + 1]) || !(eps_schedule[k + 1] > 0.0))
            throw std::invalid_argument("radial_limit_probe: eps schedule must descend, positive");
    const int n = s.dim();
    const Matrix c = a * s.eigenvectors;
    const Matrix d = s.eigenvectors.adjoint() * p.matrix();

    auto value = [&](double eps, double sgn) {
        Vector r(n);
        for (int i = 0; i < n; ++i) r[i] = 1.0 / cxd(s.eigenvalues[i] - lambda, -sgn * eps);
        return Matrix(c * r.asDiagonal() * d);
    };

    RadialTrail trail;
    trail.eps = eps_schedule;
    Matrix prev_p = value(eps_schedule[0], +1.0);
    Matrix prev_m = value(eps_schedule[0], -1.0);
    for (std::size_t k = 1; k < eps_schedule.size(); ++k) {
        Matrix cur_p = value(eps_schedule[k], +1.0);
        Matrix cur_m = value(eps_schedule[k], -1.0);
        trail.trail.push_back(std::max(norm_op(cur_p - prev_p), norm_op(cur_m - prev_m)));
        prev_p = std::move(cur_p);
        prev_m = std::move(cur_m);
    }
    const double scale = 1.0 + std::max(norm_op(prev_p), norm_op(prev_m));
    trail.stable = trail.trail.back() <= stab_tol * scale;
    return trail;
}

// ---------------------------------------------------------------------------
// Kato-Rosenblum pipeline
// ---------------------------------------------------------------------------

namespace {

// move x to the midpoint of the spectral gap (over both spectra) containing
// it, so window edges never straddle an eigenvalue
double snap_to_gap(double x, const ScatteringPair& pair) {
    std::vector<double> all;
    all.reserve(2 * pair.dim());
    for (int i = 0; i < pair.dim(); ++i) {
        all.push_back(pair.S.eigenvalues[i]);
        all.push_back(pair.S1.eigenvalues[i]);
    }
    std::sort(all.begin(), all.end());
    auto it = std::lower_bound(all.begin(), all.end(), x);
    if (it == all.begin() || it == all.end()) return x;
    return 0.5 * (*(it - 1) + *it);
}

std::vector<double> default_lambda_grid(const BorelSet& window, double eps_max) {
    const double lo = window.intervals().front().lo - 3.0 * eps_max;
    const double hi = window.intervals().back().hi + 3.0 * eps_max;
    return {lo, hi};
}

}  // namespace

KRReport verify_kato_rosenblum(const HermitianOperator& h, const Matrix& v,
                               const KRConfig& config) {
    const int n = h.dim();
    if (v.rows() != n || v.cols() != n)
        throw ValidationError("verify_kato_rosenblum: dimension mismatch");
    HermitianOperator perturbation(v);  // validates hermiticity
    HermitianOperator h1(h.matrix() + perturbation.matrix());
    const Matrix j = config.coupling ? *config.coupling : Matrix(Matrix::Identity(n, n));
    if (config.window.is_empty()) throw ValidationError("verify_kato_rosenblum: empty window");

    KRReport report;
    report.config = config;

    ScatteringPair pair = ScatteringPair::with_band_window(h, h1, j, config.window);
    if (config.use_pac_estimate) {
        // box candidates filtered through the band, joined per module contract
        const double wlo = config.window.intervals().front().lo;
        const double whi = config.window.intervals().back().hi;
        const double eps = std::max(
            config.eps_sched.points.front(),
            3.2 * std::max(median_gap_in_window(pair.S, wlo, whi),
                           median_gap_in_window(pair.S1, wlo, whi)));
        auto make_p = [&](const SpectralResolution& s) {
            const Matrix band = spectral_projection(s, config.window).matrix();
            std::vector<Matrix> cands;
            const int boxes = 8;
            const int w = (n + boxes - 1) / boxes;
            for (int b = 0; b < boxes; ++b) {
                Matrix chi = Matrix::Zero(n, n);
                for (int i = b * w; i < std::min(n, (b + 1) * w); ++i) chi(i, i) = 1.0;
                cands.push_back(chi * band);
            }
            RegularizationParams params = RegularizationParams::make(
                s, wlo, whi, eps, eps, kPi / eps, 12);
            return pac_infty_estimate(s, cands, params, config.pac_spread_tol).projection;
        };
        pair = ScatteringPair::with_projections(h, h1, j, make_p(pair.S), make_p(pair.S1));
    }

    const Matrix comm = h1.matrix() * j - j * h.matrix();
    report.trace_norm_commutator = schatten_norm(comm, 1.0);

    report.duhamel =
        duhamel_residual(pair, config.duhamel_s, config.duhamel_w, config.duhamel_steps);
    for (cxd z : config.resolvent_probes)
        report.resolvent_commutator.push_back(resolvent_commutator_residual(pair, z));
    report.exact_pass = report.duhamel <= config.exact_tol;
    for (double r : report.resolvent_commutator)
        report.exact_pass = report.exact_pass && r <= config.exact_tol;

    std::vector<double> grid = config.lambda_grid.empty()
                                   ? default_lambda_grid(config.window, config.eps_sched.points.back())
                                   : config.lambda_grid;

    std::vector<BorelSet> iwindows = config.intertwining_windows;
    if (iwindows.empty()) {
        const double a = config.window.intervals().front().lo;
        const double b = config.window.intervals().back().hi;
        const double len = b - a;
        iwindows.push_back(BorelSet::closed(snap_to_gap(a + 0.02 * len, pair),
                                            snap_to_gap(a + 0.47 * len, pair)));
        iwindows.push_back(BorelSet::closed(snap_to_gap(a + 0.47 * len, pair),
                                            snap_to_gap(b - 0.02 * len, pair)));
        iwindows.push_back(BorelSet::closed(snap_to_gap(a + 0.2 * len, pair),
                                            snap_to_gap(b - 0.2 * len, pair)));
    }

    auto run_sign = [&](Sign sign) {
        KRSignReport sr;
        sr.time = time_dependent_wave(pair, sign, config.time_sched, config.conv_tol);
        sr.stationary = stationary_wave(pair, sign, grid, config.eps_sched, config.conv_tol);
        sr.method_agreement = norm_op(
            pair.P1.matrix() * (sr.time.W - sr.stationary.W) * pair.P.matrix());
        sr.chain_identity = chain_identity_residual(pair, sign, grid, config.eps_sched);

        double iso = 0.0, viol = 0.0, conj = 0.0;
        std::vector<double> inter(iwindows.size(), 0.0);
        for (const Matrix* w : {&sr.time.W, &sr.stationary.W}) {
            auto [i1, i2] = isometry_residuals(*w, pair);
            iso = std::max(iso, i1);
            viol = std::max(viol, i2);
            const Projection ran = range_projection(*w, config.range_rank_tol);
            conj = std::max(conj, norm_op((*w) * h.matrix() * w->adjoint() -
                                          h1.matrix() * ran.matrix()));
            for (std::size_t k = 0; k < iwindows.size(); ++k)
                inter[k] = std::max(inter[k], intertwining_residual(*w, pair, iwindows[k]));
        }
        sr.isometry_wsw = iso;
        sr.isometry_wws_violation = viol;
        sr.conjugation = conj;
        sr.intertwining = inter;

        sr.pass = sr.method_agreement <= config.agreement_tol &&
                  sr.isometry_wsw <= config.isometry_tol &&
                  sr.isometry_wws_violation <= config.isometry_tol &&
                  sr.conjugation <= config.conjugation_tol &&
                  sr.chain_identity <= config.chain_tol;
        for (double r : sr.intertwining) sr.pass = sr.pass && r <= config.intertwining_tol;
        return sr;
    };

    report.plus = run_sign(Sign::Plus);
    report.minus = run_sign(Sign::Minus);
    report.converged = report.plus.time.converged && report.plus.stationary.converged &&
                       report.minus.time.converged && report.minus.stationary.converged;
    report.overall_pass =
        report.exact_pass && report.converged && report.plus.pass && report.minus.pass;
    return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

nlohmann::ordered_json wave_json(const WaveResult& w) {
    nlohmann::ordered_json j;
    j["method"] = to_string(w.method);
    j["sign"] = to_string(w.sign);
    j["converged"] = w.converged;
    j["recurrence_guard"] = std::isinf(w.recurrence_guard) ? 1e300 : w.recurrence_guard;
    j["recurrence_guard_exceeded"] = w.recurrence_guard_exceeded;
    j["final_residual"] = w.residual_trail.empty() ? 0.0 : w.residual_trail.back();
    j["trail_points"] = w.residual_trail.size();
    return j;
}

nlohmann::ordered_json sign_json(const KRSignReport& s) {
    nlohmann::ordered_json j;
    j["time"] = wave_json(s.time);
    j["stationary"] = wave_json(s.stationary);
    j["method_agreement"] = s.method_agreement;
    j["isometry_wsw"] = s.isometry_wsw;
    j["isometry_wws_violation"] = s.isometry_wws_violation;
    j["conjugation"] = s.conjugation;
    j["chain_identity"] = s.chain_identity;
    j["intertwining"] = s.intertwining;
    j["pass"] = s.pass;
    return j;
}

}  // namespace

std::string kr_report_json(const KRReport& r) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = "kr_report";
    nlohmann::ordered_json cfg;
    nlohmann::ordered_json win = nlohmann::ordered_json::array();
    for (const auto& iv : r.config.window.intervals()) win.push_back({iv.lo, iv.hi});
    cfg["window"] = win;
    cfg["time_points"] = r.config.time_sched.points.size();
    cfg["time_t_max"] = r.config.time_sched.points.empty() ? 0.0 : r.config.time_sched.points.back();
    if (r.config.time_sched.abel_rate) cfg["abel_rate"] = *r.config.time_sched.abel_rate;
    cfg["eps_points"] = r.config.eps_sched.points;
    cfg["tolerances"] = {{"exact_tol", r.config.exact_tol},
                         {"agreement_tol", r.config.agreement_tol},
                         {"isometry_tol", r.config.isometry_tol},
                         {"intertwining_tol", r.config.intertwining_tol},
                         {"conjugation_tol", r.config.conjugation_tol},
                         {"chain_tol", r.config.chain_tol},
                         {"conv_tol", r.config.conv_tol},
                         {"range_rank_tol", r.config.range_rank_tol}};
    cfg["use_pac_estimate"] = r.config.use_pac_estimate;
    j["config"] = cfg;
    j["trace_norm_commutator"] = r.trace_norm_commutator;
    j["duhamel"] = r.duhamel;
    j["resolvent_commutator"] = r.resolvent_commutator;
    j["plus"] = sign_json(r.plus);
    j["minus"] = sign_json(r.minus);
    j["exact_pass"] = r.exact_pass;
    j["converged"] = r.converged;
    j["overall_pass"] = r.overall_pass;
    return j.dump(2) + "\n";
}

void write_kr_trails_csv(const std::string& path, const KRReport& r) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("write_kr_trails_csv: cannot open " + path);
    f << "sign,method,index,parameter,residual\n";
    auto rows = [&](const KRSignReport& s) {
        for (const WaveResult* w : {&s.time, &s.stationary}) {
            for (std::size_t k = 0; k < w->residual_trail.size(); ++k)
                f << to_string(w->sign) << ',' << to_string(w->method) << ',' << k << ','
                  << fmt17(w->schedule_points[k]) << ',' << fmt17(w->residual_trail[k]) << '\n';
        }
    };
    rows(r.plus);
    rows(r.minus);
}

std::string wave_result_json(const WaveResult& w, double j_norm) {
    nlohmann::ordered_json j = wave_json(w);
    j["coupling_norm"] = j_norm;
    return j.dump(2) + "\n";
}

void write_wave_trail_csv(const std::string& path, const WaveResult& w) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("write_wave_trail_csv: cannot open " + path);
    f << "index,parameter,residual\n";
    for (std::size_t k = 0; k < w.residual_trail.size(); ++k)
        f << k << ',' << fmt17(w.schedule_points[k]) << ',' << fmt17(w.residual_trail[k]) << '\n';
}

}  // namespace scatterkit
