#include "scatterkit/smoothness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace scatterkit {

double median_gap_in_window(const SpectralResolution& s, double lo, double hi) {
    std::vector<double> evs;
    for (int i = 0; i < s.dim(); ++i)
        if (s.eigenvalues[i] >= lo && s.eigenvalues[i] <= hi) evs.push_back(s.eigenvalues[i]);
    if (evs.size() < 2)
        throw MeshError("under-resolved mesh: fewer than two eigenvalues inside the window");
    std::vector<double> gaps(evs.size() - 1);
    for (std::size_t i = 0; i + 1 < evs.size(); ++i) gaps[i] = evs[i + 1] - evs[i];
    std::sort(gaps.begin(), gaps.end());
    return gaps[(gaps.size() - 1) / 2];
}

RegularizationParams RegularizationParams::make(const SpectralResolution& s, double window_lo,
                                                double window_hi, double eps_min, double len_min,
                                                double t_window, int probe_count,
                                                std::uint64_t probe_seed) {
    if (!(window_lo < window_hi))
        throw ValidationError("RegularizationParams: window_lo must be below window_hi");
    if (!(eps_min > 0.0) || !(len_min > 0.0) || !(t_window > 0.0))
        throw ValidationError("RegularizationParams: eps_min, len_min, t_window must be positive");
    if (probe_count < 1) throw ValidationError("RegularizationParams: probe_count must be >= 1");
    const double gap = median_gap_in_window(s, window_lo, window_hi);
    if (eps_min < 3.0 * gap || len_min < 3.0 * gap) {
        throw MeshError("under-resolved mesh: eps_min/len_min below 3x the bulk eigenvalue "
                        "spacing (" +
                        std::to_string(gap) + ") inside the window");
    }
    if (t_window > kPi / eps_min * (1.0 + 1e-12))
        throw ValidationError("RegularizationParams: t_window exceeds pi/eps_min");
    RegularizationParams p;
    p.eps_min = eps_min;
    p.len_min = len_min;
    p.t_window = t_window;
    p.window_lo = window_lo;
    p.window_hi = window_hi;
    p.probe_count = probe_count;
    p.probe_seed = probe_seed;
    return p;
}

double SmoothnessReport::gamma_max() const { return *std::max_element(gamma.begin(), gamma.end()); }
double SmoothnessReport::gamma_min() const { return *std::min_element(gamma.begin(), gamma.end()); }

double SmoothnessReport::spread() const {
    const double mx = gamma_max();
    if (!(mx > 0.0)) return 0.0;
    return (mx - gamma_min()) / mx;
}

bool SmoothnessReport::all_finite() const {
    for (double g : gamma)
        if (!std::isfinite(g)) return false;
    return true;
}

namespace {

// top-k eigenvectors of a Hermitian PSD Gram by subspace iteration;
// deterministic (seeded start, fixed iteration count, Householder QR)
std::vector<Vector> dominant_probes(const Matrix& gram, int k, std::uint64_t seed) {
    const int n = static_cast<int>(gram.rows());
    k = std::min(k, n);
    SplitMix64 rng(seed);
    Matrix q = rng.gaussian_matrix(n, k);
    q = Eigen::HouseholderQR<Matrix>(q).householderQ() * Matrix::Identity(n, k);
    for (int it = 0; it < 60; ++it) {
        Matrix z = gram * q;
        q = Eigen::HouseholderQR<Matrix>(z).householderQ() * Matrix::Identity(n, k);
    }
    std::vector<Vector> out;
    out.reserve(k);
    for (int j = 0; j < k; ++j) out.push_back(q.col(j));
    return out;
}

double quad_form(const Matrix& gram, const Vector& f) {
    return std::real(cxd(f.adjoint() * (gram * f)));
}

// sup over probes of f* Gram f; records one detail row per probe
double probe_sup(const Matrix& gram, int functional, int probe_count, std::uint64_t seed,
                 std::vector<ProbeValue>& detail) {
    const int n = static_cast<int>(gram.rows());
    double best = 0.0;
    int idx = 0;
    for (const Vector& f : dominant_probes(gram, probe_count, seed + functional)) {
        const double v = quad_form(gram, f);
        detail.push_back({functional, "gram", idx++, v});
        best = std::max(best, v);
    }
    SplitMix64 rng(seed + 1000 + functional);
    const int randoms = std::max(1, probe_count / 2);
    for (int r = 0; r < randoms; ++r) {
        const Vector f = rng.unit_vector(n);
        const double v = quad_form(gram, f);
        detail.push_back({functional, "random", r, v});
        best = std::max(best, v);
    }
    return best;
}

// trapezoid sum of e^{i t Delta} over the uniform grid on [-T, T]: the
// Dirichlet kernel minus the half-weighted endpoints
double trapezoid_phase_sum(double delta, double dt, int half_steps, double t_max) {
    const double x = dt * delta;
    double dirichlet;
    if (std::abs(std::sin(0.5 * x)) < 1e-12) {
        dirichlet = 2.0 * half_steps + 1.0;
    } else {
        dirichlet = std::sin((half_steps + 0.5) * x) / std::sin(0.5 * x);
    }
    return dt * (dirichlet - std::cos(t_max * delta));
}

}  // namespace

SmoothnessReport gamma_estimates(const Matrix& g, const SpectralResolution& s,
                                 const RegularizationParams& params) {
    const int n = s.dim();
    if (g.rows() != n || g.cols() != n) throw ValidationError("gamma_estimates: dimension mismatch");

    SmoothnessReport report;
    report.params = params;

    const Matrix b = g * s.eigenvectors;       // G in mixed coordinates
    const Matrix m = hermitize(b.adjoint() * b);
    if (norm_max(m) == 0.0) {
        report.gamma = {0.0, 0.0, 0.0, 0.0, 0.0};
        return report;
    }

    const double eps = params.eps_min;
    const double wlo = params.window_lo;
    const double whi = params.window_hi;
    const RealVector& ev = s.eigenvalues;

    // All f-suprema are restricted to the window's spectral content. The
    // lambda scans already live inside the window; without the matching
    // restriction the time integral of gamma1 is dominated by band-edge
    // states (vanishing group velocity) that the other functionals never see.
    RealVector win_mask(n);
    for (int i = 0; i < n; ++i) win_mask[i] = (ev[i] >= wlo && ev[i] <= whi) ? 1.0 : 0.0;
    auto mask = [&](Matrix g) {
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                if (win_mask[i] == 0.0 || win_mask[j] == 0.0) g(i, j) = 0.0;
        return g;
    };

    // gamma1: Gram of (1/2pi) int_{-T}^{T} e^{itH} G*G e^{-itH} dt assembled
    // entrywise by trapezoid; dt resolves the fastest phase e^{i t (l_i-l_j)}
    {
        const double t_max = params.t_window;
        const double dt_target = 0.1 / std::max(1.0, s.spectral_radius());
        const int half_steps = static_cast<int>(std::ceil(t_max / dt_target));
        const double dt = t_max / half_steps;
        Matrix gram1(n, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                gram1(i, j) = m(i, j) * trapezoid_phase_sum(ev[i] - ev[j], dt, half_steps, t_max);
        gram1 = mask(hermitize(gram1));
        const double sup =
            probe_sup(gram1, 1, params.probe_count, params.probe_seed, report.detail);
        report.gamma[0] = std::sqrt(std::max(0.0, sup / (2.0 * kPi)));
    }

    // gamma2 / gamma3 share the lambda loop: integrate over the window
    // widened by 6 eps so in-window Poisson mass is complete
    {
        const double lo = wlo - 6.0 * eps;
        const double hi = whi + 6.0 * eps;
        const int cells = static_cast<int>(std::ceil((hi - lo) / (eps / 5.0)));
        const double dl = (hi - lo) / cells;
        Matrix s2 = Matrix::Zero(n, n);
        Matrix s3 = Matrix::Zero(n, n);
        Vector rp(n);
        RealVector pv(n);
        for (int k = 0; k <= cells; ++k) {
            const double lam = lo + k * dl;
            const double w = (k == 0 || k == cells) ? 0.5 * dl : dl;
            for (int i = 0; i < n; ++i) {
                const double d = ev[i] - lam;
                rp[i] = 1.0 / cxd(d, -eps);                    // R(lam + i eps) in H basis
                pv[i] = (eps / kPi) / (d * d + eps * eps);
            }
            s2.noalias() += w * (rp.conjugate() * rp.transpose());
            s2.noalias() += w * (rp * rp.adjoint());
            s3.noalias() += w * (pv.cast<cxd>() * pv.cast<cxd>().transpose());
        }
        const Matrix gram2 = mask(hermitize(m.cwiseProduct(s2)));
        const Matrix gram3 = mask(hermitize(m.cwiseProduct(s3)));
        const double sup2 =
            probe_sup(gram2, 2, params.probe_count, params.probe_seed, report.detail);
        const double sup3 =
            probe_sup(gram3, 3, params.probe_count, params.probe_seed, report.detail);
        report.gamma[1] = std::sqrt(std::max(0.0, sup2)) / (2.0 * kPi);
        report.gamma[2] = std::sqrt(std::max(0.0, sup3));
    }

    // gamma4: exact operator norms ||G delta(l,eps) G*|| = sigma_max(B sqrt(p))^2
    // over the window grid
    {
        const int cells = static_cast<int>(std::ceil((whi - wlo) / (eps / 5.0)));
        const double dl = (whi - wlo) / cells;
        std::vector<double> vals(cells + 1);
        parallel_for(0, cells + 1, [&](int k) {
            const double lam = wlo + k * dl;
            Vector sq(n);
            for (int i = 0; i < n; ++i) {
                const double d = ev[i] - lam;
                sq[i] = std::sqrt((eps / kPi) / (d * d + eps * eps));
            }
            const double sig = norm_op(b * sq.asDiagonal());
            vals[k] = sig * sig;
        });
        double best = 0.0;
        for (int k = 0; k <= cells; ++k) {
            report.detail.push_back({4, "grid", k, vals[k]});
            best = std::max(best, vals[k]);
        }
        report.gamma[3] = std::sqrt(best);
    }

    // gamma5: exact norms over the dyadic interval family with |Lambda| >= len_min
    {
        struct Cell {
            double lo, hi;
        };
        std::vector<Cell> cells;
        double width = whi - wlo;
        int levels = 0;
        while (width / std::pow(2.0, levels) >= params.len_min * (1.0 - 1e-12)) {
            const int count = 1 << levels;
            const double w = width / count;
            for (int i = 0; i < count; ++i)
                cells.push_back({wlo + i * w, wlo + (i + 1) * w});
            ++levels;
        }
        std::vector<double> vals(cells.size(), 0.0);
        parallel_for(0, static_cast<int>(cells.size()), [&](int c) {
            const Cell cell = cells[c];
            std::vector<int> idx;
            for (int i = 0; i < n; ++i) {
                const bool last_edge = cell.hi == whi;
                const bool in = ev[i] >= cell.lo && (last_edge ? ev[i] <= cell.hi : ev[i] < cell.hi);
                if (in) idx.push_back(i);
            }
            if (idx.empty()) return;
            Matrix cols(n, static_cast<int>(idx.size()));
            for (std::size_t j = 0; j < idx.size(); ++j) cols.col(j) = b.col(idx[j]);
            const double sig = norm_op(cols);
            vals[c] = sig * sig / (cell.hi - cell.lo);
        });
        double best = 0.0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            report.detail.push_back({5, "interval", static_cast<int>(c), vals[c]});
            best = std::max(best, vals[c]);
        }
        report.gamma[4] = std::sqrt(best);
    }

    return report;
}

ACReport ac_modulus(const Projection& p, const SpectralResolution& s,
                    const std::vector<double>& grid, double lipschitz_bound) {
    if (grid.size() < 2) throw ValidationError("ac_modulus: grid needs at least two points");
    for (std::size_t k = 0; k + 1 < grid.size(); ++k)
        if (!(grid[k] < grid[k + 1])) throw ValidationError("ac_modulus: grid must be ascending");

    const int n = s.dim();
    const Matrix c = p.matrix() * s.eigenvectors;  // columns P u_i

    auto prefix_count = [&](double lam) {
        int m = 0;
        while (m < n && s.eigenvalues[m] <= lam) ++m;
        return m;
    };

    ACReport report;
    report.grid = grid;
    report.lipschitz_bound = lipschitz_bound;
    report.cdf_norms.resize(grid.size());
    std::vector<double> quotients(grid.size() - 1, 0.0);

    parallel_for(0, static_cast<int>(grid.size()), [&](int k) {
        const int m = prefix_count(grid[k]);
        if (m == 0) {
            report.cdf_norms[k] = 0.0;
            return;
        }
        const double sig = norm_op(c.leftCols(m));
        report.cdf_norms[k] = sig * sig;
    });
    parallel_for(0, static_cast<int>(grid.size()) - 1, [&](int k) {
        const int m0 = prefix_count(grid[k]);
        const int m1 = prefix_count(grid[k + 1]);
        if (m1 == m0) return;
        const double sig = norm_op(c.middleCols(m0, m1 - m0));
        quotients[k] = sig * sig / (grid[k + 1] - grid[k]);
    });

    report.max_difference_quotient =
        quotients.empty() ? 0.0 : *std::max_element(quotients.begin(), quotients.end());
    report.lipschitz_flag = report.max_difference_quotient <= lipschitz_bound;
    return report;
}

HermitianOperator cutoff_operator(const SpectralResolution& s, int n, CutoffFamily family) {
    if (n < 1) throw std::invalid_argument("cutoff_operator: n must be >= 1");
    auto phi = [n, family](double lam) -> cxd {
        const double a = std::abs(lam);
        switch (family) {
            case CutoffFamily::Hard:
                return a <= n ? 1.0 : 0.0;
            case CutoffFamily::Ramp:
                if (a <= n) return 1.0;
                if (a >= n + 1.0) return 0.0;
                return n + 1.0 - a;
        }
        throw std::invalid_argument("cutoff_operator: unknown family");
    };
    return HermitianOperator(apply_function(s, phi));
}

Vector smooth_vector_filter(const SpectralResolution& s, const Vector& f, double n_bound,
                            double big_n_bound, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("smooth_vector_filter: eps must be positive");
    if (!(n_bound > 0.0) || !(big_n_bound > 0.0))
        throw std::invalid_argument("smooth_vector_filter: bounds must be positive");
    if (s.dim() >= 2) {
        const double gap =
            median_gap_in_window(s, s.eigenvalues[0] - 1.0, s.eigenvalues[s.dim() - 1] + 1.0);
        if (eps < 3.0 * gap)
            throw MeshError("under-resolved mesh: filter eps below 3x bulk spacing");
    }
    const int n = s.dim();
    const Vector fh = s.eigenvectors.adjoint() * f;

    // cells of width eps/2 tiling [-n_bound, n_bound]; a cell is accepted when
    // the density estimate ||delta(center,eps) f|| stays below big_n_bound
    const double cell_w = eps / 2.0;
    auto cell_of = [&](double lam) { return static_cast<long>(std::floor((lam + n_bound) / cell_w)); };
    const long cell_count = cell_of(n_bound) + 1;

    auto cell_accepted = [&](long c) -> bool {
        if (c < 0 || c >= cell_count) return false;
        const double center = -n_bound + (c + 0.5) * cell_w;
        double norm2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = s.eigenvalues[i] - center;
            const double p = (eps / kPi) / (d * d + eps * eps);
            norm2 += p * p * std::norm(fh[i]);
        }
        return std::sqrt(norm2) <= big_n_bound;
    };

    Vector gh = Vector::Zero(n);
    for (int i = 0; i < n; ++i) {
        const double lam = s.eigenvalues[i];
        if (std::abs(lam) > n_bound) continue;
        if (cell_accepted(cell_of(lam))) gh[i] = fh[i];
    }
    return s.eigenvectors * gh;
}

PacEstimate pac_infty_estimate(const SpectralResolution& s, const std::vector<Matrix>& candidates,
                               const RegularizationParams& params, double smooth_spread_tol,
                               double rank_tol) {
    if (candidates.empty()) throw ValidationError("pac_infty_estimate: no candidates");
    const int n = s.dim();
    PacEstimate out{Projection::zero(n), {}, {}};
    out.reports.reserve(candidates.size());
    std::vector<const Matrix*> accepted;
    for (const Matrix& g : candidates) {
        SmoothnessReport r = gamma_estimates(g, s, params);
        const bool ok = r.all_finite() && r.spread() <= smooth_spread_tol;
        out.accepted.push_back(ok);
        out.reports.push_back(std::move(r));
        if (ok) accepted.push_back(&g);
    }
    if (accepted.empty()) return out;
    Matrix concat(n, n * static_cast<int>(accepted.size()));
    for (std::size_t k = 0; k < accepted.size(); ++k)
        concat.middleCols(static_cast<int>(k) * n, n) = accepted[k]->adjoint();
    if (norm_max(concat) == 0.0) return out;
    out.projection = range_projection(concat, rank_tol);
    return out;
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
}  // namespace

void write_smoothness_csv(const std::string& path, const SmoothnessReport& r) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("write_smoothness_csv: cannot open " + path);
    f << "functional,kind,index,value\n";
    for (const auto& row : r.detail)
        f << row.functional << ',' << row.kind << ',' << row.index << ',' << fmt17(row.value)
          << '\n';
}

std::string smoothness_json(const SmoothnessReport& r) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = "smoothness_report";
    j["gamma"] = {r.gamma[0], r.gamma[1], r.gamma[2], r.gamma[3], r.gamma[4]};
    j["spread"] = r.spread();
    j["params"] = {{"eps_min", r.params.eps_min},
                   {"len_min", r.params.len_min},
                   {"t_window", r.params.t_window},
                   {"window", {r.params.window_lo, r.params.window_hi}},
                   {"probe_count", r.params.probe_count},
                   {"probe_seed", r.params.probe_seed}};
    return j.dump(2) + "\n";
}

void write_ac_csv(const std::string& path, const ACReport& r) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("write_ac_csv: cannot open " + path);
    f << "index,lambda,cdf_norm\n";
    for (std::size_t k = 0; k < r.grid.size(); ++k)
        f << k << ',' << fmt17(r.grid[k]) << ',' << fmt17(r.cdf_norms[k]) << '\n';
}

std::string ac_json(const ACReport& r) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = "ac_report";
    j["grid_points"] = r.grid.size();
    j["max_difference_quotient"] = r.max_difference_quotient;
    j["lipschitz_bound"] = r.lipschitz_bound;
    j["lipschitz_flag"] = r.lipschitz_flag;
    return j.dump(2) + "\n";
}

}  // namespace scatterkit
