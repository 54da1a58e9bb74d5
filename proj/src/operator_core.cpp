#include "scatterkit/operator_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace scatterkit {

// ---------------------------------------------------------------------------
// HermitianOperator
// ---------------------------------------------------------------------------

HermitianOperator::HermitianOperator(const Matrix& a, double hermiticity_tol) {
    if (a.rows() != a.cols()) throw ValidationError("HermitianOperator: matrix must be square");
    if (!is_finite(a)) throw ValidationError("HermitianOperator: non-finite entries");
    const double dev = norm_max(a - a.adjoint());
    const double scale = std::max(1.0, norm_max(a));
    if (dev > hermiticity_tol * scale) {
        throw ValidationError("HermitianOperator: ||A - A*||_max = " + std::to_string(dev) +
                              " exceeds hermiticity tolerance");
    }
    m_ = hermitize(a);
}

double SpectralResolution::spectral_radius() const {
    if (eigenvalues.size() == 0) return 0.0;
    return std::max(std::abs(eigenvalues[0]), std::abs(eigenvalues[eigenvalues.size() - 1]));
}

double SpectralResolution::min_gap() const {
    if (eigenvalues.size() < 2) return std::numeric_limits<double>::infinity();
    double g = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i + 1 < eigenvalues.size(); ++i)
        g = std::min(g, eigenvalues[i + 1] - eigenvalues[i]);
    return g;
}

// ---------------------------------------------------------------------------
// Cyclic Jacobi eigensolver for Hermitian matrices.
//
// Each rotation zeroes one off-diagonal entry a_pq = b e^{i theta} with the
// unitary
//     G = [ c           s e^{i theta} ]
//         [ -s e^{-i theta}        c  ]
// where t = tan(angle) solves t^2 + 2 tau t - 1 = 0, tau = (a_qq - a_pp)/2b,
// taken as the smaller root for stability. Row-major sweep order and the
// final phase normalization make the output a deterministic function of the
// input bits.
// ---------------------------------------------------------------------------

namespace {

double offdiag_fro(const Matrix& a) {
    double s = 0.0;
    const Eigen::Index n = a.rows();
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
}

void jacobi_rotate(Matrix& a, Matrix& u, int p, int q) {
    const cxd apq = a(p, q);
    const double b = std::abs(apq);
    if (b == 0.0) return;
    const cxd phase = apq / b;  // e^{i theta}
    const double app = a(p, p).real();
    const double aqq = a(q, q).real();
    const double tau = (aqq - app) / (2.0 * b);
    const double sgn = tau >= 0.0 ? 1.0 : -1.0;
    const double t = sgn / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
    const double c = 1.0 / std::sqrt(1.0 + t * t);
    const double s = t * c;
    const cxd spe = s * phase;             // s e^{i theta}
    const cxd spc = s * std::conj(phase);  // s e^{-i theta}

    const Eigen::Index n = a.rows();
    // columns p, q of A and U
    for (Eigen::Index r = 0; r < n; ++r) {
        const cxd arp = a(r, p), arq = a(r, q);
        a(r, p) = arp * c - arq * spc;
        a(r, q) = arp * spe + arq * c;
        const cxd urp = u(r, p), urq = u(r, q);
        u(r, p) = urp * c - urq * spc;
        u(r, q) = urp * spe + urq * c;
    }
    // rows p, q of A
    for (Eigen::Index r = 0; r < n; ++r) {
        const cxd apr = a(p, r), aqr = a(q, r);
        a(p, r) = c * apr - spe * aqr;
        a(q, r) = spc * apr + c * aqr;
    }
    a(p, q) = 0.0;
    a(q, p) = 0.0;
    a(p, p) = cxd(a(p, p).real(), 0.0);
    a(q, q) = cxd(a(q, q).real(), 0.0);
}

}  // namespace

SpectralResolution spectral_decompose(const HermitianOperator& h, double off_tol, int max_sweeps) {
    const int n = h.dim();
    Matrix a = h.matrix();
    Matrix u = Matrix::Identity(n, n);
    const double fro = std::max(norm_fro(a), std::numeric_limits<double>::min());
    const double target = off_tol * fro;
    const double skip = target / std::max(1, n * n);

    int sweeps = 0;
    while (offdiag_fro(a) > target) {
        if (sweeps >= max_sweeps) {
            throw ConvergenceError("spectral_decompose: Jacobi sweeps exhausted after " +
                                       std::to_string(sweeps) + " sweeps",
                                   sweeps);
        }
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q)
                if (std::abs(a(p, q)) > skip) jacobi_rotate(a, u, p, q);
        ++sweeps;
    }

    // phase-normalize: first nonzero component of each eigenvector made real
    // positive
    for (int j = 0; j < n; ++j) {
        const double colmax = u.col(j).cwiseAbs().maxCoeff();
        const double thresh = colmax * 1e-12;
        for (int i = 0; i < n; ++i) {
            const double m = std::abs(u(i, j));
            if (m > thresh) {
                u.col(j) *= std::conj(u(i, j)) / m;
                u(i, j) = cxd(std::abs(u(i, j)), 0.0);
                break;
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto first_nonzero = [&](int j) {
        const double colmax = u.col(j).cwiseAbs().maxCoeff();
        const double thresh = colmax * 1e-12;
        for (int i = 0; i < n; ++i)
            if (std::abs(u(i, j)) > thresh) return i;
        return n;
    };
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        const double lx = a(x, x).real(), ly = a(y, y).real();
        if (lx != ly) return lx < ly;
        const int fx = first_nonzero(x), fy = first_nonzero(y);
        if (fx != fy) return fx < fy;
        return std::abs(u(fx, x)) > std::abs(u(fy, y));
    });

    SpectralResolution res;
    res.eigenvalues.resize(n);
    res.eigenvectors.resize(n, n);
    for (int j = 0; j < n; ++j) {
        res.eigenvalues[j] = a(order[j], order[j]).real();
        res.eigenvectors.col(j) = u.col(order[j]);
    }
    res.hamiltonian = h.matrix();
    res.sweeps = sweeps;
    return res;
}

// ---------------------------------------------------------------------------
// BorelSet
// ---------------------------------------------------------------------------

BorelSet::BorelSet(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
    for (const auto& iv : intervals_) {
        if (!(iv.lo <= iv.hi)) throw ValidationError("BorelSet: interval with lo > hi");
    }
    std::sort(intervals_.begin(), intervals_.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    for (std::size_t i = 0; i + 1 < intervals_.size(); ++i) {
        const auto& a = intervals_[i];
        const auto& b = intervals_[i + 1];
        const bool disjoint = a.hi < b.lo || (a.hi == b.lo && !(a.hi_closed && b.lo_closed));
        if (!disjoint) throw ValidationError("BorelSet: intervals overlap");
    }
}

BorelSet BorelSet::real_line() { return closed(-1e18, 1e18); }

double BorelSet::measure() const {
    double m = 0.0;
    for (const auto& iv : intervals_) m += iv.hi - iv.lo;
    return m;
}

bool BorelSet::contains(double x) const {
    for (const auto& iv : intervals_) {
        const bool above_lo = iv.lo_closed ? x >= iv.lo : x > iv.lo;
        const bool below_hi = iv.hi_closed ? x <= iv.hi : x < iv.hi;
        if (above_lo && below_hi) return true;
        if (x < iv.lo) break;
    }
    return false;
}

BorelSet BorelSet::intersect(const BorelSet& other) const {
    std::vector<Interval> out;
    for (const auto& a : intervals_) {
        for (const auto& b : other.intervals_) {
            double lo = std::max(a.lo, b.lo);
            double hi = std::min(a.hi, b.hi);
            if (lo > hi) continue;
            bool lo_closed = (a.lo > b.lo)   ? a.lo_closed
                             : (b.lo > a.lo) ? b.lo_closed
                                             : (a.lo_closed && b.lo_closed);
            bool hi_closed = (a.hi < b.hi)   ? a.hi_closed
                             : (b.hi < a.hi) ? b.hi_closed
                                             : (a.hi_closed && b.hi_closed);
            if (lo == hi && !(lo_closed && hi_closed)) continue;
            out.push_back(Interval{lo, hi, lo_closed, hi_closed});
        }
    }
    return BorelSet(std::move(out));
}

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

Projection::Projection(const Matrix& p, double proj_tol) {
    if (p.rows() != p.cols()) throw ValidationError("Projection: matrix must be square");
    const double herm = norm_max(p - p.adjoint());
    const double idem = norm_max(p * p - p);
    if (herm > proj_tol || idem > proj_tol) {
        throw ValidationError("Projection: ||P^2-P||_max = " + std::to_string(idem) +
                              ", ||P-P*||_max = " + std::to_string(herm) +
                              " exceed projection tolerance");
    }
    m_ = hermitize(p);
}

// ---------------------------------------------------------------------------
// Functional calculus
// ---------------------------------------------------------------------------

Matrix apply_function(const SpectralResolution& s, const std::function<cxd(double)>& phi) {
    const int n = s.dim();
    Vector vals(n);
    bool all_real = true;
    for (int i = 0; i < n; ++i) {
        const cxd v = phi(s.eigenvalues[i]);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
            throw Error("apply_function: phi is non-finite at eigenvalue " +
                        std::to_string(s.eigenvalues[i]));
        }
        if (v.imag() != 0.0) all_real = false;
        vals[i] = v;
    }
    Matrix r = s.eigenvectors * vals.asDiagonal() * s.eigenvectors.adjoint();
    return all_real ? hermitize(r) : r;
}

Projection spectral_projection(const SpectralResolution& s, const BorelSet& set) {
    const int n = s.dim();
    Vector ind(n);
    for (int i = 0; i < n; ++i) ind[i] = set.contains(s.eigenvalues[i]) ? 1.0 : 0.0;
    Matrix p = s.eigenvectors * ind.asDiagonal() * s.eigenvectors.adjoint();
    return Projection(hermitize(p));
}

Matrix spectral_cdf(const SpectralResolution& s, double lam) {
    const int n = s.dim();
    Vector ind(n);
    for (int i = 0; i < n; ++i) ind[i] = s.eigenvalues[i] <= lam ? 1.0 : 0.0;
    return hermitize(s.eigenvectors * ind.asDiagonal() * s.eigenvectors.adjoint());
}

Matrix propagator(const SpectralResolution& s, double t) {
    if (!std::isfinite(t)) throw std::invalid_argument("propagator: t must be finite");
    const int n = s.dim();
    Vector ph(n);
    for (int i = 0; i < n; ++i) ph[i] = std::exp(cxd(0.0, -t * s.eigenvalues[i]));
    return s.eigenvectors * ph.asDiagonal() * s.eigenvectors.adjoint();
}

Matrix resolvent(const SpectralResolution& s, cxd z, double guard) {
    const int n = s.dim();
    for (int i = 0; i < n; ++i) {
        if (std::abs(cxd(s.eigenvalues[i], 0.0) - z) < guard) {
            throw SpectralPoleError("resolvent: z within resolvent guard of eigenvalue " +
                                        std::to_string(s.eigenvalues[i]),
                                    s.eigenvalues[i]);
        }
    }
    Vector r(n);
    for (int i = 0; i < n; ++i) r[i] = 1.0 / (cxd(s.eigenvalues[i], 0.0) - z);
    return s.eigenvectors * r.asDiagonal() * s.eigenvectors.adjoint();
}

HermitianOperator delta_smoothing(const SpectralResolution& s, double lambda, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("delta_smoothing: eps must be positive");
    const int n = s.dim();
    Vector p(n);
    for (int i = 0; i < n; ++i) {
        const double d = s.eigenvalues[i] - lambda;
        p[i] = (eps / kPi) / (d * d + eps * eps);
    }
    Matrix m = s.eigenvectors * p.asDiagonal() * s.eigenvectors.adjoint();
    return HermitianOperator(hermitize(m));
}

DensityTrail spectral_density(const SpectralResolution& s, const Vector& f, const Vector& g,
                              double lambda, const std::vector<double>& eps_schedule,
                              double stab_tol) {
    if (eps_schedule.empty())
        throw std::invalid_argument("spectral_density: empty eps schedule");
    for (std::size_t k = 0; k < eps_schedule.size(); ++k) {
        if (!(eps_schedule[k] > 0.0))
            throw std::invalid_argument("spectral_density: eps must be positive");
        if (k > 0 && !(eps_schedule[k] < eps_schedule[k - 1]))
            throw std::invalid_argument("spectral_density: eps schedule must be strictly descending");
    }
    const Vector fh = s.eigenvectors.adjoint() * f;
    const Vector gh = s.eigenvectors.adjoint() * g;
    DensityTrail trail;
    trail.eps = eps_schedule;
    trail.values.reserve(eps_schedule.size());
    for (double eps : eps_schedule) {
        cxd v = 0.0;
        for (int i = 0; i < s.dim(); ++i) {
            const double d = s.eigenvalues[i] - lambda;
            v += (eps / kPi) / (d * d + eps * eps) * std::conj(gh[i]) * fh[i];
        }
        trail.values.push_back(v);
    }
    trail.final_value = trail.values.back();
    if (trail.values.size() >= 2) {
        const cxd last = trail.values[trail.values.size() - 1];
        const cxd prev = trail.values[trail.values.size() - 2];
        trail.stabilized = std::abs(last - prev) <= stab_tol * std::max(1.0, std::abs(last));
    } else {
        trail.stabilized = true;
    }
    return trail;
}

Projection range_projection(const Matrix& a, double rank_tol) {
    if (!(rank_tol > 0.0)) throw std::invalid_argument("range_projection: rank_tol must be positive");
    const int n = static_cast<int>(a.rows());
    if (norm_max(a) == 0.0) return Projection::zero(n);
    const Matrix gram = hermitize(a * a.adjoint());
    SpectralResolution eg = spectral_decompose(HermitianOperator(gram, 1e-8));
    const double sig_max = std::sqrt(std::max(0.0, eg.eigenvalues[n - 1]));
    const double cut = rank_tol * sig_max;
    Vector keep(n);
    for (int i = 0; i < n; ++i) {
        const double sig = std::sqrt(std::max(0.0, eg.eigenvalues[i]));
        keep[i] = sig > cut ? 1.0 : 0.0;
    }
    Matrix p = eg.eigenvectors * keep.asDiagonal() * eg.eigenvectors.adjoint();
    return Projection(hermitize(p));
}

// ---------------------------------------------------------------------------
// Save / load. 17 significant digits so decimal round-trips are bit-exact.
// ---------------------------------------------------------------------------

namespace {
void append_double(std::string& out, double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out += buf;
}
}  // namespace

void save_matrix_json(const std::string& path, const Matrix& a) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n) throw ValidationError("save_matrix_json: matrix must be square");
    std::string out;
    out.reserve(static_cast<std::size_t>(n) * n * 48 + 128);
    out += "{\"format\":\"scatterkit-matrix\",\"version\":1,\"dim\":";
    out += std::to_string(n);
    out += ",\"entries\":[";
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != 0 || j != 0) out += ',';
            out += '[';
            append_double(out, a(i, j).real());
            out += ',';
            append_double(out, a(i, j).imag());
            out += ']';
        }
    }
    out += "]}\n";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("save_matrix_json: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("save_matrix_json: write failed for " + path);
}

Matrix load_matrix_json(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("load_matrix_json: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw ValidationError(std::string("load_matrix_json: parse error: ") + e.what());
    }
    if (j.value("format", "") != "scatterkit-matrix" || j.value("version", 0) != 1)
        throw ValidationError("load_matrix_json: not a scatterkit-matrix v1 file");
    const int n = j.at("dim").get<int>();
    const auto& entries = j.at("entries");
    if (static_cast<int>(entries.size()) != n * n)
        throw ValidationError("load_matrix_json: entry count does not match dim");
    Matrix a(n, n);
    int k = 0;
    for (int i = 0; i < n; ++i)
        for (int j2 = 0; j2 < n; ++j2, ++k)
            a(i, j2) = cxd(entries[k][0].get<double>(), entries[k][1].get<double>());
    return a;
}

}  // namespace scatterkit
