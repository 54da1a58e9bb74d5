#include "scatterkit/numeric.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace scatterkit {

bool is_finite(const Matrix& a) {
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (!std::isfinite(a(i, j).real()) || !std::isfinite(a(i, j).imag())) return false;
    return true;
}

Matrix hermitize(const Matrix& a) { return 0.5 * (a + a.adjoint()); }

namespace {
Vector deterministic_start(Eigen::Index n) {
    SplitMix64 rng(0xC0FFEEull);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.complex_gaussian();
    v /= v.norm();
    return v;
}
}  // namespace

double norm_op(const Matrix& a, double rel_tol, int max_iter) {
    if (a.rows() == 0 || a.cols() == 0) return 0.0;
    const double scale = norm_max(a);
    if (scale == 0.0) return 0.0;
    Vector v = deterministic_start(a.cols());
    double sigma = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vector w = a * v;
        const double s = w.norm();
        if (s == 0.0) return 0.0;
        v = a.adjoint() * w;
        const double nv = v.norm();
        if (nv == 0.0) return s;
        v /= nv;
        if (it > 0 && std::abs(s - sigma) <= rel_tol * s) return s;
        sigma = s;
    }
    return sigma;
}

double hermitian_eig_max(const Matrix& a, double rel_tol, int max_iter) {
    // shift so the target eigenvalue dominates in modulus
    const double bound = norm_op(a, rel_tol, max_iter);
    if (bound == 0.0) return 0.0;
    const Matrix shifted = a + bound * Matrix::Identity(a.rows(), a.cols());
    Vector v = deterministic_start(a.cols());
    double lam = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vector w = shifted * v;
        const double s = w.norm();
        if (s == 0.0) return -bound;
        w /= s;
        const double ray = std::real(cxd(w.adjoint() * (shifted * w)));
        v = w;
        if (it > 0 && std::abs(ray - lam) <= rel_tol * std::max(1.0, std::abs(ray))) {
            return ray - bound;
        }
        lam = ray;
    }
    return lam - bound;
}

namespace {
std::atomic<int> g_thread_budget{0};  // 0 = unset, use default
}

int thread_budget() {
    int n = g_thread_budget.load();
    if (n > 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw > 8 ? 8 : hw);
}

void set_thread_budget(int n) { g_thread_budget.store(n < 1 ? 1 : n); }

void parallel_for(int begin, int end, const std::function<void(int)>& body) {
    const int count = end - begin;
    if (count <= 0) return;
    const int threads = std::min(thread_budget(), count);
    if (threads <= 1) {
        for (int i = begin; i < end; ++i) body(i);
        return;
    }
    std::atomic<int> next{begin};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= end) return;
                body(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace scatterkit
