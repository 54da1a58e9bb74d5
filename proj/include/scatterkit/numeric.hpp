#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace scatterkit {

using cxd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// z was too close to an eigenvalue for the resolvent to be trustworthy.
struct SpectralPoleError : Error {
    double eigenvalue;
    SpectralPoleError(const std::string& msg, double ev) : Error(msg), eigenvalue(ev) {}
};

struct ConvergenceError : Error {
    int iterations;
    ConvergenceError(const std::string& msg, int iters) : Error(msg), iterations(iters) {}
};

// Regularization scales finer than the local eigenvalue mesh supports.
struct MeshError : Error {
    explicit MeshError(const std::string& msg) : Error(msg) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// ---------------------------------------------------------------------------
// Portable seeded RNG: SplitMix64 core, documented in the README so runs can
// be reproduced bit-exactly in other languages.
// ---------------------------------------------------------------------------

class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform on (0,1]: ((next() >> 11) + 1) * 2^-53
    double uniform() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    // Box-Muller pairs, cos branch first
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

    cxd complex_gaussian() {
        const double re = gaussian();
        const double im = gaussian();
        return {re, im};
    }

    Vector gaussian_vector(int n) {
        Vector v(n);
        for (int i = 0; i < n; ++i) v[i] = complex_gaussian();
        return v;
    }

    Vector unit_vector(int n) {
        Vector v = gaussian_vector(n);
        const double nrm = v.norm();
        return nrm > 0 ? Vector(v / nrm) : v;
    }

    Matrix gaussian_matrix(int rows, int cols) {
        Matrix m(rows, cols);
        for (int j = 0; j < cols; ++j)
            for (int i = 0; i < rows; ++i) m(i, j) = complex_gaussian();
        return m;
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Matrix helpers
// ---------------------------------------------------------------------------

bool is_finite(const Matrix& a);

inline double norm_max(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }
inline double norm_fro(const Matrix& a) { return a.norm(); }

// Largest singular value by power iteration on A*A. Deterministic start,
// converges to the value well before the vector settles, so near-degenerate
// top singular values are not a problem.
double norm_op(const Matrix& a, double rel_tol = 1e-13, int max_iter = 5000);

// Largest eigenvalue of a Hermitian matrix (may be negative).
double hermitian_eig_max(const Matrix& a, double rel_tol = 1e-13, int max_iter = 5000);

Matrix hermitize(const Matrix& a);

// ---------------------------------------------------------------------------
// Data-parallel loop. Results must be written to disjoint slots so output is
// independent of the thread count.
// ---------------------------------------------------------------------------

int thread_budget();
void set_thread_budget(int n);
void parallel_for(int begin, int end, const std::function<void(int)>& body);

}  // namespace scatterkit
