#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "scatterkit/models.hpp"
#include "scatterkit/operator_core.hpp"

using namespace scatterkit;

namespace {
Matrix mat2(cxd a, cxd b, cxd c, cxd d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}
}  // namespace

TEST_CASE("spectral_decompose: diagonal case sorts ascending") {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 0) = 3.0;
    m(1, 1) = 1.0;
    m(2, 2) = 2.0;
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    CHECK(s.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.eigenvalues[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(s.eigenvalues[2] == doctest::Approx(3.0).epsilon(1e-14));
    // permuted standard basis
    CHECK(std::abs(s.eigenvectors(1, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(s.eigenvectors(2, 1)) == doctest::Approx(1.0));
    CHECK(std::abs(s.eigenvectors(0, 2)) == doctest::Approx(1.0));
}

TEST_CASE("spectral_decompose: symmetry-forced 2x2") {
    SpectralResolution s = spectral_decompose(HermitianOperator(mat2(0, 1, 1, 0)));
    CHECK(s.eigenvalues[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(s.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-14));
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(s.eigenvectors(0, 0) - r) < 1e-12);
    CHECK(std::abs(s.eigenvectors(1, 0) + r) < 1e-12);
    CHECK(std::abs(s.eigenvectors(0, 1) - r) < 1e-12);
    CHECK(std::abs(s.eigenvectors(1, 1) - r) < 1e-12);
}

TEST_CASE("spectral_decompose: path Laplacian N=4 matches closed form and charpoly roots") {
    ModelSpec spec;
    spec.kind = ModelSpec::Kind::PathLaplacian;
    spec.dim = 4;
    HermitianOperator h = build_operator(spec);
    SpectralResolution s = spectral_decompose(h);
    const RealVector expect = path_laplacian_eigenvalues(4);
    for (int k = 0; k < 4; ++k) CHECK(s.eigenvalues[k] == doctest::Approx(expect[k]).epsilon(1e-12));
    const auto roots = oracles::charpoly_roots(h.matrix(), -0.5, 4.5, 2000);
    REQUIRE(roots.size() == 4);
    for (int k = 0; k < 4; ++k) CHECK(s.eigenvalues[k] == doctest::Approx(roots[k]).epsilon(1e-8));
}

TEST_CASE("spectral_decompose: reconstruction, orthonormality, determinism") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const Matrix m = oracles::random_hermitian(seed, 24, 2.0);
        HermitianOperator h(m);
        SpectralResolution s = spectral_decompose(h);
        const Matrix u = s.eigenvectors;
        CHECK(norm_max(u.adjoint() * u - Matrix::Identity(24, 24)) < defaults::ortho_tol);
        Matrix recon = u * s.eigenvalues.cast<cxd>().asDiagonal() * u.adjoint();
        CHECK(norm_max(recon - h.matrix()) < defaults::recon_tol * std::max(1.0, norm_op(m)));
        SpectralResolution s2 = spectral_decompose(h);
        CHECK(norm_max(s.eigenvectors - s2.eigenvectors) == 0.0);
        CHECK((s.eigenvalues - s2.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("spectral_decompose: sweep exhaustion carries iteration count") {
    const Matrix m = oracles::random_hermitian(9, 8);
    try {
        spectral_decompose(HermitianOperator(m), 1e-13, 0);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.iterations == 0);
    }
}

TEST_CASE("hermitian operator rejects non-hermitian and non-finite input") {
    CHECK_THROWS_AS((HermitianOperator(mat2(0, 1, 2, 0))), ValidationError);
    Matrix bad = mat2(0, 1, 1, 0);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((HermitianOperator(bad)), ValidationError);
}

TEST_CASE("apply_function: identity, constants, squares") {
    const Matrix m = mat2(0, 1, 1, 0);
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    CHECK(norm_max(apply_function(s, [](double x) { return cxd(x, 0); }) - m) < 1e-13);
    CHECK(norm_max(apply_function(s, [](double) { return cxd(1, 0); }) - Matrix::Identity(2, 2)) <
          1e-13);
    CHECK(norm_max(apply_function(s, [](double x) { return cxd(x * x, 0); }) -
                   Matrix::Identity(2, 2)) < 1e-13);
}

TEST_CASE("apply_function: homomorphism and non-finite detection") {
    const Matrix m = oracles::random_hermitian(11, 12);
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    auto phi = [](double x) { return cxd(std::cos(x), 0.3 * x); };
    auto psi = [](double x) { return cxd(x * x - 0.5, -x); };
    const Matrix lhs = apply_function(s, [&](double x) { return phi(x) * psi(x); });
    const Matrix rhs = apply_function(s, phi) * apply_function(s, psi);
    CHECK(norm_max(lhs - rhs) < defaults::fc_tol);

    Matrix z = Matrix::Zero(2, 2);
    SpectralResolution sz = spectral_decompose(HermitianOperator(z));
    CHECK_THROWS_WITH_AS(apply_function(sz, [](double x) { return cxd(1.0 / x, 0); }),
                         doctest::Contains("eigenvalue"), Error);
}

TEST_CASE("spectral_projection: trivial sets and diagonal selection") {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 0) = 1.0;
    m(1, 1) = 2.0;
    m(2, 2) = 3.0;
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    CHECK(norm_max(spectral_projection(s, BorelSet::real_line()).matrix() -
                   Matrix::Identity(3, 3)) < 1e-13);
    CHECK(norm_max(spectral_projection(s, BorelSet::empty()).matrix()) == 0.0);
    const Matrix p = spectral_projection(s, BorelSet::closed(1.5, 2.5)).matrix();
    Matrix expect = Matrix::Zero(3, 3);
    expect(1, 1) = 1.0;
    CHECK(norm_max(p - expect) < 1e-13);
}

TEST_CASE("spectral_projection: lattice property E(A)E(B) = E(A intersect B)") {
    const Matrix m = oracles::random_hermitian(21, 16, 2.0);
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    const BorelSet a(std::vector<BorelSet::Interval>{{-2.0, 0.3, true, true},
                                                    {0.8, 1.5, true, false}});
    const BorelSet b = BorelSet::closed(-0.5, 1.2);
    const Matrix lhs = spectral_projection(s, a).matrix() * spectral_projection(s, b).matrix();
    const Matrix rhs = spectral_projection(s, a.intersect(b)).matrix();
    CHECK(norm_max(lhs - rhs) < defaults::proj_tol);
}

TEST_CASE("propagator: trivial values, closed form, unitarity, group law") {
    Matrix scalar(1, 1);
    scalar(0, 0) = kPi;
    SpectralResolution ss = spectral_decompose(HermitianOperator(scalar));
    CHECK(norm_max(propagator(ss, 0.0) - Matrix::Identity(1, 1)) < 1e-14);
    CHECK(std::abs(propagator(ss, 1.0)(0, 0) - cxd(-1.0, 0.0)) < 1e-13);

    const Matrix m = mat2(0, 1, 1, 0);
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    for (double t : {0.3, 1.7, -2.2}) {
        const Matrix u = propagator(s, t);
        const Matrix closed = std::cos(t) * Matrix::Identity(2, 2) - cxd(0, 1) * std::sin(t) * m;
        CHECK(norm_max(u - closed) < 1e-13);
    }

    const Matrix hr = oracles::random_hermitian(5, 10, 3.0);
    SpectralResolution sr = spectral_decompose(HermitianOperator(hr));
    const Matrix u1 = propagator(sr, 0.7);
    const Matrix u2 = propagator(sr, -1.9);
    CHECK(norm_max(u1 * u1.adjoint() - Matrix::Identity(10, 10)) < defaults::unit_tol);
    CHECK(norm_max(u1 * u2 - propagator(sr, 0.7 - 1.9)) < defaults::unit_tol);
}

TEST_CASE("resolvent: scalar values and defining identity") {
    Matrix z1(1, 1);
    z1(0, 0) = 0.0;
    SpectralResolution s0 = spectral_decompose(HermitianOperator(z1));
    CHECK(std::abs(resolvent(s0, cxd(0, 1))(0, 0) - cxd(0, 1)) < 1e-14);

    Matrix d(2, 2);
    d.setZero();
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    SpectralResolution sd = spectral_decompose(HermitianOperator(d));
    const Matrix r = resolvent(sd, cxd(1.0, 1.0));
    CHECK(std::abs(r(0, 0) - cxd(0, 1)) < 1e-13);
    CHECK(std::abs(r(1, 1) - cxd(0.5, 0.5)) < 1e-13);

    const Matrix m = oracles::random_hermitian(31, 20, 2.0);
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    const cxd z(0.0, 0.05);
    const Matrix res = resolvent(s, z);
    double dist = 1e300;
    for (int i = 0; i < 20; ++i) dist = std::min(dist, std::abs(cxd(s.eigenvalues[i], 0) - z));
    const double kappa = norm_op(m) / dist;
    CHECK(norm_max((m - z * Matrix::Identity(20, 20)) * res - Matrix::Identity(20, 20)) <
          defaults::res_tol * std::max(1.0, kappa) * 100);
}

TEST_CASE("resolvent: spectral pole guard") {
    Matrix d(2, 2);
    d.setZero();
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    SpectralResolution s = spectral_decompose(HermitianOperator(d));
    try {
        resolvent(s, cxd(2.0, 0.0), 1e-6);
        FAIL("expected SpectralPoleError");
    } catch (const SpectralPoleError& e) {
        CHECK(e.eigenvalue == doctest::Approx(2.0));
    }
}

TEST_CASE("first resolvent identity on random operators") {
    const Matrix m = oracles::random_hermitian(41, 14, 2.0);
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    const cxd z1(0.3, 0.8), z2(-1.1, -0.4);
    const Matrix r1 = resolvent(s, z1), r2 = resolvent(s, z2);
    CHECK(norm_max(r1 - r2 - (z1 - z2) * r1 * r2) < 1e-11);
}

TEST_CASE("delta_smoothing: scalar Poisson kernel and argument guard") {
    Matrix scalar(1, 1);
    scalar(0, 0) = 1.5;
    SpectralResolution s = spectral_decompose(HermitianOperator(scalar));
    const double eps = 0.2;
    for (double lam : {1.5, 0.9, 3.0}) {
        const double expect = (eps / kPi) / ((1.5 - lam) * (1.5 - lam) + eps * eps);
        CHECK(delta_smoothing(s, lam, eps).matrix()(0, 0).real() ==
              doctest::Approx(expect).epsilon(1e-13));
    }
    CHECK(delta_smoothing(s, 1.5, eps).matrix()(0, 0).real() ==
          doctest::Approx(1.0 / (kPi * eps)).epsilon(1e-13));
    CHECK_THROWS_AS(delta_smoothing(s, 0.0, -1.0), std::invalid_argument);
}

TEST_CASE("delta_smoothing: both defining expressions agree; PSD; g21 form") {
    const Matrix m = oracles::random_hermitian(51, 12, 2.0);
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    const double lam = 0.4, eps = 0.3;
    const Matrix rp = resolvent(s, cxd(lam, eps));
    const Matrix rm = resolvent(s, cxd(lam, -eps));
    const Matrix form1 = (rp - rm) / cxd(0.0, 2.0 * kPi);
    const Matrix form2 = (eps / kPi) * rp * rm;
    const Matrix d = delta_smoothing(s, lam, eps).matrix();
    CHECK(norm_max(form1 - form2) < defaults::delta_tol);
    CHECK(norm_max(d - form1) < defaults::delta_tol);

    Matrix neg = -d;
    CHECK(hermitian_eig_max(neg) < defaults::psd_tol);  // d >= 0

    SplitMix64 rng(7);
    const Vector f = rng.unit_vector(12);
    const double lhs = std::real(cxd(f.adjoint() * (d * f)));
    CHECK(lhs == doctest::Approx((eps / kPi) * (rp * f).squaredNorm()).epsilon(1e-11));
    CHECK(lhs == doctest::Approx((eps / kPi) * (rm * f).squaredNorm()).epsilon(1e-11));
}

TEST_CASE("delta_smoothing: total Poisson mass and two-site example") {
    const Matrix m = oracles::random_hermitian(61, 8, 1.5);
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    SplitMix64 rng(8);
    const Vector f = rng.unit_vector(8);
    // dense quadrature of <delta(l,eps)f,f> over a wide window
    const double eps = 0.4, lo = -60.0, hi = 60.0;
    const int steps = 60000;
    double mass = 0.0;
    const Vector fh = s.eigenvectors.adjoint() * f;
    for (int k = 0; k <= steps; ++k) {
        const double lam = lo + (hi - lo) * k / steps;
        double v = 0.0;
        for (int i = 0; i < 8; ++i) {
            const double d = s.eigenvalues[i] - lam;
            v += (eps / kPi) / (d * d + eps * eps) * std::norm(fh[i]);
        }
        mass += (k == 0 || k == steps ? 0.5 : 1.0) * v;
    }
    mass *= (hi - lo) / steps;
    CHECK(mass == doctest::Approx(1.0).epsilon(5e-3));  // tails ~ eps/distance

    Matrix two = Matrix::Zero(2, 2);
    two(1, 1) = 10.0;
    SpectralResolution s2 = spectral_decompose(HermitianOperator(two));
    const Matrix d2 = delta_smoothing(s2, 0.0, 0.01).matrix();
    CHECK(d2(0, 0).real() == doctest::Approx(1.0 / (0.01 * kPi)).epsilon(1e-12));
    CHECK(d2(1, 1).real() == doctest::Approx((0.01 / kPi) / (100.0 + 1e-4)).epsilon(1e-10));
    CHECK(std::abs(d2(0, 1)) < 1e-15);
}

TEST_CASE("g40: delta sesquilinear form equals the discrete Stieltjes sum") {
    const Matrix m = oracles::random_hermitian(71, 10, 2.0);
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    SplitMix64 rng(9);
    const Vector f = rng.unit_vector(10), g = rng.unit_vector(10);
    const double lam = 0.2, eps = 0.35;
    const Vector fh = s.eigenvectors.adjoint() * f, gh = s.eigenvectors.adjoint() * g;
    cxd stieltjes = 0.0;
    for (int i = 0; i < 10; ++i) {
        const cxd den = (cxd(s.eigenvalues[i], 0) - cxd(lam, eps)) *
                        (cxd(s.eigenvalues[i], 0) - cxd(lam, -eps));
        stieltjes += (eps / kPi) / den * std::conj(gh[i]) * fh[i];
    }
    const Matrix d = delta_smoothing(s, lam, eps).matrix();
    const cxd direct = cxd(g.adjoint() * (d * f));
    CHECK(std::abs(direct - stieltjes) < defaults::delta_tol);
}

TEST_CASE("g3: resolvent equals the truncated time integral") {
    // scalar case
    Matrix scalar(1, 1);
    scalar(0, 0) = 0.7;
    SpectralResolution ss = spectral_decompose(HermitianOperator(scalar));
    const double eps = 0.25, t_max = std::log(1e10) / eps;
    for (bool plus : {true, false}) {
        const Matrix q = oracles::resolvent_time_quadrature(ss, 1.1, eps, plus, t_max, 24000);
        const Matrix r = resolvent(ss, cxd(1.1, plus ? eps : -eps));
        CHECK(norm_max(q - r) / norm_max(r) < 1e-6);
    }
    // 8x8 case
    const Matrix m = oracles::random_hermitian(81, 8, 2.0);
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    for (bool plus : {true, false}) {
        const Matrix q = oracles::resolvent_time_quadrature(s, 0.4, eps, plus, t_max, 24000);
        const Matrix r = resolvent(s, cxd(0.4, plus ? eps : -eps));
        CHECK(norm_max(q - r) / norm_max(r) < 1e-6);
    }
}

TEST_CASE("dedicated propagator/resolvent/delta agree with the apply_function route") {
    const Matrix m = oracles::random_hermitian(91, 12, 2.0);
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    const double t = 1.3;
    CHECK(norm_max(propagator(s, t) -
                   apply_function(s, [&](double x) { return std::exp(cxd(0, -t * x)); })) < 1e-10);
    const cxd z(0.1, 0.6);
    CHECK(norm_max(resolvent(s, z) -
                   apply_function(s, [&](double x) { return 1.0 / (cxd(x, 0) - z); })) < 1e-10);
    const double lam = -0.2, eps = 0.3;
    CHECK(norm_max(delta_smoothing(s, lam, eps).matrix() - apply_function(s, [&](double x) {
                       return cxd((eps / kPi) / ((x - lam) * (x - lam) + eps * eps), 0);
                   })) < 1e-10);
}

TEST_CASE("spectral_density: orthogonal spectral supports give zero density") {
    Matrix m = Matrix::Zero(4, 4);
    m(0, 0) = 0.0;
    m(1, 1) = 1.0;
    m(2, 2) = 2.0;
    m(3, 3) = 3.0;
    SpectralResolution s = spectral_decompose(HermitianOperator(m));
    Vector f = Vector::Zero(4), g = Vector::Zero(4);
    f[0] = 1.0;
    g[2] = 1.0;
    DensityTrail trail = spectral_density(s, f, g, 1.0, {0.5, 0.4, 0.3});
    for (const cxd& v : trail.values) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("spectral_density: point mass diverges like 1/(pi eps), flagged unstable") {
    Matrix scalar(1, 1);
    scalar(0, 0) = 2.0;
    SpectralResolution s = spectral_decompose(HermitianOperator(scalar));
    Vector one(1);
    one[0] = 1.0;
    DensityTrail trail = spectral_density(s, one, one, 2.0, {0.4, 0.2, 0.1});
    for (std::size_t k = 0; k < trail.eps.size(); ++k)
        CHECK(trail.values[k].real() ==
              doctest::Approx(1.0 / (kPi * trail.eps[k])).epsilon(1e-12));
    CHECK_FALSE(trail.stabilized);
}

TEST_CASE("spectral_density: g30 localization for E(Lambda)f away from Lambda") {
    ModelSpec spec;
    spec.kind = ModelSpec::Kind::PathLaplacian;
    spec.dim = 64;
    SpectralResolution s = spectral_decompose(build_operator(spec));
    SplitMix64 rng(10);
    Vector f = rng.unit_vector(64);
    const BorelSet band = BorelSet::closed(2.5, 3.5);
    const Vector pf = spectral_projection(s, band).matrix() * f;
    // lambda far below the band: density must vanish at mesh-valid eps
    DensityTrail trail = spectral_density(s, pf, pf, 1.0, {0.3});
    CHECK(std::abs(trail.final_value) < 0.02);
}

TEST_CASE("spectral_density: path Laplacian band density matches counting quotient") {
    ModelSpec spec;
    spec.kind = ModelSpec::Kind::PathLaplacian;
    spec.dim = 128;
    SpectralResolution s = spectral_decompose(build_operator(spec));
    const Matrix band = spectral_projection(s, BorelSet::closed(0.8, 3.2)).matrix();
    Vector ones = Vector::Ones(128);
    Vector f = band * ones;
    f /= f.norm();
    DensityTrail trail = spectral_density(s, f, f, 2.0, {0.3, 0.25, 0.2, 0.15, 0.1});
    CHECK(trail.stabilized);
    // counting oracle at matching resolution h: <E((2-h/2,2+h/2])f,f>/h
    const double h = 0.4;
    const Vector fh = s.eigenvectors.adjoint() * f;
    double count = 0.0;
    for (int i = 0; i < 128; ++i)
        if (s.eigenvalues[i] > 2.0 - h / 2 && s.eigenvalues[i] <= 2.0 + h / 2)
            count += std::norm(fh[i]);
    const double quotient = count / h;
    CHECK(trail.final_value.real() == doctest::Approx(quotient).epsilon(0.25));
}

TEST_CASE("range_projection: full rank, zero, rank one") {
    const Matrix m = oracles::random_hermitian(101, 6, 1.0) +
                     cxd(3.0, 0.0) * Matrix::Identity(6, 6);
    CHECK(norm_max(range_projection(m, 1e-10).matrix() - Matrix::Identity(6, 6)) < 1e-10);
    CHECK(norm_max(range_projection(Matrix::Zero(5, 5), 0.5).matrix()) == 0.0);

    SplitMix64 rng(11);
    const Vector u = rng.gaussian_vector(7), v = rng.gaussian_vector(7);
    const Matrix outer = u * v.adjoint();
    const Matrix p = range_projection(outer, 1e-8).matrix();
    const Matrix expect = u * u.adjoint() / u.squaredNorm();
    CHECK(norm_max(p - expect) < 1e-10);
    CHECK(norm_max(p * outer - outer) < 1e-10);
    CHECK_THROWS_AS(range_projection(outer, 0.0), std::invalid_argument);
}

TEST_CASE("matrix JSON round trip is bit-exact") {
    SplitMix64 rng(12);
    Matrix m = rng.gaussian_matrix(9, 9);
    m(0, 0) = cxd(1.0 / 3.0, -2.0 / 7.0);
    const std::string path =
        (std::filesystem::temp_directory_path() / "scatterkit_roundtrip.json").string();
    save_matrix_json(path, m);
    const Matrix back = load_matrix_json(path);
    REQUIRE(back.rows() == 9);
    for (int j = 0; j < 9; ++j)
        for (int i = 0; i < 9; ++i) {
            CHECK(back(i, j).real() == m(i, j).real());
            CHECK(back(i, j).imag() == m(i, j).imag());
        }
    std::filesystem::remove(path);
}

TEST_CASE("BorelSet: measure, membership, overlap rejection") {
    BorelSet set(std::vector<BorelSet::Interval>{{0.0, 1.0, true, false},
                                                {1.0, 2.0, true, true}});
    CHECK(set.measure() == doctest::Approx(2.0));
    CHECK(set.contains(0.0));
    CHECK(set.contains(1.0));
    CHECK(set.contains(2.0));
    CHECK_FALSE(set.contains(2.5));
    CHECK_THROWS_AS((BorelSet(std::vector<BorelSet::Interval>{{0.0, 1.0, true, true},
                                                               {1.0, 2.0, true, true}})),
                    ValidationError);
    CHECK_THROWS_AS((BorelSet(std::vector<BorelSet::Interval>{{1.0, 0.0, true, true}})), ValidationError);
}
