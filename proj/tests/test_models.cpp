#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "scatterkit/models.hpp"
#include "scatterkit/trace_space.hpp"

using namespace scatterkit;

TEST_CASE("build_operator: path laplacian and multiplication") {
    ModelSpec p;
    p.kind = ModelSpec::Kind::PathLaplacian;
    p.dim = 2;
    Matrix expect(2, 2);
    expect << 2.0, -1.0, -1.0, 2.0;
    CHECK(norm_max(build_operator(p).matrix() - expect) == 0.0);

    ModelSpec m;
    m.kind = ModelSpec::Kind::Multiplication;
    m.dim = 4;
    m.lo = 0.0;
    m.hi = 1.0;
    const Matrix d = build_operator(m).matrix();
    CHECK(d(0, 0).real() == doctest::Approx(0.25));
    CHECK(d(1, 1).real() == doctest::Approx(0.5));
    CHECK(d(2, 2).real() == doctest::Approx(0.75));
    CHECK(d(3, 3).real() == doctest::Approx(1.0));
}

TEST_CASE("build_operator: dim-64 path laplacian matches the closed-form spectrum") {
    ModelSpec p;
    p.kind = ModelSpec::Kind::PathLaplacian;
    p.dim = 64;
    SpectralResolution s = spectral_decompose(build_operator(p));
    const RealVector expect = path_laplacian_eigenvalues(64);
    CHECK(s.eigenvalues[0] > 0.0);
    CHECK(s.eigenvalues[63] < 4.0);
    for (int k = 0; k < 64; ++k)
        CHECK(s.eigenvalues[k] == doctest::Approx(expect[k]).epsilon(1e-11));
}

TEST_CASE("build_perturbation: zero strength, rank one at a site, trace-class profile") {
    PerturbationSpec z;
    z.dim = 8;
    z.strength = 0.0;
    CHECK(norm_max(build_perturbation(z).matrix()) == 0.0);

    PerturbationSpec r1;
    r1.dim = 8;
    r1.kind = PerturbationSpec::Kind::RankK;
    r1.rank = 1;
    r1.site = 3;
    r1.strength = 0.7;
    const Matrix v = build_perturbation(r1).matrix();
    CHECK(v(3, 3).real() == doctest::Approx(0.7));
    CHECK(schatten_norm(v, 1.0) == doctest::Approx(0.7).epsilon(1e-12));

    PerturbationSpec tc;
    tc.dim = 128;
    tc.kind = PerturbationSpec::Kind::RandomTraceClass;
    tc.strength = 1.0;
    tc.seed = 7;
    const Matrix w = build_perturbation(tc).matrix();
    const double expect = 2.0 - std::pow(2.0, -127.0);
    CHECK(schatten_norm(w, 1.0) == doctest::Approx(expect).epsilon(1e-12));

    PerturbationSpec bad;
    bad.dim = 4;
    bad.rank = 9;
    bad.strength = 1.0;
    CHECK_THROWS_AS(build_perturbation(bad), ValidationError);
}

TEST_CASE("build_perturbation: rank_k has exactly k nonzero singular values") {
    PerturbationSpec rk;
    rk.dim = 16;
    rk.kind = PerturbationSpec::Kind::RankK;
    rk.rank = 3;
    rk.site = -1;
    rk.strength = 0.5;
    rk.seed = 11;
    const RealVector sv = singular_values(build_perturbation(rk).matrix());
    for (int i = 0; i < 3; ++i) CHECK(sv[i] > 1e-6);
    for (int i = 3; i < 16; ++i) CHECK(sv[i] < 1e-12);
}

TEST_CASE("build_coupling: identity, band projection algebra, contraction norm") {
    CHECK(norm_max(build_coupling({}, 5, nullptr) - Matrix::Identity(5, 5)) == 0.0);

    ModelSpec p;
    p.kind = ModelSpec::Kind::PathLaplacian;
    p.dim = 32;
    SpectralResolution s = spectral_decompose(build_operator(p));
    CouplingSpec band;
    band.kind = CouplingSpec::Kind::BandLimited;
    band.c = 0.0;
    band.window_lo = 1.0;
    band.window_hi = 3.0;
    const Matrix j = build_coupling(band, 32, &s);
    const Matrix e = spectral_projection(s, BorelSet::closed(1.0, 3.0)).matrix();
    CHECK(norm_max(j - e) < 1e-12);
    CHECK(norm_max(j.adjoint() * j * e - e) < 1e-10);  // J*J = I on the band

    CouplingSpec c;
    c.kind = CouplingSpec::Kind::Contraction;
    c.seed = 3;
    const Matrix jc = build_coupling(c, 24, nullptr);
    CHECK(norm_op(jc) <= 1.0 + 1e-12);
}

TEST_CASE("builders are bit-reproducible under a fixed seed") {
    PerturbationSpec tc;
    tc.dim = 48;
    tc.kind = PerturbationSpec::Kind::RandomTraceClass;
    tc.strength = 0.3;
    tc.seed = 12345;
    const Matrix a = build_perturbation(tc).matrix();
    const Matrix b = build_perturbation(tc).matrix();
    CHECK(norm_max(a - b) == 0.0);

    const auto tmp = std::filesystem::temp_directory_path();
    const std::string p1 = (tmp / "skit_m1.json").string(), p2 = (tmp / "skit_m2.json").string();
    save_matrix_json(p1, a);
    save_matrix_json(p2, b);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("path laplacian histogram matches the band density within 10% in L1") {
    ModelSpec p;
    p.kind = ModelSpec::Kind::PathLaplacian;
    p.dim = 256;
    SpectralResolution s = spectral_decompose(build_operator(p));
    const double lo = 0.5, hi = 3.5;
    const int bins = 30;
    const double w = (hi - lo) / bins;
    double l1_diff = 0.0, l1_ref = 0.0;
    for (int b = 0; b < bins; ++b) {
        const double a = lo + b * w, c = a + w;
        int count = 0;
        for (int i = 0; i < 256; ++i)
            if (s.eigenvalues[i] >= a && s.eigenvalues[i] < c) ++count;
        const double hist = count / (256.0 * w);
        // bin-averaged analytic density
        const int sub = 64;
        double ref = 0.0;
        for (int q = 0; q < sub; ++q) ref += path_laplacian_density(a + (q + 0.5) * w / sub);
        ref /= sub;
        l1_diff += std::abs(hist - ref) * w;
        l1_ref += ref * w;
    }
    CHECK(l1_diff / l1_ref < 0.10);
}
