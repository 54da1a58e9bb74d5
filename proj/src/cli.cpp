#include "scatterkit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace scatterkit {

namespace {

using nlohmann::json;

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void require_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ValidationError("config: " + where + " must be an object");
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key()))
            throw ValidationError("config: unknown key '" + item.key() + "' in " + where);
    }
}

double num(const json& j, const std::string& where) {
    if (!j.is_number()) throw ValidationError("config: " + where + " must be a number");
    return j.get<double>();
}

ModelSpec parse_model(const json& j) {
    require_keys(j, "model", {"kind", "dim", "lo", "hi", "values", "seed"});
    ModelSpec m;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "path_laplacian")
        m.kind = ModelSpec::Kind::PathLaplacian;
    else if (kind == "multiplication")
        m.kind = ModelSpec::Kind::Multiplication;
    else if (kind == "diagonal_custom")
        m.kind = ModelSpec::Kind::DiagonalCustom;
    else
        throw ValidationError("config: unknown model kind '" + kind + "'");
    m.dim = j.at("dim").get<int>();
    if (j.contains("lo")) m.lo = num(j["lo"], "model.lo");
    if (j.contains("hi")) m.hi = num(j["hi"], "model.hi");
    if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("values")) {
        for (const auto& v : j["values"]) m.values.push_back(num(v, "model.values[]"));
    }
    return m;
}

PerturbationSpec parse_perturbation(const json& j, int dim) {
    require_keys(j, "perturbation", {"kind", "rank", "site", "width", "strength", "seed"});
    PerturbationSpec p;
    p.dim = dim;
    const std::string kind = j.value("kind", "rank_k");
    if (kind == "rank_k")
        p.kind = PerturbationSpec::Kind::RankK;
    else if (kind == "local_potential")
        p.kind = PerturbationSpec::Kind::LocalPotential;
    else if (kind == "random_trace_class")
        p.kind = PerturbationSpec::Kind::RandomTraceClass;
    else
        throw ValidationError("config: unknown perturbation kind '" + kind + "'");
    if (j.contains("rank")) p.rank = j["rank"].get<int>();
    if (j.contains("site")) p.site = j["site"].get<int>();
    if (j.contains("width")) p.width = j["width"].get<int>();
    if (j.contains("strength")) p.strength = num(j["strength"], "perturbation.strength");
    if (j.contains("seed")) p.seed = j["seed"].get<std::uint64_t>();
    return p;
}

CouplingSpec parse_coupling(const json& j) {
    require_keys(j, "coupling", {"kind", "c", "window", "seed"});
    CouplingSpec c;
    const std::string kind = j.value("kind", "identity");
    if (kind == "identity")
        c.kind = CouplingSpec::Kind::Identity;
    else if (kind == "band_limited")
        c.kind = CouplingSpec::Kind::BandLimited;
    else if (kind == "contraction")
        c.kind = CouplingSpec::Kind::Contraction;
    else
        throw ValidationError("config: unknown coupling kind '" + kind + "'");
    if (j.contains("c")) c.c = num(j["c"], "coupling.c");
    if (j.contains("window")) {
        c.window_lo = num(j["window"][0], "coupling.window[0]");
        c.window_hi = num(j["window"][1], "coupling.window[1]");
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    return c;
}

SmoothnessSection parse_smoothness(const json& j) {
    require_keys(j, "smoothness",
                 {"g", "eps_min", "len_min", "t_window", "probe_count", "probe_seed", "sweep_dims",
                  "max_spread"});
    SmoothnessSection s;
    if (j.contains("g")) {
        const json& g = j["g"];
        require_keys(g, "smoothness.g",
                     {"kind", "lo_site", "hi_site", "band_filter", "eigen_target"});
        s.g_kind = g.value("kind", "position_box");
        if (s.g_kind != "position_box" && s.g_kind != "eigenprojection" && s.g_kind != "identity")
            throw ValidationError("config: unknown smoothness g kind '" + s.g_kind + "'");
        s.lo_site = g.value("lo_site", 0);
        s.hi_site = g.value("hi_site", 0);
        s.band_filter = g.value("band_filter", false);
        s.eigen_target = g.value("eigen_target", 0.0);
    }
    s.eps_min = j.value("eps_min", 0.1);
    s.len_min = j.value("len_min", 0.1);
    s.t_window = j.value("t_window", kPi / s.eps_min);
    s.probe_count = j.value("probe_count", 16);
    s.probe_seed = j.value("probe_seed", std::uint64_t{42});
    if (j.contains("sweep_dims"))
        for (const auto& d : j["sweep_dims"]) s.sweep_dims.push_back(d.get<int>());
    if (j.contains("max_spread")) s.max_spread = num(j["max_spread"], "smoothness.max_spread");
    return s;
}

AcdiagSection parse_acdiag(const json& j) {
    require_keys(j, "acdiag",
                 {"grid_lo", "grid_hi", "grid_step", "lipschitz_bound", "require_lipschitz",
                  "projection"});
    AcdiagSection a;
    a.grid_lo = j.value("grid_lo", 0.0);
    a.grid_hi = j.value("grid_hi", 1.0);
    a.grid_step = j.value("grid_step", 0.1);
    a.lipschitz_bound = j.value("lipschitz_bound", 0.0);
    a.require_lipschitz = j.value("require_lipschitz", false);
    a.projection = j.value("projection", "band");
    if (a.projection != "band" && a.projection != "identity")
        throw ValidationError("config: unknown acdiag projection '" + a.projection + "'");
    return a;
}

}  // namespace

double ScenarioConfig::tol(const std::string& name, double fallback) const {
    auto it = tolerances.find(name);
    return it == tolerances.end() ? fallback : it->second;
}

ScenarioConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("config: parse error: ") + e.what());
    }
    require_keys(j, "top level",
                 {"schema_version", "model", "perturbation", "coupling", "window", "schedules",
                  "smoothness", "acdiag", "tolerances", "outputs", "use_pac_estimate"});
    ScenarioConfig c;
    c.schema_version = j.value("schema_version", 0);
    if (c.schema_version != 1)
        throw ValidationError("config: unsupported schema_version (expected 1)");
    if (!j.contains("model")) throw ValidationError("config: missing model section");
    c.model = parse_model(j["model"]);
    c.perturbation.strength = 0.0;
    c.perturbation.dim = c.model.dim;
    if (j.contains("perturbation")) c.perturbation = parse_perturbation(j["perturbation"], c.model.dim);
    if (j.contains("coupling")) c.coupling = parse_coupling(j["coupling"]);
    if (j.contains("window")) {
        c.window_lo = num(j["window"][0], "window[0]");
        c.window_hi = num(j["window"][1], "window[1]");
    }
    if (j.contains("schedules")) {
        const json& s = j["schedules"];
        require_keys(s, "schedules", {"time", "epsilon"});
        if (s.contains("time")) {
            require_keys(s["time"], "schedules.time", {"t_max", "dt", "abel_rate"});
            c.time_t_max = num(s["time"].at("t_max"), "schedules.time.t_max");
            c.time_dt = num(s["time"].at("dt"), "schedules.time.dt");
            if (s["time"].contains("abel_rate"))
                c.abel_rate = num(s["time"]["abel_rate"], "schedules.time.abel_rate");
        }
        if (s.contains("epsilon")) {
            require_keys(s["epsilon"], "schedules.epsilon", {"points"});
            for (const auto& p : s["epsilon"].at("points"))
                c.eps_points.push_back(num(p, "schedules.epsilon.points[]"));
        }
    }
    if (j.contains("smoothness")) c.smoothness = parse_smoothness(j["smoothness"]);
    if (j.contains("acdiag")) c.acdiag = parse_acdiag(j["acdiag"]);
    if (j.contains("tolerances")) {
        for (const auto& item : j["tolerances"].items()) {
            static const std::set<std::string> known = {
                "exact_tol",     "agreement_tol", "isometry_tol",   "intertwining_tol",
                "conjugation_tol", "chain_tol",   "conv_tol",       "range_rank_tol",
                "pac_spread_tol", "stab_tol",     "lipschitz_bound"};
            if (!known.count(item.key()))
                throw ValidationError("config: unknown tolerance '" + item.key() + "'");
            c.tolerances[item.key()] = num(item.value(), "tolerances." + item.key());
        }
    }
    if (j.contains("use_pac_estimate")) {
        if (!j["use_pac_estimate"].is_boolean())
            throw ValidationError("config: use_pac_estimate must be a boolean");
        c.use_pac_estimate = j["use_pac_estimate"].get<bool>();
    }
    if (j.contains("outputs")) {
        require_keys(j["outputs"], "outputs", {"formats"});
        if (j["outputs"].contains("formats")) {
            c.output_formats.clear();
            for (const auto& f : j["outputs"]["formats"]) {
                const std::string fmt = f.get<std::string>();
                if (fmt != "json" && fmt != "csv")
                    throw ValidationError("config: unknown output format '" + fmt + "'");
                c.output_formats.push_back(fmt);
            }
        }
    }
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("config: cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

namespace {

struct BuiltScenario {
    HermitianOperator H;
    HermitianOperator H1;
    Matrix V;
    Matrix J;
    SpectralResolution S;
    BorelSet window;
};

BuiltScenario build_scenario(const ScenarioConfig& c, const RunOverrides& ov) {
    ModelSpec model = c.model;
    PerturbationSpec pert = c.perturbation;
    if (ov.seed) pert.seed = *ov.seed;
    HermitianOperator h = build_operator(model);
    SpectralResolution s = spectral_decompose(h);

    const double lo = s.eigenvalues[0];
    const double hi = s.eigenvalues[s.dim() - 1];
    if (c.window_lo < lo - 1e-12 || c.window_hi > hi + 1e-12 || !(c.window_lo < c.window_hi))
        throw ValidationError("window outside spectral band");

    HermitianOperator v = build_perturbation(pert);
    HermitianOperator h1(h.matrix() + v.matrix());
    Matrix j = build_coupling(c.coupling, c.model.dim, &s);
    return BuiltScenario{h, h1, v.matrix(), j, std::move(s),
                         BorelSet::closed(c.window_lo, c.window_hi)};
}

void check_schedule_mesh(const ScenarioConfig& c, const BuiltScenario& b) {
    if (c.eps_points.empty()) return;
    SpectralResolution s1 = spectral_decompose(b.H1);
    const double gap = std::max(median_gap_in_window(b.S, c.window_lo, c.window_hi),
                                median_gap_in_window(s1, c.window_lo, c.window_hi));
    const double eps_min = *std::min_element(c.eps_points.begin(), c.eps_points.end());
    if (eps_min < 3.0 * gap)
        throw MeshError("mesh-validity failure: epsilon schedule below 3x bulk spacing");
}

Matrix smoothness_operator(const SmoothnessSection& sec, const ScenarioConfig& c,
                           const SpectralResolution& s) {
    const int n = s.dim();
    if (sec.g_kind == "identity") return Matrix::Identity(n, n);
    if (sec.g_kind == "eigenprojection") {
        int best = 0;
        for (int i = 1; i < n; ++i)
            if (std::abs(s.eigenvalues[i] - sec.eigen_target) <
                std::abs(s.eigenvalues[best] - sec.eigen_target))
                best = i;
        const Vector u = s.eigenvectors.col(best);
        return u * u.adjoint();
    }
    if (sec.lo_site < 0 || sec.hi_site >= n || sec.lo_site > sec.hi_site)
        throw ValidationError("config: smoothness position box out of range");
    Matrix chi = Matrix::Zero(n, n);
    for (int i = sec.lo_site; i <= sec.hi_site; ++i) chi(i, i) = 1.0;
    if (!sec.band_filter) return chi;
    const Matrix band = spectral_projection(s, BorelSet::closed(c.window_lo, c.window_hi)).matrix();
    return chi * band;
}

int run_spectrum(const BuiltScenario& b, const std::string& out) {
    {
        std::ofstream f(out + "/spectrum.csv", std::ios::binary);
        if (!f) throw Error("cannot open " + out + "/spectrum.csv");
        f << "index,eigenvalue\n";
        for (int i = 0; i < b.S.dim(); ++i) f << i << ',' << fmt17(b.S.eigenvalues[i]) << '\n';
    }
    const double lo = b.S.eigenvalues[0];
    const double hi = b.S.eigenvalues[b.S.dim() - 1];
    emit_density_csv(out + "/density.csv", b.S, lo, hi, std::min(64, b.S.dim()));
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = "spectrum";
    j["dim"] = b.S.dim();
    j["min_eigenvalue"] = b.S.eigenvalues[0];
    j["max_eigenvalue"] = b.S.eigenvalues[b.S.dim() - 1];
    std::ofstream f(out + "/spectrum.json", std::ios::binary);
    f << j.dump(2) << "\n";
    return kExitPass;
}

int run_smoothness(const ScenarioConfig& c, const RunOverrides& ov, const std::string& out) {
    std::vector<int> dims = c.smoothness.sweep_dims;
    if (dims.empty()) dims.push_back(c.model.dim);
    std::vector<SmoothnessReport> reports;
    bool pass = true;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        ScenarioConfig ck = c;
        ck.model.dim = dims[k];
        ck.perturbation.dim = dims[k];
        if (c.smoothness.g_kind == "position_box" && dims.size() > 1) {
            // keep the same box length, recentred proportionally
            const int len = c.smoothness.hi_site - c.smoothness.lo_site;
            const int lo = dims[k] / 2 - len / 2 + (c.smoothness.lo_site % 2);
            ck.smoothness.lo_site = lo;
            ck.smoothness.hi_site = lo + len;
        }
        BuiltScenario b = build_scenario(ck, ov);
        std::uint64_t seed = ov.seed ? *ov.seed : ck.smoothness.probe_seed;
        RegularizationParams params = RegularizationParams::make(
            b.S, ck.window_lo, ck.window_hi, ck.smoothness.eps_min, ck.smoothness.len_min,
            ck.smoothness.t_window, ck.smoothness.probe_count, seed);
        const Matrix g = smoothness_operator(ck.smoothness, ck, b.S);
        SmoothnessReport r = gamma_estimates(g, b.S, params);
        if (c.smoothness.max_spread && r.spread() > *c.smoothness.max_spread) pass = false;
        const std::string tag = dims.size() > 1 ? "_n" + std::to_string(dims[k]) : "";
        write_smoothness_csv(out + "/smoothness" + tag + ".csv", r);
        std::ofstream f(out + "/smoothness" + tag + ".json", std::ios::binary);
        f << smoothness_json(r);
        reports.push_back(std::move(r));
    }
    if (dims.size() > 1) emit_spread_sweep_csv(out + "/gamma_spread_sweep.csv", dims, reports);
    return pass ? kExitPass : kExitCheckFailed;
}

int run_acdiag(const ScenarioConfig& c, const BuiltScenario& b, const std::string& out) {
    const AcdiagSection& a = c.acdiag;
    if (!(a.grid_lo < a.grid_hi) || !(a.grid_step > 0.0))
        throw ValidationError("config: bad acdiag grid");
    std::vector<double> grid;
    for (double x = a.grid_lo; x <= a.grid_hi + 1e-12; x += a.grid_step) grid.push_back(x);
    Projection p = a.projection == "identity"
                       ? Projection::identity(b.S.dim())
                       : spectral_projection(b.S, b.window);
    ACReport r = ac_modulus(p, b.S, grid, a.lipschitz_bound);
    write_ac_csv(out + "/ac.csv", r);
    std::ofstream f(out + "/ac.json", std::ios::binary);
    f << ac_json(r);
    if (a.require_lipschitz && !r.lipschitz_flag) return kExitCheckFailed;
    return kExitPass;
}

int run_wave(const ScenarioConfig& c, const BuiltScenario& b, const RunOverrides& ov,
             const std::string& out) {
    ScatteringPair pair = ScatteringPair::with_band_window(b.H, b.H1, b.J, b.window);
    const Sign sign = ov.sign == "minus" ? Sign::Minus : Sign::Plus;
    if (ov.sign != "plus" && ov.sign != "minus")
        throw ValidationError("wave: sign must be plus or minus");
    const double conv_tol = c.tol("conv_tol", 1e-2);
    WaveResult w;
    if (ov.method == "time") {
        w = time_dependent_wave(pair, sign, Schedule::time_grid(c.time_t_max, c.time_dt, c.abel_rate),
                                conv_tol);
    } else if (ov.method == "weak") {
        w = weak_wave(pair, sign, Schedule::time_grid(c.time_t_max, c.time_dt, c.abel_rate),
                      conv_tol);
    } else if (ov.method == "stationary") {
        if (c.eps_points.empty()) throw ValidationError("wave: stationary needs epsilon schedule");
        const double eps_max = *std::max_element(c.eps_points.begin(), c.eps_points.end());
        std::vector<double> grid = {c.window_lo - 3.0 * eps_max, c.window_hi + 3.0 * eps_max};
        w = stationary_wave(pair, sign, grid, Schedule::epsilon_points(c.eps_points), conv_tol);
    } else {
        throw ValidationError("wave: unknown method '" + ov.method + "'");
    }
    const std::string stem = out + "/wave_" + ov.method + "_" + ov.sign;
    write_wave_trail_csv(stem + "_trail.csv", w);
    std::ofstream f(stem + ".json", std::ios::binary);
    f << wave_result_json(w, norm_op(b.J));
    return w.converged ? kExitPass : kExitCheckFailed;
}

int run_verify_kr(const ScenarioConfig& c, const BuiltScenario& b, const std::string& out) {
    KRConfig kc;
    kc.window = b.window;
    kc.time_sched = Schedule::time_grid(c.time_t_max, c.time_dt, c.abel_rate);
    if (c.eps_points.empty()) throw ValidationError("verify-kr: epsilon schedule required");
    kc.eps_sched = Schedule::epsilon_points(c.eps_points);
    kc.coupling = b.J;
    kc.exact_tol = c.tol("exact_tol", kc.exact_tol);
    kc.agreement_tol = c.tol("agreement_tol", kc.agreement_tol);
    kc.isometry_tol = c.tol("isometry_tol", kc.isometry_tol);
    kc.intertwining_tol = c.tol("intertwining_tol", kc.intertwining_tol);
    kc.conjugation_tol = c.tol("conjugation_tol", kc.conjugation_tol);
    kc.chain_tol = c.tol("chain_tol", kc.chain_tol);
    kc.conv_tol = c.tol("conv_tol", kc.conv_tol);
    kc.range_rank_tol = c.tol("range_rank_tol", kc.range_rank_tol);
    kc.use_pac_estimate = c.use_pac_estimate;
    kc.pac_spread_tol = c.tol("pac_spread_tol", kc.pac_spread_tol);
    KRReport r = verify_kato_rosenblum(b.H, b.V, kc);
    std::ofstream f(out + "/kr_report.json", std::ios::binary);
    f << kr_report_json(r);
    write_kr_trails_csv(out + "/kr_trails.csv", r);
    return r.overall_pass ? kExitPass : kExitCheckFailed;
}

}  // namespace

int run_scenario(const std::string& subcommand, const ScenarioConfig& config,
                 const std::string& out_dir, const RunOverrides& overrides) {
    if (overrides.threads) set_thread_budget(*overrides.threads);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create output directory " + out_dir);

    if (subcommand == "smoothness") {
        // builds its own models (possibly a dim sweep)
        return run_smoothness(config, overrides, out_dir);
    }
    BuiltScenario b = build_scenario(config, overrides);
    if (subcommand == "wave" || subcommand == "verify-kr") check_schedule_mesh(config, b);

    if (subcommand == "spectrum") return run_spectrum(b, out_dir);
    if (subcommand == "acdiag") return run_acdiag(config, b, out_dir);
    if (subcommand == "wave") return run_wave(config, b, overrides, out_dir);
    if (subcommand == "verify-kr") return run_verify_kr(config, b, out_dir);
    throw ValidationError("unknown subcommand '" + subcommand + "'");
}

void emit_density_csv(const std::string& path, const SpectralResolution& s, double bin_lo,
                      double bin_hi, int bins) {
    if (!(bin_hi > bin_lo) || bins < 1) throw ValidationError("emit_density_csv: bad binning");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("emit_density_csv: cannot open " + path);
    f << "bin_lo,bin_hi,count,density\n";
    const double w = (bin_hi - bin_lo) / bins;
    for (int b = 0; b < bins; ++b) {
        const double lo = bin_lo + b * w;
        const double hi = lo + w;
        int count = 0;
        for (int i = 0; i < s.dim(); ++i) {
            const bool last = b == bins - 1;
            if (s.eigenvalues[i] >= lo && (last ? s.eigenvalues[i] <= hi : s.eigenvalues[i] < hi))
                ++count;
        }
        const double density = count / (static_cast<double>(s.dim()) * w);
        f << fmt17(lo) << ',' << fmt17(hi) << ',' << count << ',' << fmt17(density) << '\n';
    }
}

void emit_spread_sweep_csv(const std::string& path, const std::vector<int>& dims,
                           const std::vector<SmoothnessReport>& reports) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("emit_spread_sweep_csv: cannot open " + path);
    f << "dim,gamma1,gamma2,gamma3,gamma4,gamma5,spread\n";
    for (std::size_t k = 0; k < dims.size() && k < reports.size(); ++k) {
        const auto& g = reports[k].gamma;
        f << dims[k] << ',' << fmt17(g[0]) << ',' << fmt17(g[1]) << ',' << fmt17(g[2]) << ','
          << fmt17(g[3]) << ',' << fmt17(g[4]) << ',' << fmt17(reports[k].spread()) << '\n';
    }
}

}  // namespace scatterkit
