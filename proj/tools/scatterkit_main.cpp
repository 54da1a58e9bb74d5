#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "scatterkit/cli.hpp"

namespace {

int dispatch(const std::string& sub, const std::string& config_path, const std::string& out_dir,
             const scatterkit::RunOverrides& overrides) {
    try {
        scatterkit::ScenarioConfig config = scatterkit::load_config(config_path);
        return scatterkit::run_scenario(sub, config, out_dir, overrides);
    } catch (const scatterkit::MeshError& e) {
        std::cerr << "scatterkit: " << e.what() << "\n";
        return scatterkit::kExitValidation;
    } catch (const scatterkit::ValidationError& e) {
        std::cerr << "scatterkit: " << e.what() << "\n";
        return scatterkit::kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "scatterkit: error: " << e.what() << "\n";
        return scatterkit::kExitValidation;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scatterkit - stationary scattering diagnostics on dense Hermitian operators"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    scatterkit::RunOverrides overrides;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "scenario config (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "override perturbation/probe seed")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--threads", threads, "worker thread budget");
    };

    CLI::App* spectrum = app.add_subcommand("spectrum", "eigenvalues and density histogram");
    CLI::App* smooth = app.add_subcommand("smoothness", "regularized smoothness functionals");
    CLI::App* acdiag = app.add_subcommand("acdiag", "norm absolute-continuity diagnostics");
    CLI::App* wave = app.add_subcommand("wave", "wave-operator computation");
    CLI::App* verify = app.add_subcommand("verify-kr", "full verification pipeline");
    for (CLI::App* sub : {spectrum, smooth, acdiag, wave, verify}) add_common(sub);
    wave->add_option("--method", overrides.method, "time | weak | stationary");
    wave->add_option("--sign", overrides.sign, "plus | minus");

    CLI11_PARSE(app, argc, argv);

    if (seed_set) overrides.seed = seed;
    if (threads > 0) {
        overrides.threads = threads;
    } else if (const char* env = std::getenv("SCATTERKIT_THREADS")) {
        overrides.threads = std::atoi(env);
    }

    std::string sub;
    if (spectrum->parsed()) sub = "spectrum";
    if (smooth->parsed()) sub = "smoothness";
    if (acdiag->parsed()) sub = "acdiag";
    if (wave->parsed()) sub = "wave";
    if (verify->parsed()) sub = "verify-kr";
    return dispatch(sub, config_path, out_dir, overrides);
}
