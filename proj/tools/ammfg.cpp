// ammfg — mean-field-game solver and finite-N game simulator for traders in
// a constant-product AMM pool.
//
//   ammfg <validate|hjb|mfg|game|nash-sweep> --config <path> --out <dir>
//         [--threads N] [--seed S]

#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ammfg/config.hpp"
#include "ammfg/parallel.hpp"
#include "ammfg/runner.hpp"
#include "ammfg/textio.hpp"
#include "ammfg/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Mean-field game of traders in a constant-product AMM pool"};
    app.set_version_flag("--version", ammfg::kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    int threads = 0;
    std::optional<std::uint64_t> seed_override;

    const char* names[] = {"validate", "hjb", "mfg", "game", "nash-sweep"};
    const char* descs[] = {
        "check admissibility and growth bounds, write the manifest",
        "solve the standalone HJB (zero mean flow), dump the value surface",
        "run the mean-field fixed point, dump flow and summary",
        "simulate the finite-N game under the equilibrium policy",
        "sweep the approximate-Nash gap over player counts",
    };
    for (int i = 0; i < 5; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descs[i]);
        sub->add_option("--config", config_path, "configuration file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--threads", threads, "worker thread cap (env AMMFG_THREADS)");
        sub->add_option("--seed", seed_override, "override mfg and game seeds");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        // CLI11 returns 0 for --help/--version; anything else is a usage error.
        return rc == 0 ? 0 : 2;
    }

    const std::string sub_name = app.get_subcommands().front()->get_name();
    const auto sub = ammfg::subcommand_from_string(sub_name);

    try {
        if (threads > 0) ammfg::set_max_threads(threads);
        const std::string raw = ammfg::read_file(config_path);
        ammfg::RunConfig cfg = ammfg::parse_config_text(raw, config_path);
        if (seed_override) {
            cfg.mfg.seed = *seed_override;
            cfg.game.seed = *seed_override;
        }
        const auto outcome = ammfg::run_experiment(cfg, *sub, out_dir, raw);
        if (outcome.exit_code != 0)
            std::fprintf(stderr, "ammfg: error: category=%s: did not converge within max_iter\n",
                         ammfg::error_category(outcome.exit_code));
        return outcome.exit_code;
    } catch (const std::exception& e) {
        const int code = ammfg::exit_code_for(e);
        std::fprintf(stderr, "ammfg: error: category=%s: %s\n",
                     ammfg::error_category(code), e.what());
        return code;
    }
}
