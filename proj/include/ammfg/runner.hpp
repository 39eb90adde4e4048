#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ammfg/config.hpp"
#include "ammfg/errors.hpp"
#include "ammfg/game.hpp"
#include "ammfg/hjb.hpp"
#include "ammfg/mfg.hpp"
#include "ammfg/parallel.hpp"
#include "ammfg/textio.hpp"
#include "ammfg/version.hpp"

namespace ammfg {

enum class Subcommand { Validate, Hjb, Mfg, Game, NashSweep };

inline std::optional<Subcommand> subcommand_from_string(const std::string& s) {
    if (s == "validate") return Subcommand::Validate;
    if (s == "hjb") return Subcommand::Hjb;
    if (s == "mfg") return Subcommand::Mfg;
    if (s == "game") return Subcommand::Game;
    if (s == "nash-sweep") return Subcommand::NashSweep;
    return std::nullopt;
}

inline const char* subcommand_name(Subcommand s) {
    switch (s) {
    case Subcommand::Validate: return "validate";
    case Subcommand::Hjb: return "hjb";
    case Subcommand::Mfg: return "mfg";
    case Subcommand::Game: return "game";
    case Subcommand::NashSweep: return "nash-sweep";
    }
    return "?";
}

// Exit-code taxonomy: 0 ok, 2 config, 3 admissibility/growth, 4 numerical,
// 5 non-convergence, 6 io.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const config_error*>(&e)) return 2;
    if (dynamic_cast<const validation_error*>(&e)) return 3;
    if (dynamic_cast<const numerical_error*>(&e)) return 4;
    if (dynamic_cast<const convergence_error*>(&e)) return 5;
    if (dynamic_cast<const io_error*>(&e)) return 6;
    if (dynamic_cast<const std::invalid_argument*>(&e)) return 2;
    return 1;
}

inline const char* error_category(int exit_code) {
    switch (exit_code) {
    case 2: return "config";
    case 3: return "validation";
    case 4: return "numerical";
    case 5: return "convergence";
    case 6: return "io";
    default: return "internal";
    }
}

namespace detail {

inline std::string surface_csv(const ValueSurface& s) {
    std::string out = "t,x,V,dVdx,policy\n";
    for (int j = 0; j <= s.tgrid.steps; ++j) {
        const double t = s.tgrid.node(j);
        for (int i = 0; i < s.sgrid.n_x; ++i) {
            out += fmt_g17(t);
            out += ',';
            out += fmt_g17(s.sgrid.node(i));
            out += ',';
            out += fmt_g17(s.v[s.idx(j, i)]);
            out += ',';
            out += fmt_g17(s.dvdx[s.idx(j, i)]);
            out += ',';
            out += fmt_g17(s.policy[s.idx(j, i)]);
            out += '\n';
        }
    }
    return out;
}

inline std::string mfg_flow_csv(const MfgSolution& sol) {
    std::string out = "iter,t,qbar,w_min,w_zero,w_max,residual\n";
    for (std::size_t k = 0; k < sol.history.size(); ++k) {
        const MfgIterate& it = sol.history[k];
        for (int j = 0; j <= it.flow.grid.steps; ++j) {
            out += std::to_string(k + 1);
            out += ',';
            out += fmt_g17(it.flow.grid.node(j));
            out += ',';
            out += fmt_g17(it.flow.values[j]);
            out += ',';
            out += fmt_g17(it.law.weights[j][0]);
            out += ',';
            out += fmt_g17(it.law.weights[j][1]);
            out += ',';
            out += fmt_g17(it.law.weights[j][2]);
            out += ',';
            out += fmt_g17(it.residual);
            out += '\n';
        }
    }
    return out;
}

inline std::string mfg_summary_csv(const MfgSolution& sol, double best_response_gap) {
    std::string out = "iter,residual,best_response_gap\n";
    for (std::size_t k = 0; k < sol.history.size(); ++k) {
        out += std::to_string(k + 1);
        out += ',';
        out += fmt_g17(sol.history[k].residual);
        out += ',';
        if (k + 1 == sol.history.size()) out += fmt_g17(best_response_gap);
        out += '\n';
    }
    return out;
}

inline std::string game_summary_csv(const GameResult& gr) {
    std::string out = "player,j_hat,se\n";
    for (std::size_t i = 0; i < gr.j_hat.size(); ++i) {
        out += std::to_string(i + 1);
        out += ',';
        out += fmt_g17(gr.j_hat[i]);
        out += ',';
        out += fmt_g17(gr.se[i]);
        out += '\n';
    }
    return out;
}

inline std::string epsilon_csv(const NashGapReport& report) {
    std::string out = "n,eps_hat,ci_lo,ci_hi,paths\n";
    for (const auto& row : report.rows) {
        out += std::to_string(row.n);
        out += ',';
        out += fmt_g17(row.eps_hat);
        out += ',';
        out += fmt_g17(row.ci_lo);
        out += ',';
        out += fmt_g17(row.ci_hi);
        out += ',';
        out += std::to_string(row.paths);
        out += '\n';
    }
    return out;
}

} // namespace detail

struct RunOutcome {
    int exit_code = 0;
    std::vector<std::filesystem::path> files;
};

// Orchestrates one experiment: computes everything first, then writes all
// output files atomically (or none, if anything fails along the way). The
// manifest is written last.
inline RunOutcome run_experiment(const RunConfig& cfg, Subcommand sub,
                                 const std::filesystem::path& out_dir,
                                 const std::string& raw_config_text = "") {
    const auto t_start = std::chrono::steady_clock::now();
    nlohmann::json summary;
    std::vector<std::pair<std::string, std::string>> outputs; // filename -> bytes
    int exit_code = 0;

    auto solve_equilibrium = [&cfg]() {
        return solve_mfg(cfg.pool, cfg.control, cfg.cost, cfg.noise, cfg.law0, cfg.time,
                         cfg.grid, cfg.mfg);
    };

    switch (sub) {
    case Subcommand::Validate: {
        const auto adm = validate_admissibility(cfg.pool, cfg.control, cfg.time);
        const auto growth = validate_growth_bound(cfg.cost, cfg.grid.x_lo, cfg.grid.x_hi, 201);
        summary["admissibility_max_abs_control"] = adm.max_abs_control;
        summary["admissibility_bound"] = adm.bound;
        summary["admissibility_pass"] = adm.pass;
        summary["growth_pass"] = growth.pass;
        summary["impact_bound"] = impact_bound(cfg.pool, cfg.control);
        break;
    }
    case Subcommand::Hjb: {
        // standalone control problem: zero mean flow
        const MeanFlow flow = MeanFlow::zero(cfg.time);
        const ValueSurface s = solve_hjb(cfg.pool, cfg.control, cfg.cost, cfg.noise, flow, cfg.grid);
        outputs.emplace_back("value_surface.csv", detail::surface_csv(s));
        summary["v0_law_average"] = initial_value_under_law(s, cfg.law0);
        summary["n_x"] = cfg.grid.n_x;
        summary["steps"] = cfg.time.steps;
        break;
    }
    case Subcommand::Mfg: {
        const MfgSolution sol = solve_equilibrium();
        const VerifyReport verify = verify_solution(sol, cfg.pool, cfg.control, cfg.cost,
                                                    cfg.noise, cfg.law0, cfg.mfg.seed);
        outputs.emplace_back("mfg_flow.csv", detail::mfg_flow_csv(sol));
        outputs.emplace_back("mfg_summary.csv",
                             detail::mfg_summary_csv(sol, verify.best_response_gap));
        summary["converged"] = sol.converged;
        summary["iterations"] = sol.iterations;
        summary["final_residual"] =
            sol.history.empty() ? 0.0 : sol.history.back().residual;
        summary["best_response_gap"] = verify.best_response_gap;
        summary["best_response_gap_se"] = verify.gap_se;
        summary["law_w1_max"] = verify.law_w1_max;
        summary["state_ks_max"] = verify.state_ks_max;
        summary["policy_clamp_count"] = sol.surface.clamp_count.load();
        if (!sol.converged) exit_code = 5;
        break;
    }
    case Subcommand::Game: {
        const MfgSolution sol = solve_equilibrium();
        if (!sol.converged)
            throw convergence_error("mfg did not converge; cannot run the game on its policy");
        const GameConfig gc = cfg.game_config();
        const InterpolatedSurfacePolicy eq{&sol.surface};
        const std::vector<PlayerPolicy> policies(static_cast<std::size_t>(gc.n),
                                                 PlayerPolicy(eq));
        const GameResult gr = simulate_game(gc, policies);
        outputs.emplace_back("game_summary.csv", detail::game_summary_csv(gr));
        summary["pooled_payoff"] = gr.pooled;
        summary["pooled_se"] = gr.pooled_se;
        summary["min_reserve"] = gr.min_reserve;
        summary["terminal_reserve_mean"] = gr.terminal_reserve_mean;
        summary["terminal_price_mean"] = gr.terminal_price_mean;
        summary["max_accounting_rel_err"] = gr.max_accounting_rel_err;
        summary["policy_clamp_count"] = sol.surface.clamp_count.load();
        break;
    }
    case Subcommand::NashSweep: {
        const MfgSolution sol = solve_equilibrium();
        if (!sol.converged)
            throw convergence_error("mfg did not converge; cannot sweep on its policy");
        const GameConfig gc = cfg.game_config();
        const InterpolatedSurfacePolicy eq{&sol.surface};
        const NashGapReport report =
            nash_gap_sweep(gc, cfg.sweep_n, PlayerPolicy(eq), cfg.grid);
        outputs.emplace_back("epsilon.csv", detail::epsilon_csv(report));
        for (const auto& row : report.rows)
            summary["eps_hat"][std::to_string(row.n)] = row.eps_hat;
        break;
    }
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create output directory " + out_dir.string() + ": " + ec.message());

    RunOutcome outcome;
    outcome.exit_code = exit_code;
    try {
        for (const auto& [name, bytes] : outputs) {
            const auto path = out_dir / name;
            atomic_write(path, bytes);
            outcome.files.push_back(path);
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                .count();
        const std::string echo = serialize_config(cfg);
        nlohmann::json manifest;
        manifest["artifact_version"] = kVersion;
        manifest["subcommand"] = subcommand_name(sub);
        char hash[32];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(
                          fnv1a_64(raw_config_text.empty() ? echo : raw_config_text)));
        manifest["config_hash"] = std::string("fnv1a64:") + hash;
        manifest["seeds"] = {{"mfg", cfg.mfg.seed}, {"game", cfg.game.seed}};
        manifest["threads"] = max_threads();
        manifest["wall_time_seconds"] = wall;
        manifest["exit_code"] = exit_code;
        manifest["summary"] = summary;
        manifest["config_echo"] = echo;
        const auto mpath = out_dir / "manifest.json";
        atomic_write(mpath, manifest.dump(2) + "\n");
        outcome.files.push_back(mpath);
    } catch (...) {
        for (const auto& f : outcome.files) std::filesystem::remove(f, ec);
        throw;
    }
    return outcome;
}

} // namespace ammfg
