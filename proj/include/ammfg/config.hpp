#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ammfg/errors.hpp"
#include "ammfg/game.hpp"
#include "ammfg/hjb.hpp"
#include "ammfg/law.hpp"
#include "ammfg/mfg.hpp"
#include "ammfg/pool.hpp"
#include "ammfg/reward.hpp"
#include "ammfg/textio.hpp"

namespace ammfg {

// Experiment configuration, parsed from a flat sectioned key = value file.
// Grammar: '[section]' headers, 'key = value' lines, '#' comments, blank
// lines ignored. Unknown sections or keys are rejected.
struct RunConfig {
    PoolConfig pool{};
    ControlInterval control{};
    CostModel cost{};
    NoiseConfig noise{1.0};
    TimeGrid time{};
    SpatialGrid grid{};      // resolved (derived when not given explicitly)
    bool grid_derived = true;
    InitialLaw law0{};
    FixedPointConfig mfg{};
    struct GameSection {
        int n = 8;
        long n_paths = 4000;
        std::uint64_t seed = 2;
        double y0 = 0.0;
    } game;
    std::vector<int> sweep_n = {2, 8, 32, 128};

    GameConfig game_config() const {
        GameConfig gc;
        gc.n = game.n;
        gc.n_paths = game.n_paths;
        gc.seed = game.seed;
        gc.y0 = game.y0;
        gc.tgrid = time;
        gc.pool = pool;
        gc.ctrl = control;
        gc.cost = cost;
        gc.noise = noise;
        gc.law0 = law0;
        return gc;
    }
};

namespace detail {

struct ConfigEntry {
    std::string value;
    int line = 0;
    mutable bool used = false;
};

using Section = std::map<std::string, ConfigEntry>;
using Sections = std::map<std::string, Section>;

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline Sections tokenize_config(const std::string& text, const std::string& name) {
    Sections sections;
    std::string current;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error(name + ":" + std::to_string(lineno) +
                                   ": malformed section header '" + line + "'");
            current = trim(line.substr(1, line.size() - 2));
            if (current.empty())
                throw config_error(name + ":" + std::to_string(lineno) + ": empty section name");
            sections[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(name + ":" + std::to_string(lineno) +
                               ": expected 'key = value', got '" + line + "'");
        if (current.empty())
            throw config_error(name + ":" + std::to_string(lineno) +
                               ": key outside any [section]");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw config_error(name + ":" + std::to_string(lineno) +
                               ": empty key or value in '" + line + "'");
        if (!sections[current].insert({key, {value, lineno}}).second)
            throw config_error(name + ":" + std::to_string(lineno) + ": duplicate key '" +
                               current + "." + key + "'");
    }
    return sections;
}

class ConfigReader {
public:
    ConfigReader(const Sections& s, std::string name) : sections_(s), name_(std::move(name)) {}

    bool has(const std::string& section, const std::string& key) const {
        const auto s = sections_.find(section);
        return s != sections_.end() && s->second.count(key) > 0;
    }

    const std::string& raw(const std::string& section, const std::string& key) const {
        const auto s = sections_.find(section);
        if (s == sections_.end() || !s->second.count(key))
            throw config_error(name_ + ": missing required key " + section + "." + key);
        const ConfigEntry& e = s->second.at(key);
        e.used = true;
        return e.value;
    }

    double number(const std::string& section, const std::string& key) const {
        const std::string& v = raw(section, key);
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        if (end == v.c_str() || *end != '\0' || !std::isfinite(x))
            throw config_error(name_ + ": " + section + "." + key +
                               ": not a finite number: '" + v + "'");
        return x;
    }

    double number_or(const std::string& section, const std::string& key, double dflt) const {
        return has(section, key) ? number(section, key) : dflt;
    }

    long integer(const std::string& section, const std::string& key) const {
        const std::string& v = raw(section, key);
        long x = 0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc{} || p != v.data() + v.size())
            throw config_error(name_ + ": " + section + "." + key + ": not an integer: '" + v + "'");
        return x;
    }

    long integer_or(const std::string& section, const std::string& key, long dflt) const {
        return has(section, key) ? integer(section, key) : dflt;
    }

    std::uint64_t seed_or(const std::string& section, const std::string& key,
                          std::uint64_t dflt) const {
        if (!has(section, key)) return dflt;
        const std::string& v = raw(section, key);
        std::uint64_t x = 0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc{} || p != v.data() + v.size())
            throw config_error(name_ + ": " + section + "." + key + ": not a seed: '" + v + "'");
        return x;
    }

    std::string word(const std::string& section, const std::string& key) const {
        return raw(section, key);
    }

    std::vector<int> int_list(const std::string& section, const std::string& key) const {
        const std::string& v = raw(section, key);
        std::vector<int> out;
        std::istringstream in(v);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            tok = trim(tok);
            if (tok.empty())
                throw config_error(name_ + ": " + section + "." + key + ": empty list entry");
            int x = 0;
            const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
            if (ec != std::errc{} || p != tok.data() + tok.size())
                throw config_error(name_ + ": " + section + "." + key +
                                   ": not an integer: '" + tok + "'");
            out.push_back(x);
        }
        if (out.empty())
            throw config_error(name_ + ": " + section + "." + key + ": empty list");
        return out;
    }

    // Every parsed key must have been consumed by a known-key lookup.
    void reject_unknown(const std::set<std::string>& known_sections) const {
        for (const auto& [sec, entries] : sections_) {
            if (!known_sections.count(sec))
                throw config_error(name_ + ": unknown section [" + sec + "]");
            for (const auto& [key, entry] : entries)
                if (!entry.used)
                    throw config_error(name_ + ":" + std::to_string(entry.line) +
                                       ": unknown key " + sec + "." + key);
        }
    }

private:
    const Sections& sections_;
    std::string name_;
};

} // namespace detail

// Parses and fully validates a configuration. Module-level invariants are
// re-checked here, then the admissibility and growth validators run; any
// failure aborts the parse.
inline RunConfig parse_config_text(const std::string& text, const std::string& name) {
    const auto sections = detail::tokenize_config(text, name);
    const detail::ConfigReader r(sections, name);
    RunConfig cfg;

    cfg.pool.k = r.number("pool", "k");
    cfg.pool.x0 = r.number("pool", "x0");
    cfg.pool.eps0 = r.number("pool", "eps0");
    cfg.pool.sigma0 = r.number("pool", "sigma0");

    cfg.control.a_min = r.number("control", "a_min");
    cfg.control.a_max = r.number("control", "a_max");

    const std::string family = r.word("cost", "family");
    if (family == "quadratic") {
        cfg.cost.family = CostFamily::Quadratic;
        cfg.cost.phi_h = r.number("cost", "phi_h");
        cfg.cost.phi_l = r.number("cost", "phi_l");
    } else if (family == "linear_terminal") {
        cfg.cost.family = CostFamily::LinearTerminal;
        cfg.cost.c_l = r.number("cost", "c_l");
    } else if (family == "zero") {
        cfg.cost.family = CostFamily::Zero;
    } else {
        throw config_error(name + ": cost.family must be quadratic, linear_terminal or zero, got '" +
                           family + "'");
    }
    cfg.cost.c1 = r.number_or("cost", "c1", 1.0);

    cfg.noise.sigma = r.number("noise", "sigma");

    cfg.time.horizon = r.number("time", "horizon");
    cfg.time.steps = static_cast<int>(r.integer("time", "steps"));

    const std::string law = r.word("law0", "family");
    if (law == "dirac") {
        cfg.law0 = InitialLaw::dirac(r.number("law0", "c"));
    } else if (law == "gaussian") {
        cfg.law0 = InitialLaw::gaussian(r.number("law0", "mean"), r.number("law0", "sd"));
    } else if (law == "uniform") {
        cfg.law0 = InitialLaw::uniform(r.number("law0", "lo"), r.number("law0", "hi"));
    } else {
        throw config_error(name + ": law0.family must be dirac, gaussian or uniform, got '" +
                           law + "'");
    }

    cfg.mfg.damping = r.number_or("mfg", "damping", 0.5);
    cfg.mfg.max_iter = static_cast<int>(r.integer_or("mfg", "max_iter", 50));
    cfg.mfg.particles = r.integer_or("mfg", "particles", 20000);
    cfg.mfg.seed = r.seed_or("mfg", "seed", 1);
    if (r.has("mfg", "mode")) {
        const std::string mode = r.word("mfg", "mode");
        if (mode == "picard_damped") cfg.mfg.mode = FixedPointMode::PicardDamped;
        else if (mode == "fictitious_play") cfg.mfg.mode = FixedPointMode::FictitiousPlay;
        else throw config_error(name + ": mfg.mode must be picard_damped or fictitious_play, got '" +
                                mode + "'");
    }

    cfg.game.n = static_cast<int>(r.integer_or("game", "n", 8));
    cfg.game.n_paths = r.integer_or("game", "n_paths", 4000);
    cfg.game.seed = r.seed_or("game", "seed", 2);
    cfg.game.y0 = r.number_or("game", "y0", 0.0);

    if (r.has("sweep", "n_list")) cfg.sweep_n = r.int_list("sweep", "n_list");

    // Type invariants (exit class: config).
    cfg.pool.validate();
    cfg.control.validate();
    cfg.cost.validate();
    cfg.noise.validate();
    cfg.time.validate();
    cfg.law0.validate();
    if (cfg.game.n < 1) throw config_error(name + ": game.n must be >= 1");
    if (cfg.game.n_paths < 100) throw config_error(name + ": game.n_paths must be >= 100");
    for (std::size_t i = 1; i < cfg.sweep_n.size(); ++i)
        if (cfg.sweep_n[i] <= cfg.sweep_n[i - 1])
            throw config_error(name + ": sweep.n_list must be strictly ascending");
    if (!cfg.sweep_n.empty() && cfg.sweep_n.front() < 1)
        throw config_error(name + ": sweep.n_list entries must be >= 1");

    // Spatial grid: explicit, or derived from the law and reachability.
    const int n_x = static_cast<int>(r.integer_or("grid", "n_x", 101));
    if (r.has("grid", "x_lo") != r.has("grid", "x_hi"))
        throw config_error(name + ": grid.x_lo and grid.x_hi must be given together");
    if (r.has("grid", "x_lo")) {
        cfg.grid = SpatialGrid{r.number("grid", "x_lo"), r.number("grid", "x_hi"), n_x};
        cfg.grid_derived = false;
    } else {
        cfg.grid = default_spatial_grid(cfg.law0, cfg.control, cfg.noise, cfg.time.horizon, n_x);
        cfg.grid_derived = true;
    }
    cfg.grid.validate();

    // tol default depends on the control range.
    cfg.mfg.tol = r.number_or("mfg", "tol", 1e-3 * cfg.control.range());
    cfg.mfg.validate();

    r.reject_unknown({"pool", "control", "cost", "noise", "time", "grid", "law0",
                      "mfg", "game", "sweep"});

    // Model bounds (exit class: validation). The message carries both sides
    // of the admissibility inequality.
    const auto adm = validate_admissibility(cfg.pool, cfg.control, cfg.time);
    if (!adm.pass) {
        std::ostringstream os;
        os << name << ": admissibility violated: max|a| = " << fmt_g(adm.max_abs_control)
           << " >= (" << fmt_g(cfg.pool.x0) << "-" << fmt_g(cfg.pool.eps0) << ")/"
           << fmt_g(cfg.time.horizon) << " = " << fmt_g(adm.bound);
        throw validation_error(os.str());
    }
    const auto growth = validate_growth_bound(cfg.cost, cfg.grid.x_lo, cfg.grid.x_hi, 201);
    if (!growth.pass) {
        std::ostringstream os;
        os << name << ": growth bound violated: |h|+|l| = " << fmt_g(growth.binding_lhs)
           << " > c1*exp(c1*|x|) = " << fmt_g(growth.binding_rhs) << " at x = "
           << fmt_g(growth.binding_x);
        throw validation_error(os.str());
    }
    return cfg;
}

inline RunConfig parse_config(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec) || ec)
        throw config_error("config file not found: " + path.string());
    return parse_config_text(read_file(path), path.filename().string());
}

// Canonical serialization with all defaults resolved; parsing the output
// reproduces the same RunConfig (round-trip fixed point).
inline std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "[pool]\n";
    os << "k = " << fmt_g17(cfg.pool.k) << "\n";
    os << "x0 = " << fmt_g17(cfg.pool.x0) << "\n";
    os << "eps0 = " << fmt_g17(cfg.pool.eps0) << "\n";
    os << "sigma0 = " << fmt_g17(cfg.pool.sigma0) << "\n";
    os << "\n[control]\n";
    os << "a_min = " << fmt_g17(cfg.control.a_min) << "\n";
    os << "a_max = " << fmt_g17(cfg.control.a_max) << "\n";
    os << "\n[cost]\n";
    switch (cfg.cost.family) {
    case CostFamily::Quadratic:
        os << "family = quadratic\n";
        os << "phi_h = " << fmt_g17(cfg.cost.phi_h) << "\n";
        os << "phi_l = " << fmt_g17(cfg.cost.phi_l) << "\n";
        break;
    case CostFamily::LinearTerminal:
        os << "family = linear_terminal\n";
        os << "c_l = " << fmt_g17(cfg.cost.c_l) << "\n";
        break;
    case CostFamily::Zero:
        os << "family = zero\n";
        break;
    }
    os << "c1 = " << fmt_g17(cfg.cost.c1) << "\n";
    os << "\n[noise]\n";
    os << "sigma = " << fmt_g17(cfg.noise.sigma) << "\n";
    os << "\n[time]\n";
    os << "horizon = " << fmt_g17(cfg.time.horizon) << "\n";
    os << "steps = " << cfg.time.steps << "\n";
    os << "\n[grid]\n";
    os << "x_lo = " << fmt_g17(cfg.grid.x_lo) << "\n";
    os << "x_hi = " << fmt_g17(cfg.grid.x_hi) << "\n";
    os << "n_x = " << cfg.grid.n_x << "\n";
    os << "\n[law0]\n";
    switch (cfg.law0.family) {
    case LawFamily::Dirac:
        os << "family = dirac\n";
        os << "c = " << fmt_g17(cfg.law0.c) << "\n";
        break;
    case LawFamily::Gaussian:
        os << "family = gaussian\n";
        os << "mean = " << fmt_g17(cfg.law0.mu) << "\n";
        os << "sd = " << fmt_g17(cfg.law0.sd) << "\n";
        break;
    case LawFamily::Uniform:
        os << "family = uniform\n";
        os << "lo = " << fmt_g17(cfg.law0.lo) << "\n";
        os << "hi = " << fmt_g17(cfg.law0.hi) << "\n";
        break;
    }
    os << "\n[mfg]\n";
    os << "damping = " << fmt_g17(cfg.mfg.damping) << "\n";
    os << "tol = " << fmt_g17(cfg.mfg.tol) << "\n";
    os << "max_iter = " << cfg.mfg.max_iter << "\n";
    os << "particles = " << cfg.mfg.particles << "\n";
    os << "mode = "
       << (cfg.mfg.mode == FixedPointMode::PicardDamped ? "picard_damped" : "fictitious_play")
       << "\n";
    os << "seed = " << cfg.mfg.seed << "\n";
    os << "\n[game]\n";
    os << "n = " << cfg.game.n << "\n";
    os << "n_paths = " << cfg.game.n_paths << "\n";
    os << "seed = " << cfg.game.seed << "\n";
    os << "y0 = " << fmt_g17(cfg.game.y0) << "\n";
    os << "\n[sweep]\n";
    os << "n_list = ";
    for (std::size_t i = 0; i < cfg.sweep_n.size(); ++i)
        os << (i ? "," : "") << cfg.sweep_n[i];
    os << "\n";
    return os.str();
}

} // namespace ammfg
