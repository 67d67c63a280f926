// Copyright 2026 The ebd Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <locale>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebd/dynamics.hpp"
#include "ebd/error.hpp"
#include "ebd/lindblad.hpp"
#include "ebd/multilevel.hpp"
#include "ebd/parallel.hpp"
#include "ebd/reconstruction.hpp"

namespace ebd::scenario {

/// Version of the key = value config dialect.
inline constexpr int kConfigVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Malformed or inconsistent configuration; `where` names the file line or override.
class ConfigError : public std::runtime_error {
  public:
    ConfigError(const std::string& where, const std::string& what)
        : std::runtime_error(where.empty() ? what : where + ": " + what) {}
};

enum class ParamKind { Real, Count, Flag, Choice };

struct ParamSpec {
    std::string name;
    ParamKind kind = ParamKind::Real;
    std::string fallback;
    std::string doc;
    std::vector<std::string> choices{};
};

/// Fully resolved parameters of one run: every parameter the scenario consumes.
class Params {
  public:
    double real(const std::string& key) const { return numbers_.at(key); }
    std::size_t count(const std::string& key) const { return static_cast<std::size_t>(numbers_.at(key)); }
    bool flag(const std::string& key) const { return numbers_.at(key) != 0.0; }
    const std::string& text(const std::string& key) const { return texts_.at(key); }

    void set_number(const std::string& key, double v) { numbers_[key] = v; }
    void set_text(const std::string& key, const std::string& v) { texts_[key] = v; }
    bool has_number(const std::string& key) const { return numbers_.count(key) != 0; }

    nlohmann::ordered_json to_json(const std::vector<ParamSpec>& specs) const {
        nlohmann::ordered_json out = nlohmann::ordered_json::object();
        for (const auto& s : specs) {
            if (s.kind == ParamKind::Choice) {
                out[s.name] = texts_.at(s.name);
            } else if (s.kind == ParamKind::Real) {
                out[s.name] = numbers_.at(s.name);
            } else {
                out[s.name] = static_cast<std::uint64_t>(numbers_.at(s.name));
            }
        }
        return out;
    }

  private:
    std::map<std::string, double> numbers_;
    std::map<std::string, std::string> texts_;
};

/// A result table; written as `<name>.csv`.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> row) {
        require(row.size() == columns.size(), ErrorKind::Numerical, "row width does not match the header");
        rows.push_back(std::move(row));
    }
};

using RunFn = std::function<std::vector<Table>(const Params&, std::uint64_t seed, unsigned jobs)>;

struct ScenarioSpec {
    std::string name;
    std::string summary;
    std::vector<ParamSpec> params;
    RunFn run;

    const ParamSpec* find(const std::string& key) const {
        for (const auto& p : params) {
            if (p.name == key) {
                return &p;
            }
        }
        return nullptr;
    }
};

struct SweepAxis {
    std::string name;
    std::vector<std::string> values;
};

/// Value of a config entry plus where it came from, for diagnostics.
struct Entry {
    std::string value;
    std::string origin;
};

struct ScenarioConfig {
    std::string scenario;
    std::map<std::string, Entry> params;
    std::optional<SweepAxis> sweep;
    std::string sweep_origin;
    std::uint64_t seed = 0;
    std::string output_dir = ".";
    unsigned jobs = 1;
};

// ---------------------------------------------------------------------------
// Value parsing

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

inline double parse_real(const std::string& text, const std::string& where) {
    std::istringstream is(text);
    is.imbue(std::locale::classic());
    double v = 0.0;
    is >> v;
    if (!is || !(is >> std::ws).eof() || !std::isfinite(v)) {
        throw ConfigError(where, "expected a finite number, got '" + text + "'");
    }
    return v;
}

inline std::uint64_t parse_count(const std::string& text, const std::string& where) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos || text.size() > 19) {
        throw ConfigError(where, "expected a non-negative integer, got '" + text + "'");
    }
    return std::stoull(text);
}

inline double parse_value(const ParamSpec& spec, const std::string& text, const std::string& where) {
    switch (spec.kind) {
    case ParamKind::Real: return parse_real(text, where);
    case ParamKind::Count: return static_cast<double>(parse_count(text, where));
    case ParamKind::Flag:
        if (text == "0" || text == "false") {
            return 0.0;
        }
        if (text == "1" || text == "true") {
            return 1.0;
        }
        throw ConfigError(where, "expected a flag (0, 1, true, false), got '" + text + "'");
    case ParamKind::Choice: break;
    }
    throw ConfigError(where, "parameter '" + spec.name + "' is not numeric");
}

inline void check_choice(const ParamSpec& spec, const std::string& text, const std::string& where) {
    if (std::find(spec.choices.begin(), spec.choices.end(), text) == spec.choices.end()) {
        std::string list;
        for (const auto& c : spec.choices) {
            list += (list.empty() ? "" : ", ") + c;
        }
        throw ConfigError(where, "'" + text + "' is not one of {" + list + "}");
    }
}

inline DynamicsParams dynamics(const Params& p) {
    DynamicsParams d;
    d.gamma_s = p.real("gamma_s");
    d.gamma_extra = p.has_number("gamma_extra") ? p.real("gamma_extra") : 0.0;
    d.squeeze = SqueezeParams::from_z(p.real("z"));
    return d;
}

inline GaussianState css() { return GaussianState::vacuum({mode::atomic_c, mode::atomic_s}); }

} // namespace detail

// ---------------------------------------------------------------------------
// Scenarios

namespace detail {

inline ParamSpec real(std::string name, std::string fallback, std::string doc) {
    return {std::move(name), ParamKind::Real, std::move(fallback), std::move(doc)};
}

inline ParamSpec count(std::string name, std::string fallback, std::string doc) {
    return {std::move(name), ParamKind::Count, std::move(fallback), std::move(doc)};
}

inline std::vector<Table> run_ideal(const Params& p, std::uint64_t, unsigned) {
    const auto dp = dynamics(p);
    const auto times = linspace_times(p.real("t_max"), p.count("samples"));
    const auto u = evolve_unconditional(dp, kVacuumVariance, times);
    const auto c = evolve_conditional(dp, kVacuumVariance, times);
    Table t{"ideal_steady_state", {"t_ms", "xi_uncond", "xi_uncond_closed", "xi_cond", "xi_cond_closed"}, {}};
    for (std::size_t k = 0; k < times.size(); ++k) {
        t.add({times[k], 2.0 * u.ode[k], 2.0 * u.closed_form[k], 2.0 * c.ode[k], 2.0 * c.closed_form[k]});
    }
    return {t};
}

inline std::vector<Table> run_noisy(const Params& p, std::uint64_t, unsigned) {
    auto dp = dynamics(p);
    const std::size_t n = p.count("ratio_points");
    require(n >= 2, ErrorKind::InvalidArgument, "ratio_points must be >= 2");
    const auto ratios = linspace_times(p.real("ratio_max"), n);
    const std::vector<double> relax{p.real("t_relax")};
    Table t{"noisy_conditional", {"gamma_ratio", "xi_uncond", "xi_cond", "xi_uncond_ode", "xi_cond_ode"}, {}};
    for (double r : ratios) {
        dp.gamma_extra = r * dp.gamma_s;
        t.add({r, steady_state_xi(dp), steady_state_xi_cond(dp),
               2.0 * evolve_unconditional(dp, kVacuumVariance, relax).ode.back(),
               2.0 * evolve_conditional(dp, kVacuumVariance, relax).ode.back()});
    }
    return {t};
}

inline std::vector<Table> run_detuning(const Params& p, std::uint64_t, unsigned) {
    auto dp = dynamics(p);
    dp.delta_omega = p.real("delta_omega");
    const auto times = linspace_times(p.real("t_max"), p.count("samples"));
    const auto tr = evolve_with_detuning(dp, times);
    Table t{"detuning_sweep", {"delta_omega", "t_ms", "xi"}, {}};
    for (std::size_t k = 0; k < times.size(); ++k) {
        t.add({dp.delta_omega, times[k], tr.ode[k]});
    }
    return {t};
}

inline std::vector<Table> run_multilevel(const Params& p, std::uint64_t, unsigned) {
    RateModelParams rp;
    rp.gamma = p.real("gamma");
    rp.gamma_tilde = p.real("gamma_tilde");
    rp.gamma_col = p.real("gamma_col");
    rp.gamma_pump = p.real("gamma_pump");
    rp.gamma_repump = p.real("gamma_repump");
    rp.gamma_l_out = p.real("gamma_l_out");
    rp.d = p.real("d");
    rp.n_atoms = p.real("n_atoms");
    rp.squeeze = SqueezeParams::from_z(p.real("z"));
    rp.validate();
    const auto times = linspace_times(p.real("t_max"), p.count("samples"));
    const auto tr = xi2_adiabatic(rp, times);
    Table t{"multilevel_fig3b", {"d", "t_ms", "xi2", "xi2_direct", "p2", "n2_fraction"}, {}};
    for (std::size_t k = 0; k < times.size(); ++k) {
        const auto& s = tr.populations[k];
        t.add({rp.d, times[k], tr.adiabatic[k], tr.direct[k], s.p2(), s.n2() / rp.n_atoms});
    }
    return {t};
}

inline std::vector<Table> run_roundtrip(const Params& p, std::uint64_t seed, unsigned jobs) {
    auto dp = dynamics(p);
    dp.duration = p.real("duration");
    const std::size_t n_steps = p.count("steps");
    const std::size_t split = p.count("split");
    SimulationOptions opt;
    opt.eta = p.real("eta");
    opt.classical_noise = p.real("classical_noise");
    opt.jobs = jobs;
    const auto rec = simulate_records(dp, css(), n_steps, p.count("trajectories"), seed, opt);
    const double rate = optimal_probe_rate(dp);
    const double probe_len = static_cast<double>(split) * rec.dt;
    const ModeFunction probe{ModeKind::Rising, rate, probe_len, ModePhase::Cos, 0.0};
    const auto est = conditional_variance_estimate(rec, split, probe, {}, opt.eta);

    // Noiseless check of the linear inverse on the same readout pulse.
    DynamicsParams readout = dp;
    readout.duration = static_cast<double>(n_steps - split) * rec.dt;
    readout.eta = opt.eta;
    const double v_in = conditional_steady_variance(dp);
    auto in = reconstruction_input(readout, 0.0, true);
    in.var_y_out = forward_variance(in, v_in, true);
    const double roundtrip_error = std::abs(reconstruct_variance(in, true) - v_in);

    const double xi_uncond_theory = 2.0 * evolve_unconditional(dp, kVacuumVariance, {probe_len}).closed_form[0];
    Table t{"reconstruction_roundtrip",
            {"gamma_extra", "probe_rate", "xi_cond_theory", "xi_cond", "xi_cond_se", "xi_uncond_theory", "xi_uncond",
             "alpha_c", "alpha_s", "noiseless_roundtrip_error"},
            {}};
    t.add({dp.gamma_extra, rate, steady_state_xi_cond(dp), est.xi_cond, est.xi_cond_se, xi_uncond_theory,
           est.xi_uncond, est.alpha_c, est.alpha_s, roundtrip_error});
    std::vector<Table> out{t};
    if (p.flag("write_records")) {
        Table r{"records", {"trajectory_id", "step", "t_ms", "y_c", "y_s"}, {}};
        for (std::size_t j = 0; j < rec.n_traj; ++j) {
            for (std::size_t k = 0; k < rec.n_steps; ++k) {
                const auto row = static_cast<Eigen::Index>(k), col = static_cast<Eigen::Index>(j);
                r.add({static_cast<double>(j), static_cast<double>(k), static_cast<double>(k) * rec.dt,
                       rec.y_c(row, col), rec.y_s(row, col)});
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<Table> run_calibration(const Params& p, std::uint64_t seed, unsigned jobs) {
    auto dp = dynamics(p);
    dp.duration = p.real("duration");
    const double q = p.real("q_first");
    const double k2 = std::pow(coupling_kappa(dp).kappa, 2);
    const auto run = simulate_kappa_calibration(dp, q);

    // Monte Carlo second pulse on the atoms prepared by the noiseless first pulse.
    auto first = io_input_state(css());
    Eigen::VectorXd disp = first.disp();
    disp(first.slot(mode::light_c, Quadrature::P)) = q;
    first = GaussianState(first.modes(), first.cov(), disp);
    const auto atoms = rotate_x_into_p(step_io_noisy(dp, first).marginal({mode::atomic_c, mode::atomic_s}));
    SimulationOptions opt;
    opt.jobs = jobs;
    opt.keep_records = true;
    const std::size_t n_traj = p.count("trajectories");
    require(n_traj >= 2, ErrorKind::InvalidArgument, "trajectories must be >= 2");
    const auto rec = simulate_records(dp, atoms, p.count("steps"), n_traj, seed, opt);
    const ModeFunction fall{ModeKind::Falling, dp.gamma_total(), dp.duration, ModePhase::Cos, 0.0};
    double mean = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < n_traj; ++j) {
        const double y = rec.project(j, ModePhase::Cos, 0, rec.n_steps, fall);
        const double delta = y - mean;
        mean += delta / static_cast<double>(j + 1);
        m2 += delta * (y - mean);
    }
    const double se = std::sqrt(m2 / static_cast<double>(n_traj - 1) / static_cast<double>(n_traj)) / std::abs(q);
    Table t{"kappa_calibration", {"q_first", "kappa2", "kappa2_noiseless", "kappa2_mc", "kappa2_mc_se"}, {}};
    t.add({q, k2, run.kappa2, calibrate_kappa(q, mean), se});
    return {t};
}

inline std::vector<Table> run_oracle(const Params& p, std::uint64_t, unsigned) {
    LindbladSystem s;
    s.representation = p.text("representation") == "microscopic" ? Representation::Microscopic : Representation::Dicke;
    const double n = p.real("n_atoms");
    require(n >= 1.0 && n <= kMaxDickeAtoms, ErrorKind::Capacity, "n_atoms outside the supported range");
    s.n_atoms = static_cast<int>(n);
    s.d = p.real("d");
    s.gamma = p.real("gamma");
    s.squeeze = SqueezeParams::from_z(p.real("z"));
    s.validate();
    require(s.entangling_rate() > 0.0, ErrorKind::InvalidArgument, "d * gamma must be positive");
    const double z2 = s.squeeze.z() * s.squeeze.z();
    const double target = 1.0 / z2;

    const auto times = linspace_times(p.real("t_max"), p.count("samples"));
    const auto traj = MasterEquation(s, NoiseModel::None).evolve(pumped_state(s), times);
    double deviation = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        // Gaussian model with gamma_s = d Gamma / 2 started in the coherent spin state.
        const double gauss = target + (1.0 - target) * std::exp(-s.entangling_rate() * times[k]);
        deviation = std::max(deviation, std::abs(witness_xi(s, traj[k]) - gauss));
    }
    const auto ss = steady_state_report(s, NoiseModel::None);
    const double xi = witness_xi(s, ss.rho);
    Table t{"oracle_convergence",
            {"n_atoms", "xi_ss", "xi_target", "steady_error", "trajectory_deviation", "residual"},
            {}};
    t.add({n, xi, target, std::abs(xi - target), deviation, ss.residual});
    return {t};
}

} // namespace detail

inline const std::vector<ScenarioSpec>& registry() {
    using detail::count;
    using detail::real;
    static const std::vector<ScenarioSpec> specs = [] {
        const ParamSpec z = real("z", "2.5", "squeezing Z = mu + nu");
        const ParamSpec gs = real("gamma_s", "1.0", "engineered dissipation rate (1/ms)");
        std::vector<ScenarioSpec> v;
        v.push_back({"ideal_steady_state",
                     "xi(t) from the coherent spin state with and without measurement, gamma_extra = 0",
                     {z, gs, real("t_max", "20.0", "end time (ms)"), count("samples", "201", "number of time samples")},
                     detail::run_ideal});
        v.push_back({"noisy_conditional",
                     "steady-state xi without and with measurement over gamma_extra / gamma_s",
                     {z, gs, real("ratio_max", "5.0", "largest gamma_extra / gamma_s"),
                      count("ratio_points", "21", "grid points on [0, ratio_max]"),
                      real("t_relax", "50.0", "integration time for the ODE columns (ms)")},
                     detail::run_noisy});
        v.push_back({"detuning_sweep",
                     "xi(t) from the coherent spin state with a Larmor mismatch",
                     {z, gs, real("gamma_extra", "0.1", "extra decoherence rate (1/ms)"),
                      real("delta_omega", "1.0", "Larmor mismatch (rad/ms)"), real("t_max", "10.0", "end time (ms)"),
                      count("samples", "1001", "number of time samples")},
                     detail::run_detuning});
        v.push_back({"multilevel_fig3b",
                     "xi_2(t) of the three-level rate model",
                     {real("gamma", "0.002", "driving-field radiative rate (1/ms)"),
                      real("gamma_tilde", "0.193", "single-particle noise rate (1/ms)"),
                      real("gamma_col", "0.002", "collisional rate (1/ms)"),
                      real("gamma_pump", "0.160", "pump rate (1/ms)"), real("gamma_repump", "0.160", "repump rate (1/ms)"),
                      real("gamma_l_out", "0.02", "radiative loss out of the two-level subsystem (1/ms)"),
                      real("d", "55.0", "optical depth"), real("n_atoms", "1e6", "atoms per ensemble"), z,
                      real("t_max", "60.0", "end time (ms)"), count("samples", "121", "number of time samples")},
                     detail::run_multilevel});
        v.push_back({"reconstruction_roundtrip",
                     "simulated homodyne records reconstructed into the conditional EPR variance",
                     {z, gs, real("gamma_extra", "1.0", "extra decoherence rate (1/ms)"),
                      real("duration", "4.5", "record length (ms)"), count("steps", "900", "samples per record"),
                      count("split", "600", "samples in the probe slice"),
                      count("trajectories", "2000", "number of trajectories"),
                      real("eta", "1.0", "detection efficiency"),
                      real("classical_noise", "0.0", "white classical noise per unit mode"),
                      {"write_records", ParamKind::Flag, "0", "also write records.csv"}},
                     detail::run_roundtrip});
        v.push_back({"kappa_calibration",
                     "two-pulse coupling calibration, noiseless and Monte Carlo",
                     {z, gs, real("gamma_extra", "0.5", "extra decoherence rate (1/ms)"),
                      real("duration", "0.3", "pulse length (ms)"), real("q_first", "3.0", "first-pulse displacement"),
                      count("steps", "100", "samples per second-pulse record"),
                      count("trajectories", "10000", "number of trajectories")},
                     detail::run_calibration});
        v.push_back({"oracle_convergence",
                     "finite-N master equation against the Gaussian model",
                     {count("n_atoms", "4", "atoms per ensemble"), real("z", "1.5", "squeezing Z = mu + nu"),
                      real("d", "1.0", "optical depth"), real("gamma", "1.0", "radiative rate (1/ms)"),
                      real("t_max", "4.0", "trajectory end time (ms)"), count("samples", "41", "trajectory samples"),
                      {"representation", ParamKind::Choice, "dicke", "basis", {"dicke", "microscopic"}}},
                     detail::run_oracle});
        return v;
    }();
    return specs;
}

inline const ScenarioSpec& find_scenario(const std::string& name, const std::string& where = {}) {
    for (const auto& s : registry()) {
        if (s.name == name) {
            return s;
        }
    }
    throw ConfigError(where, "unknown scenario '" + name + "'");
}

// ---------------------------------------------------------------------------
// Config dialect (version 1)
//
//   # comment
//   config_version = 1
//   scenario = detuning_sweep
//   seed = 7
//   output_dir = out
//   jobs = 2
//   z = 2.5
//   sweep.name = delta_omega
//   sweep.values = 0, 1, 2
//
// One `key = value` per line. Keys other than the reserved ones above must be parameters of the
// selected scenario. A key may appear once per file; --set overrides apply afterwards.

/// Sets one key; `where` labels diagnostics.
inline void set_entry(ScenarioConfig& cfg, const std::string& key, const std::string& value,
                      const std::string& where) {
    if (key.empty()) {
        throw ConfigError(where, "empty key");
    }
    if (key == "config_version") {
        if (detail::parse_count(value, where) != static_cast<std::uint64_t>(kConfigVersion)) {
            throw ConfigError(where, "unsupported config_version " + value + " (expected " +
                                         std::to_string(kConfigVersion) + ")");
        }
    } else if (key == "scenario") {
        cfg.scenario = value;
    } else if (key == "seed") {
        cfg.seed = detail::parse_count(value, where);
    } else if (key == "output_dir") {
        cfg.output_dir = value;
    } else if (key == "jobs") {
        const auto j = detail::parse_count(value, where);
        if (j == 0 || j > 1024) {
            throw ConfigError(where, "jobs must be in [1, 1024]");
        }
        cfg.jobs = static_cast<unsigned>(j);
    } else if (key == "sweep.name") {
        if (!cfg.sweep) {
            cfg.sweep = SweepAxis{};
        }
        cfg.sweep->name = value;
        cfg.sweep_origin = where;
    } else if (key == "sweep.values") {
        if (!cfg.sweep) {
            cfg.sweep = SweepAxis{};
        }
        cfg.sweep->values = detail::split_list(value);
    } else if (key.rfind("sweep.", 0) == 0) {
        throw ConfigError(where, "unknown key '" + key + "'");
    } else {
        cfg.params[key] = Entry{value, where};
    }
}

/// Parses `key = value` lines.
inline ScenarioConfig parse_config(std::istream& is, const std::string& source = "config") {
    ScenarioConfig cfg;
    std::map<std::string, int> seen;
    bool versioned = false;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        const auto hash = line.find('#');
        const std::string body = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where, "expected 'key = value'");
        }
        const std::string key = detail::trim(body.substr(0, eq));
        const std::string value = detail::trim(body.substr(eq + 1));
        if (seen.count(key) != 0) {
            throw ConfigError(where, "duplicate key '" + key + "' (first set on line " +
                                         std::to_string(seen[key]) + ")");
        }
        seen[key] = lineno;
        versioned = versioned || key == "config_version";
        set_entry(cfg, key, value, where);
    }
    if (!versioned) {
        throw ConfigError(source, "missing 'config_version = " + std::to_string(kConfigVersion) + "'");
    }
    return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path, "cannot open config file");
    }
    return parse_config(in, path);
}

/// Applies a `--set key=value` override.
inline void apply_override(ScenarioConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("--set " + assignment, "expected key=value");
    }
    const std::string key = detail::trim(assignment.substr(0, eq));
    set_entry(cfg, key, detail::trim(assignment.substr(eq + 1)), "--set " + key);
}

/// Resolved run plan: parameters of the base point and the parsed sweep axis.
struct Plan {
    const ScenarioSpec* spec = nullptr;
    Params base;
    std::optional<std::string> sweep_name;
    std::vector<double> sweep_values;
    std::vector<std::string> sweep_texts;
};

/// Validates keys and values against the scenario and fills defaults.
inline Plan resolve(const ScenarioConfig& cfg) {
    if (cfg.scenario.empty()) {
        throw ConfigError("", "no scenario selected");
    }
    Plan plan;
    plan.spec = &find_scenario(cfg.scenario, "scenario");
    for (const auto& [key, entry] : cfg.params) {
        if (plan.spec->find(key) == nullptr) {
            throw ConfigError(entry.origin, "unknown key '" + key + "' for scenario " + cfg.scenario);
        }
    }
    for (const auto& spec : plan.spec->params) {
        const auto it = cfg.params.find(spec.name);
        const std::string text = it == cfg.params.end() ? spec.fallback : it->second.value;
        const std::string where = it == cfg.params.end() ? "default " + spec.name : it->second.origin;
        if (spec.kind == ParamKind::Choice) {
            detail::check_choice(spec, text, where);
            plan.base.set_text(spec.name, text);
        } else {
            plan.base.set_number(spec.name, detail::parse_value(spec, text, where));
        }
    }
    if (cfg.sweep) {
        const std::string where = cfg.sweep_origin.empty() ? "sweep" : cfg.sweep_origin;
        const ParamSpec* axis = plan.spec->find(cfg.sweep->name);
        if (axis == nullptr) {
            throw ConfigError(where, "sweep axis '" + cfg.sweep->name + "' is not a parameter of " + cfg.scenario);
        }
        if (axis->kind == ParamKind::Choice || axis->kind == ParamKind::Flag) {
            throw ConfigError(where, "sweep axis '" + axis->name + "' must be numeric");
        }
        if (cfg.sweep->values.empty()) {
            throw ConfigError(where, std::string(to_string(ErrorKind::InvalidArgument)) + ": sweep axis '" +
                                         axis->name + "' has no values");
        }
        for (const auto& text : cfg.sweep->values) {
            const double v = detail::parse_value(*axis, text, where);
            if (std::find(plan.sweep_values.begin(), plan.sweep_values.end(), v) != plan.sweep_values.end()) {
                throw ConfigError(where, "sweep value '" + text + "' repeated");
            }
            plan.sweep_values.push_back(v);
            plan.sweep_texts.push_back(text);
        }
        plan.sweep_name = axis->name;
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Execution and artifacts

struct Artifact {
    std::string file;
    std::string content;
};

inline std::string format_csv(const Table& t) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(17);
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        os << (c ? "," : "") << t.columns[c];
    }
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            os << (c ? "," : "") << row[c];
        }
        os << '\n';
    }
    return os.str();
}

/// Runs every sweep point (or the single base point) and aggregates tables in axis order. When the
/// swept parameter is not already a column it is prepended. Every point uses the same seed.
inline std::vector<Table> execute(const Plan& plan, std::uint64_t seed, unsigned jobs) {
    const std::size_t n_points = plan.sweep_name ? plan.sweep_values.size() : 1;
    std::vector<std::vector<Table>> results(n_points);
    const unsigned inner_jobs = n_points == 1 ? jobs : 1u;
    parallel_for(n_points, jobs, [&](std::size_t i) {
        Params params = plan.base;
        if (plan.sweep_name) {
            params.set_number(*plan.sweep_name, plan.sweep_values[i]);
        }
        results[i] = plan.spec->run(params, seed, inner_jobs);
    });
    if (!plan.sweep_name) {
        return results.front();
    }
    std::vector<Table> merged;
    for (std::size_t i = 0; i < n_points; ++i) {
        for (std::size_t k = 0; k < results[i].size(); ++k) {
            Table& part = results[i][k];
            const bool present = std::find(part.columns.begin(), part.columns.end(), *plan.sweep_name) !=
                                 part.columns.end();
            if (!present) {
                part.columns.insert(part.columns.begin(), *plan.sweep_name);
                for (auto& row : part.rows) {
                    row.insert(row.begin(), plan.sweep_values[i]);
                }
            }
            if (i == 0) {
                merged.push_back(std::move(part));
            } else {
                require(k < merged.size() && merged[k].columns == part.columns, ErrorKind::Numerical,
                        "sweep points produced different tables");
                merged[k].rows.insert(merged[k].rows.end(), part.rows.begin(), part.rows.end());
            }
        }
    }
    return merged;
}

inline nlohmann::ordered_json manifest(const ScenarioConfig& cfg, const Plan& plan, const std::vector<Table>& tables) {
    nlohmann::ordered_json m;
    m["tool"] = "ebd";
    m["tool_version"] = kToolVersion;
    m["config_version"] = kConfigVersion;
    m["scenario"] = plan.spec->name;
    m["seed"] = cfg.seed;
    m["jobs"] = cfg.jobs;
    m["params"] = plan.base.to_json(plan.spec->params);
    if (plan.sweep_name) {
        m["sweep"] = {{"name", *plan.sweep_name}, {"values", plan.sweep_values}};
    } else {
        m["sweep"] = nullptr;
    }
    nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
    for (const auto& t : tables) {
        outputs.push_back({{"file", t.name + ".csv"}, {"columns", t.columns}, {"rows", t.rows.size()}});
    }
    m["outputs"] = outputs;
    return m;
}

/// Writes artifacts into `dir`: each goes to a temporary file first and all are renamed only after
/// every write succeeded, so a failed run leaves no partial outputs.
inline void write_artifacts(const std::string& dir, const std::vector<Artifact>& artifacts) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::InvalidArgument, "cannot create output directory '" + dir + "'");
    std::vector<fs::path> temps;
    auto cleanup = [&] {
        for (const auto& t : temps) {
            fs::remove(t, ec);
        }
    };
    for (const auto& a : artifacts) {
        const fs::path tmp = fs::path(dir) / ("." + a.file + ".partial");
        temps.push_back(tmp);
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        os << a.content;
        os.close();
        if (!os) {
            cleanup();
            throw Error(ErrorKind::InvalidArgument, "cannot write '" + tmp.string() + "'");
        }
    }
    for (std::size_t i = 0; i < artifacts.size(); ++i) {
        fs::rename(temps[i], fs::path(dir) / artifacts[i].file, ec);
        if (ec) {
            cleanup();
            throw Error(ErrorKind::InvalidArgument, "cannot rename '" + temps[i].string() + "'");
        }
    }
}

/// Resolves, runs and renders a config into CSV artifacts plus manifest.json.
inline std::vector<Artifact> run_scenario(const ScenarioConfig& cfg) {
    const Plan plan = resolve(cfg);
    const auto tables = execute(plan, cfg.seed, cfg.jobs);
    std::vector<Artifact> out;
    for (const auto& t : tables) {
        out.push_back({t.name + ".csv", format_csv(t)});
    }
    out.push_back({"manifest.json", manifest(cfg, plan, tables).dump(2) + "\n"});
    return out;
}

/// Exit code for an exception escaping a run.
inline int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) {
        return kExitConfig;
    }
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        switch (err->kind()) {
        case ErrorKind::InvalidArgument:
        case ErrorKind::Capacity:
        case ErrorKind::StepSize:
        case ErrorKind::DurationMismatch: return kExitConfig;
        default: return kExitNumerical;
        }
    }
    return kExitNumerical;
}

} // namespace ebd::scenario
