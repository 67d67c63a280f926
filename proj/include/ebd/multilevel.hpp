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

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "ebd/error.hpp"
#include "ebd/ode.hpp"
#include "ebd/squeeze.hpp"

namespace ebd {

/// Three-level rate model per ensemble: |up>, |down> (the two-level subsystem) and a
/// hidden level |h>. Rates in 1/ms, times in ms.
struct RateModelParams {
    double gamma = 0.002;       // driving-field radiative rate
    double gamma_tilde = 0.193; // Gamma_cool + Gamma_heat + Gamma_deph without pump fields
    double gamma_col = 0.002;
    double gamma_pump = 0.160;
    double gamma_repump = 0.160;
    double gamma_l_out = 0.02; // radiative loss out of the two-level subsystem
    double d = 55.0;
    double n_atoms = 1.0e6;
    SqueezeParams squeeze = SqueezeParams::from_z(2.5);

    void validate() const {
        for (double r : {gamma, gamma_tilde, gamma_col, gamma_pump, gamma_repump, gamma_l_out}) {
            require(std::isfinite(r) && r >= 0.0, ErrorKind::InvalidArgument, "rates must be >= 0");
        }
        require(std::isfinite(d) && d > 0.0, ErrorKind::InvalidArgument, "optical depth d must be > 0");
        require(std::isfinite(n_atoms) && n_atoms > 0.0, ErrorKind::InvalidArgument, "atom number must be > 0");
    }
};

struct EffectiveRates {
    double out = 0.0;     // two-level subsystem -> |h>
    double in = 0.0;      // |h> -> |up| and |h> -> |down>, each
    double r34 = 0.0;     // |down> -> |up> (cooling)
    double r43 = 0.0;     // |up> -> |down> (heating)
    double cool = 0.0;
    double heat = 0.0;
    double tilde_eff = 0.0;
};

inline EffectiveRates effective_rates(const RateModelParams& p) {
    p.validate();
    const double mu = p.squeeze.mu(), nu = p.squeeze.nu();
    EffectiveRates r;
    r.out = p.gamma_l_out + p.gamma_col;
    r.in = p.gamma_repump + p.gamma_col;
    r.r34 = mu * mu * p.gamma + p.gamma_pump + p.gamma_col;
    r.r43 = nu * nu * p.gamma + p.gamma_col;
    r.cool = r.r34;
    r.heat = r.r43;
    // pump fields add dephasing, repump fields do not
    r.tilde_eff = p.gamma_tilde + 2.0 * p.gamma_pump;
    return r;
}

struct PopulationState {
    double n_up = 0.0;
    double n_dn = 0.0;
    double n_h = 0.0;

    double n2() const { return n_up + n_dn; }
    double p2() const { return (n_up - n_dn) / n2(); }
    double total() const { return n_up + n_dn + n_h; }
};

namespace detail {

inline void population_rhs(const EffectiveRates& r, const double* x, double* dx) {
    const double up = x[0], dn = x[1], h = x[2];
    dx[0] = -r.out * up + r.in * h + r.r34 * dn - r.r43 * up;
    dx[1] = -r.out * dn + r.in * h + r.r43 * up - r.r34 * dn;
    dx[2] = r.out * (up + dn) - 2.0 * r.in * h;
}

inline void check_populations(const PopulationState& s, double n_atoms) {
    require(s.n_up >= -1e-9 * n_atoms && s.n_dn >= -1e-9 * n_atoms && s.n_h >= -1e-9 * n_atoms,
            ErrorKind::Numerical, "negative population");
    require(std::abs(s.total() - n_atoms) <= 1e-9 * n_atoms, ErrorKind::Numerical,
            "population not conserved");
}

} // namespace detail

/// Populations at the sample times, starting fully pumped (n_up = N).
inline std::vector<PopulationState> evolve_populations(const RateModelParams& p, const std::vector<double>& times) {
    const auto r = effective_rates(p);
    const auto xs = integrate_at(
        [&r](const OdeState& x, OdeState& dx, double) { detail::population_rhs(r, x.data(), dx.data()); },
        OdeState{p.n_atoms, 0.0, 0.0}, times, 1e-12, 1e-12 * p.n_atoms);
    std::vector<PopulationState> out;
    out.reserve(xs.size());
    for (const auto& x : xs) {
        out.push_back({x[0], x[1], x[2]});
        detail::check_populations(out.back(), p.n_atoms);
    }
    return out;
}

/// Stationary populations of the linear rate model.
inline PopulationState steady_populations(const RateModelParams& p) {
    const auto r = effective_rates(p);
    require(r.in > 0.0 || r.out == 0.0, ErrorKind::Degeneracy, "no return path from the hidden level");
    const double n2 = r.out == 0.0 ? p.n_atoms : p.n_atoms * 2.0 * r.in / (2.0 * r.in + r.out);
    const double relax = r.r34 + r.r43 + r.out;
    const double pol = relax > 0.0 ? (r.r34 - r.r43) / relax : 1.0;
    return {0.5 * n2 * (1.0 + pol), 0.5 * n2 * (1.0 - pol), p.n_atoms - n2};
}

/// Two-level steady polarization (Gamma_cool - Gamma_heat)/(Gamma_cool + Gamma_heat).
inline double p2_two_level(const EffectiveRates& r) {
    require(r.cool + r.heat > 0.0, ErrorKind::InvalidArgument, "cooling and heating both vanish");
    return (r.cool - r.heat) / (r.cool + r.heat);
}

/// xi_2,inf = (1/P) (G + dGamma P^2 (mu - nu)^2) / (G + dGamma P).
inline double xi2_steady(double gamma_tilde_eff, double d_gamma, double polarization, const SqueezeParams& squeeze) {
    require(std::isfinite(polarization) && polarization > 0.0 && polarization <= 1.0, ErrorKind::InvalidArgument,
            "polarization must be in (0, 1]");
    require(gamma_tilde_eff >= 0.0 && d_gamma >= 0.0 && gamma_tilde_eff + d_gamma > 0.0, ErrorKind::InvalidArgument,
            "rates must be >= 0 and not both zero");
    const double mn = squeeze.z_inv();
    return (gamma_tilde_eff + d_gamma * polarization * polarization * mn * mn) /
           (polarization * (gamma_tilde_eff + d_gamma * polarization));
}

struct Xi2Trajectory {
    std::vector<double> t;
    std::vector<PopulationState> populations;
    std::vector<double> adiabatic; // two-term closed form with the instantaneous N_2, P_2
    std::vector<double> direct;    // integrated d Sigma/dt with the populations
};

/// xi_2(t) with Sigma(0) = N (coherent spin state, xi(0) = 1) and d(t) = d N_2(t)/N.
inline Xi2Trajectory xi2_adiabatic(const RateModelParams& p, const std::vector<double>& times) {
    const auto r = effective_rates(p);
    const double mn2 = p.squeeze.z_inv() * p.squeeze.z_inv();
    const double n = p.n_atoms;

    auto drive = [&](double n2, double p2) {
        const double dg = p.d * n2 / n * p.gamma;
        return std::pair{r.tilde_eff + dg * p2, r.tilde_eff + dg * p2 * p2 * mn2};
    };

    const auto xs = integrate_at(
        [&](const OdeState& x, OdeState& dx, double) {
            detail::population_rhs(r, x.data(), dx.data());
            const double n2 = x[0] + x[1];
            const auto [rate, source] = drive(n2, (x[0] - x[1]) / n2);
            dx[3] = -rate * x[3] + n2 * source;
        },
        OdeState{n, 0.0, 0.0, n}, times, 1e-12, 1e-12 * n);

    Xi2Trajectory out;
    out.t = times;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const PopulationState s{xs[k][0], xs[k][1], xs[k][2]};
        detail::check_populations(s, n);
        const double p2 = s.p2();
        require(p2 > 0.0, ErrorKind::Domain, "two-level polarization P_2 is not positive");
        const auto [rate, source] = drive(s.n2(), p2);
        const double decay = std::exp(-rate * times[k]);
        out.adiabatic.push_back(decay / p2 + source / (p2 * rate) * (1.0 - decay));
        out.direct.push_back(xs[k][3] / (s.n2() * p2));
        out.populations.push_back(s);
    }
    return out;
}

/// Steady-state xi_2 of the full rate model: stationary N_2, P_2 inserted into xi2_steady.
inline double xi2_steady_populations(const RateModelParams& p) {
    const auto r = effective_rates(p);
    const auto s = steady_populations(p);
    return xi2_steady(r.tilde_eff, p.d * s.n2() / p.n_atoms * p.gamma, s.p2(), p.squeeze);
}

/// Steady-state xi_2 of the two-level model: N_2 = N and P_2 from cooling and heating only.
inline double xi2_steady_two_level(const RateModelParams& p) {
    const auto r = effective_rates(p);
    return xi2_steady(r.tilde_eff, p.d * p.gamma, p2_two_level(r), p.squeeze);
}

} // namespace ebd
