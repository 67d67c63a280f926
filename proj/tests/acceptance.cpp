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

// Acceptance suite: one PASS/FAIL line per criterion with the measured numbers and runtime.
// Tolerances are pinned here. Exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "ebd/dynamics.hpp"
#include "ebd/lindblad.hpp"
#include "ebd/multilevel.hpp"
#include "ebd/reconstruction.hpp"

using namespace ebd;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool cond, const std::string& what) {
        pass = pass && cond;
        if (!cond) {
            detail += " [failed: " + what + "]";
        }
    }
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

DynamicsParams params(double z, double gamma_s, double gamma_extra, double duration = 1.0) {
    DynamicsParams p;
    p.squeeze = SqueezeParams::from_z(z);
    p.gamma_s = gamma_s;
    p.gamma_extra = gamma_extra;
    p.duration = duration;
    return p;
}

GaussianState css() { return GaussianState::vacuum({mode::atomic_c, mode::atomic_s}); }

struct SampleStats {
    double mean = 0.0;
    double var = 0.0;
};

SampleStats stats(const std::vector<double>& v) {
    SampleStats s;
    const double n = static_cast<double>(v.size());
    for (double x : v) {
        s.mean += x;
    }
    s.mean /= n;
    for (double x : v) {
        s.var += (x - s.mean) * (x - s.mean);
    }
    s.var /= n - 1.0;
    return s;
}

// 1. gamma_extra = 0, Z = 2.5: both evolutions converge to (mu - nu)^2.
Outcome ideal_steady_state() {
    constexpr double kTol = 1e-9;
    Outcome o;
    const auto p = params(2.5, 1.0, 0.0);
    const double target = std::pow(p.squeeze.mu() - p.squeeze.nu(), 2);
    const auto times = linspace_times(30.0, 301);
    const auto u = evolve_unconditional(p, kVacuumVariance, times);
    const auto c = evolve_conditional(p, kVacuumVariance, times);
    double worst = 0.0;
    for (double v : {u.ode.back(), u.closed_form.back(), c.ode.back(), c.closed_form.back()}) {
        worst = std::max(worst, std::abs(2.0 * v - target));
    }
    o.check(std::abs(target - 0.16) < 1e-15, "(mu - nu)^2 = 0.16");
    o.check(worst <= kTol, "|xi - 0.16| <= 1e-9");
    o.detail = "max |xi(30 ms) - 0.16| = " + fmt("%.3e", worst) + o.detail;
    return o;
}

// 2. 20 x 20 grid: Riccati and ODE steady states against the closed forms; conditional below unconditional.
Outcome closed_form_consistency() {
    constexpr double kTol = 1e-9;
    Outcome o;
    const std::size_t n = 20;
    double worst_riccati = 0.0, worst_ode = 0.0, worst_cond_ode = 0.0, smallest_gap = 1.0, zero_gap = 0.0;
    const std::vector<double> relax{60.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 1.1 + (4.0 - 1.1) * static_cast<double>(i) / (n - 1.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double ratio = 5.0 * static_cast<double>(j) / (n - 1.0);
            const auto p = params(z, 1.0, ratio);
            const double xi = steady_state_xi(p), xi_cond = steady_state_xi_cond(p);
            worst_riccati = std::max(worst_riccati, std::abs(2.0 * conditional_steady_variance(p) - xi_cond));
            worst_ode = std::max(worst_ode, std::abs(2.0 * evolve_unconditional(p, kVacuumVariance, relax).ode[0] - xi));
            worst_cond_ode =
                std::max(worst_cond_ode, std::abs(2.0 * evolve_conditional(p, kVacuumVariance, relax).ode[0] - xi_cond));
            if (j == 0) {
                zero_gap = std::max(zero_gap, std::abs(xi - xi_cond));
            } else {
                smallest_gap = std::min(smallest_gap, xi - xi_cond);
            }
        }
    }
    o.check(worst_riccati <= kTol, "Riccati fixed point vs xi_cond");
    o.check(worst_ode <= kTol, "unconditional ODE vs xi");
    o.check(worst_cond_ode <= kTol, "conditional ODE vs xi_cond");
    o.check(zero_gap <= 1e-12, "equality at gamma_extra = 0");
    o.check(smallest_gap > 0.0, "xi_cond < xi for gamma_extra > 0");
    o.detail = "riccati " + fmt("%.2e", worst_riccati) + ", ode " + fmt("%.2e", worst_ode) + ", cond ode " +
               fmt("%.2e", worst_cond_ode) + ", gap at 0 " + fmt("%.1e", zero_gap) + ", min gap elsewhere " +
               fmt("%.3e", smallest_gap) + o.detail;
    return o;
}

LindbladSystem ideal_system(Representation rep, int n, double z) {
    LindbladSystem s;
    s.representation = rep;
    s.n_atoms = n;
    s.d = 1.0;
    s.gamma = 1.0;
    s.squeeze = SqueezeParams::from_z(z);
    return s;
}

// 3. Dicke-basis oracle with the ideal dissipator at Z = 1.5. The steady state equals (mu - nu)^2 at
// every N, so the N trend is measured on the approach to it: the largest deviation of xi(t) from the
// Gaussian model must fall strictly with N. The literal |xi_ss - 0.4444| values are printed too.
Outcome oracle_convergence() {
    constexpr double kSteadyTol = 1e-8;
    constexpr double kAgreeTol = 1e-8;
    Outcome o;
    const double z = 1.5;
    const double target = 1.0 / (z * z);
    std::vector<double> times;
    for (int k = 1; k <= 40; ++k) {
        times.push_back(0.1 * k);
    }
    std::string steady, literal, trend;
    double previous = 1.0;
    for (int n : {4, 8, 16}) {
        const auto s = ideal_system(Representation::Dicke, n, z);
        const double xi = witness_xi(s, steady_state_report(s, NoiseModel::None).rho);
        const auto traj = MasterEquation(s, NoiseModel::None).evolve(pumped_state(s), times);
        double dev = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double gauss = target + (1.0 - target) * std::exp(-s.entangling_rate() * times[k]);
            dev = std::max(dev, std::abs(witness_xi(s, traj[k]) - gauss));
        }
        o.check(std::abs(xi - target) <= kSteadyTol, "steady state at N=" + std::to_string(n));
        o.check(dev < previous, "trajectory deviation decreasing at N=" + std::to_string(n));
        previous = dev;
        steady += fmt(" %.1e", std::abs(xi - target));
        literal += fmt(" %.6e", std::abs(xi - 0.4444));
        trend += fmt(" %.4e", dev);
    }
    double agree = 0.0;
    auto micro = ideal_system(Representation::Microscopic, 3, z);
    micro.gamma_cool = 0.1;
    micro.gamma_heat = 0.02;
    micro.gamma_deph = 0.05;
    auto dicke = micro;
    dicke.representation = Representation::Dicke;
    for (auto noise : {NoiseModel::None, NoiseModel::Collective}) {
        const auto tm = MasterEquation(micro, noise).evolve(pumped_state(micro), times);
        const auto td = MasterEquation(dicke, noise).evolve(pumped_state(dicke), times);
        for (std::size_t k = 0; k < times.size(); ++k) {
            agree = std::max(agree, std::abs(witness_xi(micro, tm[k]) - witness_xi(dicke, td[k])));
        }
    }
    o.check(agree <= kAgreeTol, "microscopic vs dicke at N=3");
    o.detail = "N=4,8,16: |xi_ss-(mu-nu)^2|" + steady + "; |xi_ss-0.4444|" + literal + "; max_t |xi-gauss|" +
               trend + "; micro/dicke N=3 " + fmt("%.1e", agree) + o.detail;
    return o;
}

// 4. Rate model with the reference rates: xi_2 ordered in d for t > 0 and d = 150 dips below 1.
Outcome multilevel_ordering() {
    Outcome o;
    const auto times = linspace_times(200.0, 401);
    std::vector<Xi2Trajectory> runs;
    std::string steady;
    for (double d : {55.0, 100.0, 150.0}) {
        RateModelParams p;
        p.d = d;
        runs.push_back(xi2_adiabatic(p, times));
        steady += fmt(" %.4f", xi2_steady_populations(p));
    }
    std::size_t violations = 0;
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (!(runs[2].adiabatic[k] < runs[1].adiabatic[k] && runs[1].adiabatic[k] < runs[0].adiabatic[k])) {
            ++violations;
        }
    }
    const double lowest = *std::min_element(runs[2].adiabatic.begin(), runs[2].adiabatic.end());
    o.check(violations == 0, "pointwise ordering");
    o.check(lowest < 1.0, "d=150 below 1");
    RateModelParams p55;
    o.detail = "ordering violations " + std::to_string(violations) + "/400, min xi(d=150) " + fmt("%.4f", lowest) +
               ", steady d=55,100,150:" + steady + " (two-level formula d=55 " +
               fmt("%.4f", xi2_steady_two_level(p55)) + ")" + o.detail;
    return o;
}

// 5. Larmor mismatch: min_t xi grows over {0, a, 2a}; for large mismatch xi >= 1 once the rotation
// has completed a period (the sub-period transient minimum is reported).
Outcome detuning() {
    Outcome o;
    auto p = params(2.5, 1.0, 0.1);
    const double a = p.gamma_total();
    const auto times = linspace_times(10.0, 2001);
    std::vector<double> minima;
    for (double m : {0.0, 1.0, 2.0}) {
        p.delta_omega = m * a;
        const auto tr = evolve_with_detuning(p, times);
        minima.push_back(*std::min_element(tr.ode.begin(), tr.ode.end()));
    }
    o.check(minima[0] < minima[1] && minima[1] < minima[2], "min xi increasing in delta_omega");
    o.check(minima[0] < 1.0, "entangled at zero detuning");

    p.delta_omega = 1e3;
    const auto fine = linspace_times(10.0, 40001);
    const auto tr = evolve_with_detuning(p, fine);
    const double period = 2.0 * M_PI / p.delta_omega;
    double after = 2.0, before = 2.0;
    for (std::size_t k = 0; k < fine.size(); ++k) {
        (fine[k] >= period ? after : before) = std::min(fine[k] >= period ? after : before, tr.ode[k]);
    }
    o.check(after >= 1.0, "xi >= 1 after one rotation period at delta_omega = 1e3");
    o.detail = "a = " + fmt("%.2f", a) + ": min xi " + fmt("%.6f", minima[0]) + " < " + fmt("%.6f", minima[1]) +
               " < " + fmt("%.6f", minima[2]) + "; delta_omega=1e3: min xi for t >= 2pi/dOmega " +
               fmt("%.6f", after) + ", transient min " + fmt("%.6f", before) + o.detail;
    return o;
}

// 6. Reconstruction: exact Gaussian forward model then inverse (with and without decay, eta = 0.84),
// and the Monte Carlo record pipeline at 1e4 trajectories.
Outcome reconstruction_round_trip() {
    constexpr double kTol = 1e-9;
    constexpr double kSigmas = 3.0;
    Outcome o;
    Eigen::Matrix4d atoms = Eigen::Matrix4d::Zero();
    atoms.diagonal() << 1.5, 0.3, 2.0, 0.2;
    atoms(1, 3) = atoms(3, 1) = 0.05;
    const GaussianState in({mode::atomic_c, mode::atomic_s}, atoms, Eigen::Vector4d::Zero());
    double worst = 0.0;
    for (bool decay : {false, true}) {
        for (double eta : {1.0, 0.84}) {
            auto p = params(2.5, 1.0, decay ? 0.3 : 0.0, 0.6);
            p.eta = eta;
            auto out = step_io_noisy(p, io_input_state(in));
            out = beam_splitter_loss(out, mode::light_c, eta);
            out = beam_splitter_loss(out, mode::light_s, eta);
            const double pc = reconstruct_variance(
                reconstruction_input(p, out.variance(mode::light_c, Quadrature::X), decay), decay);
            const double ps = reconstruct_variance(
                reconstruction_input(p, out.variance(mode::light_s, Quadrature::X), decay), decay);
            worst = std::max({worst, std::abs(pc - 0.3), std::abs(ps - 0.2)});
        }
    }
    o.check(worst <= kTol, "noiseless round trip");

    auto p = params(2.5, 1.0, 0.3, 0.6);
    SimulationOptions opt;
    opt.eta = 0.84;
    p.eta = opt.eta;
    const std::size_t n_traj = 10000;
    const auto rec = simulate_records(p, in, 100, n_traj, 20260601, opt);
    const ModeFunction fall{ModeKind::Falling, p.gamma_total(), p.duration, ModePhase::Cos, 0.0};
    std::string mc;
    const double k2 = std::pow(sector_channel(p.gamma_s, p.gamma_extra, p.squeeze.z(), p.duration).kappa, 2);
    for (auto [phase, truth] : {std::pair{ModePhase::Cos, 0.3}, std::pair{ModePhase::Sin, 0.2}}) {
        std::vector<double> y(n_traj);
        for (std::size_t j = 0; j < n_traj; ++j) {
            y[j] = rec.project(j, phase, 0, rec.n_steps, fall);
        }
        const auto s = stats(y);
        const double est = reconstruct_variance(reconstruction_input(p, s.var, true), true);
        const double se = s.var * std::sqrt(2.0 / (n_traj - 1.0)) / (p.eta * k2);
        o.check(std::abs(est - truth) <= kSigmas * se, "Monte Carlo within 3 standard errors");
        mc += fmt(" %.4f", est) + fmt(" (truth %.1f,", truth) + fmt(" se %.4f)", se);
    }
    o.detail = "noiseless max error " + fmt("%.2e", worst) + "; MC 1e4 var(P_c), var(P_s):" + mc + o.detail;
    return o;
}

// 7. Two-pulse kappa^2 calibration, noiseless and Monte Carlo.
Outcome kappa_calibration() {
    constexpr double kTol = 1e-9;
    constexpr double kSigmas = 3.0;
    Outcome o;
    double worst = 0.0;
    for (double ratio : {0.0, 0.5, 2.0}) {
        for (double t : {0.1, 0.3, 1.0}) {
            const auto p = params(2.5, 1.0, ratio, t);
            const double k2 = std::pow(coupling_kappa(p).kappa, 2);
            for (double q : {0.1, 1.0, 10.0}) {
                worst = std::max(worst, std::abs(simulate_kappa_calibration(p, q).kappa2 - k2));
            }
        }
    }
    o.check(worst <= kTol, "noiseless kappa^2");

    const auto p = params(2.5, 1.0, 0.5, 0.3);
    const double q = 3.0;
    const double k2 = std::pow(coupling_kappa(p).kappa, 2);
    auto first = io_input_state(css());
    Eigen::VectorXd disp = first.disp();
    disp(first.slot(mode::light_c, Quadrature::P)) = q;
    first = GaussianState(first.modes(), first.cov(), disp);
    const auto atoms = rotate_x_into_p(step_io_noisy(p, first).marginal({mode::atomic_c, mode::atomic_s}));
    const std::size_t n_traj = 10000;
    const auto rec = simulate_records(p, atoms, 100, n_traj, 20260602);
    const ModeFunction fall{ModeKind::Falling, p.gamma_total(), p.duration, ModePhase::Cos, 0.0};
    std::vector<double> y(n_traj);
    for (std::size_t j = 0; j < n_traj; ++j) {
        y[j] = rec.project(j, ModePhase::Cos, 0, rec.n_steps, fall);
    }
    const auto s = stats(y);
    const double est = calibrate_kappa(q, s.mean);
    const double se = std::sqrt(s.var / n_traj) / q;
    o.check(std::abs(est - k2) <= kSigmas * se, "Monte Carlo within 3 standard errors");
    o.detail = "noiseless max error " + fmt("%.2e", worst) + "; MC kappa^2 " + fmt("%.5f", est) + " vs " +
               fmt("%.5f", k2) + fmt(" (se %.5f)", se) + o.detail;
    return o;
}

// 8. Records-based conditional variance at gamma_extra = gamma_s, Z = 2.5.
Outcome records_conditional_variance() {
    constexpr double kSigmas = 3.0;
    Outcome o;
    const auto p = params(2.5, 1.0, 1.0, 4.5);
    const std::size_t n_steps = 900, split = 600, n_traj = 10000;
    const auto rec = simulate_records(p, css(), n_steps, n_traj, 20260603);
    const ModeFunction probe{ModeKind::Rising, optimal_probe_rate(p), split * rec.dt, ModePhase::Cos, 0.0};
    const auto est = conditional_variance_estimate(rec, split, probe);
    const double target = steady_state_xi_cond(p);
    o.check(std::abs(target - 0.4) < 1e-12, "closed form 0.4");
    o.check(std::abs(est.xi_cond - target) <= kSigmas * est.xi_cond_se, "within 3 standard errors");
    o.detail = "xi_cond " + fmt("%.4f", est.xi_cond) + " vs " + fmt("%.4f", target) +
               fmt(" (se %.4f)", est.xi_cond_se) + ", unconditional " + fmt("%.4f", est.xi_uncond) + o.detail;
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "ideal-steady-state", 1.0, ideal_steady_state},
        {2, "closed-form-consistency", 30.0, closed_form_consistency},
        {3, "oracle-convergence", 300.0, oracle_convergence},
        {4, "multilevel-ordering", 10.0, multilevel_ordering},
        {5, "detuning", 10.0, detuning},
        {6, "reconstruction-round-trip", 120.0, reconstruction_round_trip},
        {7, "kappa-calibration", 60.0, kappa_calibration},
        {8, "records-conditional-variance", 120.0, records_conditional_variance},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs > c.limit_s) {
            o.pass = false;
            o.detail += " [failed: runtime limit]";
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s %d %s: %s (%.2f s, limit %.0f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs, c.limit_s);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
