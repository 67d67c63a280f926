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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "ebd/reconstruction.hpp"

using namespace ebd;

namespace {

DynamicsParams params(double z, double gamma_s, double gamma_extra, double duration) {
    DynamicsParams p;
    p.squeeze = SqueezeParams::from_z(z);
    p.gamma_s = gamma_s;
    p.gamma_extra = gamma_extra;
    p.duration = duration;
    return p;
}

GaussianState css() { return GaussianState::vacuum({mode::atomic_c, mode::atomic_s}); }

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    const double n = static_cast<double>(v.size());
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    for (double x : v) {
        m.var += (x - m.mean) * (x - m.mean);
    }
    m.var /= n - 1.0;
    return m;
}

double var_se(double var, std::size_t n) { return var * std::sqrt(2.0 / (static_cast<double>(n) - 1.0)); }

} // namespace

TEST(ModeFunction, DiscreteUnitNorm) {
    for (auto kind : {ModeKind::Rising, ModeKind::Falling}) {
        ModeFunction m{kind, 3.0, 2.0, ModePhase::Cos, 0.0};
        const auto w = m.weights(4000, 2.0 / 4000);
        double norm = 0.0;
        for (double v : w) {
            norm += v * v * (2.0 / 4000);
        }
        EXPECT_NEAR(norm, 1.0, 1e-12);
    }
}

TEST(ModeFunction, AnalyticNormalization) {
    const double g = 0.7, t = 1.3;
    ModeFunction rise{ModeKind::Rising, g, t, ModePhase::Cos, 500.0};
    ModeFunction fall{ModeKind::Falling, g, t, ModePhase::Sin, 500.0};
    EXPECT_NEAR(rise.normalization(), 2.0 * std::sqrt(g) / std::sqrt(std::exp(2 * g * t) - 1.0), 1e-14);
    EXPECT_NEAR(fall.normalization(), 2.0 * std::sqrt(g) / std::sqrt(1.0 - std::exp(-2 * g * t)), 1e-14);
    // Discrete normalization of the modulated weights approaches the analytic one.
    const std::size_t n = 200000;
    const double dt = t / n;
    const auto w = fall.weights(n, dt);
    EXPECT_NEAR(w[n / 2] / fall.envelope((n / 2 + 0.5) * dt), fall.normalization(), 1e-3 * fall.normalization());
}

TEST(ModeFunction, CosSinOverlapMatchesAnalyticIntegral) {
    // overlap = N^2 int_0^T e^{-2 g t} cos(W t) sin(W t) dt, which falls off like g/W.
    const double g = 1.0, t = 1.0;
    for (double w : {2.0 * M_PI * 100.0, 2.0 * M_PI * 1000.0}) {
        const std::size_t n = 400000;
        const double dt = t / n;
        ModeFunction c{ModeKind::Falling, g, t, ModePhase::Cos, w};
        ModeFunction s = c;
        s.phase = ModePhase::Sin;
        const auto wc = c.weights(n, dt), ws = s.weights(n, dt);
        double overlap = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            overlap += wc[k] * ws[k] * dt;
        }
        const double e = std::exp(-2.0 * g * t);
        const double integral =
            0.5 * (2.0 * w * (1.0 - e * std::cos(2.0 * w * t)) - 2.0 * g * e * std::sin(2.0 * w * t)) /
            (4.0 * g * g + 4.0 * w * w);
        const double n2 = c.normalization() * c.normalization();
        EXPECT_NEAR(overlap, n2 * integral, 1e-2 * n2 * integral);
    }
}

TEST(ModeFunction, CosSinOrthogonalForFastPrecession) {
    const double t = 1.0;
    const std::size_t n = 4000000;
    const double dt = t / n;
    ModeFunction c{ModeKind::Falling, 0.1, t, ModePhase::Cos, 2.0 * M_PI * 1.0e5};
    ModeFunction s = c;
    s.phase = ModePhase::Sin;
    const auto wc = c.weights(n, dt), ws = s.weights(n, dt);
    double overlap = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        overlap += wc[k] * ws[k] * dt;
    }
    EXPECT_LT(std::abs(overlap), 1e-6);
}

TEST(ModeFunction, ConstantRecordShortPulse) {
    const double v = 1.7, t = 2.0;
    const std::size_t n = 1000;
    for (double g : {1e-3, 1e-2}) {
        ModeFunction m{ModeKind::Falling, g, t, ModePhase::Cos, 0.0};
        HomodyneRecord r{t / n, std::vector<double>(n, v), std::vector<double>(n, 0.0), 0};
        const double p = project_record(r, m);
        EXPECT_NEAR(p / (v * std::sqrt(t)), 1.0, 2.0 * g * t);
    }
}

TEST(ModeFunction, DurationMismatch) {
    HomodyneRecord r{0.01, std::vector<double>(100, 0.0), std::vector<double>(100, 0.0), 0};
    ModeFunction m{ModeKind::Falling, 1.0, 1.5, ModePhase::Cos, 0.0};
    try {
        (void)project_record(r, m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DurationMismatch);
    }
    m.duration = 1.005; // within one sample
    EXPECT_NO_THROW((void)project_record(r, m));
}

TEST(ModeFunction, VacuumRecordsAndModeOverlap) {
    // gamma_s = 0: records are pure shot noise.
    auto p = params(2.5, 0.0, 0.0, 2.0);
    const std::size_t n_traj = 10000, n_steps = 200;
    const auto rec = simulate_records(p, css(), n_steps, n_traj, 7);
    for (double g : {0.5, 4.0}) {
        ModeFunction fall{ModeKind::Falling, g, p.duration, ModePhase::Cos, 0.0};
        ModeFunction rise{ModeKind::Rising, g, p.duration, ModePhase::Cos, 0.0};
        std::vector<double> a(n_traj), b(n_traj);
        double cross = 0.0;
        for (std::size_t j = 0; j < n_traj; ++j) {
            a[j] = project_record(rec.record(j), fall);
            b[j] = rec.project(j, ModePhase::Cos, 0, n_steps, rise);
            cross += a[j] * b[j];
        }
        const auto ma = moments(a), mb = moments(b);
        EXPECT_NEAR(ma.var, 0.5, 3.0 * var_se(0.5, n_traj));
        EXPECT_NEAR(mb.var, 0.5, 3.0 * var_se(0.5, n_traj));
        // correlation of the two projections is the mode overlap
        const double corr = (cross / n_traj - ma.mean * mb.mean) / std::sqrt(ma.var * mb.var);
        const double expected = rising_falling_overlap(g, p.duration);
        EXPECT_NEAR(corr, expected, 3.0 * (1.0 - expected * expected) / std::sqrt(n_traj) + 1e-3);
    }
    EXPECT_LT(rising_falling_overlap(40.0, 1.0), 1e-15);
}

TEST(Reconstruct, RoundTripWithoutDecay) {
    ReconstructionInput in;
    in.kappa = std::sqrt(0.5);
    in.z = 2.5;
    in.var_y_out = forward_variance(in, 0.5, false);
    EXPECT_NEAR(in.var_y_out, 0.71, 1e-15);
    EXPECT_NEAR(reconstruct_variance(in, false), 0.5, 1e-15);
}

TEST(Reconstruct, CoherentSpinStateGivesUnitXi) {
    auto p = params(2.5, 1.0, 0.0, 0.4);
    auto out = step_io(p, io_input_state(css()));
    double xi = 0.0;
    for (const auto* light : {&mode::light_c, &mode::light_s}) {
        xi += reconstruct_variance(reconstruction_input(p, out.variance(*light, Quadrature::X), false), false);
    }
    EXPECT_NEAR(xi, 1.0, 1e-12);
}

TEST(Reconstruct, RoundTripWithDecayAndLoss) {
    Eigen::Matrix4d atoms = Eigen::Matrix4d::Zero();
    atoms.diagonal() << 1.5, 0.3, 2.0, 0.2;
    atoms(1, 3) = atoms(3, 1) = 0.05;
    const GaussianState in({mode::atomic_c, mode::atomic_s}, atoms, Eigen::Vector4d::Zero());
    for (double ratio : {0.0, 0.3, 1.0}) {
        auto p = params(2.5, 1.0, ratio, 0.6);
        p.eta = 0.84;
        auto out = step_io_noisy(p, io_input_state(in));
        out = beam_splitter_loss(out, mode::light_c, p.eta);
        out = beam_splitter_loss(out, mode::light_s, p.eta);
        const double pc = reconstruct_variance(
            reconstruction_input(p, out.variance(mode::light_c, Quadrature::X), true), true);
        const double ps = reconstruct_variance(
            reconstruction_input(p, out.variance(mode::light_s, Quadrature::X), true), true);
        EXPECT_NEAR(pc, 0.3, 1e-9);
        EXPECT_NEAR(ps, 0.2, 1e-9);
    }
}

TEST(Reconstruct, IllConditioned) {
    ReconstructionInput in;
    in.kappa = 1e-7;
    in.var_y_out = 0.5;
    try {
        (void)reconstruct_variance(in, false);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::IllConditioned);
    }
}

TEST(Calibration, Ratio) {
    EXPECT_DOUBLE_EQ(calibrate_kappa(1.0, 0.49), 0.49);
    try {
        (void)calibrate_kappa(1e-12, 0.49);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::CalibrationUndefined);
    }
}

TEST(Calibration, NoiselessProtocolRecoversKappa) {
    for (double ratio : {0.0, 0.5}) {
        auto p = params(2.5, 1.0, ratio, 0.3);
        const double k = coupling_kappa(p).kappa;
        for (double q : {0.1, 1.0, 10.0}) {
            const auto run = simulate_kappa_calibration(p, q);
            EXPECT_NEAR(run.kappa2, k * k, 1e-9);
            EXPECT_NEAR(run.x_after_first, k * q, 1e-12 * std::max(1.0, q));
        }
    }
}

TEST(Calibration, MonteCarloSecondPulse) {
    auto p = params(2.5, 1.0, 0.5, 0.3);
    const double q = 3.0;
    const double k2 = std::pow(coupling_kappa(p).kappa, 2);
    // atoms after the first pulse and the rotation: <P_c> = kappa q
    Eigen::Vector4d mean(0.0, std::sqrt(k2) * q, 0.0, 0.0);
    const GaussianState atoms({mode::atomic_c, mode::atomic_s}, Eigen::Matrix4d::Identity() * 0.5, mean);
    const std::size_t n_traj = 10000;
    const auto rec = simulate_records(p, atoms, 100, n_traj, 99);
    ModeFunction fall{ModeKind::Falling, p.gamma_total(), p.duration, ModePhase::Cos, 0.0};
    std::vector<double> y(n_traj);
    for (std::size_t j = 0; j < n_traj; ++j) {
        y[j] = project_record(rec.record(j), fall);
    }
    const auto m = moments(y);
    const double est = calibrate_kappa(q, m.mean);
    EXPECT_NEAR(est, k2, 3.0 * std::sqrt(m.var / n_traj) / q);
}

TEST(Simulation, StepSizeEnforced) {
    auto p = params(2.5, 1.0, 0.0, 1.0);
    try {
        (void)simulate_records(p, css(), 50, 2, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::StepSize);
    }
}

TEST(Simulation, ReproducibleAcrossJobs) {
    auto p = params(2.5, 1.0, 0.2, 0.5);
    SimulationOptions one, three;
    three.jobs = 3;
    const auto a = simulate_records(p, css(), 60, 7, 42, one);
    const auto b = simulate_records(p, css(), 60, 7, 42, three);
    const auto c = simulate_records(p, css(), 60, 7, 43, one);
    EXPECT_EQ(a.y_c, b.y_c);
    EXPECT_EQ(a.y_s, b.y_s);
    EXPECT_EQ(a.final_atoms, b.final_atoms);
    EXPECT_NE(a.y_c, c.y_c);
    EXPECT_EQ(a.trajectory_seeds, b.trajectory_seeds);
}

TEST(Simulation, FilterCovarianceFollowsRiccati) {
    auto p = params(2.5, 1.0, 0.5, 3.0);
    const std::size_t n = 600;
    const auto rec = simulate_records(p, css(), n, 1, 1);
    const double dt = p.duration / n;
    const auto exact = evolve_conditional(p, 0.5, {dt * 100, dt * 300, p.duration}).closed_form;
    EXPECT_NEAR(rec.conditional_var_p[99], exact[0], 2e-2 * exact[0]);
    EXPECT_NEAR(rec.conditional_var_p[299], exact[1], 2e-2 * exact[1]);
    EXPECT_NEAR(rec.conditional_var_p[n - 1], exact[2], 2e-2 * exact[2]);
    // c and s sectors are identical
    EXPECT_NEAR(rec.conditional_cov(3, 3), rec.conditional_cov(1, 1), 1e-15);
}

TEST(Simulation, ConditionalVarianceReachesSqueezedLimit) {
    auto p = params(2.5, 1.0, 0.0, 3.0);
    const std::size_t n_traj = 10000;
    SimulationOptions opt;
    opt.keep_records = false;
    const auto rec = simulate_records(p, css(), 400, n_traj, 5, opt);
    std::vector<double> err(n_traj), lo, hi;
    for (std::size_t j = 0; j < n_traj; ++j) {
        err[j] = rec.final_atoms(1, j) - rec.filtered_atoms(1, j);
        (rec.filtered_atoms(1, j) < 0.0 ? lo : hi).push_back(err[j]);
    }
    const double target = 0.5 / 6.25;
    const auto m = moments(err);
    EXPECT_NEAR(m.var, target, 3.0 * var_se(target, n_traj));
    EXPECT_NEAR(rec.conditional_cov(1, 1), target, 1e-3);
    // outcome independence: trajectories with opposite estimates share the conditional variance
    const auto ml = moments(lo), mh = moments(hi);
    EXPECT_NEAR(ml.var, mh.var, 3.0 * std::hypot(var_se(target, lo.size()), var_se(target, hi.size())));
}

TEST(Simulation, UnconditionalCovarianceMatchesSamples) {
    auto p = params(2.5, 1.0, 1.0, 1.0);
    const std::size_t n_traj = 10000;
    SimulationOptions opt;
    opt.keep_records = false;
    opt.eta = 0.8;
    const auto rec = simulate_records(p, css(), 200, n_traj, 11, opt);
    const Eigen::MatrixXd centered = rec.final_atoms.colwise() - rec.final_atoms.rowwise().mean();
    const Eigen::Matrix4d emp = centered * centered.transpose() / (n_traj - 1.0);
    for (int i = 0; i < 4; ++i) {
        const double v = rec.unconditional_cov(i, i);
        EXPECT_NEAR(emp(i, i), v, 3.0 * var_se(v, n_traj));
    }
    const double v_exact = evolve_unconditional(p, 0.5, {p.duration}).closed_form[0];
    EXPECT_NEAR(rec.unconditional_cov(1, 1), v_exact, 1e-3 * v_exact);
}

TEST(Simulation, CsvExport) {
    auto p = params(2.5, 1.0, 0.0, 0.05);
    const auto rec = simulate_records(p, css(), 10, 2, 3);
    std::ostringstream os;
    write_records_csv(os, rec);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "trajectory_id,step,t_ms,y_c,y_s");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
    }
    EXPECT_EQ(rows, 20);
    std::ostringstream again;
    write_records_csv(again, simulate_records(p, css(), 10, 2, 3));
    EXPECT_EQ(os.str(), again.str());
}

TEST(Alpha, UncorrelatedSlices) {
    auto p = params(2.5, 0.0, 0.0, 1.0);
    const std::size_t n_traj = 10000;
    const auto rec = simulate_records(p, css(), 100, n_traj, 21);
    ModeFunction m{ModeKind::Rising, 1.0, 0.5, ModePhase::Cos, 0.0};
    std::vector<double> a(n_traj), b(n_traj);
    for (std::size_t j = 0; j < n_traj; ++j) {
        a[j] = rec.project(j, ModePhase::Cos, 0, 50, m);
        b[j] = rec.project(j, ModePhase::Cos, 50, 50, m);
    }
    const auto fit = fit_alpha(a, b);
    EXPECT_NEAR(fit.alpha, 0.0, 3.0 / std::sqrt(n_traj));
    EXPECT_NEAR(fit.var_cond / fit.var_out, 1.0, 3e-3);
}

TEST(Alpha, ClosedFormMatchesGrid) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    std::vector<double> a(5000), b(5000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = g(rng);
        b[i] = 0.37 * a[i] + 0.5 * g(rng);
    }
    std::vector<double> grid;
    for (int k = -100; k <= 100; ++k) {
        grid.push_back(0.01 * k);
    }
    const auto fit = fit_alpha(a, b, grid);
    EXPECT_NEAR(fit.grid_alpha, fit.alpha, 0.005 + 1e-12);
    EXPECT_LE(fit.var_cond, fit.grid_var);
    EXPECT_THROW((void)fit_alpha(std::vector<double>(10, 1.0), b.size() >= 10 ? std::vector<double>(b.begin(), b.begin() + 10) : b), Error);
}

TEST(ConditionalEstimate, PipelineReproducesRiccatiSteadyState) {
    auto p = params(2.5, 1.0, 1.0, 4.5);
    const std::size_t n_steps = 900, split = 600, n_traj = 4000;
    const auto rec = simulate_records(p, css(), n_steps, n_traj, 2024);
    const double rate = optimal_probe_rate(p);
    EXPECT_NEAR(rate, 5.0, 1e-12);
    ModeFunction probe{ModeKind::Rising, rate, split * rec.dt, ModePhase::Cos, 0.0};
    const auto est = conditional_variance_estimate(rec, split, probe);
    EXPECT_NEAR(est.xi_cond, steady_state_xi_cond(p), 3.0 * est.xi_cond_se);
    EXPECT_NEAR(steady_state_xi_cond(p), 0.4, 1e-15);
    EXPECT_LE(est.xi_cond, est.xi_uncond);
    // uniform probe weighting does worse when gamma_extra > 0
    ModeFunction uniform = probe;
    uniform.rate = 0.0;
    const auto flat = conditional_variance_estimate(rec, split, uniform);
    EXPECT_GT(flat.xi_cond, est.xi_cond);
}
