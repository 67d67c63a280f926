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

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ebd/dynamics.hpp"
#include "ebd/error.hpp"
#include "ebd/gaussian_state.hpp"
#include "ebd/parallel.hpp"

namespace ebd {

// ---------------------------------------------------------------------------
// Temporal mode functions

enum class ModeKind { Rising, Falling };
enum class ModePhase { Cos, Sin };

/// Weight N e^{+-gamma t} on [0, T], optionally modulated by cos/sin(Omega t). With omega = 0
/// the mode acts on demodulated records and `phase` only selects the c or s channel.
struct ModeFunction {
    ModeKind kind = ModeKind::Falling;
    double rate = 0.0;
    double duration = 1.0;
    ModePhase phase = ModePhase::Cos;
    double omega = 0.0;

    void validate() const {
        require(std::isfinite(rate) && rate >= 0.0, ErrorKind::InvalidArgument, "mode rate must be >= 0");
        require(std::isfinite(duration) && duration > 0.0, ErrorKind::InvalidArgument, "mode duration must be > 0");
        require(std::isfinite(omega) && omega >= 0.0, ErrorKind::InvalidArgument, "omega must be >= 0");
    }

    /// Analytic normalization. For modulated modes with Omega T >> 1 this is
    /// 2 sqrt(gamma)/sqrt(e^{2 gamma T} - 1) (rising) or 2 sqrt(gamma)/sqrt(1 - e^{-2 gamma T})
    /// (falling); demodulated modes lack the factor 2 from the cos^2 average.
    double normalization() const {
        validate();
        const double mod = omega > 0.0 ? 2.0 : 1.0;
        const double gt = rate * duration;
        if (gt < 1e-12) {
            return std::sqrt(mod / duration);
        }
        const double span = kind == ModeKind::Rising ? std::expm1(2.0 * gt) : -std::expm1(-2.0 * gt);
        return std::sqrt(mod * 2.0 * rate / span);
    }

    double envelope(double t) const {
        const double e = std::exp((kind == ModeKind::Rising ? 1.0 : -1.0) * rate * t);
        if (omega == 0.0) {
            return e;
        }
        return e * (phase == ModePhase::Cos ? std::cos(omega * t) : std::sin(omega * t));
    }

    /// Midpoint samples on n steps of dt, scaled so that sum w^2 dt = 1.
    std::vector<double> weights(std::size_t n, double dt) const {
        validate();
        require(n > 0 && dt > 0.0, ErrorKind::InvalidArgument, "need a positive number of samples");
        std::vector<double> w(n);
        double norm = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            w[k] = envelope((static_cast<double>(k) + 0.5) * dt);
            norm += w[k] * w[k] * dt;
        }
        require(norm > 0.0, ErrorKind::Degeneracy, "mode function vanishes on the sample grid");
        const double scale = 1.0 / std::sqrt(norm);
        for (auto& v : w) {
            v *= scale;
        }
        return w;
    }
};

/// Overlap of the unit-normalized rising and falling demodulated modes of equal rate.
inline double rising_falling_overlap(double rate, double duration) { return exp_mode_overlap(rate * duration); }

// ---------------------------------------------------------------------------
// Records

/// Demodulated homodyne record of the y quadrature in the c and s channels. Samples are
/// rate-like: a vacuum record has per-sample variance 1/(2 dt).
struct HomodyneRecord {
    double dt = 0.0;
    std::vector<double> y_c;
    std::vector<double> y_s;
    std::uint64_t seed = 0;

    double duration() const { return dt * static_cast<double>(y_c.size()); }
    const std::vector<double>& channel(ModePhase phase) const { return phase == ModePhase::Cos ? y_c : y_s; }
};

/// Weighted integral sum_k w_k y_k dt of samples [first, first + n).
inline double project_samples(const double* samples, std::size_t n, double dt, const ModeFunction& mode) {
    require(std::abs(static_cast<double>(n) * dt - mode.duration) <= dt * (1.0 + 1e-9), ErrorKind::DurationMismatch,
            "record slice and mode function durations differ by more than one sample");
    const auto w = mode.weights(n, dt);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        acc += w[k] * samples[k];
    }
    return acc * dt;
}

/// Projection of the record channel selected by mode.phase.
inline double project_record(const HomodyneRecord& record, const ModeFunction& mode) {
    const auto& ch = record.channel(mode.phase);
    require(!ch.empty(), ErrorKind::InvalidArgument, "empty record");
    return project_samples(ch.data(), ch.size(), record.dt, mode);
}

// ---------------------------------------------------------------------------
// Variance reconstruction

struct ReconstructionInput {
    double var_y_out = 0.0;
    double kappa = 0.0;
    double z = 1.0;
    double sigma_in2 = kVacuumVariance;
    double eta = 1.0;
    /// Coefficients of the input light and F noise in var(y_out) (decay model).
    double u2 = 1.0;
    double v2 = 0.0;
};

/// Fills kappa, U^2 and V^2 from the pulse map of duration p.duration.
inline ReconstructionInput reconstruction_input(const DynamicsParams& p, double var_y_out, bool with_decay) {
    p.validate();
    const auto ch = sector_channel(p.gamma_s, with_decay ? p.gamma_extra : 0.0, p.squeeze.z(), p.duration);
    ReconstructionInput in;
    in.var_y_out = var_y_out;
    in.kappa = ch.kappa;
    in.z = p.squeeze.z();
    in.eta = p.eta;
    in.u2 = ch.u2;
    in.v2 = ch.v2;
    return in;
}

/// var(P_in) from the measured output variance. Detection loss is inverted first:
/// var_meas = eta var_y + (1 - eta) sigma_in^2.
inline double reconstruct_variance(const ReconstructionInput& in, bool with_decay) {
    require(std::isfinite(in.var_y_out) && in.var_y_out >= 0.0, ErrorKind::InvalidArgument,
            "measured variance must be >= 0");
    require(in.eta > 0.0 && in.eta <= 1.0, ErrorKind::InvalidArgument, "eta must be in (0, 1]");
    const double k2 = in.kappa * in.kappa;
    require(k2 >= 1e-12, ErrorKind::IllConditioned, "kappa^2 below 1e-12; reconstruction ill-conditioned");
    const double var_y = (in.var_y_out - (1.0 - in.eta) * in.sigma_in2) / in.eta;
    if (!with_decay) {
        return (var_y - in.sigma_in2 * (1.0 - k2 / (in.z * in.z))) / k2;
    }
    return (var_y - in.u2 * in.sigma_in2 - in.v2 * kVacuumVariance) / k2;
}

/// Forward map of reconstruct_variance for a known input variance.
inline double forward_variance(const ReconstructionInput& in, double var_p, bool with_decay) {
    const double k2 = in.kappa * in.kappa;
    const double noise = with_decay ? in.u2 * in.sigma_in2 + in.v2 * kVacuumVariance
                                    : in.sigma_in2 * (1.0 - k2 / (in.z * in.z));
    return in.eta * (k2 * var_p + noise) + (1.0 - in.eta) * in.sigma_in2;
}

// ---------------------------------------------------------------------------
// kappa^2 calibration

inline double calibrate_kappa(double q_first_mean, double y_second_mean) {
    require(std::isfinite(q_first_mean) && std::abs(q_first_mean) > 1e-9, ErrorKind::CalibrationUndefined,
            "first-pulse displacement vanishes; kappa^2 undefined");
    require(std::isfinite(y_second_mean), ErrorKind::InvalidArgument, "second-pulse mean must be finite");
    return y_second_mean / q_first_mean;
}

/// pi/2 rotation of both atomic sectors taking X into P: (X, P) -> (-P, X).
inline GaussianState rotate_x_into_p(const GaussianState& state) {
    const Eigen::Index dim = state.cov().rows();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim);
    for (const auto* mode : {&mode::atomic_c, &mode::atomic_s}) {
        const Eigen::Index ix = state.slot(*mode, Quadrature::X);
        m(ix, ix) = 0.0;
        m(ix + 1, ix + 1) = 0.0;
        m(ix, ix + 1) = -1.0;
        m(ix + 1, ix) = 1.0;
    }
    return apply_affine_channel(state, m, Eigen::MatrixXd::Zero(dim, dim), Eigen::VectorXd::Zero(dim));
}

struct CalibrationRun {
    double q_first = 0.0;
    double x_after_first = 0.0; // <X_c> after the first pulse
    double y_second = 0.0;      // <y_c,-> of the second pulse
    double kappa2 = 0.0;
};

/// Noiseless two-pulse protocol on the c sector: displaced q of the first input pulse, rotation of
/// X into P, readout of <y> in the second pulse. Both pulses use the noisy pulse map of p.
inline CalibrationRun simulate_kappa_calibration(const DynamicsParams& p, double q_first) {
    p.validate();
    auto first = io_input_state(GaussianState::vacuum({mode::atomic_c, mode::atomic_s}));
    Eigen::VectorXd disp = first.disp();
    disp(first.slot(mode::light_c, Quadrature::P)) = q_first;
    first = GaussianState(first.modes(), first.cov(), disp);
    const auto after = step_io_noisy(p, first).marginal({mode::atomic_c, mode::atomic_s});
    const auto rotated = rotate_x_into_p(after);
    const auto second = step_io_noisy(p, io_input_state(rotated));
    CalibrationRun out;
    out.q_first = q_first;
    out.x_after_first = after.mean(mode::atomic_c, Quadrature::X);
    out.y_second = second.mean(mode::light_c, Quadrature::X);
    out.kappa2 = calibrate_kappa(q_first, out.y_second);
    return out;
}

// ---------------------------------------------------------------------------
// Record simulation

struct SimulationOptions {
    double eta = 1.0;             // detection efficiency applied to the recorded y
    double classical_noise = 0.0; // extra white noise, variance per unit mode
    unsigned jobs = 1;
    bool keep_records = true;
};

/// Ensemble of simulated trajectories. Column j of the sample matrices is trajectory j.
struct RecordSet {
    DynamicsParams params;
    std::uint64_t seed = 0;
    double dt = 0.0;
    std::size_t n_steps = 0;
    std::size_t n_traj = 0;
    Eigen::MatrixXd y_c; // n_steps x n_traj
    Eigen::MatrixXd y_s;
    std::vector<std::uint64_t> trajectory_seeds;
    /// Sampled atomic quadratures (X_c, P_c, X_s, P_s) at the end, one column per trajectory.
    Eigen::MatrixXd final_atoms;
    /// Kalman-filter estimates of the same quadratures from each trajectory's record.
    Eigen::MatrixXd filtered_atoms;
    /// Outcome-independent conditional covariance (X_c, P_c, X_s, P_s) at the end.
    Eigen::Matrix4d conditional_cov = Eigen::Matrix4d::Zero();
    /// Covariance without conditioning at the end.
    Eigen::Matrix4d unconditional_cov = Eigen::Matrix4d::Zero();
    /// Conditional variance of P_c after each step.
    std::vector<double> conditional_var_p;

    HomodyneRecord record(std::size_t traj) const {
        require(traj < n_traj && y_c.size() > 0, ErrorKind::InvalidArgument, "record not available");
        HomodyneRecord r;
        r.dt = dt;
        r.seed = trajectory_seeds[traj];
        r.y_c.assign(y_c.col(static_cast<Eigen::Index>(traj)).data(),
                     y_c.col(static_cast<Eigen::Index>(traj)).data() + n_steps);
        r.y_s.assign(y_s.col(static_cast<Eigen::Index>(traj)).data(),
                     y_s.col(static_cast<Eigen::Index>(traj)).data() + n_steps);
        return r;
    }

    /// Projection of samples [first, first + n) of one trajectory.
    double project(std::size_t traj, ModePhase channel, std::size_t first, std::size_t n,
                   const ModeFunction& mode) const {
        require(traj < n_traj && first + n <= n_steps, ErrorKind::InvalidArgument, "slice outside the record");
        const auto& m = channel == ModePhase::Cos ? y_c : y_s;
        require(m.size() > 0, ErrorKind::InvalidArgument, "records were not kept");
        return project_samples(m.col(static_cast<Eigen::Index>(traj)).data() + first, n, dt, mode);
    }
};

namespace detail {

/// Square root factor L with L L^T = m for a positive semidefinite m.
inline Eigen::Matrix4d psd_sqrt(const Eigen::Matrix4d& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m);
    const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

struct SectorFilter {
    Eigen::Matrix2d cov;
    Eigen::Vector2d gain;
    double obs_var = 0.0;
};

} // namespace detail

/// Discretized pulse map with explicit Gaussian noise draws: each step of length dt applies the
/// noisy pulse map of duration dt to the atoms and a fresh vacuum light slice, and records the
/// y quadrature of the output slice. p.duration is the total record length. The filter treats
/// the c and s sectors separately, which is exact when they are initially uncorrelated.
inline RecordSet simulate_records(const DynamicsParams& p, const GaussianState& atoms0, std::size_t n_steps,
                                  std::size_t n_traj, std::uint64_t seed, const SimulationOptions& opt = {}) {
    p.validate();
    require(n_steps > 0 && n_traj > 0, ErrorKind::InvalidArgument, "need at least one step and trajectory");
    require(std::isfinite(p.duration) && p.duration > 0.0, ErrorKind::InvalidArgument,
            "record duration must be finite and > 0");
    require(opt.eta > 0.0 && opt.eta <= 1.0, ErrorKind::InvalidArgument, "eta must be in (0, 1]");
    require(opt.classical_noise >= 0.0, ErrorKind::InvalidArgument, "classical noise must be >= 0");
    const double dt = p.duration / static_cast<double>(n_steps);
    require(p.gamma_s * dt < 0.01 && p.gamma_extra * dt < 0.01, ErrorKind::StepSize,
            "time step too coarse: gamma * dt must be < 0.01");

    const auto ch = sector_channel(p.gamma_s, p.gamma_extra, p.squeeze.z(), dt);
    const Eigen::Matrix4d noise_root = detail::psd_sqrt(ch.noise);
    const double sqrt_eta = std::sqrt(opt.eta);
    const double extra_var = (1.0 - opt.eta) * kVacuumVariance + opt.classical_noise;
    const double extra_sd = std::sqrt(extra_var);

    const GaussianState atoms = atoms0.marginal({mode::atomic_c, mode::atomic_s});
    const Eigen::Matrix4d cov0 = atoms.cov();
    const Eigen::Vector4d mean0 = atoms.disp();
    const Eigen::Matrix4d root0 = detail::psd_sqrt(cov0);

    // Deterministic filter: gains and conditional covariances are outcome independent.
    std::vector<std::array<detail::SectorFilter, 2>> filters(n_steps);
    std::array<Eigen::Matrix2d, 2> cond{cov0.block<2, 2>(0, 0), cov0.block<2, 2>(2, 2)};
    Eigen::Matrix4d uncond = cov0;
    Eigen::Matrix4d sector_in = Eigen::Matrix4d::Identity() * kVacuumVariance;
    RecordSet out;
    out.conditional_var_p.reserve(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) {
        for (int s = 0; s < 2; ++s) {
            sector_in.block<2, 2>(0, 0) = cond[s];
            const Eigen::Matrix4d joint = ch.s * sector_in * ch.s.transpose() + ch.noise;
            auto& f = filters[k][s];
            f.obs_var = opt.eta * joint(2, 2) + extra_var;
            f.gain = sqrt_eta * joint.block<2, 1>(0, 2) / f.obs_var;
            cond[s] = joint.block<2, 2>(0, 0) - f.gain * f.gain.transpose() * f.obs_var;
            f.cov = cond[s];
        }
        out.conditional_var_p.push_back(cond[0](1, 1));
        Eigen::Matrix4d full = Eigen::Matrix4d::Zero();
        for (int s = 0; s < 2; ++s) {
            sector_in.block<2, 2>(0, 0) = uncond.block<2, 2>(2 * s, 2 * s);
            const Eigen::Matrix4d joint = ch.s * sector_in * ch.s.transpose() + ch.noise;
            full.block<2, 2>(2 * s, 2 * s) = joint.block<2, 2>(0, 0);
        }
        // c/s cross correlations decay with the atomic block of the map
        const Eigen::Matrix2d a = ch.s.block<2, 2>(0, 0);
        full.block<2, 2>(0, 2) = a * uncond.block<2, 2>(0, 2) * a.transpose();
        full.block<2, 2>(2, 0) = full.block<2, 2>(0, 2).transpose();
        uncond = full;
    }
    out.conditional_cov.block<2, 2>(0, 0) = cond[0];
    out.conditional_cov.block<2, 2>(2, 2) = cond[1];
    out.unconditional_cov = uncond;

    out.params = p;
    out.seed = seed;
    out.dt = dt;
    out.n_steps = n_steps;
    out.n_traj = n_traj;
    out.trajectory_seeds.resize(n_traj);
    out.final_atoms.resize(4, static_cast<Eigen::Index>(n_traj));
    out.filtered_atoms.resize(4, static_cast<Eigen::Index>(n_traj));
    if (opt.keep_records) {
        out.y_c.resize(static_cast<Eigen::Index>(n_steps), static_cast<Eigen::Index>(n_traj));
        out.y_s.resize(static_cast<Eigen::Index>(n_steps), static_cast<Eigen::Index>(n_traj));
    }
    const double inv_sqrt_dt = 1.0 / std::sqrt(dt);
    const double vac_sd = std::sqrt(kVacuumVariance);

    parallel_for(n_traj, opt.jobs, [&](std::size_t j) {
        const std::uint64_t traj_seed = derive_seed(seed, j);
        out.trajectory_seeds[j] = traj_seed;
        std::mt19937_64 rng(traj_seed);
        std::normal_distribution<double> unit(0.0, 1.0);
        Eigen::Vector4d z;
        for (int i = 0; i < 4; ++i) {
            z(i) = unit(rng);
        }
        Eigen::Vector4d x = mean0 + root0 * z;
        Eigen::Vector4d est = mean0;
        const auto col = static_cast<Eigen::Index>(j);
        for (std::size_t k = 0; k < n_steps; ++k) {
            for (int s = 0; s < 2; ++s) {
                Eigen::Vector4d v(x(2 * s), x(2 * s + 1), vac_sd * unit(rng), vac_sd * unit(rng));
                for (int i = 0; i < 4; ++i) {
                    z(i) = unit(rng);
                }
                const Eigen::Vector4d o = ch.s * v + noise_root * z;
                x(2 * s) = o(0);
                x(2 * s + 1) = o(1);
                const double measured = sqrt_eta * o(2) + (extra_var > 0.0 ? extra_sd * unit(rng) : 0.0);
                // filter: predict then update on the recorded y
                const Eigen::Vector2d prior = ch.s.block<2, 2>(0, 0) * est.segment<2>(2 * s);
                const double predicted = sqrt_eta * ch.s.block<1, 2>(2, 0).dot(est.segment<2>(2 * s));
                est.segment<2>(2 * s) = prior + filters[k][s].gain * (measured - predicted);
                if (opt.keep_records) {
                    (s == 0 ? out.y_c : out.y_s)(static_cast<Eigen::Index>(k), col) = measured * inv_sqrt_dt;
                }
            }
        }
        out.final_atoms.col(col) = x;
        out.filtered_atoms.col(col) = est;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Conditional variance from records

struct AlphaFit {
    double alpha = 0.0;      // closed-form minimizer <y_probe y_out> / var(y_probe)
    double var_out = 0.0;    // var(y_out)
    double var_cond = 0.0;   // var(y_out - alpha y_probe)
    double grid_alpha = 0.0; // minimizer over the grid, if one was given
    double grid_var = std::numeric_limits<double>::quiet_NaN();
};

inline AlphaFit fit_alpha(const std::vector<double>& probe, const std::vector<double>& out,
                          const std::vector<double>& alpha_grid = {}) {
    require(probe.size() == out.size() && probe.size() >= 3, ErrorKind::InvalidArgument,
            "need at least three paired samples");
    const double n = static_cast<double>(probe.size());
    double mp = 0.0, mo = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        mp += probe[i];
        mo += out[i];
    }
    mp /= n;
    mo /= n;
    double vp = 0.0, vo = 0.0, cpo = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        vp += (probe[i] - mp) * (probe[i] - mp);
        vo += (out[i] - mo) * (out[i] - mo);
        cpo += (probe[i] - mp) * (out[i] - mo);
    }
    vp /= n - 1.0;
    vo /= n - 1.0;
    cpo /= n - 1.0;
    require(vp > 1e-14 * std::max(1.0, vo), ErrorKind::DegenerateMeasurement, "probe variance vanishes");
    AlphaFit fit;
    fit.alpha = cpo / vp;
    fit.var_out = vo;
    fit.var_cond = vo - cpo * cpo / vp;
    for (double a : alpha_grid) {
        const double v = vo + a * a * vp - 2.0 * a * cpo;
        if (!(v >= fit.grid_var)) {
            fit.grid_var = v;
            fit.grid_alpha = a;
        }
    }
    return fit;
}

/// Decay rate of the steady-state conditional-mean kernel; the optimal probe mode rises at
/// this rate.
inline double optimal_probe_rate(const DynamicsParams& p) {
    const double z2 = p.squeeze.z() * p.squeeze.z();
    return p.gamma_total() + 4.0 * p.gamma_s * (z2 * conditional_steady_variance(p) - kVacuumVariance);
}

struct ConditionalEstimate {
    double alpha_c = 0.0;
    double alpha_s = 0.0;
    double var_p_c = 0.0; // reconstructed conditional var(P_c)
    double var_p_s = 0.0;
    double var_p_c_uncond = 0.0;
    double var_p_s_uncond = 0.0;
    double xi_cond = 0.0;
    double xi_cond_se = 0.0;
    double xi_uncond = 0.0;
    double grid_alpha_c = 0.0;
};

/// Splits each record at `split` samples: the probe slice [0, split) is projected on `probe_mode`
/// and the readout slice [split, n_steps) on the falling mode of rate gamma_s + gamma_extra.
/// The readout slice is reconstructed with the decay-corrected pulse map of its duration.
inline ConditionalEstimate conditional_variance_estimate(const RecordSet& records, std::size_t split,
                                                         const ModeFunction& probe_mode,
                                                         const std::vector<double>& alpha_grid = {},
                                                         double eta = 1.0) {
    require(split > 0 && split < records.n_steps, ErrorKind::InvalidArgument,
            "both the probe and the readout slice must be non-empty");
    const std::size_t n_read = records.n_steps - split;
    DynamicsParams readout = records.params;
    readout.duration = static_cast<double>(n_read) * records.dt;
    readout.eta = eta;
    ModeFunction out_mode{ModeKind::Falling, readout.gamma_total(), readout.duration, ModePhase::Cos, 0.0};
    ModeFunction probe = probe_mode;

    ConditionalEstimate est;
    double se2 = 0.0;
    for (ModePhase ph : {ModePhase::Cos, ModePhase::Sin}) {
        std::vector<double> yp(records.n_traj), yo(records.n_traj);
        probe.phase = ph;
        out_mode.phase = ph;
        for (std::size_t j = 0; j < records.n_traj; ++j) {
            yp[j] = records.project(j, ph, 0, split, probe);
            yo[j] = records.project(j, ph, split, n_read, out_mode);
        }
        const auto fit = fit_alpha(yp, yo, alpha_grid);
        const double cond = reconstruct_variance(reconstruction_input(readout, fit.var_cond, true), true);
        const double uncond = reconstruct_variance(reconstruction_input(readout, fit.var_out, true), true);
        const double k2 = std::pow(sector_channel(readout.gamma_s, readout.gamma_extra, readout.squeeze.z(),
                                                  readout.duration).kappa, 2);
        // standard error of a Gaussian sample variance, propagated through the linear inverse
        const double se = fit.var_cond * std::sqrt(2.0 / (static_cast<double>(records.n_traj) - 1.0)) / (eta * k2);
        se2 += se * se;
        if (ph == ModePhase::Cos) {
            est.alpha_c = fit.alpha;
            est.grid_alpha_c = fit.grid_alpha;
            est.var_p_c = cond;
            est.var_p_c_uncond = uncond;
        } else {
            est.alpha_s = fit.alpha;
            est.var_p_s = cond;
            est.var_p_s_uncond = uncond;
        }
    }
    est.xi_cond = est.var_p_c + est.var_p_s;
    est.xi_uncond = est.var_p_c_uncond + est.var_p_s_uncond;
    est.xi_cond_se = std::sqrt(se2);
    return est;
}

// ---------------------------------------------------------------------------
// CSV export

/// Columns: trajectory_id, step, t_ms, y_c, y_s; t_ms is the start of the sample interval.
inline void write_records_csv(std::ostream& os, const RecordSet& records) {
    require(records.y_c.size() > 0, ErrorKind::InvalidArgument, "records were not kept");
    os << "trajectory_id,step,t_ms,y_c,y_s\n";
    os << std::setprecision(17);
    for (std::size_t j = 0; j < records.n_traj; ++j) {
        for (std::size_t k = 0; k < records.n_steps; ++k) {
            const auto r = static_cast<Eigen::Index>(k), c = static_cast<Eigen::Index>(j);
            os << j << ',' << k << ',' << static_cast<double>(k) * records.dt << ',' << records.y_c(r, c) << ','
               << records.y_s(r, c) << '\n';
        }
    }
}

} // namespace ebd
