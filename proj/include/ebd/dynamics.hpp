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
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ebd/error.hpp"
#include "ebd/gaussian_state.hpp"
#include "ebd/ode.hpp"
#include "ebd/squeeze.hpp"

namespace ebd {

/// Physical parameters of the two-ensemble Gaussian model. Rates in 1/ms, times in ms.
struct DynamicsParams {
    double gamma_s = 1.0;
    double gamma_extra = 0.0;
    SqueezeParams squeeze = SqueezeParams::from_z(2.5);
    double omega = 0.0;
    double delta_omega = 0.0;
    double duration = 1.0;
    double eta = 1.0;

    [[nodiscard]] double gamma_total() const noexcept { return gamma_s + gamma_extra; }

    void validate() const {
        require(std::isfinite(gamma_s) && gamma_s >= 0.0, ErrorKind::InvalidArgument, "gamma_s must be >= 0");
        require(std::isfinite(gamma_extra) && gamma_extra >= 0.0, ErrorKind::InvalidArgument,
                "gamma_extra must be >= 0");
        require(!std::isnan(duration) && duration >= 0.0, ErrorKind::InvalidArgument,
                "pulse duration T must be >= 0");
        require(eta >= 0.0 && eta <= 1.0, ErrorKind::InvalidArgument, "eta must lie in [0, 1]");
        require(std::isfinite(omega) && std::isfinite(delta_omega), ErrorKind::InvalidArgument,
                "Larmor frequencies must be finite");
    }
};

struct DerivedCouplings {
    double kappa = 0.0;
    double gamma_total = 0.0; // 1/T2
    double epsilon = 0.0;     // epsilon^2 = gamma_extra / gamma_total
};

inline DerivedCouplings coupling_kappa(const DynamicsParams& p) {
    p.validate();
    DerivedCouplings out;
    out.gamma_total = p.gamma_total();
    if (out.gamma_total == 0.0) {
        return out;
    }
    const double eps2 = p.gamma_extra / out.gamma_total;
    out.epsilon = std::sqrt(eps2);
    // -expm1(-x) = 1 - e^{-x}, accurate for small x
    const double transfer = std::isinf(p.duration) ? 1.0 : -std::expm1(-2.0 * out.gamma_total * p.duration);
    out.kappa = p.squeeze.z() * std::sqrt((1.0 - eps2) * transfer);
    return out;
}

/// Overlap of the normalized rising and falling exponential modes of rate gamma on [0, T]:
/// gamma T / sinh(gamma T).
inline double exp_mode_overlap(double gamma_t) {
    if (gamma_t < 1e-4) {
        return 1.0 - gamma_t * gamma_t / 6.0;
    }
    if (gamma_t > 700.0) {
        return 0.0;
    }
    return gamma_t / std::sinh(gamma_t);
}

/// One c or s sector of the pulse map over (X, P, y, q): atomic quadratures plus the
/// exponentially rising input light mode, mapped to atoms and the falling output light mode.
struct SectorChannel {
    Eigen::Matrix4d s = Eigen::Matrix4d::Identity();
    Eigen::Matrix4d noise = Eigen::Matrix4d::Zero();
    double kappa = 0.0;
    double decay = 1.0;   // e^{-gamma T}
    double overlap = 1.0; // rising/falling mode overlap
    double epsilon = 0.0;
    /// var(y_out) = kappa^2 var(P_in) + u2 * sigma_in^2 + v2 * <F^2>
    double u2 = 1.0;
    double v2 = 0.0;
};

/// Pulse map including transverse decay toward the CSS at rate gamma_extra. With
/// gamma_extra = 0 this is the ideal input-output relation.
inline SectorChannel sector_channel(double gamma_s, double gamma_extra, double z, double duration) {
    SectorChannel ch;
    const double gamma = gamma_s + gamma_extra;
    if (gamma == 0.0 || duration == 0.0) {
        return ch;
    }
    const double gt = gamma * duration;
    const double e = std::isinf(gt) ? 0.0 : std::exp(-gt);
    const double transfer = std::isinf(gt) ? 1.0 : -std::expm1(-2.0 * gt);
    const double eps2 = gamma_extra / gamma;
    const double eps = std::sqrt(eps2);
    const double c = std::isinf(gt) ? 0.0 : exp_mode_overlap(gt);
    const double kappa = z * std::sqrt((1.0 - eps2) * transfer);
    const double back = kappa / (z * z);
    // Light passes through directly (falling part) or via the rising mode.
    const double pass = eps2 * c + (1.0 - eps2) * e;

    ch.kappa = kappa;
    ch.decay = e;
    ch.overlap = c;
    ch.epsilon = eps;
    ch.s << e, 0.0, 0.0, kappa,
            0.0, e, -back, 0.0,
            0.0, kappa, pass, 0.0,
            -back, 0.0, 0.0, pass;

    // Noise sources: the part of the falling input light mode orthogonal to the rising one
    // (vacuum), and the F operators projected on rising/falling modes (<F^2> = 1/2).
    const double a = eps * std::sqrt(transfer);
    const double by = z * eps * std::sqrt(1.0 - eps2);
    const double bq = -eps * std::sqrt(1.0 - eps2) / z;
    const double mix = 1.0 + e * e - 2.0 * e * c;
    const double orth = eps2 * eps2 * (1.0 - c * c);
    const double half = kVacuumVariance;
    ch.noise(0, 0) = a * a * half;
    ch.noise(1, 1) = a * a * half;
    ch.noise(2, 2) = (orth + by * by * mix) * half;
    ch.noise(3, 3) = (orth + bq * bq * mix) * half;
    ch.noise(1, 2) = ch.noise(2, 1) = a * by * (c - e) * half;
    ch.noise(0, 3) = ch.noise(3, 0) = a * bq * (c - e) * half;

    ch.u2 = pass * pass + orth;
    ch.v2 = by * by * mix;
    return ch;
}

namespace detail {

/// Embeds the c and s sector maps into a full-state affine map.
inline GaussianState apply_sector_channel(const SectorChannel& ch, const GaussianState& state) {
    const Eigen::Index dim = state.cov().rows();
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(dim, dim);
    Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(dim, dim);
    const std::pair<const std::string&, const std::string&> sectors[] = {
        {mode::atomic_c, mode::light_c}, {mode::atomic_s, mode::light_s}};
    for (const auto& [atom, light] : sectors) {
        const Eigen::Index ia = state.slot(atom, Quadrature::X);
        const Eigen::Index il = state.slot(light, Quadrature::X);
        const Eigen::Index idx[4] = {ia, ia + 1, il, il + 1};
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                s(idx[r], idx[c]) = ch.s(r, c);
                noise(idx[r], idx[c]) = ch.noise(r, c);
            }
        }
    }
    return apply_affine_channel(state, s, noise, Eigen::VectorXd::Zero(dim));
}

inline void require_io_modes(const GaussianState& state) {
    for (const auto* m : {&mode::atomic_c, &mode::atomic_s, &mode::light_c, &mode::light_s}) {
        require(state.has_mode(*m), ErrorKind::InvalidState, "pulse map needs mode '" + *m + "'");
    }
}

} // namespace detail

/// Atomic c/s modes followed by fresh vacuum light c/s modes.
inline GaussianState io_input_state(const GaussianState& atoms) {
    return atoms.marginal({mode::atomic_c, mode::atomic_s}).with_vacuum_modes({mode::light_c, mode::light_s});
}

/// Ideal pulse of duration T (gamma_extra ignored).
inline GaussianState step_io(const DynamicsParams& p, const GaussianState& state) {
    p.validate();
    detail::require_io_modes(state);
    return detail::apply_sector_channel(sector_channel(p.gamma_s, 0.0, p.squeeze.z(), p.duration), state);
}

/// Pulse including transverse decay toward the CSS.
inline GaussianState step_io_noisy(const DynamicsParams& p, const GaussianState& state) {
    p.validate();
    detail::require_io_modes(state);
    return detail::apply_sector_channel(sector_channel(p.gamma_s, p.gamma_extra, p.squeeze.z(), p.duration),
                                        state);
}

/// A sampled scalar trajectory: numerical solution next to its closed form.
struct VarianceTrajectory {
    std::vector<double> t;
    std::vector<double> ode;
    std::vector<double> closed_form;
};

/// Steady state of var(P_c/s) without measurement.
inline double unconditional_steady_variance(const DynamicsParams& p) {
    const double g = p.gamma_total();
    require(g > 0.0, ErrorKind::InvalidArgument, "gamma_s + gamma_extra must be positive");
    const double z2 = p.squeeze.z() * p.squeeze.z();
    return kVacuumVariance * (p.gamma_s / z2 + p.gamma_extra) / g;
}

/// var(P_c/s)(t) in the absence of measurements.
inline VarianceTrajectory evolve_unconditional(const DynamicsParams& p, double v0, const std::vector<double>& times) {
    p.validate();
    require(std::isfinite(v0) && v0 >= 0.0, ErrorKind::InvalidArgument, "initial variance must be >= 0");
    check_sample_times(times);
    const double gs = p.gamma_s;
    const double ge = p.gamma_extra;
    const double z2 = p.squeeze.z() * p.squeeze.z();
    const double target = kVacuumVariance / z2;

    VarianceTrajectory out;
    out.t = times;
    auto rhs = [&](const OdeState& x, OdeState& dx, double) {
        dx[0] = -2.0 * gs * (x[0] - target) - 2.0 * ge * (x[0] - kVacuumVariance);
    };
    for (const auto& x : integrate_at(rhs, {v0}, times)) {
        out.ode.push_back(x[0]);
    }
    const double g = p.gamma_total();
    for (double t : times) {
        if (g == 0.0) {
            out.closed_form.push_back(v0);
            continue;
        }
        const double vinf = unconditional_steady_variance(p);
        out.closed_form.push_back(vinf + (v0 - vinf) * std::exp(-2.0 * g * t));
    }
    return out;
}

/// Conditional variance under continuous homodyne detection of y obeys
/// dv/dt = a v^2 + b v + c; returns {a, b, c}.
inline std::array<double, 3> riccati_coefficients(const DynamicsParams& p) {
    const double z2 = p.squeeze.z() * p.squeeze.z();
    return {-4.0 * p.gamma_s * z2, 2.0 * (p.gamma_s - p.gamma_extra), p.gamma_extra};
}

/// Stable fixed point of the conditional-variance Riccati equation.
inline double conditional_steady_variance(const DynamicsParams& p) {
    require(p.gamma_s > 0.0, ErrorKind::InvalidArgument, "gamma_s must be positive");
    const auto [a, b, c] = riccati_coefficients(p);
    const double disc = std::sqrt(b * b - 4.0 * a * c);
    return (b + disc) / (-2.0 * a);
}

inline VarianceTrajectory evolve_conditional(const DynamicsParams& p, double v0, const std::vector<double>& times) {
    p.validate();
    require(std::isfinite(v0) && v0 >= 0.0, ErrorKind::InvalidArgument, "initial variance must be >= 0");
    check_sample_times(times);
    const double gs = p.gamma_s;
    const double ge = p.gamma_extra;
    const double z = p.squeeze.z();

    VarianceTrajectory out;
    out.t = times;
    // Unconditional drift and diffusion minus the information gain from the y record.
    auto rhs = [&](const OdeState& x, OdeState& dx, double) {
        const double v = x[0];
        const double corr = z * v - kVacuumVariance / z;
        dx[0] = -2.0 * gs * v + gs / (z * z) - 2.0 * gs * corr * corr / kVacuumVariance -
                2.0 * ge * (v - kVacuumVariance);
    };
    for (const auto& x : integrate_at(rhs, {v0}, times)) {
        out.ode.push_back(x[0]);
    }

    if (gs == 0.0) {
        for (double t : times) {
            out.closed_form.push_back(ge == 0.0 ? v0 : kVacuumVariance + (v0 - kVacuumVariance) * std::exp(-2.0 * ge * t));
        }
        return out;
    }
    const auto [a, b, c] = riccati_coefficients(p);
    const double disc = std::sqrt(b * b - 4.0 * a * c);
    const double v1 = (b + disc) / (-2.0 * a);
    for (double t : times) {
        const double decay = std::exp(-disc * t);
        const double dv = v0 - v1;
        out.closed_form.push_back(v1 + dv * decay / (1.0 - (a / disc) * dv * (1.0 - decay)));
    }
    return out;
}

/// Steady-state EPR variance without measurements.
inline double steady_state_xi(const DynamicsParams& p) {
    p.validate();
    const double g = p.gamma_total();
    require(g > 0.0, ErrorKind::InvalidArgument, "gamma_s + gamma_extra must be positive");
    const double z2 = p.squeeze.z() * p.squeeze.z();
    return (p.gamma_s / z2 + p.gamma_extra) / g;
}

/// Steady-state EPR variance conditioned on the continuous y record.
inline double steady_state_xi_cond(const DynamicsParams& p) {
    p.validate();
    require(p.gamma_s > 0.0, ErrorKind::InvalidArgument, "gamma_s must be positive");
    const double z2 = p.squeeze.z() * p.squeeze.z();
    const double ratio = p.gamma_extra / p.gamma_s;
    const double lin = 1.0 - ratio;
    return (lin + std::sqrt(lin * lin + 4.0 * z2 * ratio)) / (2.0 * z2);
}

/// Change of basis (X_I, P_I, X_II, P_II) -> (X_c, P_c, X_s, P_s).
inline Eigen::Matrix4d ensemble_to_cs() {
    const double h = 1.0 / std::sqrt(2.0);
    Eigen::Matrix4d t;
    t << h, 0.0, h, 0.0,
         0.0, h, 0.0, h,
         0.0, -h, 0.0, h,
         h, 0.0, -h, 0.0;
    return t;
}

/// xi(t) from the CSS with ensemble II detuned by delta_omega. Tracks the full covariance
/// of (X_I, P_I, X_II, P_II) under the collective dissipator plus a relative Larmor rotation.
inline VarianceTrajectory evolve_with_detuning(const DynamicsParams& p, const std::vector<double>& times) {
    p.validate();
    check_sample_times(times);
    const double g = p.gamma_total();
    const double z2 = p.squeeze.z() * p.squeeze.z();
    const Eigen::Matrix4d t = ensemble_to_cs();

    Eigen::Vector4d diff_cs;
    const double dx = p.gamma_s * z2 + p.gamma_extra;
    const double dp = p.gamma_s / z2 + p.gamma_extra;
    diff_cs << dx, dp, dx, dp;
    const Eigen::Matrix4d diffusion = t.transpose() * diff_cs.asDiagonal() * t;

    Eigen::Matrix4d drift = -g * Eigen::Matrix4d::Identity();
    drift(2, 3) += p.delta_omega;
    drift(3, 2) -= p.delta_omega;

    auto rhs = [&](const OdeState& x, OdeState& dxdt, double) {
        Eigen::Map<const Eigen::Matrix4d> cov(x.data());
        Eigen::Map<Eigen::Matrix4d> dcov(dxdt.data());
        dcov = drift * cov + cov * drift.transpose() + diffusion;
    };
    Eigen::Matrix4d cov0 = kVacuumVariance * Eigen::Matrix4d::Identity();
    OdeState x0(cov0.data(), cov0.data() + 16);

    VarianceTrajectory out;
    out.t = times;
    for (const auto& x : integrate_at(rhs, x0, times)) {
        Eigen::Map<const Eigen::Matrix4d> cov(x.data());
        const Eigen::Matrix4d cs = t * cov * t.transpose();
        out.ode.push_back(cs(1, 1) + cs(3, 3));
    }
    // Closed form exists only without detuning.
    if (p.delta_omega == 0.0) {
        for (double v : evolve_unconditional(p, kVacuumVariance, times).closed_form) {
            out.closed_form.push_back(2.0 * v);
        }
    }
    return out;
}

} // namespace ebd
