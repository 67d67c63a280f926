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
#include <complex>
#include <cstddef>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ebd/error.hpp"

namespace ebd {

/// Covariance matrices and displacements are laid out as (X1, P1, X2, P2, ...).
/// Vacuum and coherent spin states have variance 1/2 per quadrature.
inline constexpr double kVacuumVariance = 0.5;
inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kPhysicalityTol = 1e-10;

enum class Quadrature { X, P };

namespace mode {
inline const std::string atomic_c = "atomic-c";
inline const std::string atomic_s = "atomic-s";
inline const std::string light_c = "light-c";
inline const std::string light_s = "light-s";
inline const std::string atomic_1 = "atomic-I";
inline const std::string atomic_2 = "atomic-II";
} // namespace mode

/// Standard symplectic form, block diagonal with [[0, 1], [-1, 0]].
inline Eigen::MatrixXd symplectic_form(std::size_t n_modes) {
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
    for (std::size_t k = 0; k < n_modes; ++k) {
        omega(2 * k, 2 * k + 1) = 1.0;
        omega(2 * k + 1, 2 * k) = -1.0;
    }
    return omega;
}

/// Smallest eigenvalue of cov + (i/2) Omega. Non-negative for physical states.
inline double min_uncertainty_eigenvalue(const Eigen::MatrixXd& cov) {
    const auto n = static_cast<std::size_t>(cov.rows() / 2);
    Eigen::MatrixXcd h = cov.cast<std::complex<double>>();
    h += std::complex<double>(0.0, 0.5) * symplectic_form(n).cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Symplectic eigenvalues in ascending order, one per mode.
inline Eigen::VectorXd symplectic_eigenvalues(const Eigen::MatrixXd& cov) {
    const auto n = static_cast<std::size_t>(cov.rows() / 2);
    // i * Omega * cov is Hermitian with spectrum {+nu_k, -nu_k}.
    Eigen::MatrixXcd h = std::complex<double>(0.0, 1.0) *
                         (symplectic_form(n) * cov).cast<std::complex<double>>();
    h = 0.5 * (h + h.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    Eigen::VectorXd ev = es.eigenvalues();
    Eigen::VectorXd out(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        out(static_cast<Eigen::Index>(k)) = ev(static_cast<Eigen::Index>(n + k));
    }
    return out;
}

class GaussianState {
  public:
    GaussianState(std::vector<std::string> modes, Eigen::MatrixXd cov, Eigen::VectorXd disp)
        : modes_(std::move(modes)), cov_(std::move(cov)), disp_(std::move(disp)) {
        validate_shape();
        validate_physical(ErrorKind::InvalidState);
    }

    static GaussianState vacuum(std::vector<std::string> modes) {
        require(!modes.empty(), ErrorKind::InvalidArgument, "a Gaussian state needs at least one mode");
        const auto dim = static_cast<Eigen::Index>(2 * modes.size());
        return {std::move(modes), kVacuumVariance * Eigen::MatrixXd::Identity(dim, dim),
                Eigen::VectorXd::Zero(dim)};
    }

    [[nodiscard]] const std::vector<std::string>& modes() const noexcept { return modes_; }
    [[nodiscard]] const Eigen::MatrixXd& cov() const noexcept { return cov_; }
    [[nodiscard]] const Eigen::VectorXd& disp() const noexcept { return disp_; }
    [[nodiscard]] std::size_t n_modes() const noexcept { return modes_.size(); }

    [[nodiscard]] bool has_mode(std::string_view label) const {
        return std::find(modes_.begin(), modes_.end(), label) != modes_.end();
    }

    /// Position of `label` in the mode list; throws invalid-state if absent.
    [[nodiscard]] std::size_t index_of(std::string_view label) const {
        auto it = std::find(modes_.begin(), modes_.end(), label);
        require(it != modes_.end(), ErrorKind::InvalidState,
                "state has no mode labelled '" + std::string(label) + "'");
        return static_cast<std::size_t>(it - modes_.begin());
    }

    /// Row/column of one quadrature in cov and disp.
    [[nodiscard]] Eigen::Index slot(std::string_view label, Quadrature q) const {
        return static_cast<Eigen::Index>(2 * index_of(label) + (q == Quadrature::P ? 1 : 0));
    }

    [[nodiscard]] double variance(std::string_view label, Quadrature q) const {
        const auto i = slot(label, q);
        return cov_(i, i);
    }

    [[nodiscard]] double mean(std::string_view label, Quadrature q) const { return disp_(slot(label, q)); }

    [[nodiscard]] Eigen::VectorXd symplectic_spectrum() const { return symplectic_eigenvalues(cov_); }

    /// Returns a copy with vacuum modes appended at the end.
    [[nodiscard]] GaussianState with_vacuum_modes(const std::vector<std::string>& labels) const {
        std::vector<std::string> modes = modes_;
        for (const auto& l : labels) {
            require(!has_mode(l), ErrorKind::InvalidArgument, "duplicate mode label '" + l + "'");
            modes.push_back(l);
        }
        const Eigen::Index old_dim = cov_.rows();
        const auto dim = static_cast<Eigen::Index>(2 * modes.size());
        Eigen::MatrixXd cov = kVacuumVariance * Eigen::MatrixXd::Identity(dim, dim);
        cov.topLeftCorner(old_dim, old_dim) = cov_;
        Eigen::VectorXd disp = Eigen::VectorXd::Zero(dim);
        disp.head(old_dim) = disp_;
        return {std::move(modes), std::move(cov), std::move(disp)};
    }

    /// Reduced state on the listed modes, in the listed order.
    [[nodiscard]] GaussianState marginal(const std::vector<std::string>& labels) const {
        require(!labels.empty(), ErrorKind::InvalidArgument, "marginal needs at least one mode");
        std::vector<Eigen::Index> idx;
        for (const auto& l : labels) {
            const auto k = static_cast<Eigen::Index>(2 * index_of(l));
            idx.push_back(k);
            idx.push_back(k + 1);
        }
        const auto dim = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd cov(dim, dim);
        Eigen::VectorXd disp(dim);
        for (Eigen::Index a = 0; a < dim; ++a) {
            disp(a) = disp_(idx[static_cast<std::size_t>(a)]);
            for (Eigen::Index b = 0; b < dim; ++b) {
                cov(a, b) = cov_(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
            }
        }
        return {labels, std::move(cov), std::move(disp)};
    }

  private:
    friend GaussianState apply_affine_channel(const GaussianState&, const Eigen::MatrixXd&,
                                              const Eigen::MatrixXd&, const Eigen::VectorXd&);

    struct Unchecked {};
    GaussianState(Unchecked, std::vector<std::string> modes, Eigen::MatrixXd cov, Eigen::VectorXd disp)
        : modes_(std::move(modes)), cov_(std::move(cov)), disp_(std::move(disp)) {}

    void validate_shape() {
        require(!modes_.empty(), ErrorKind::InvalidArgument, "a Gaussian state needs at least one mode");
        for (std::size_t a = 0; a < modes_.size(); ++a) {
            for (std::size_t b = a + 1; b < modes_.size(); ++b) {
                require(modes_[a] != modes_[b], ErrorKind::InvalidArgument,
                        "duplicate mode label '" + modes_[a] + "'");
            }
        }
        const auto dim = static_cast<Eigen::Index>(2 * modes_.size());
        require(cov_.rows() == dim && cov_.cols() == dim, ErrorKind::InvalidArgument,
                "covariance matrix must be 2n x 2n");
        require(disp_.size() == dim, ErrorKind::InvalidArgument, "displacement must have length 2n");
        require(cov_.allFinite() && disp_.allFinite(), ErrorKind::InvalidState, "non-finite moments");
    }

    void validate_physical(ErrorKind kind) {
        const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
        const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
        require(asym <= kSymmetryTol * scale, kind, "covariance matrix is not symmetric");
        cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
        const double lam = min_uncertainty_eigenvalue(cov_);
        if (lam < -kPhysicalityTol) {
            std::ostringstream os;
            os << "uncertainty relation violated, eigenvalue of cov + i/2 Omega = " << lam;
            throw Error(kind, os.str());
        }
    }

    std::vector<std::string> modes_;
    Eigen::MatrixXd cov_;
    Eigen::VectorXd disp_;
};

/// n-mode vacuum with labels "mode-0", "mode-1", ...
inline GaussianState new_vacuum(std::size_t n_modes) {
    require(n_modes >= 1, ErrorKind::InvalidArgument, "n_modes must be at least 1");
    std::vector<std::string> labels;
    labels.reserve(n_modes);
    for (std::size_t k = 0; k < n_modes; ++k) {
        labels.push_back("mode-" + std::to_string(k));
    }
    return GaussianState::vacuum(std::move(labels));
}

/// cov' = S cov S^T + N, disp' = S disp + shift.
inline GaussianState apply_affine_channel(const GaussianState& state, const Eigen::MatrixXd& s,
                                          const Eigen::MatrixXd& noise, const Eigen::VectorXd& shift) {
    const Eigen::Index dim = state.cov().rows();
    require(s.rows() == dim && s.cols() == dim, ErrorKind::InvalidArgument, "S has the wrong shape");
    require(noise.rows() == dim && noise.cols() == dim, ErrorKind::InvalidArgument, "N has the wrong shape");
    require(shift.size() == dim, ErrorKind::InvalidArgument, "shift has the wrong length");
    const double scale = std::max(1.0, noise.cwiseAbs().maxCoeff());
    require((noise - noise.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol * scale,
            ErrorKind::InvalidArgument, "added-noise matrix N must be symmetric");

    Eigen::MatrixXd cov = s * state.cov() * s.transpose() + noise;
    Eigen::VectorXd disp = s * state.disp() + shift;
    GaussianState out(GaussianState::Unchecked{}, state.modes(), std::move(cov), std::move(disp));
    out.validate_physical(ErrorKind::ChannelNotPhysical);
    return out;
}

/// Gaussian update after measuring one quadrature of `label` with result `outcome`.
/// The measured mode is removed; the covariance does not depend on the outcome.
inline GaussianState condition_on_homodyne(const GaussianState& state, std::string_view label, Quadrature q,
                                           double outcome) {
    require(state.n_modes() >= 2, ErrorKind::InvalidState, "conditioning needs at least one remaining mode");
    const std::size_t measured = state.index_of(label);
    const Eigen::Index m = state.slot(label, q);
    const double var = state.cov()(m, m);
    if (var < 1e-14) {
        throw Error(ErrorKind::DegenerateMeasurement, "measured quadrature has vanishing variance");
    }

    std::vector<std::string> modes;
    std::vector<Eigen::Index> keep;
    for (std::size_t k = 0; k < state.n_modes(); ++k) {
        if (k == measured) {
            continue;
        }
        modes.push_back(state.modes()[k]);
        keep.push_back(static_cast<Eigen::Index>(2 * k));
        keep.push_back(static_cast<Eigen::Index>(2 * k + 1));
    }
    const auto dim = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd cov(dim, dim);
    Eigen::VectorXd disp(dim);
    const double innovation = outcome - state.disp()(m);
    for (Eigen::Index a = 0; a < dim; ++a) {
        const Eigen::Index ia = keep[static_cast<std::size_t>(a)];
        const double ca = state.cov()(ia, m);
        disp(a) = state.disp()(ia) + ca * innovation / var;
        for (Eigen::Index b = 0; b < dim; ++b) {
            const Eigen::Index ib = keep[static_cast<std::size_t>(b)];
            cov(a, b) = state.cov()(ia, ib) - ca * state.cov()(ib, m) / var;
        }
    }
    cov = 0.5 * (cov + cov.transpose()).eval();
    return {std::move(modes), std::move(cov), std::move(disp)};
}

/// EPR variance var(P_c) + var(P_s); 1 for the CSS, (mu - nu)^2 for the ideal two-mode squeezed state.
inline double epr_xi(const GaussianState& state) {
    require(state.has_mode(mode::atomic_c) && state.has_mode(mode::atomic_s), ErrorKind::InvalidState,
            "EPR witness needs atomic-c and atomic-s modes");
    return state.variance(mode::atomic_c, Quadrature::P) + state.variance(mode::atomic_s, Quadrature::P);
}

/// Beam splitter of transmission eta mixing `label` with vacuum.
inline GaussianState beam_splitter_loss(const GaussianState& state, std::string_view label, double eta) {
    require(eta >= 0.0 && eta <= 1.0, ErrorKind::InvalidArgument, "transmission eta must lie in [0, 1]");
    const auto dim = state.cov().rows();
    const auto k = static_cast<Eigen::Index>(2 * state.index_of(label));
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(dim, dim);
    Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(dim, dim);
    const double t = std::sqrt(eta);
    for (Eigen::Index j = k; j < k + 2; ++j) {
        s(j, j) = t;
        noise(j, j) = (1.0 - eta) * kVacuumVariance;
    }
    return apply_affine_channel(state, s, noise, Eigen::VectorXd::Zero(dim));
}

} // namespace ebd
