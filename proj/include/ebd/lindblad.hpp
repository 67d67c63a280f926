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
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>

#include "ebd/error.hpp"
#include "ebd/squeeze.hpp"

namespace ebd {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using SparseOp = Eigen::SparseMatrix<Complex>;

/// Microscopic: 2^{2N} product basis, qubits of ensemble I first, |up> = 0, |down> = 1.
/// Dicke: (N+1)^2 product of two spin-N/2 multiplets, index k <-> m = N/2 - k.
enum class Representation { Microscopic, Dicke };

inline constexpr int kMaxMicroscopicAtoms = 4;
inline constexpr int kMaxDickeAtoms = 32;

/// Which noise terms accompany the entangling dissipator.
/// SingleParticle is exact (microscopic only); Collective uses J/sqrt(N) and J_x jump operators.
enum class NoiseModel { None, Collective, SingleParticle };

struct LindbladSystem {
    Representation representation = Representation::Dicke;
    int n_atoms = 1;
    double d = 1.0;     // resonant optical depth
    double gamma = 1.0; // single-particle radiative rate
    double gamma_cool = 0.0;
    double gamma_heat = 0.0;
    double gamma_deph = 0.0;
    SqueezeParams squeeze = SqueezeParams::from_z(1.0);

    void validate() const {
        for (double r : {d, gamma, gamma_cool, gamma_heat, gamma_deph}) {
            require(std::isfinite(r) && r >= 0.0, ErrorKind::InvalidArgument, "Lindblad rates must be >= 0");
        }
        require(n_atoms >= 1, ErrorKind::InvalidArgument, "atom number must be >= 1");
        if (representation == Representation::Microscopic) {
            require(n_atoms <= kMaxMicroscopicAtoms, ErrorKind::Capacity,
                    "microscopic representation supports N <= " + std::to_string(kMaxMicroscopicAtoms));
        } else {
            require(n_atoms <= kMaxDickeAtoms, ErrorKind::Capacity,
                    "dicke representation supports N <= " + std::to_string(kMaxDickeAtoms));
        }
    }

    Eigen::Index dim() const {
        if (representation == Representation::Microscopic) {
            return Eigen::Index{1} << (2 * n_atoms);
        }
        return static_cast<Eigen::Index>(n_atoms + 1) * (n_atoms + 1);
    }

    double entangling_rate() const { return d * gamma; }
};

/// Collective spin operators of both ensembles in the system's basis. `raise` is
/// J^- = sum |up><down|.
struct EnsembleSpins {
    SparseOp raise_1, lower_1, jx_1;
    SparseOp raise_2, lower_2, jx_2;
    SparseOp jy_1() const { return 0.5 * (raise_1 + lower_1); }
    SparseOp jy_2() const { return 0.5 * (raise_2 + lower_2); }
    SparseOp jz_1() const { return Complex(0.0, -0.5) * (raise_1 - lower_1); }
    SparseOp jz_2() const { return Complex(0.0, -0.5) * (raise_2 - lower_2); }
};

namespace detail {

inline SparseOp sparse_identity(Eigen::Index n) {
    SparseOp id(n, n);
    id.setIdentity();
    return id;
}

inline SparseOp kron(const SparseOp& a, const SparseOp& b) {
    SparseOp out = Eigen::kroneckerProduct(a, b).eval();
    out.makeCompressed();
    return out;
}

inline SparseOp qubit_op(Complex a00, Complex a01, Complex a10, Complex a11) {
    SparseOp m(2, 2);
    std::vector<Eigen::Triplet<Complex>> t;
    for (auto [i, j, v] : {std::tuple{0, 0, a00}, std::tuple{0, 1, a01}, std::tuple{1, 0, a10}, std::tuple{1, 1, a11}}) {
        if (v != Complex(0.0)) {
            t.emplace_back(i, j, v);
        }
    }
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

/// Single-qubit operator acting on qubit `site` out of `n_qubits`.
inline SparseOp embed(const SparseOp& op, int site, int n_qubits) {
    SparseOp out = sparse_identity(Eigen::Index{1} << site);
    out = kron(out, op);
    return kron(out, sparse_identity(Eigen::Index{1} << (n_qubits - site - 1)));
}

inline SparseOp sigma_raise() { return qubit_op(0.0, 1.0, 0.0, 0.0); }
inline SparseOp sigma_down_down() { return qubit_op(0.0, 0.0, 0.0, 1.0); }
inline SparseOp sigma_x() { return qubit_op(0.5, 0.0, 0.0, -0.5); }

/// Spin-N/2 multiplet: raising operator and J_x, basis k <-> m = N/2 - k.
inline std::pair<SparseOp, SparseOp> dicke_multiplet(int n) {
    const double j = 0.5 * n;
    SparseOp raise(n + 1, n + 1), jx(n + 1, n + 1);
    std::vector<Eigen::Triplet<Complex>> tr, tx;
    for (int k = 0; k <= n; ++k) {
        const double m = j - k;
        tx.emplace_back(k, k, m);
        if (k > 0) {
            tr.emplace_back(k - 1, k, std::sqrt(j * (j + 1.0) - m * (m + 1.0)));
        }
    }
    raise.setFromTriplets(tr.begin(), tr.end());
    jx.setFromTriplets(tx.begin(), tx.end());
    return {raise, jx};
}

} // namespace detail

inline EnsembleSpins ensemble_spins(const LindbladSystem& system) {
    system.validate();
    const int n = system.n_atoms;
    EnsembleSpins s;
    if (system.representation == Representation::Dicke) {
        auto [raise, jx] = detail::dicke_multiplet(n);
        const SparseOp id = detail::sparse_identity(n + 1);
        s.raise_1 = detail::kron(raise, id);
        s.raise_2 = detail::kron(id, raise);
        s.jx_1 = detail::kron(jx, id);
        s.jx_2 = detail::kron(id, jx);
    } else {
        const Eigen::Index dim = system.dim();
        s.raise_1 = s.raise_2 = s.jx_1 = s.jx_2 = SparseOp(dim, dim);
        for (int i = 0; i < n; ++i) {
            s.raise_1 += detail::embed(detail::sigma_raise(), i, 2 * n);
            s.raise_2 += detail::embed(detail::sigma_raise(), n + i, 2 * n);
            s.jx_1 += detail::embed(detail::sigma_x(), i, 2 * n);
            s.jx_2 += detail::embed(detail::sigma_x(), n + i, 2 * n);
        }
    }
    s.lower_1 = s.raise_1.adjoint();
    s.lower_2 = s.raise_2.adjoint();
    return s;
}

struct JumpOps {
    SparseOp a;
    SparseOp b;
};

/// A = (mu J^-_I - nu J^-_II)/sqrt(N), B = (mu J^+_II - nu J^+_I)/sqrt(N).
inline JumpOps build_jump_ops(const LindbladSystem& system) {
    const auto s = ensemble_spins(system);
    const double scale = 1.0 / std::sqrt(static_cast<double>(system.n_atoms));
    const double mu = system.squeeze.mu(), nu = system.squeeze.nu();
    JumpOps ops;
    ops.a = scale * (mu * s.raise_1 - nu * s.raise_2);
    ops.b = scale * (mu * s.lower_2 - nu * s.lower_1);
    return ops;
}

/// Orthonormal basis (columns) of the joint kernel of the given operators.
inline CMatrix joint_null_space(const std::vector<SparseOp>& ops, double tol = 1e-10) {
    require(!ops.empty(), ErrorKind::InvalidArgument, "no operators given");
    const Eigen::Index dim = ops.front().cols();
    CMatrix stacked(dim * static_cast<Eigen::Index>(ops.size()), dim);
    for (std::size_t k = 0; k < ops.size(); ++k) {
        stacked.middleRows(static_cast<Eigen::Index>(k) * dim, dim) = CMatrix(ops[k]);
    }
    Eigen::BDCSVD<CMatrix> svd(stacked, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cut = tol * std::max(1.0, sv(0));
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > cut) {
        ++rank;
    }
    return svd.matrixV().rightCols(dim - rank);
}

class DensityOperator {
public:
    DensityOperator(Representation representation, int n_atoms, CMatrix rho)
        : representation_(representation), n_atoms_(n_atoms), rho_(std::move(rho)) {
        validate();
    }

    static DensityOperator pure(Representation representation, int n_atoms, const Eigen::VectorXcd& psi) {
        const Eigen::VectorXcd v = psi / psi.norm();
        return DensityOperator(representation, n_atoms, v * v.adjoint());
    }

    Representation representation() const { return representation_; }
    int n_atoms() const { return n_atoms_; }
    const CMatrix& matrix() const { return rho_; }
    Eigen::Index dim() const { return rho_.rows(); }

    Complex expect(const SparseOp& op) const { return (op * rho_).trace(); }

    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(rho_, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    /// Checks Hermiticity, unit trace and positivity.
    void validate() const {
        require(rho_.rows() == rho_.cols() && rho_.allFinite(), ErrorKind::InvalidState,
                "density matrix must be square and finite");
        require((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() <= 1e-10, ErrorKind::InvalidState,
                "density matrix is not Hermitian");
        require(std::abs(rho_.trace() - Complex(1.0)) <= 1e-10, ErrorKind::InvalidState,
                "density matrix trace differs from 1");
        const double lo = min_eigenvalue();
        require(lo >= -1e-8, ErrorKind::InvalidState,
                "density matrix has negative eigenvalue " + std::to_string(lo));
    }

private:
    struct Unchecked {};
    DensityOperator(Unchecked, Representation representation, int n_atoms, CMatrix rho)
        : representation_(representation), n_atoms_(n_atoms), rho_(std::move(rho)) {}

    friend class MasterEquation;

    Representation representation_;
    int n_atoms_;
    CMatrix rho_;
};

inline double trace_distance(const DensityOperator& a, const DensityOperator& b) {
    require(a.dim() == b.dim(), ErrorKind::InvalidArgument, "dimension mismatch");
    const CMatrix diff = a.matrix() - b.matrix();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

/// Ensemble I fully in |up>, ensemble II fully in |down>.
inline DensityOperator pumped_state(const LindbladSystem& system) {
    system.validate();
    const Eigen::Index dim = system.dim();
    Eigen::Index index = 0;
    if (system.representation == Representation::Dicke) {
        index = system.n_atoms; // k_I = 0, k_II = N
    } else {
        index = (Eigen::Index{1} << system.n_atoms) - 1; // II qubits all 1
    }
    CMatrix rho = CMatrix::Zero(dim, dim);
    rho(index, index) = 1.0;
    return DensityOperator(system.representation, system.n_atoms, rho);
}

inline DensityOperator maximally_mixed(const LindbladSystem& system) {
    system.validate();
    const Eigen::Index dim = system.dim();
    return DensityOperator(system.representation, system.n_atoms,
                           CMatrix::Identity(dim, dim) / static_cast<double>(dim));
}

/// xi = Sigma_J / (2 |<J_x>|) with Sigma_J = var(J_y,I - J_y,II) + var(J_z,I - J_z,II).
/// The ensembles are pumped in opposite directions, so |<J_x>| = |<J_x,I> - <J_x,II>| / 2.
inline double witness_xi(const LindbladSystem& system, const DensityOperator& rho) {
    require(rho.dim() == system.dim() && rho.representation() == system.representation,
            ErrorKind::InvalidArgument, "density operator does not match the system basis");
    const auto s = ensemble_spins(system);
    auto variance = [&](const SparseOp& op) {
        const Complex m = rho.expect(op);
        const SparseOp sq = op * op;
        return (rho.expect(sq) - m * m).real();
    };
    const double sigma = variance(s.jy_1() - s.jy_2()) + variance(s.jz_1() - s.jz_2());
    const double jx = 0.5 * std::abs(rho.expect(s.jx_1).real() - rho.expect(s.jx_2).real());
    require(jx > 1e-12 * system.n_atoms, ErrorKind::UndefinedWitness, "mean longitudinal spin vanishes");
    return sigma / (2.0 * jx);
}

/// Taylor: truncated series of exp(h L) per step, summed to roundoff. Rk4: classical RK4 with
/// step-doubling control on the entrywise 1-norm of the step difference.
enum class Stepper { Taylor, Rk4 };

struct MasterOptions {
    Stepper stepper = Stepper::Taylor;
    double tolerance = 1e-12; // Rk4 local error bound
    double initial_step = 1e-3;
    double taylor_reach = 6.0; // Taylor step length in units of 1 / ||L|| (upper bound)
    long max_steps = 50'000'000;
};

/// Generator d rho/dt = sum_k r_k D[L_k] rho with D[L] rho = L rho L^+ - {L^+ L, rho}/2. The
/// entangling part is d Gamma (D[A] + D[B]); cooling, heating and dephasing enter at their
/// single-particle rates.
class MasterEquation {
public:
    MasterEquation(const LindbladSystem& system, NoiseModel noise) : system_(system) {
        system.validate();
        require(!(noise == NoiseModel::SingleParticle && system.representation == Representation::Dicke),
                ErrorKind::InvalidArgument,
                "single-particle noise breaks permutation symmetry; use the microscopic representation");
        const auto ops = build_jump_ops(system);
        add(system.entangling_rate(), ops.a);
        add(system.entangling_rate(), ops.b);
        if (noise == NoiseModel::Collective) {
            const auto s = ensemble_spins(system);
            const double scale = 1.0 / std::sqrt(static_cast<double>(system.n_atoms));
            add(system.gamma_cool, scale * s.raise_1);
            add(system.gamma_cool, scale * s.lower_2);
            add(system.gamma_heat, scale * s.lower_1);
            add(system.gamma_heat, scale * s.raise_2);
            add(system.gamma_deph, s.jx_1);
            add(system.gamma_deph, s.jx_2);
        } else if (noise == NoiseModel::SingleParticle) {
            const int n = system.n_atoms;
            for (int i = 0; i < n; ++i) {
                const auto up_1 = detail::embed(detail::sigma_raise(), i, 2 * n);
                const auto up_2 = detail::embed(detail::sigma_raise(), n + i, 2 * n);
                add(system.gamma_cool, up_1);
                add(system.gamma_cool, SparseOp(up_2.adjoint()));
                add(system.gamma_heat, SparseOp(up_1.adjoint()));
                add(system.gamma_heat, up_2);
                add(system.gamma_deph, detail::embed(detail::sigma_down_down(), i, 2 * n));
                add(system.gamma_deph, detail::embed(detail::sigma_down_down(), n + i, 2 * n));
            }
        }
        const Eigen::Index dim = system.dim();
        h_eff_ = SparseOp(dim, dim);
        for (std::size_t k = 0; k < jumps_.size(); ++k) {
            h_eff_ += (-0.5 * rates_[k]) * SparseOp(jumps_[k].adjoint() * jumps_[k]);
        }
        h_eff_adj_ = h_eff_.adjoint();
        for (const auto& j : jumps_) {
            jumps_adj_.emplace_back(j.adjoint());
        }
        norm_bound_ = 2.0 * op_norm_bound(h_eff_);
        for (std::size_t k = 0; k < jumps_.size(); ++k) {
            const double n = op_norm_bound(jumps_[k]);
            norm_bound_ += rates_[k] * n * n;
        }
    }

    /// Upper bound on the superoperator norm of the generator.
    double norm_bound() const { return norm_bound_; }

    const LindbladSystem& system() const { return system_; }
    std::size_t n_jumps() const { return jumps_.size(); }

    CMatrix apply(const CMatrix& rho) const {
        CMatrix out = h_eff_ * rho;
        out += rho * h_eff_adj_;
        for (std::size_t k = 0; k < jumps_.size(); ++k) {
            const CMatrix tmp = jumps_[k] * rho;
            out += rates_[k] * (tmp * jumps_adj_[k]);
        }
        return out;
    }

    /// Same as apply() for Hermitian input, using only sparse-times-dense products.
    CMatrix apply_hermitian(const CMatrix& rho) const {
        CMatrix half = h_eff_ * rho;
        CMatrix out = half + half.adjoint();
        for (std::size_t k = 0; k < jumps_.size(); ++k) {
            half.noalias() = jumps_[k] * rho;
            out.noalias() += rates_[k] * (jumps_[k] * half.adjoint());
        }
        return out;
    }

    /// Dense vectorized generator (column stacking), for small dimensions only.
    CMatrix liouvillian() const {
        const Eigen::Index dim = system_.dim();
        const Eigen::Index n = dim * dim;
        CMatrix out(n, n);
        CMatrix basis = CMatrix::Zero(dim, dim);
        for (Eigen::Index c = 0; c < n; ++c) {
            basis(c % dim, c / dim) = 1.0;
            out.col(c) = apply(basis).reshaped();
            basis(c % dim, c / dim) = 0.0;
        }
        return out;
    }

    /// rho at each sample time, starting from rho0 at t = 0.
    std::vector<DensityOperator> evolve(const DensityOperator& rho0, const std::vector<double>& times,
                                        const MasterOptions& opt = {}) const {
        check_input(rho0);
        for (std::size_t k = 0; k < times.size(); ++k) {
            require(std::isfinite(times[k]) && times[k] >= 0.0, ErrorKind::InvalidArgument,
                    "sample times must be finite and >= 0");
            require(k == 0 || times[k] >= times[k - 1], ErrorKind::InvalidArgument,
                    "sample times must be non-decreasing");
        }
        std::vector<DensityOperator> out;
        out.reserve(times.size());
        CMatrix rho = rho0.matrix();
        double t = 0.0;
        double h = initial_step(opt);
        long steps = 0;
        for (double target : times) {
            while (t < target) {
                const double step = std::min(h, target - t);
                require(++steps <= opt.max_steps, ErrorKind::Numerical, "master equation step budget exhausted");
                if (advance(rho, step, h, opt, nullptr)) {
                    t = (step == target - t) ? target : t + step;
                }
            }
            out.push_back(wrap(rho));
        }
        return out;
    }

    /// Long-time integration until the entrywise 1-norm of d rho/dt falls below `residual`.
    DensityOperator relax(const DensityOperator& rho0, double residual, double t_max,
                          const MasterOptions& opt = {}) const {
        check_input(rho0);
        CMatrix rho = rho0.matrix();
        double h = initial_step(opt);
        double t = 0.0;
        long steps = 0;
        while (true) {
            const CMatrix k1 = apply_hermitian(rho);
            if (k1.cwiseAbs().sum() < residual) {
                return wrap(rho);
            }
            require(t < t_max, ErrorKind::Numerical, "steady state not reached within the time limit");
            require(++steps <= opt.max_steps, ErrorKind::Numerical, "master equation step budget exhausted");
            const double step = h;
            if (advance(rho, step, h, opt, &k1)) {
                t += step;
            }
        }
    }

private:
    void add(double rate, const SparseOp& op) {
        if (rate > 0.0) {
            rates_.push_back(rate);
            jumps_.push_back(op);
            jumps_.back().makeCompressed();
        }
    }

    void check_input(const DensityOperator& rho0) const {
        require(rho0.representation() == system_.representation && rho0.n_atoms() == system_.n_atoms &&
                    rho0.dim() == system_.dim(),
                ErrorKind::InvalidArgument, "density operator does not match the system basis");
    }

    DensityOperator wrap(const CMatrix& rho) const {
        CMatrix herm = 0.5 * (rho + rho.adjoint());
        herm /= herm.trace().real();
        return DensityOperator(DensityOperator::Unchecked{}, system_.representation, system_.n_atoms,
                               std::move(herm));
    }

    static double op_norm_bound(const SparseOp& op) {
        // ||M||_2 <= sqrt(||M||_1 ||M||_inf)
        Eigen::VectorXd col = Eigen::VectorXd::Zero(op.cols());
        Eigen::VectorXd row = Eigen::VectorXd::Zero(op.rows());
        for (Eigen::Index k = 0; k < op.outerSize(); ++k) {
            for (SparseOp::InnerIterator it(op, k); it; ++it) {
                col(it.col()) += std::abs(it.value());
                row(it.row()) += std::abs(it.value());
            }
        }
        if (op.nonZeros() == 0) {
            return 0.0;
        }
        return std::sqrt(col.maxCoeff() * row.maxCoeff());
    }

    double taylor_step() const { return norm_bound_ > 0.0 ? 1.0 / norm_bound_ : 1e300; }

    double initial_step(const MasterOptions& opt) const {
        return opt.stepper == Stepper::Taylor ? opt.taylor_reach * taylor_step() : opt.initial_step;
    }

    /// One step of length `step`; returns false if the step was rejected. Updates `h`.
    bool advance(CMatrix& rho, double step, double& h, const MasterOptions& opt, const CMatrix* k1) const {
        // apply_hermitian() is only valid on the Hermitian part, so roundoff is projected out.
        if (opt.stepper == Stepper::Taylor) {
            const CMatrix next = taylor(rho, step, k1);
            rho = 0.5 * (next + next.adjoint());
            return true;
        }
        double err = 0.0;
        CMatrix next = step_doubled(rho, step, err, k1);
        if (err <= opt.tolerance || step < 1e-14) {
            rho = 0.5 * (next + next.adjoint());
            h = grow(step, err, opt.tolerance, h);
            return true;
        }
        h = shrink(step, err, opt.tolerance);
        return false;
    }

    CMatrix taylor(const CMatrix& rho, double h, const CMatrix* k1) const {
        CMatrix sum = rho;
        CMatrix term = k1 ? CMatrix(h * *k1) : CMatrix(h * apply_hermitian(rho));
        const double scale = rho.cwiseAbs().sum();
        for (int k = 1; k < 200; ++k) {
            sum += term;
            if (term.cwiseAbs().sum() <= 1e-17 * scale) {
                return sum;
            }
            term = (h / (k + 1)) * apply_hermitian(term);
        }
        throw Error(ErrorKind::Numerical, "Taylor propagator did not converge");
    }

    CMatrix rk4(const CMatrix& rho, double h, const CMatrix* k1_in) const {
        const CMatrix k1 = k1_in ? *k1_in : apply_hermitian(rho);
        const CMatrix k2 = apply_hermitian(rho + 0.5 * h * k1);
        const CMatrix k3 = apply_hermitian(rho + 0.5 * h * k2);
        const CMatrix k4 = apply_hermitian(rho + h * k3);
        return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    CMatrix step_doubled(const CMatrix& rho, double h, double& err, const CMatrix* k1 = nullptr) const {
        const CMatrix full = rk4(rho, h, k1);
        const CMatrix half = rk4(rho, 0.5 * h, nullptr);
        CMatrix two = rk4(half, 0.5 * h, nullptr);
        err = (two - full).cwiseAbs().sum() / 15.0;
        if (!two.allFinite()) {
            err = std::numeric_limits<double>::infinity();
        }
        // Richardson extrapolation
        two += (two - full) / 15.0;
        return two;
    }

    static double grow(double step, double err, double tol, double h) {
        const double factor = err > 0.0 ? std::min(4.0, 0.9 * std::pow(tol / err, 0.2)) : 4.0;
        return std::max(h, step * std::max(1.0, factor));
    }

    static double shrink(double step, double err, double tol) {
        const double factor = std::isfinite(err) ? std::max(0.1, 0.9 * std::pow(tol / err, 0.2)) : 0.1;
        return step * factor;
    }

    LindbladSystem system_;
    std::vector<double> rates_;
    std::vector<SparseOp> jumps_;
    std::vector<SparseOp> jumps_adj_;
    SparseOp h_eff_;
    SparseOp h_eff_adj_;
    double norm_bound_ = 0.0;
};

inline NoiseModel default_noise(const LindbladSystem& system, bool include_single_particle) {
    if (!include_single_particle) {
        return NoiseModel::None;
    }
    return system.representation == Representation::Microscopic ? NoiseModel::SingleParticle
                                                                : NoiseModel::Collective;
}

/// rho(t). In the dicke representation `include_single_particle` selects the collective
/// counterparts of the single-particle terms.
inline DensityOperator integrate_master(const LindbladSystem& system, const DensityOperator& rho0, double t,
                                        bool include_single_particle, const MasterOptions& opt = {}) {
    MasterEquation me(system, default_noise(system, include_single_particle));
    return me.evolve(rho0, {t}, opt).front();
}

/// Largest vectorized generator for which the null space is computed densely.
inline constexpr Eigen::Index kMaxDenseLiouvillian = 625;

struct SteadyStateOptions {
    double residual = 1e-10;
    double t_max = 1e5;
    double null_tol = 1e-9;
    double agreement = 1e-7;
    MasterOptions integrator{};
};

struct SteadyStateResult {
    DensityOperator rho;
    double residual = 0.0;
    bool null_space_checked = false;
    double null_space_distance = 0.0;
};

/// Stationary state by long-time integration from the pumped state. Uniqueness is checked on the
/// dense generator when it is small enough and otherwise by relaxing from a second, maximally
/// mixed initial state.
inline SteadyStateResult steady_state_report(const LindbladSystem& system, NoiseModel noise,
                                             const SteadyStateOptions& opt = {}) {
    MasterEquation me(system, noise);
    DensityOperator rho = me.relax(pumped_state(system), opt.residual, opt.t_max, opt.integrator);
    SteadyStateResult out{rho};
    out.residual = me.apply(rho.matrix()).cwiseAbs().sum();
    const Eigen::Index dim = system.dim();
    if (dim * dim <= kMaxDenseLiouvillian) {
        Eigen::BDCSVD<CMatrix> svd(me.liouvillian(), Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const Eigen::Index n = sv.size();
        Eigen::Index null_dim = 0;
        while (null_dim < n && sv(n - 1 - null_dim) <= opt.null_tol * sv(0)) {
            ++null_dim;
        }
        require(null_dim <= 1, ErrorKind::Degeneracy,
                "stationary subspace has dimension " + std::to_string(null_dim));
        require(null_dim == 1, ErrorKind::Numerical, "generator has no numerical null vector");
        CMatrix v = svd.matrixV().col(n - 1).reshaped(dim, dim);
        v /= v.trace();
        const DensityOperator null_rho(system.representation, system.n_atoms, 0.5 * (v + v.adjoint()));
        out.null_space_checked = true;
        out.null_space_distance = trace_distance(rho, null_rho);
        require(out.null_space_distance < opt.agreement, ErrorKind::Numerical,
                "integrated and null-space steady states disagree");
    } else {
        const DensityOperator other =
            me.relax(maximally_mixed(system), opt.residual, opt.t_max, opt.integrator);
        require(trace_distance(rho, other) < opt.agreement, ErrorKind::Degeneracy,
                "stationary state depends on the initial state");
    }
    return out;
}

inline DensityOperator steady_state(const LindbladSystem& system, bool include_single_particle = false,
                                    const SteadyStateOptions& opt = {}) {
    return steady_state_report(system, default_noise(system, include_single_particle), opt).rho;
}

} // namespace ebd
