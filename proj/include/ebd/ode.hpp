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
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "ebd/error.hpp"

namespace ebd {

using OdeState = std::vector<double>;

/// Checks that sample times are finite, non-negative and non-decreasing.
inline void check_sample_times(const std::vector<double>& times) {
    require(!times.empty(), ErrorKind::InvalidArgument, "need at least one sample time");
    for (std::size_t k = 0; k < times.size(); ++k) {
        require(std::isfinite(times[k]) && times[k] >= 0.0, ErrorKind::InvalidArgument,
                "sample times must be finite and non-negative");
        require(k == 0 || times[k] >= times[k - 1], ErrorKind::InvalidArgument,
                "sample times must be non-decreasing");
    }
}

/// `n` equally spaced times on [0, t_end].
inline std::vector<double> linspace_times(double t_end, std::size_t n) {
    require(std::isfinite(t_end) && t_end >= 0.0, ErrorKind::InvalidArgument, "t must be non-negative");
    require(n >= 2, ErrorKind::InvalidArgument, "need at least two samples");
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = t_end * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    return out;
}

/// Integrates dx/dt = rhs(x, t) from t = 0 with Dormand-Prince 5(4) dense output and
/// returns the state at each requested time.
template <class Rhs>
std::vector<OdeState> integrate_at(Rhs&& rhs, OdeState x0, const std::vector<double>& times,
                                   double rel_tol = 1e-10, double abs_tol = 1e-14) {
    namespace odeint = boost::numeric::odeint;
    check_sample_times(times);
    std::vector<OdeState> out;
    out.reserve(times.size());
    // Leading samples at t = 0 are the initial condition.
    std::size_t first = 0;
    while (first < times.size() && times[first] == 0.0) {
        out.push_back(x0);
        ++first;
    }
    if (first == times.size()) {
        return out;
    }
    std::vector<double> grid;
    grid.reserve(times.size() - first + 1);
    grid.push_back(0.0);
    grid.insert(grid.end(), times.begin() + static_cast<std::ptrdiff_t>(first), times.end());

    auto system = [&rhs](const OdeState& x, OdeState& dxdt, double t) { rhs(x, dxdt, t); };
    auto stepper = odeint::make_dense_output(abs_tol, rel_tol, odeint::runge_kutta_dopri5<OdeState>());
    const double dt0 = std::max(1e-8, 1e-3 * grid.back());
    bool skip_first = true;
    odeint::integrate_times(stepper, system, x0, grid.begin(), grid.end(), dt0,
                            [&out, &skip_first](const OdeState& x, double) {
                                if (skip_first) {
                                    skip_first = false;
                                    return;
                                }
                                out.push_back(x);
                            });
    require(out.size() == times.size(), ErrorKind::Numerical, "ODE integration did not reach all samples");
    return out;
}

} // namespace ebd
