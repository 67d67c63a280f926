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

#include "ebd/error.hpp"

namespace ebd {

/// Two-mode squeezing parameters: mu = cosh r, nu = sinh r, Z = mu + nu = e^r.
class SqueezeParams {
  public:
    SqueezeParams() = default;

    static SqueezeParams from_r(double r) {
        require(std::isfinite(r), ErrorKind::InvalidArgument, "squeezing parameter r must be finite");
        return SqueezeParams(r);
    }

    static SqueezeParams from_z(double z) {
        require(std::isfinite(z) && z > 0.0, ErrorKind::InvalidArgument, "Z must be positive and finite");
        return SqueezeParams(std::log(z));
    }

    [[nodiscard]] double r() const noexcept { return r_; }
    [[nodiscard]] double mu() const noexcept { return std::cosh(r_); }
    [[nodiscard]] double nu() const noexcept { return std::sinh(r_); }
    [[nodiscard]] double z() const noexcept { return std::exp(r_); }
    /// mu - nu = 1/Z
    [[nodiscard]] double z_inv() const noexcept { return std::exp(-r_); }

  private:
    explicit SqueezeParams(double r) : r_(r) {}

    double r_ = 0.0;
};

} // namespace ebd
