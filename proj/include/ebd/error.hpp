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

#include <stdexcept>
#include <string>

namespace ebd {

/// Failure categories raised by the library. The CLI maps them to exit codes.
enum class ErrorKind {
    InvalidArgument,
    InvalidState,
    ChannelNotPhysical,
    DegenerateMeasurement,
    Capacity,
    UndefinedWitness,
    Degeneracy,
    Domain,
    IllConditioned,
    CalibrationUndefined,
    StepSize,
    DurationMismatch,
    Numerical,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::InvalidState: return "invalid-state";
    case ErrorKind::ChannelNotPhysical: return "channel-not-physical";
    case ErrorKind::DegenerateMeasurement: return "degenerate-measurement";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::UndefinedWitness: return "undefined-witness";
    case ErrorKind::Degeneracy: return "degeneracy";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::IllConditioned: return "ill-conditioned-reconstruction";
    case ErrorKind::CalibrationUndefined: return "calibration-undefined";
    case ErrorKind::StepSize: return "step-size";
    case ErrorKind::DurationMismatch: return "duration-mismatch";
    case ErrorKind::Numerical: return "numerical";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

/// Throws `Error(kind, msg)` unless `cond` holds.
inline void require(bool cond, ErrorKind kind, const std::string& msg) {
    if (!cond) {
        throw Error(kind, msg);
    }
}

} // namespace ebd
