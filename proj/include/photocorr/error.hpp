// Copyright 2026 The photocorr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace photocorr {

/// Raised when an argument violates a documented precondition
/// (negative mean photon number, efficiency outside [0, 1], ...).
class InvalidInput : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Base class for failures of a numerical procedure on otherwise valid input.
class NumericalError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// The requested Fock-space truncation cannot represent the state to the
/// required tail tolerance.
class TruncationError : public NumericalError {
   public:
    using NumericalError::NumericalError;
};

/// An iterative procedure hit its iteration cap or a series failed to converge.
class ConvergenceError : public NumericalError {
   public:
    using NumericalError::NumericalError;
};

/// A linear system is singular or too badly conditioned to be trusted.
class IllConditionedError : public NumericalError {
   public:
    IllConditionedError(const std::string& what, double condition_number)
        : NumericalError(what), condition_number_(condition_number) {}
    double condition_number() const { return condition_number_; }

   private:
    double condition_number_;
};

}  // namespace photocorr
