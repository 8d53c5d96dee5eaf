// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace semlab {

/// Process exit codes used by the CLI. Every library exception maps onto one.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kNumeric = 3,
  kIo = 4,
  kInfeasibleBudget = 5,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

/// Shape mismatch, invalid hyperparameter, malformed config.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

/// Odd-length symbol payloads, oversized blocks.
class FramingError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Requested symbol count is not in the admissible set.
class PolicyError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Non-finite values, degenerate inputs to normalizations.
class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumeric; }
};

class DegenerateInputError : public NumericError {
 public:
  using NumericError::NumericError;
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kIo; }
};

/// No admissible symbol count fits the end-to-end latency budget.
class InfeasibleBudgetError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override {
    return ExitCode::kInfeasibleBudget;
  }
};

}  // namespace semlab
