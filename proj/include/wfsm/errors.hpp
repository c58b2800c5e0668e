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
//
// Error types shared by every wfsm module.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wfsm {

enum class ErrorCode {
  kSingularMatrix,
  kDivergentMachine,
  kDegenerateMachine,
  kOrderTooLarge,
  kDimensionMismatch,
  kBudgetInsufficient,
  kParseError,
  kValidationError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define WFSM_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what)                        \
        : Error(ErrorCode::k##Name, #Name ": " + what) {}         \
  }

WFSM_DEFINE_ERROR(SingularMatrix);
WFSM_DEFINE_ERROR(DivergentMachine);
WFSM_DEFINE_ERROR(DegenerateMachine);
WFSM_DEFINE_ERROR(OrderTooLarge);
WFSM_DEFINE_ERROR(DimensionMismatch);
WFSM_DEFINE_ERROR(BudgetInsufficient);
WFSM_DEFINE_ERROR(ValidationError);

#undef WFSM_DEFINE_ERROR

// Raised by the text readers; line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : Error(ErrorCode::kParseError,
              "ParseError: line " + std::to_string(line) + ", column " +
                  std::to_string(column) + ": " + message),
        line_(line),
        column_(column),
        message_(message) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string message_;
};

}  // namespace wfsm
