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
// Text formats.
//
// Machine files:
//
//   wfsm v1
//   states N
//   symbols a b ...          # eps is reserved and added when absent
//   start i w                # repeated; unlisted weights are 0
//   end i w
//   arc i j sym w
//
// Function files:
//
//   func v1
//   dim R
//   entry src dst sym index value
//
// '#' starts a comment, tokens are whitespace separated, and statements
// after the header may appear in any order.

#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "wfsm/derivatives.hpp"
#include "wfsm/expectations.hpp"
#include "wfsm/machine.hpp"

namespace wfsm::io {

/// 17 significant digits with trailing zeros kept ("%#.17g"); parsing the
/// result gives back the same double.
std::string format_number(double value);

/// Strict decimal float; throws ParseError(1, 1, ...) on trailing garbage or
/// non-finite input.
double parse_number(std::string_view text);

Machine<double> parse_machine(std::string_view text);
std::string serialize_machine(const Machine<double>& m);

DecomposableFunction<double> parse_function(std::string_view text, const Machine<double>& m);
std::string serialize_function(const DecomposableFunction<double>& f, const Machine<double>& m);

/// "src dst sym[; src dst sym ...]"
std::vector<Transition> parse_tuple(std::string_view text, const Machine<double>& m);

std::string read_file(const std::string& path);

/// Symbols shown in TSV output: all of them, except eps when its matrix is
/// identically zero and `include_unused_epsilon` is false.
std::vector<bool> visible_symbols(const Machine<double>& m, bool include_unused_epsilon = false);

/// One row per tensor entry whose symbols are all visible, in flat index
/// order: `sym src dst` per axis, then the value.
void write_tensor_tsv(std::ostream& out, const Machine<double>& m,
                      const DerivativeTensor<double>& tensor, const std::vector<bool>& visible);

/// Row-per-line, tab-separated matrix.
void write_matrix_tsv(std::ostream& out, const DenseMatrix& matrix);

}  // namespace wfsm::io
