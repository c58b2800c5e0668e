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
// Small hand-checkable machines shared by the test suites.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "wfsm/machine.hpp"

namespace wfsm::testing {

// One state with a 0.5 self-loop: Z = sum_k 0.5^k = 2.
inline Machine<double> m1() {
  DenseMatrix w(1, 1);
  w << 0.5;
  return Machine<double>({"a"}, DenseVector::Ones(1), DenseVector::Ones(1), {w});
}

// 0 -a/0.3-> 1 and 0 -b/0.2-> 1, start at 0, end at 1: Z = 0.5.
inline Machine<double> m2() {
  DenseMatrix wa = DenseMatrix::Zero(2, 2), wb = DenseMatrix::Zero(2, 2);
  wa(0, 1) = 0.3;
  wb(0, 1) = 0.2;
  DenseVector start(2), end(2);
  start << 1, 0;
  end << 0, 1;
  return Machine<double>({"a", "b"}, start, end, {wa, wb});
}

// Two states, no arcs, all start and end weights 1: only empty trajectories.
inline Machine<double> m3() {
  return Machine<double>({"a"}, DenseVector::Ones(2), DenseVector::Ones(2), {DenseMatrix::Zero(2, 2)});
}

inline constexpr Transition kLoop{0, 0, 0};
inline constexpr Transition kArcA{0, 0, 1};
inline constexpr Transition kArcB{1, 0, 1};

inline bool rel_close(double got, double want, double tol) {
  return std::abs(got - want) <= tol * std::max(std::abs(want), 1e-300);
}

// Relative error with an absolute floor for reference values near zero.
inline double rel_err(double got, double want, double floor) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

// sum_k k^p 0.5^k / 2, i.e. E[k^p] for the M1 length distribution.
inline double m1_length_moment(int p, int terms = 400) {
  double total = 0.0;
  for (int k = 0; k < terms; ++k) total += std::pow(double(k), p) * std::pow(0.5, k) / 2.0;
  return total;
}

}  // namespace wfsm::testing
