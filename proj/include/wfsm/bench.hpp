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
// Scaling benchmark: closed-form Hessian against the finite-difference and
// matrix-semiring baselines on random machines with rho(W) = 0.5.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace wfsm::bench {

struct BenchConfig {
  std::size_t min_states = 4;
  std::size_t max_states = 16;
  std::size_t alphabet = 2;
  std::size_t seeds = 3;
  std::vector<std::string> methods = {"closed", "fd"};
  /// Each timing repeats the call until at least this much wall time passed.
  double min_seconds = 0.05;
  double target_rho = 0.5;
};

struct BenchRow {
  std::string method;
  std::size_t num_states = 0;
  std::size_t alphabet = 0;
  double seconds = 0.0;       // median over seeds of the per-call time
  double max_abs_diff = 0.0;  // worst over seeds, against the closed form
};

/// State counts min, 2 min, 4 min, ... up to max.
std::vector<std::size_t> state_schedule(std::size_t min_states, std::size_t max_states);

/// Rows grouped by method in `config.methods` order, N ascending inside each
/// group. Throws std::invalid_argument for unknown methods.
///
///  closed  build_cache + hessian
///  fd      fd_hessian (central differences of the gradient)
///  naive   semiring_second_order with one-hot r = t, i.e. all pairwise
///          transition marginals, compared with the ones the closed-form
///          Hessian implies
std::vector<BenchRow> run_bench(const BenchConfig& config);

/// Least-squares slope of log(seconds) against log(N) for one method.
double fit_exponent(const std::vector<BenchRow>& rows, const std::string& method);

void write_bench_tsv(std::ostream& out, const BenchConfig& config, const std::vector<BenchRow>& rows);

}  // namespace wfsm::bench
