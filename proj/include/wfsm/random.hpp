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
// Seeded random machines and functions for tests and benchmarks.

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "wfsm/expectations.hpp"
#include "wfsm/machine.hpp"

namespace wfsm {

/// Symbol names a, b, ..., z, then s26, s27, ...
inline std::vector<std::string> default_alphabet(std::size_t size) {
  std::vector<std::string> names;
  names.reserve(size);
  for (std::size_t a = 0; a < size; ++a) {
    names.push_back(a < 26 ? std::string(1, static_cast<char>('a' + a)) : "s" + std::to_string(a));
  }
  return names;
}

/// Dense machine with i.i.d. uniform[0,1) weights in every matrix of Abar
/// (epsilon included) and in alpha, omega. The matrices are then rescaled so
/// the power-iteration estimate of rho(W) equals `target_rho`.
inline Machine<double> random_machine(std::size_t num_states, std::size_t alphabet_size,
                                      double target_rho, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(num_states);
  auto symbols = default_alphabet(alphabet_size);
  symbols.emplace_back(kEpsilon);
  std::vector<DenseMatrix> trans;
  DenseMatrix total = DenseMatrix::Zero(n, n);
  for (std::size_t a = 0; a < symbols.size(); ++a) {
    DenseMatrix w(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) w(i, j) = unif(rng);
    }
    total += w;
    trans.push_back(std::move(w));
  }
  DenseVector start(n), end(n);
  for (Eigen::Index i = 0; i < n; ++i) start(i) = unif(rng);
  for (Eigen::Index i = 0; i < n; ++i) end(i) = unif(rng);
  const double rho = spectral_radius(total).value;
  for (auto& w : trans) w *= target_rho / rho;
  return Machine<double>(std::move(symbols), std::move(start), std::move(end), std::move(trans));
}

/// Function with `nonzeros` distinct random indices per transition and
/// values uniform in [-1, 1).
inline DecomposableFunction<double> random_function(TransitionSpace space, Eigen::Index dim,
                                                    Eigen::Index nonzeros, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  DecomposableFunction<double> f(space, dim);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(dim));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const auto take = static_cast<std::size_t>(std::clamp<Eigen::Index>(nonzeros, 0, dim));
  for (std::size_t x = 0; x < space.size(); ++x) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < take; ++k) f.add(space.at(x), idx[k], unif(rng));
  }
  return f;
}

}  // namespace wfsm
