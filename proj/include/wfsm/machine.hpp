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
// Weighted finite-state machine model: per-symbol nonnegative transition
// matrices with start and end weight vectors, trajectories and their
// weights, and the cached Kleene star every downstream algorithm reads.

#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "wfsm/linalg.hpp"

namespace wfsm {

inline constexpr std::string_view kEpsilon = "eps";

/// One transition i -a-> j. Field order makes the default ordering match the
/// tensor axis layout (symbol, src, dst).
struct Transition {
  std::size_t symbol = 0;
  std::size_t src = 0;
  std::size_t dst = 0;

  friend auto operator<=>(const Transition&, const Transition&) = default;
};

/// Dimensions of the transition index set Abar x N x N, flattened as
/// (symbol * N + src) * N + dst.
struct TransitionSpace {
  std::size_t num_symbols = 0;
  std::size_t num_states = 0;

  std::size_t size() const noexcept { return num_symbols * num_states * num_states; }

  bool contains(const Transition& t) const noexcept {
    return t.symbol < num_symbols && t.src < num_states && t.dst < num_states;
  }

  std::size_t index(const Transition& t) const noexcept {
    return (t.symbol * num_states + t.src) * num_states + t.dst;
  }

  Transition at(std::size_t flat) const noexcept {
    Transition t;
    t.dst = flat % num_states;
    flat /= num_states;
    t.src = flat % num_states;
    t.symbol = flat / num_states;
    return t;
  }

  friend bool operator==(const TransitionSpace&, const TransitionSpace&) = default;
};

/// A chained transition sequence. `origin` is the first state, which is the
/// only information an empty trajectory carries.
struct Trajectory {
  std::size_t origin = 0;
  std::vector<Transition> transitions;

  std::size_t final_state() const noexcept {
    return transitions.empty() ? origin : transitions.back().dst;
  }
};

template <typename Scalar = double>
class Machine {
 public:
  using MatrixType = Matrix<Scalar>;
  using VectorType = Vector<Scalar>;

  /// Validates every invariant and appends `eps` with a zero matrix when the
  /// symbol list does not already contain it. Throws ValidationError.
  Machine(std::vector<std::string> symbols, VectorType start, VectorType end,
          std::vector<MatrixType> transitions)
      : symbols_(std::move(symbols)),
        start_(std::move(start)),
        end_(std::move(end)),
        trans_(std::move(transitions)) {
    const auto n = static_cast<Eigen::Index>(start_.size());
    if (symbols_.size() != trans_.size()) {
      throw ValidationError("got " + std::to_string(symbols_.size()) + " symbols but " +
                            std::to_string(trans_.size()) + " transition matrices");
    }
    if (n == 0) throw ValidationError("machine needs at least one state");
    if (end_.size() != n) throw ValidationError("start and end vectors differ in length");
    std::unordered_set<std::string> seen;
    for (const auto& name : symbols_) {
      if (name.empty()) throw ValidationError("empty symbol name");
      if (!seen.insert(name).second) throw ValidationError("duplicate symbol '" + name + "'");
    }
    if (!seen.contains(std::string(kEpsilon))) {
      symbols_.emplace_back(kEpsilon);
      trans_.push_back(MatrixType::Zero(n, n));
    }
    check_weights(start_, "start vector");
    check_weights(end_, "end vector");
    for (std::size_t a = 0; a < trans_.size(); ++a) {
      if (trans_[a].rows() != n || trans_[a].cols() != n) {
        throw ValidationError("matrix for symbol '" + symbols_[a] + "' is not " +
                              std::to_string(n) + "x" + std::to_string(n));
      }
      check_weights(trans_[a], "matrix for symbol '" + symbols_[a] + "'");
    }
    if (!(start_.maxCoeff() > Scalar(0))) throw ValidationError("all start weights are zero");
    if (!(end_.maxCoeff() > Scalar(0))) throw ValidationError("all end weights are zero");
  }

  std::size_t num_states() const noexcept { return static_cast<std::size_t>(start_.size()); }
  /// Size of Abar, epsilon included.
  std::size_t num_symbols() const noexcept { return symbols_.size(); }
  /// Size of the alphabet proper, epsilon excluded.
  std::size_t alphabet_size() const noexcept { return symbols_.size() - 1; }
  TransitionSpace space() const noexcept { return {num_symbols(), num_states()}; }

  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  const std::string& symbol_name(std::size_t a) const { return symbols_.at(a); }

  std::optional<std::size_t> symbol_id(std::string_view name) const {
    for (std::size_t a = 0; a < symbols_.size(); ++a) {
      if (symbols_[a] == name) return a;
    }
    return std::nullopt;
  }

  std::size_t epsilon_id() const { return *symbol_id(kEpsilon); }

  const VectorType& start() const noexcept { return start_; }
  const VectorType& end() const noexcept { return end_; }
  const MatrixType& transition(std::size_t a) const { return trans_.at(a); }
  const std::vector<MatrixType>& transitions() const noexcept { return trans_; }

  Scalar weight(const Transition& t) const {
    return trans_[t.symbol](static_cast<Eigen::Index>(t.src), static_cast<Eigen::Index>(t.dst));
  }

 private:
  template <typename Derived>
  static void check_weights(const Eigen::DenseBase<Derived>& x, const std::string& what) {
    if (!all_finite(x)) throw ValidationError(what + " has non-finite entries");
    if (x.size() > 0 && x.minCoeff() < Scalar(0)) {
      throw ValidationError(what + " has negative weights");
    }
  }

  std::vector<std::string> symbols_;
  VectorType start_;
  VectorType end_;
  std::vector<MatrixType> trans_;
};

/// Everything the derivative and expectation formulas read: W*, the
/// forward row s = alpha' W*, the backward column e = W* omega, and Z.
template <typename Scalar = double>
struct KleeneCache {
  TransitionSpace space;
  Matrix<Scalar> wstar;
  Vector<Scalar> s;
  Vector<Scalar> e;
  Scalar z = Scalar(0);
  Scalar rho = Scalar(0);
  bool rho_converged = false;
};

/// W = sum over Abar of the per-symbol matrices.
template <typename Scalar>
Matrix<Scalar> total_matrix(const Machine<Scalar>& m) {
  const auto n = static_cast<Eigen::Index>(m.num_states());
  Matrix<Scalar> w = Matrix<Scalar>::Zero(n, n);
  for (const auto& wa : m.transitions()) w += wa;
  return w;
}

template <typename Scalar>
KleeneCache<Scalar> build_cache(const Machine<Scalar>& m,
                                const LinalgConfig& config = kDefaultLinalg) {
  const Matrix<Scalar> w = total_matrix(m);
  const auto rho = spectral_radius(w, config);
  if (!(rho.value < Scalar(1) - Scalar(config.divergence_margin))) {
    throw DivergentMachine("spectral radius estimate " +
                           std::to_string(static_cast<double>(rho.value)) + " is not below 1");
  }
  KleeneCache<Scalar> cache;
  cache.space = m.space();
  cache.rho = rho.value;
  cache.rho_converged = rho.converged;
  cache.wstar = detail::certified_star(w, config);
  cache.s.noalias() = cache.wstar.transpose() * m.start();
  cache.e.noalias() = cache.wstar * m.end();
  cache.z = m.start().dot(cache.e);
  using std::isfinite;
  if (!(cache.z > Scalar(0)) || !isfinite(static_cast<double>(cache.z))) {
    throw DegenerateMachine("partition function Z = " +
                            std::to_string(static_cast<double>(cache.z)) +
                            " (no weighted trajectory connects a start to an end state)");
  }
  return cache;
}

template <typename Scalar>
bool is_valid_trajectory(const Machine<Scalar>& m, const Trajectory& t) {
  if (t.origin >= m.num_states()) return false;
  std::size_t at = t.origin;
  const auto space = m.space();
  for (const auto& tr : t.transitions) {
    if (!space.contains(tr) || tr.src != at) return false;
    at = tr.dst;
  }
  return true;
}

/// alpha_origin * prod W * omega_final; the empty trajectory at i weighs
/// alpha_i * omega_i.
template <typename Scalar>
Scalar trajectory_weight(const Machine<Scalar>& m, const Trajectory& t) {
  if (!is_valid_trajectory(m, t)) throw ValidationError("trajectory does not chain");
  Scalar w = m.start()(static_cast<Eigen::Index>(t.origin));
  for (const auto& tr : t.transitions) w *= m.weight(tr);
  return w * m.end()(static_cast<Eigen::Index>(t.final_state()));
}

template <typename Scalar>
Scalar trajectory_probability(const Machine<Scalar>& m, const KleeneCache<Scalar>& cache,
                              const Trajectory& t) {
  return trajectory_weight(m, t) / cache.z;
}

}  // namespace wfsm
