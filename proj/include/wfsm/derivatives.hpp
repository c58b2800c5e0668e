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
// Closed-form derivatives of the partition function with respect to the
// transition weights.
//
// Differentiating W* = (I - W)^-1 gives dW*_il / dW^(a)_jk = W*_ij W*_kl, and
// repeating the argument shows that the m-th mixed partial over a tuple of
// transitions is a sum over the multiset of orderings of that tuple of chains
//
//   s_{i1} W*_{j1 i2} W*_{j2 i3} ... W*_{j(m-1) im} e_{jm},
//
// with s = alpha' W* and e = W* omega. The differentiated slots contribute a
// unit factor and only fix the indices the chain visits. On top of that sit
// the tuple marginals: expected co-occurrence counts of transitions.

#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "wfsm/machine.hpp"
#include "wfsm/parallel.hpp"

namespace wfsm {

struct DerivativeOptions {
  /// Largest number of tensor entries (or per-entry permutation terms for
  /// single-entry queries) that may be requested.
  std::size_t element_budget = 100'000'000;
  unsigned threads = 1;
};

/// Dense order-m tensor over transitions. Axis k is indexed by the k-th
/// transition of the tuple; axes are row-major, the first axis slowest.
template <typename Scalar = double>
class DerivativeTensor {
 public:
  DerivativeTensor(std::size_t order, TransitionSpace space)
      : order_(order), space_(space), data_(checked_size(order, space, kUnbounded), Scalar(0)) {}

  std::size_t order() const noexcept { return order_; }
  TransitionSpace space() const noexcept { return space_; }
  std::size_t axis_size() const noexcept { return space_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<Scalar> data() noexcept { return data_; }
  std::span<const Scalar> data() const noexcept { return data_; }

  Scalar& operator[](std::size_t flat) { return data_[flat]; }
  Scalar operator[](std::size_t flat) const { return data_[flat]; }

  Scalar operator()(std::span<const Transition> tuple) const { return data_[flat_index(tuple)]; }
  Scalar operator()(std::initializer_list<Transition> tuple) const {
    return (*this)(std::span<const Transition>(tuple.begin(), tuple.size()));
  }

  std::size_t flat_index(std::span<const Transition> tuple) const {
    if (tuple.size() != order_) {
      throw DimensionMismatch("tensor of order " + std::to_string(order_) + " indexed by " +
                              std::to_string(tuple.size()) + " transitions");
    }
    std::size_t flat = 0;
    for (const auto& t : tuple) {
      if (!space_.contains(t)) throw DimensionMismatch("transition outside the machine");
      flat = flat * axis_size() + space_.index(t);
    }
    return flat;
  }

  std::vector<Transition> unravel(std::size_t flat) const {
    std::vector<Transition> tuple(order_);
    for (std::size_t k = order_; k-- > 0;) {
      tuple[k] = space_.at(flat % axis_size());
      flat /= axis_size();
    }
    return tuple;
  }

  /// Order-2 view as a K x K matrix.
  auto as_matrix() const {
    using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    if (order_ != 2) throw DimensionMismatch("as_matrix needs an order-2 tensor");
    const auto k = static_cast<Eigen::Index>(axis_size());
    return Eigen::Map<const RowMajor>(data_.data(), k, k);
  }

  /// Order-1 view as a length-K vector.
  auto as_vector() const {
    if (order_ != 1) throw DimensionMismatch("as_vector needs an order-1 tensor");
    return Eigen::Map<const Vector<Scalar>>(data_.data(), static_cast<Eigen::Index>(size()));
  }

  /// K^order, or OrderTooLarge when it exceeds `budget`.
  static std::size_t checked_size(std::size_t order, TransitionSpace space, std::size_t budget) {
    if (order == 0) throw DimensionMismatch("derivative order must be at least 1");
    const std::size_t k = space.size();
    std::size_t total = 1;
    for (std::size_t i = 0; i < order; ++i) {
      if (k != 0 && total > budget / k) {
        throw OrderTooLarge("order " + std::to_string(order) + " over " + std::to_string(k) +
                            " transitions exceeds the element budget of " +
                            std::to_string(budget));
      }
      total *= k;
    }
    return total;
  }

 private:
  static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

  std::size_t order_;
  TransitionSpace space_;
  std::vector<Scalar> data_;
};

namespace detail {

template <typename Scalar>
void check_space(const KleeneCache<Scalar>& cache, std::span<const Transition> tuple) {
  for (const auto& t : tuple) {
    if (!cache.space.contains(t)) throw DimensionMismatch("transition outside the machine");
  }
}

// s_{i1} W*_{j1 i2} ... e_{jm} for the tuple visited in the order `perm`.
template <typename Scalar>
Scalar chain(const KleeneCache<Scalar>& cache, std::span<const Transition> tuple,
             std::span<const std::size_t> perm) {
  const auto idx = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
  Scalar acc = cache.s(idx(tuple[perm[0]].src));
  for (std::size_t k = 1; k < perm.size(); ++k) {
    acc = acc * cache.wstar(idx(tuple[perm[k - 1]].dst), idx(tuple[perm[k]].src));
  }
  return acc * cache.e(idx(tuple[perm.back()].dst));
}

inline std::size_t factorial_within(std::size_t m, std::size_t budget) {
  std::size_t f = 1;
  for (std::size_t k = 2; k <= m; ++k) {
    if (f > budget / k) {
      throw OrderTooLarge(std::to_string(m) + "! permutation terms exceed the budget of " +
                          std::to_string(budget));
    }
    f *= k;
  }
  return f;
}

// Unchecked single entry; permutations are enumerated by position so a
// repeated transition yields repeated terms.
template <typename Scalar>
Scalar derivative_entry_unchecked(const KleeneCache<Scalar>& cache,
                                  std::span<const Transition> tuple,
                                  std::vector<std::size_t>& perm) {
  perm.resize(tuple.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Scalar total = Scalar(0);
  do {
    total += chain(cache, tuple, std::span<const std::size_t>(perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total;
}

}  // namespace detail

/// One mixed partial d^m Z / dW_{tau_1} ... dW_{tau_m}; O(m * m!).
template <typename Scalar>
Scalar derivative_entry(const KleeneCache<Scalar>& cache, std::span<const Transition> tuple,
                        const DerivativeOptions& options = {}) {
  if (tuple.empty()) throw DimensionMismatch("derivative needs at least one transition");
  detail::check_space(cache, tuple);
  detail::factorial_within(tuple.size(), options.element_budget);
  std::vector<std::size_t> perm;
  return detail::derivative_entry_unchecked(cache, tuple, perm);
}

template <typename Scalar>
Scalar derivative_entry(const KleeneCache<Scalar>& cache, std::initializer_list<Transition> tuple,
                        const DerivativeOptions& options = {}) {
  return derivative_entry(cache, std::span<const Transition>(tuple.begin(), tuple.size()),
                          options);
}

/// dZ/dW^(a)_ij = s_i e_j, repeated for every symbol a.
template <typename Scalar>
DerivativeTensor<Scalar> gradient(const KleeneCache<Scalar>& cache) {
  DerivativeTensor<Scalar> g(1, cache.space);
  const auto n = cache.space.num_states;
  std::size_t flat = 0;
  for (std::size_t a = 0; a < cache.space.num_symbols; ++a) {
    for (std::size_t i = 0; i < n; ++i) {
      const Scalar si = cache.s(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < n; ++j) g[flat++] = si * cache.e(static_cast<Eigen::Index>(j));
    }
  }
  return g;
}

/// d^2 Z / dW^(a)_ij dW^(b)_kl = s_i W*_jk e_l + s_k W*_li e_j.
///
/// Each entry costs O(1) once the cache exists, so the whole tensor takes
/// O(A^2 N^4) time and space. The two products are evaluated in the same
/// order as the generic permutation sum so both paths agree bitwise.
template <typename Scalar>
DerivativeTensor<Scalar> hessian(const KleeneCache<Scalar>& cache,
                                 const DerivativeOptions& options = {}) {
  const auto space = cache.space;
  DerivativeTensor<Scalar>::checked_size(2, space, options.element_budget);
  DerivativeTensor<Scalar> h(2, space);
  const std::size_t k = space.size();
  const auto& ws = cache.wstar;
  const auto& s = cache.s;
  const auto& e = cache.e;
  auto data = h.data();
  detail::parallel_blocks(k, options.threads, [&](std::size_t begin, std::size_t end) {
    using Eigen::Index;
    for (std::size_t x = begin; x < end; ++x) {
      const Transition tx = space.at(x);
      const auto i = static_cast<Index>(tx.src);
      const auto j = static_cast<Index>(tx.dst);
      const Scalar si = s(i);
      const Scalar ej = e(j);
      const auto n = static_cast<Index>(space.num_states);
      Scalar* row = data.data() + x * k;
      for (std::size_t b = 0; b < space.num_symbols; ++b) {
        for (Index kk = 0; kk < n; ++kk) {
          const Scalar left = si * ws(j, kk);
          const Scalar sk = s(kk);
          for (Index l = 0; l < n; ++l) *row++ = left * e(l) + sk * ws(l, i) * ej;
        }
      }
    }
  });
  return h;
}

/// Full order-m tensor: every entry is the permutation-multiset chain sum.
/// O(N^3 + m m! A^m N^2m) time including the cache.
template <typename Scalar>
DerivativeTensor<Scalar> derivative_tensor(const KleeneCache<Scalar>& cache, std::size_t m,
                                           const DerivativeOptions& options = {}) {
  const std::size_t count = DerivativeTensor<Scalar>::checked_size(m, cache.space, options.element_budget);
  DerivativeTensor<Scalar> d(m, cache.space);
  auto data = d.data();
  detail::parallel_blocks(count, options.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> perm;
    for (std::size_t flat = begin; flat < end; ++flat) {
      const auto tuple = d.unravel(flat);
      data[flat] = detail::derivative_entry_unchecked(cache, std::span<const Transition>(tuple), perm);
    }
  });
  return d;
}

namespace detail {

template <typename Scalar>
Scalar weight_product(const Machine<Scalar>& machine, std::span<const Transition> tuple) {
  Scalar w = Scalar(1);
  for (const auto& t : tuple) w *= machine.weight(t);
  return w;
}

template <typename Scalar>
void check_tuple(const KleeneCache<Scalar>& cache, const Machine<Scalar>& machine,
                 std::span<const Transition> tuple) {
  if (!(cache.space == machine.space())) throw DimensionMismatch("cache built for another machine");
  if (tuple.empty()) throw DimensionMismatch("tuple marginal needs at least one transition");
  check_space(cache, tuple);
}

}  // namespace detail

/// Expected product of occurrence counts E[c(tau_1) ... c(tau_m)].
///
/// Ordered tuples of positions along a trajectory are grouped by which
/// positions coincide: each set partition of the tuple whose blocks hold
/// identical transitions contributes (1/Z) d^n Z / dW over one representative
/// per block, times those n weights. For m = 1 this is s_i W_ij e_j / Z; for
/// m = 2 the first-order term appears only when both transitions coincide.
template <typename Scalar>
Scalar tuple_marginal(const KleeneCache<Scalar>& cache, const Machine<Scalar>& machine,
                      std::span<const Transition> tau, const DerivativeOptions& options = {}) {
  detail::check_tuple(cache, machine, tau);
  const std::size_t m = tau.size();
  detail::factorial_within(m, options.element_budget);

  // Restricted growth strings enumerate the set partitions of {0..m-1}.
  std::vector<std::size_t> block(m, 0);
  std::vector<std::size_t> running_max(m, 0);
  std::vector<Transition> reps;
  std::vector<std::size_t> perm;
  Scalar total = Scalar(0);
  while (true) {
    reps.clear();
    bool consistent = true;
    for (std::size_t p = 0; p < m && consistent; ++p) {
      if (block[p] == reps.size()) {
        reps.push_back(tau[p]);
      } else if (!(reps[block[p]] == tau[p])) {
        consistent = false;
      }
    }
    if (consistent) {
      const std::span<const Transition> r(reps);
      total += detail::derivative_entry_unchecked(cache, r, perm) * detail::weight_product(machine, r);
    }
    // Advance to the next restricted growth string.
    std::size_t p = m;
    while (p-- > 1) {
      if (block[p] <= running_max[p - 1]) {
        ++block[p];
        running_max[p] = std::max(running_max[p - 1], block[p]);
        for (std::size_t q = p + 1; q < m; ++q) {
          block[q] = 0;
          running_max[q] = running_max[p];
        }
        break;
      }
    }
    if (p == 0 || m == 1) break;
  }
  return total / cache.z;
}

template <typename Scalar>
Scalar tuple_marginal(const KleeneCache<Scalar>& cache, const Machine<Scalar>& machine,
                      std::initializer_list<Transition> tau, const DerivativeOptions& options = {}) {
  return tuple_marginal(cache, machine, std::span<const Transition>(tau.begin(), tau.size()),
                        options);
}

/// The prefix-sum form (1/Z) sum_{n=1..m} d^n Z / dW_{tau_1..tau_n} prod_{k<=n} W_{tau_k}.
/// It coincides with tuple_marginal for m = 1 and for a pair of identical
/// transitions, and differs otherwise.
template <typename Scalar>
Scalar prefix_tuple_marginal(const KleeneCache<Scalar>& cache, const Machine<Scalar>& machine,
                             std::span<const Transition> tau, const DerivativeOptions& options = {}) {
  detail::check_tuple(cache, machine, tau);
  detail::factorial_within(tau.size(), options.element_budget);
  std::vector<std::size_t> perm;
  Scalar total = Scalar(0);
  for (std::size_t n = 1; n <= tau.size(); ++n) {
    const auto prefix = tau.first(n);
    total += detail::derivative_entry_unchecked(cache, prefix, perm) *
             detail::weight_product(machine, prefix);
  }
  return total / cache.z;
}

}  // namespace wfsm
