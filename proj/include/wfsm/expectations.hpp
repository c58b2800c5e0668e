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
// First- and second-order expectations of additively decomposable functions
// under the trajectory distribution p(t) = w(t) / Z.
//
// The second-order expectation E[r t'] expands into pairwise transition
// marginals. Factoring the Hessian chains through per-state aggregates
//
//   rs_i = sum_{j,a} s_j W^(a)_ji r^(a)_ji     (weight arriving at i)
//   re_i = sum_{j,a} W^(a)_ij e_j r^(a)_ij     (weight leaving i)
//
// (and likewise ts, te for t) leaves
//
//   Z E[r t'] = sum_ij W*_ij (rs_i te_j' + re_j ts_i')
//             + sum_{ij,a} s_i W^(a)_ij e_j r^(a)_ij t^(a)_ij'.

#pragma once

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "wfsm/machine.hpp"

namespace wfsm {

template <typename Scalar>
using SparseVector = Eigen::SparseVector<Scalar>;

/// Per-transition vectors r^(a)_ij in R^dim. Transitions with no entry are
/// the zero vector.
template <typename Scalar = double>
class DecomposableFunction {
 public:
  struct Entry {
    Transition transition;
    Eigen::Index index = 0;
    Scalar value = Scalar(0);
  };

  DecomposableFunction(TransitionSpace space, Eigen::Index dim)
      : space_(space), dim_(dim), values_(space.size(), SparseVector<Scalar>(dim)) {
    if (dim < 0) throw DimensionMismatch("negative function dimension");
  }

  /// Builds from sparse triples; repeated (transition, index) pairs add up.
  static DecomposableFunction from_entries(TransitionSpace space, Eigen::Index dim,
                                           const std::vector<Entry>& entries) {
    DecomposableFunction f(space, dim);
    for (const auto& en : entries) f.add(en.transition, en.index, en.value);
    return f;
  }

  TransitionSpace space() const noexcept { return space_; }
  Eigen::Index dim() const noexcept { return dim_; }

  void add(const Transition& t, Eigen::Index index, Scalar value) {
    if (!space_.contains(t)) throw DimensionMismatch("function entry references an invalid transition");
    if (index < 0 || index >= dim_) {
      throw DimensionMismatch("function index " + std::to_string(index) + " outside dim " +
                              std::to_string(dim_));
    }
    if (!std::isfinite(static_cast<double>(value))) {
      throw DimensionMismatch("function value is not finite");
    }
    values_[space_.index(t)].coeffRef(index) += value;
  }

  const SparseVector<Scalar>& value(const Transition& t) const { return values_.at(space_.index(t)); }
  const SparseVector<Scalar>& value(std::size_t flat) const { return values_.at(flat); }

  /// R' = max nonzero count over transitions, recomputed on every call.
  Eigen::Index density() const {
    Eigen::Index d = 0;
    for (const auto& v : values_) d = std::max(d, v.nonZeros());
    return d;
  }

  friend DecomposableFunction operator*(Scalar c, const DecomposableFunction& f) {
    DecomposableFunction out = f;
    for (auto& v : out.values_) v *= c;
    return out;
  }

  friend DecomposableFunction operator+(const DecomposableFunction& f, const DecomposableFunction& g) {
    if (!(f.space_ == g.space_) || f.dim_ != g.dim_) throw DimensionMismatch("adding unlike functions");
    DecomposableFunction out = f;
    for (std::size_t x = 0; x < out.values_.size(); ++x) out.values_[x] += g.values_[x];
    return out;
  }

 private:
  TransitionSpace space_;
  Eigen::Index dim_;
  std::vector<SparseVector<Scalar>> values_;
};

/// One count per transition: r(t) is the trajectory length.
template <typename Scalar = double>
DecomposableFunction<Scalar> length_function(TransitionSpace space) {
  DecomposableFunction<Scalar> f(space, 1);
  for (std::size_t x = 0; x < space.size(); ++x) f.add(space.at(x), 0, Scalar(1));
  return f;
}

template <typename Scalar = double>
struct ExpectationAggregates {
  std::vector<SparseVector<Scalar>> r_start;
  std::vector<SparseVector<Scalar>> r_end;
  std::vector<SparseVector<Scalar>> t_start;
  std::vector<SparseVector<Scalar>> t_end;
};

template <typename Scalar = double>
struct ExpectationResult {
  Matrix<Scalar> matrix;
  Scalar z = Scalar(0);
};

namespace detail {

template <typename Scalar>
void check_function(const KleeneCache<Scalar>& cache, const Machine<Scalar>& machine,
                    const DecomposableFunction<Scalar>& f) {
  if (!(cache.space == machine.space())) throw DimensionMismatch("cache built for another machine");
  if (!(f.space() == machine.space())) {
    throw DimensionMismatch("function defined over " + std::to_string(f.space().num_symbols) +
                            " symbols x " + std::to_string(f.space().num_states) +
                            " states, machine has " + std::to_string(machine.num_symbols()) +
                            " x " + std::to_string(machine.num_states()));
  }
}

// into += scale * u v'
template <typename Scalar>
void add_outer(Matrix<Scalar>& into, Scalar scale, const SparseVector<Scalar>& u,
               const SparseVector<Scalar>& v) {
  for (typename SparseVector<Scalar>::InnerIterator iu(u); iu; ++iu) {
    const Scalar su = scale * iu.value();
    for (typename SparseVector<Scalar>::InnerIterator iv(v); iv; ++iv) {
      into(iu.index(), iv.index()) += su * iv.value();
    }
  }
}

template <typename Scalar>
void aggregate(const KleeneCache<Scalar>& cache, const Machine<Scalar>& machine,
               const DecomposableFunction<Scalar>& f, std::vector<SparseVector<Scalar>>& start,
               std::vector<SparseVector<Scalar>>& end) {
  const std::size_t n = machine.num_states();
  start.assign(n, SparseVector<Scalar>(f.dim()));
  end.assign(n, SparseVector<Scalar>(f.dim()));
  for (std::size_t a = 0; a < machine.num_symbols(); ++a) {
    const auto& wa = machine.transition(a);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const auto& v = f.value(Transition{a, i, j});
        const Scalar w = wa(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v.nonZeros() == 0 || w == Scalar(0)) continue;
        const Scalar in = cache.s(static_cast<Eigen::Index>(i)) * w;
        const Scalar out = w * cache.e(static_cast<Eigen::Index>(j));
        if (in != Scalar(0)) start[j] += in * v;
        if (out != Scalar(0)) end[i] += out * v;
      }
    }
  }
}

}  // namespace detail

/// E[r] = (1/Z) sum_{ij,a} s_i W^(a)_ij e_j r^(a)_ij.
template <typename Scalar>
Vector<Scalar> first_order_expectation(const KleeneCache<Scalar>& cache,
                                       const Machine<Scalar>& machine,
                                       const DecomposableFunction<Scalar>& r) {
  detail::check_function(cache, machine, r);
  Vector<Scalar> out = Vector<Scalar>::Zero(r.dim());
  const auto space = machine.space();
  for (std::size_t x = 0; x < space.size(); ++x) {
    const auto& v = r.value(x);
    if (v.nonZeros() == 0) continue;
    const Transition t = space.at(x);
    const Scalar coef = cache.s(static_cast<Eigen::Index>(t.src)) * machine.weight(t) *
                        cache.e(static_cast<Eigen::Index>(t.dst));
    for (typename SparseVector<Scalar>::InnerIterator it(v); it; ++it) {
      out(it.index()) += coef * it.value();
    }
  }
  return out / cache.z;
}

/// The four per-state aggregate families. Each vector has at most
/// min(|Abar| N R', R) nonzeros.
template <typename Scalar>
ExpectationAggregates<Scalar> build_aggregates(const KleeneCache<Scalar>& cache,
                                               const Machine<Scalar>& machine,
                                               const DecomposableFunction<Scalar>& r,
                                               const DecomposableFunction<Scalar>& t) {
  detail::check_function(cache, machine, r);
  detail::check_function(cache, machine, t);
  ExpectationAggregates<Scalar> agg;
  detail::aggregate(cache, machine, r, agg.r_start, agg.r_end);
  detail::aggregate(cache, machine, t, agg.t_start, agg.t_end);
  return agg;
}

/// E[r t'] in O(N^3 + N^2 (Rbar Tbar + A R' T')) time.
template <typename Scalar>
ExpectationResult<Scalar> second_order_expectation(const KleeneCache<Scalar>& cache,
                                                   const Machine<Scalar>& machine,
                                                   const DecomposableFunction<Scalar>& r,
                                                   const DecomposableFunction<Scalar>& t) {
  const auto agg = build_aggregates(cache, machine, r, t);
  const std::size_t n = machine.num_states();
  ExpectationResult<Scalar> result;
  result.z = cache.z;
  result.matrix = Matrix<Scalar>::Zero(r.dim(), t.dim());
  auto& acc = result.matrix;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Scalar w = cache.wstar(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (w == Scalar(0)) continue;
      // r-transition ends at i, later t-transition starts at j
      detail::add_outer(acc, w, agg.r_start[i], agg.t_end[j]);
      // t-transition ends at i, later r-transition starts at j
      detail::add_outer(acc, w, agg.r_end[j], agg.t_start[i]);
    }
  }
  const auto space = machine.space();
  for (std::size_t x = 0; x < space.size(); ++x) {
    const auto& rv = r.value(x);
    const auto& tv = t.value(x);
    if (rv.nonZeros() == 0 || tv.nonZeros() == 0) continue;
    const Transition tr = space.at(x);
    const Scalar coef = cache.s(static_cast<Eigen::Index>(tr.src)) * machine.weight(tr) *
                        cache.e(static_cast<Eigen::Index>(tr.dst));
    if (coef != Scalar(0)) detail::add_outer(acc, coef, rv, tv);
  }
  acc /= cache.z;
  return result;
}

/// Cov[r] = E[r r'] - E[r] E[r]', symmetrized.
template <typename Scalar>
Matrix<Scalar> covariance(const KleeneCache<Scalar>& cache, const Machine<Scalar>& machine,
                          const DecomposableFunction<Scalar>& r) {
  const Vector<Scalar> mean = first_order_expectation(cache, machine, r);
  Matrix<Scalar> cov = second_order_expectation(cache, machine, r, r).matrix;
  cov.noalias() -= mean * mean.transpose();
  return (cov + cov.transpose()) / Scalar(2);
}

}  // namespace wfsm
