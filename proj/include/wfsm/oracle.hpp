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
// Reference computations used to check the closed forms: truncated sums
// over trajectory lengths, literal path enumeration for tiny machines,
// finite differences, and the slow second-order baselines.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wfsm/derivatives.hpp"
#include "wfsm/expectations.hpp"
#include "wfsm/machine.hpp"

namespace wfsm {

/// Sum over lengths 0..max_length, with an a priori bound on what the
/// lengths beyond it can still add to Z.
struct EnumerationBudget {
  std::size_t max_length = 0;
  double tail_bound = 0.0;
  double tolerance = 0.0;
};

namespace detail {

// Tail bounds for sum_{k > L} alpha' W^k omega.
class TailBound {
 public:
  template <typename Scalar>
  explicit TailBound(const Machine<Scalar>& m) {
    const Matrix<double> w = total_matrix(m).template cast<double>();
    const Vector<double> alpha = m.start().template cast<double>();
    const Vector<double> omega = m.end().template cast<double>();
    const auto n = w.rows();

    // W^k omega == 0 for some k <= N exactly when omega lies in the nilpotent
    // part reachable in at most N steps.
    Vector<double> q = omega;
    for (Eigen::Index k = 1; k <= n; ++k) {
      q = w * q;
      if (q.isZero(0.0)) {
        vanish_after_ = static_cast<std::size_t>(k);
        break;
      }
    }

    // Collatz-Wielandt: a positive v with W v <= c v, c < 1, gives
    // W^k omega <= kappa c^k v with kappa = max_i omega_i / v_i.
    Vector<double> v = Vector<double>::Ones(n);
    for (int it = 0; it < 100; ++it) {
      Vector<double> wv = w * v;
      const double norm = wv.maxCoeff();
      if (!(norm > 0.0)) break;
      v = wv / norm + Vector<double>::Constant(n, 1e-6);
    }
    const Vector<double> wv = w * v;
    ratio_ = (wv.array() / v.array()).maxCoeff();
    kappa_ = (omega.array() / v.array()).maxCoeff();
    alpha_v_ = alpha.dot(v);

    rho_ = spectral_radius(w).value;
    norms_ = alpha.norm() * omega.norm() * static_cast<double>(n);
  }

  double operator()(std::size_t length) const {
    if (vanish_after_ && *vanish_after_ <= length + 1) return 0.0;
    const double up = static_cast<double>(length) + 1.0;
    if (ratio_ < 1.0) return kappa_ * alpha_v_ * std::pow(ratio_, up) / (1.0 - ratio_);
    if (rho_ < 1.0) return norms_ * std::pow(rho_, up) / (1.0 - rho_);
    return std::numeric_limits<double>::infinity();
  }

 private:
  std::optional<std::size_t> vanish_after_;
  double ratio_ = 1.0;
  double kappa_ = 0.0;
  double alpha_v_ = 0.0;
  double rho_ = 1.0;
  double norms_ = 0.0;
};

}  // namespace detail

template <typename Scalar>
EnumerationBudget budget_for_length(const Machine<Scalar>& m, std::size_t max_length,
                                    double tolerance) {
  return {max_length, detail::TailBound(m)(max_length), tolerance};
}

/// Smallest length whose tail bound is below `tolerance`.
template <typename Scalar>
EnumerationBudget make_budget(const Machine<Scalar>& m, double tolerance,
                              std::size_t length_cap = 1'000'000) {
  const detail::TailBound bound(m);
  for (std::size_t length = 0; length <= length_cap; ++length) {
    const double b = bound(length);
    if (b < tolerance) return {length, b, tolerance};
  }
  throw BudgetInsufficient("no length up to " + std::to_string(length_cap) +
                           " brings the tail bound below " + std::to_string(tolerance));
}

/// sum_{k=0..L} alpha' W^k omega by repeated vector-matrix products.
template <typename Scalar>
Scalar enumerate_z(const Machine<Scalar>& m, const EnumerationBudget& budget) {
  if (!(budget.tail_bound < budget.tolerance)) {
    throw BudgetInsufficient("tail bound " + std::to_string(budget.tail_bound) +
                             " is not below the tolerance " + std::to_string(budget.tolerance));
  }
  const Matrix<Scalar> w = total_matrix(m);
  Vector<Scalar> u = m.start();
  Scalar z = u.dot(m.end());
  for (std::size_t k = 1; k <= budget.max_length; ++k) {
    u = (w.transpose() * u).eval();
    z += u.dot(m.end());
  }
  return z;
}

/// Truncated trajectory statistics, all normalized by the truncated mass z.
template <typename Scalar = double>
struct TruncatedStatistics {
  std::size_t max_length = 0;
  Scalar z = Scalar(0);
  Vector<Scalar> mean_r;
  Vector<Scalar> mean_t;
  Matrix<Scalar> second;  // E[r t']
};

/// Forward pass over lengths 0..L carrying, per state, the path weight and
/// its r-, t- and r t'-weighted sums. Every path is extended one transition
/// at a time, so no closed form enters. O(L A N^2 R T).
template <typename Scalar>
TruncatedStatistics<Scalar> truncated_statistics(const Machine<Scalar>& m,
                                                 const DecomposableFunction<Scalar>& r,
                                                 const DecomposableFunction<Scalar>& t,
                                                 std::size_t max_length) {
  if (!(r.space() == m.space()) || !(t.space() == m.space())) {
    throw DimensionMismatch("function defined over another machine");
  }
  const std::size_t n = m.num_states();
  const Eigen::Index rd = r.dim();
  const Eigen::Index td = t.dim();
  struct Node {
    Scalar f;
    Vector<Scalar> fr, ft;
    Matrix<Scalar> frt;
  };
  const auto fresh = [&] {
    return Node{Scalar(0), Vector<Scalar>::Zero(rd), Vector<Scalar>::Zero(td),
                Matrix<Scalar>::Zero(rd, td)};
  };
  std::vector<Node> cur(n, fresh());
  for (std::size_t i = 0; i < n; ++i) cur[i].f = m.start()(static_cast<Eigen::Index>(i));

  TruncatedStatistics<Scalar> out;
  out.max_length = max_length;
  Vector<Scalar> sum_r = Vector<Scalar>::Zero(rd);
  Vector<Scalar> sum_t = Vector<Scalar>::Zero(td);
  Matrix<Scalar> sum_rt = Matrix<Scalar>::Zero(rd, td);
  const auto space = m.space();
  for (std::size_t len = 0;; ++len) {
    for (std::size_t j = 0; j < n; ++j) {
      const Scalar om = m.end()(static_cast<Eigen::Index>(j));
      out.z += cur[j].f * om;
      sum_r += om * cur[j].fr;
      sum_t += om * cur[j].ft;
      sum_rt += om * cur[j].frt;
    }
    if (len == max_length) break;
    std::vector<Node> next(n, fresh());
    for (std::size_t x = 0; x < space.size(); ++x) {
      const Transition tr = space.at(x);
      const Scalar w = m.weight(tr);
      if (w == Scalar(0)) continue;
      const Node& from = cur[tr.src];
      Node& to = next[tr.dst];
      const Vector<Scalar> rx = Vector<Scalar>(r.value(x));
      const Vector<Scalar> tx = Vector<Scalar>(t.value(x));
      to.f += w * from.f;
      to.fr += w * (from.fr + from.f * rx);
      to.ft += w * (from.ft + from.f * tx);
      to.frt += w * (from.frt + from.fr * tx.transpose() + rx * from.ft.transpose() +
                     from.f * rx * tx.transpose());
    }
    cur = std::move(next);
  }
  out.mean_r = sum_r / out.z;
  out.mean_t = sum_t / out.z;
  out.second = sum_rt / out.z;
  return out;
}

/// Visits every trajectory of length <= max_length with nonzero weight.
/// Exponential; restricted to N <= 3 and L <= 12.
template <typename Scalar>
void for_each_trajectory(const Machine<Scalar>& m, std::size_t max_length,
                         const std::function<void(const Trajectory&, Scalar)>& visit) {
  if (m.num_states() > 3 || max_length > 12) {
    throw BudgetInsufficient("literal enumeration is limited to N <= 3 and L <= 12");
  }
  Trajectory path;
  const auto recurse = [&](auto&& self, Scalar prefix) -> void {
    const std::size_t at = path.final_state();
    const Scalar w = prefix * m.end()(static_cast<Eigen::Index>(at));
    if (w != Scalar(0)) visit(path, w);
    if (path.transitions.size() == max_length) return;
    for (std::size_t a = 0; a < m.num_symbols(); ++a) {
      for (std::size_t j = 0; j < m.num_states(); ++j) {
        const Transition tr{a, at, j};
        const Scalar wt = m.weight(tr);
        if (wt == Scalar(0)) continue;
        path.transitions.push_back(tr);
        self(self, prefix * wt);
        path.transitions.pop_back();
      }
    }
  };
  for (std::size_t i = 0; i < m.num_states(); ++i) {
    const Scalar a = m.start()(static_cast<Eigen::Index>(i));
    if (a == Scalar(0)) continue;
    path.origin = i;
    path.transitions.clear();
    recurse(recurse, a);
  }
}

/// Same statistics as truncated_statistics, by literal path enumeration.
template <typename Scalar>
TruncatedStatistics<Scalar> literal_statistics(const Machine<Scalar>& m,
                                               const DecomposableFunction<Scalar>& r,
                                               const DecomposableFunction<Scalar>& t,
                                               std::size_t max_length) {
  TruncatedStatistics<Scalar> out;
  out.max_length = max_length;
  out.mean_r = Vector<Scalar>::Zero(r.dim());
  out.mean_t = Vector<Scalar>::Zero(t.dim());
  out.second = Matrix<Scalar>::Zero(r.dim(), t.dim());
  for_each_trajectory<Scalar>(m, max_length, [&](const Trajectory& path, Scalar w) {
    Vector<Scalar> rv = Vector<Scalar>::Zero(r.dim());
    Vector<Scalar> tv = Vector<Scalar>::Zero(t.dim());
    for (const auto& tr : path.transitions) {
      rv += Vector<Scalar>(r.value(tr));
      tv += Vector<Scalar>(t.value(tr));
    }
    out.z += w;
    out.mean_r += w * rv;
    out.mean_t += w * tv;
    out.second += w * rv * tv.transpose();
  });
  out.mean_r /= out.z;
  out.mean_t /= out.z;
  out.second /= out.z;
  return out;
}

template <typename Scalar = double>
struct FiniteDifference {
  DerivativeTensor<Scalar> tensor;
  /// Per-axis-entry flag: 1 when the lower perturbation was clamped at zero
  /// and the difference is one-sided.
  std::vector<unsigned char> one_sided;
};

namespace detail {

// Z and the (s, e) pair for total matrix w, via a fresh O(N^3) inversion.
template <typename Scalar>
KleeneCache<Scalar> perturbed_cache(const Matrix<Scalar>& w, const Machine<Scalar>& m) {
  KleeneCache<Scalar> c;
  c.space = m.space();
  c.wstar = kleene_star_certified(w);
  c.s.noalias() = c.wstar.transpose() * m.start();
  c.e.noalias() = c.wstar * m.end();
  c.z = m.start().dot(c.e);
  return c;
}

// Perturbation steps for transition x: upper = +h, lower = max(w - h, 0) - w.
template <typename Scalar>
std::pair<Scalar, Scalar> steps(Scalar weight, Scalar h) {
  const Scalar lower = std::max(weight - h, Scalar(0)) - weight;
  return {h, lower};
}

}  // namespace detail

/// Central differences of Z per transition weight; one-sided where the
/// lower step would go negative.
template <typename Scalar>
FiniteDifference<Scalar> fd_gradient(const Machine<Scalar>& m, Scalar h = Scalar(1e-6)) {
  if (!(h > Scalar(0))) throw DimensionMismatch("finite-difference step must be positive");
  const auto space = m.space();
  FiniteDifference<Scalar> out{DerivativeTensor<Scalar>(1, space),
                               std::vector<unsigned char>(space.size(), 0)};
  Matrix<Scalar> w = total_matrix(m);
  for (std::size_t x = 0; x < space.size(); ++x) {
    const Transition t = space.at(x);
    const auto i = static_cast<Eigen::Index>(t.src);
    const auto j = static_cast<Eigen::Index>(t.dst);
    const Scalar base = w(i, j);
    const auto [up, down] = detail::steps(m.weight(t), h);
    const Scalar hi = base + up;
    const Scalar lo = base + down;
    w(i, j) = hi;
    const Scalar zu = detail::perturbed_cache(w, m).z;
    w(i, j) = lo;
    const Scalar zd = detail::perturbed_cache(w, m).z;
    w(i, j) = base;
    out.tensor[x] = (zu - zd) / (hi - lo);
    out.one_sided[x] = m.weight(t) < h;
  }
  return out;
}

/// Hessian rows as central differences of the closed-form gradient: one
/// O(N^3) rebuild per perturbation, O(A N^5 + A^2 N^4) overall.
template <typename Scalar>
FiniteDifference<Scalar> fd_hessian(const Machine<Scalar>& m, Scalar h = Scalar(1e-5)) {
  if (!(h > Scalar(0))) throw DimensionMismatch("finite-difference step must be positive");
  const auto space = m.space();
  const std::size_t k = space.size();
  FiniteDifference<Scalar> out{DerivativeTensor<Scalar>(2, space),
                               std::vector<unsigned char>(k, 0)};
  Matrix<Scalar> w = total_matrix(m);
  for (std::size_t x = 0; x < k; ++x) {
    const Transition t = space.at(x);
    const auto i = static_cast<Eigen::Index>(t.src);
    const auto j = static_cast<Eigen::Index>(t.dst);
    const Scalar base = w(i, j);
    const auto [up, down] = detail::steps(m.weight(t), h);
    const Scalar hi = base + up;
    const Scalar lo = base + down;
    w(i, j) = hi;
    const auto gu = gradient(detail::perturbed_cache(w, m));
    w(i, j) = lo;
    const auto gd = gradient(detail::perturbed_cache(w, m));
    w(i, j) = base;
    const Scalar span = hi - lo;
    for (std::size_t y = 0; y < k; ++y) out.tensor[x * k + y] = (gu[y] - gd[y]) / span;
    out.one_sided[x] = m.weight(t) < h;
  }
  return out;
}

/// E[r t'] as the explicit double sum over transition pairs of the pairwise
/// marginals, O(A^2 N^4 R' T'), without the aggregate factorization.
template <typename Scalar>
ExpectationResult<Scalar> naive_second_order(const Machine<Scalar>& m,
                                             const DecomposableFunction<Scalar>& r,
                                             const DecomposableFunction<Scalar>& t) {
  const auto cache = build_cache(m);
  detail::check_function(cache, m, r);
  detail::check_function(cache, m, t);
  const auto space = m.space();
  ExpectationResult<Scalar> result;
  result.z = cache.z;
  result.matrix = Matrix<Scalar>::Zero(r.dim(), t.dim());
  std::vector<std::size_t> perm;
  for (std::size_t x = 0; x < space.size(); ++x) {
    const auto& rx = r.value(x);
    const Transition tx = space.at(x);
    const Scalar wx = m.weight(tx);
    if (rx.nonZeros() == 0 || wx == Scalar(0)) continue;
    const Transition single[] = {tx};
    const Scalar first = detail::derivative_entry_unchecked(cache, std::span<const Transition>(single), perm);
    detail::add_outer(result.matrix, first * wx, rx, t.value(x));
    for (std::size_t y = 0; y < space.size(); ++y) {
      const auto& ty_val = t.value(y);
      const Transition ty = space.at(y);
      const Scalar wy = m.weight(ty);
      if (ty_val.nonZeros() == 0 || wy == Scalar(0)) continue;
      const Transition pair[] = {tx, ty};
      const Scalar second = detail::derivative_entry_unchecked(cache, std::span<const Transition>(pair), perm);
      detail::add_outer(result.matrix, second * wx * wy, rx, ty_val);
    }
  }
  result.matrix /= cache.z;
  return result;
}

/// E[r t'] by closing the machine over R x T matrix-valued arc weights:
/// every state pair carries (w, r-sum, t-sum, r t'-sum) and the star of each
/// component is formed with full N x N products, O(N^3 R T).
template <typename Scalar>
ExpectationResult<Scalar> semiring_second_order(const Machine<Scalar>& m,
                                                const DecomposableFunction<Scalar>& r,
                                                const DecomposableFunction<Scalar>& t) {
  if (!(r.space() == m.space()) || !(t.space() == m.space())) {
    throw DimensionMismatch("function defined over another machine");
  }
  const auto n = static_cast<Eigen::Index>(m.num_states());
  const Matrix<Scalar> star = kleene_star(total_matrix(m));
  const Scalar z = m.start().dot(star * m.end());
  const auto space = m.space();

  // component(f, k)_ij = sum_a W^(a)_ij f^(a)_ij[k]
  const auto weighted = [&](const DecomposableFunction<Scalar>& f) {
    std::vector<Matrix<Scalar>> out(static_cast<std::size_t>(f.dim()), Matrix<Scalar>::Zero(n, n));
    for (std::size_t x = 0; x < space.size(); ++x) {
      const Transition tr = space.at(x);
      const Scalar w = m.weight(tr);
      for (typename SparseVector<Scalar>::InnerIterator it(f.value(x)); it; ++it) {
        out[static_cast<std::size_t>(it.index())](tr.src, tr.dst) += w * it.value();
      }
    }
    return out;
  };
  const auto wr = weighted(r);
  const auto wt = weighted(t);
  std::vector<Matrix<Scalar>> sr, st;
  for (const auto& c : wr) sr.push_back(star * c * star);
  for (const auto& c : wt) st.push_back(star * c * star);

  ExpectationResult<Scalar> result;
  result.z = z;
  result.matrix = Matrix<Scalar>::Zero(r.dim(), t.dim());
  Matrix<Scalar> wrt(n, n);
  for (Eigen::Index kr = 0; kr < r.dim(); ++kr) {
    for (Eigen::Index kt = 0; kt < t.dim(); ++kt) {
      wrt.setZero();
      for (std::size_t x = 0; x < space.size(); ++x) {
        const auto& rv = r.value(x);
        const auto& tv = t.value(x);
        if (rv.nonZeros() == 0 || tv.nonZeros() == 0) continue;
        const Transition tr = space.at(x);
        wrt(tr.src, tr.dst) += m.weight(tr) * rv.coeff(kr) * tv.coeff(kt);
      }
      const auto a = static_cast<std::size_t>(kr);
      const auto b = static_cast<std::size_t>(kt);
      const Matrix<Scalar> closed = star * (wrt * star + wr[a] * st[b] + wt[b] * sr[a]);
      result.matrix(kr, kt) = m.start().dot(closed * m.end()) / z;
    }
  }
  return result;
}

}  // namespace wfsm
