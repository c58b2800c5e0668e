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
#include "wfsm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include "wfsm/derivatives.hpp"
#include "wfsm/io.hpp"
#include "wfsm/oracle.hpp"
#include "wfsm/random.hpp"

namespace wfsm::bench {
namespace {

template <typename Fn>
double time_per_call(double min_seconds, Fn&& fn) {
  using Clock = std::chrono::steady_clock;
  const auto begin = Clock::now();
  std::size_t calls = 0;
  double elapsed = 0.0;
  do {
    fn();
    ++calls;
    elapsed = std::chrono::duration<double>(Clock::now() - begin).count();
  } while (elapsed < min_seconds);
  return elapsed / static_cast<double>(calls);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

DecomposableFunction<double> one_hot(TransitionSpace space) {
  const auto k = static_cast<Eigen::Index>(space.size());
  DecomposableFunction<double> f(space, k);
  for (std::size_t x = 0; x < space.size(); ++x) f.add(space.at(x), static_cast<Eigen::Index>(x), 1.0);
  return f;
}

// E[c(x) c(y)] implied by the closed-form gradient and Hessian.
DenseMatrix pair_marginals(const Machine<double>& m, const KleeneCache<double>& cache,
                           const DerivativeTensor<double>& h) {
  const auto space = m.space();
  const auto k = static_cast<Eigen::Index>(space.size());
  DenseMatrix p(k, k);
  for (Eigen::Index x = 0; x < k; ++x) {
    const Transition tx = space.at(static_cast<std::size_t>(x));
    const double wx = m.weight(tx);
    for (Eigen::Index y = 0; y < k; ++y) {
      const double wy = m.weight(space.at(static_cast<std::size_t>(y)));
      p(x, y) = h[static_cast<std::size_t>(x * k + y)] * wx * wy;
    }
    p(x, x) += cache.s(static_cast<Eigen::Index>(tx.src)) * cache.e(static_cast<Eigen::Index>(tx.dst)) * wx;
  }
  return p / cache.z;
}

}  // namespace

std::vector<std::size_t> state_schedule(std::size_t min_states, std::size_t max_states) {
  if (min_states == 0) throw std::invalid_argument("--min-states must be positive");
  std::vector<std::size_t> sizes;
  for (std::size_t n = min_states; n <= max_states; n *= 2) sizes.push_back(n);
  return sizes;
}

std::vector<BenchRow> run_bench(const BenchConfig& config) {
  for (const auto& method : config.methods) {
    if (method != "closed" && method != "fd" && method != "naive") {
      throw std::invalid_argument("unknown bench method '" + method + "'");
    }
  }
  if (config.seeds == 0) throw std::invalid_argument("--seeds must be positive");
  const auto sizes = state_schedule(config.min_states, config.max_states);

  std::vector<BenchRow> rows;
  for (const auto& method : config.methods) {
    for (const std::size_t n : sizes) {
      std::vector<double> times;
      double worst = 0.0;
      for (std::size_t seed = 0; seed < config.seeds; ++seed) {
        const auto machine = random_machine(n, config.alphabet, config.target_rho, seed);
        const auto cache = build_cache(machine);
        const auto reference = hessian(cache);
        if (method == "closed") {
          times.push_back(time_per_call(config.min_seconds, [&] {
            const auto c = build_cache(machine);
            const auto h = hessian(c);
            static_cast<void>(h.size());
          }));
        } else if (method == "fd") {
          std::optional<FiniteDifference<double>> fd;
          times.push_back(time_per_call(config.min_seconds, [&] { fd = fd_hessian(machine); }));
          worst = std::max(worst, max_abs_diff(fd->tensor.data(), reference.data()));
        } else {
          const auto indicator = one_hot(machine.space());
          std::optional<ExpectationResult<double>> naive;
          times.push_back(time_per_call(config.min_seconds, [&] {
            naive = semiring_second_order(machine, indicator, indicator);
          }));
          const DenseMatrix closed = pair_marginals(machine, cache, reference);
          worst = std::max(worst, (naive->matrix - closed).cwiseAbs().maxCoeff());
        }
      }
      rows.push_back({method, n, config.alphabet, median(times), worst});
    }
  }
  return rows;
}

double fit_exponent(const std::vector<BenchRow>& rows, const std::string& method) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0, count = 0;
  for (const auto& r : rows) {
    if (r.method != method) continue;
    const double x = std::log(static_cast<double>(r.num_states));
    const double y = std::log(r.seconds);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    count += 1;
  }
  if (count < 2) throw std::invalid_argument("need at least two sizes to fit '" + method + "'");
  return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

void write_bench_tsv(std::ostream& out, const BenchConfig& config, const std::vector<BenchRow>& rows) {
  out << "# rho " << config.target_rho << "\n# seeds";
  for (std::size_t s = 0; s < config.seeds; ++s) out << ' ' << s;
  out << "\nmethod\tN\tA\tseconds\tmax_abs_diff\n";
  for (const auto& r : rows) {
    out << r.method << '\t' << r.num_states << '\t' << r.alphabet << '\t' << io::format_number(r.seconds)
        << '\t' << io::format_number(r.max_abs_diff) << '\n';
  }
}

}  // namespace wfsm::bench
