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
#include "wfsm/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include "wfsm/bench.hpp"
#include "wfsm/derivatives.hpp"
#include "wfsm/expectations.hpp"
#include "wfsm/io.hpp"
#include "wfsm/machine.hpp"

namespace wfsm::cli {
namespace {

struct Options {
  std::string input;
  std::string output;
  std::string rfunc;
  std::string tfunc;
  std::string tuple;
  std::size_t order = 1;
  std::size_t budget = 100'000'000;
  unsigned threads = 0;
  bool log = false;
  bool covariance = false;
  bool first_order = false;
  bool prefix_form = false;
  bool all_symbols = false;
  bool fit = false;
  bench::BenchConfig bench;
  std::string methods = "closed,fd";
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

unsigned resolve_threads(unsigned flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("WFSM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

std::vector<std::string> split_methods(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    if (comma > pos) out.push_back(text.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

// Writes to -o OUT when given, otherwise to `out`.
void emit(const Options& opt, std::ostream& out, const std::function<void(std::ostream&)>& body) {
  if (opt.output.empty()) {
    body(out);
    return;
  }
  std::ofstream file(opt.output, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write '" + opt.output + "'");
  body(file);
}

Machine<double> load_machine(const Options& opt) { return io::parse_machine(io::read_file(opt.input)); }

int cmd_check(const Options& opt, std::ostream& out) {
  try {
    const auto m = load_machine(opt);
    const auto cache = build_cache(m);
    out << "states\t" << m.num_states() << "\nalphabet\t" << m.alphabet_size() << "\nsymbols\t";
    for (std::size_t a = 0; a < m.num_symbols(); ++a) out << (a ? " " : "") << m.symbol_name(a);
    out << "\nrho\t" << io::format_number(cache.rho) << (cache.rho_converged ? "" : "\t(unconverged)")
        << "\nZ\t" << io::format_number(cache.z) << '\n';
    return 0;
  } catch (const Error& e) {
    out << "invalid\t" << e.what() << '\n';
    return 1;
  }
}

int cmd_partition(const Options& opt, std::ostream& out) {
  const auto cache = build_cache(load_machine(opt));
  out << io::format_number(opt.log ? std::log(cache.z) : cache.z) << '\n';
  return 0;
}

int cmd_tensor(const Options& opt, std::ostream& out, std::size_t order) {
  const auto m = load_machine(opt);
  const auto cache = build_cache(m);
  DerivativeOptions dopt;
  dopt.element_budget = opt.budget;
  dopt.threads = resolve_threads(opt.threads);
  const auto tensor = order == 1   ? gradient(cache)
                      : order == 2 ? hessian(cache, dopt)
                                   : derivative_tensor(cache, order, dopt);
  const auto visible = io::visible_symbols(m, opt.all_symbols);
  emit(opt, out, [&](std::ostream& os) { io::write_tensor_tsv(os, m, tensor, visible); });
  return 0;
}

int cmd_marginal(const Options& opt, std::ostream& out) {
  const auto m = load_machine(opt);
  const auto cache = build_cache(m);
  const auto tau = io::parse_tuple(opt.tuple, m);
  DerivativeOptions dopt;
  dopt.element_budget = opt.budget;
  const double p = opt.prefix_form ? prefix_tuple_marginal(cache, m, std::span<const Transition>(tau), dopt)
                                   : tuple_marginal(cache, m, std::span<const Transition>(tau), dopt);
  out << io::format_number(p) << '\n';
  return 0;
}

int cmd_expect(const Options& opt, std::ostream& out) {
  if (opt.covariance && !opt.tfunc.empty()) throw UsageError("--covariance takes a single function (-r)");
  if (opt.covariance && opt.first_order) throw UsageError("--covariance and --first-order are exclusive");
  const auto m = load_machine(opt);
  const auto cache = build_cache(m);
  const auto r = io::parse_function(io::read_file(opt.rfunc), m);
  DenseMatrix result;
  if (opt.first_order) {
    result = first_order_expectation(cache, m, r).transpose();
  } else if (opt.covariance) {
    result = covariance(cache, m, r);
  } else if (opt.tfunc.empty()) {
    result = second_order_expectation(cache, m, r, r).matrix;
  } else {
    const auto t = io::parse_function(io::read_file(opt.tfunc), m);
    result = second_order_expectation(cache, m, r, t).matrix;
  }
  emit(opt, out, [&](std::ostream& os) { io::write_matrix_tsv(os, result); });
  return 0;
}

int cmd_bench(Options opt, std::ostream& out) {
  opt.bench.methods = split_methods(opt.methods);
  if (opt.bench.methods.empty()) throw UsageError("--methods is empty");
  if (opt.bench.min_states > opt.bench.max_states) throw UsageError("--min-states exceeds --max-states");
  std::vector<bench::BenchRow> rows;
  try {
    rows = bench::run_bench(opt.bench);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  emit(opt, out, [&](std::ostream& os) {
    bench::write_bench_tsv(os, opt.bench, rows);
    if (opt.fit && bench::state_schedule(opt.bench.min_states, opt.bench.max_states).size() >= 2) {
      for (const auto& method : opt.bench.methods) {
        os << "# exponent " << method << ' ' << bench::fit_exponent(rows, method) << '\n';
      }
    }
  });
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Partition-function derivatives and second-order expectations of cyclic WFSMs", "wfsm"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--threads", opt.threads, "Worker threads for tensor fills (default: $WFSM_THREADS or 1)");

  const auto input = [&](CLI::App* sub) {
    sub->add_option("-i,--input", opt.input, "Machine file")->required()->check(CLI::ExistingFile);
  };
  const auto output = [&](CLI::App* sub) { sub->add_option("-o,--output", opt.output, "Output file (default: stdout)"); };
  const auto symbols = [&](CLI::App* sub) {
    sub->add_flag("--all-symbols", opt.all_symbols, "Also list eps when its matrix is all zero");
    sub->add_option("--budget", opt.budget, "Largest tensor size in entries")->capture_default_str();
  };

  auto* check = app.add_subcommand("check", "Validate a machine and print N, A, rho and Z");
  input(check);
  auto* partition = app.add_subcommand("partition", "Print Z");
  input(partition);
  partition->add_flag("--log", opt.log, "Print log Z instead");
  auto* grad = app.add_subcommand("gradient", "TSV of dZ/dW: symbol src dst value");
  input(grad);
  output(grad);
  symbols(grad);
  auto* hess = app.add_subcommand("hessian", "TSV of second derivatives");
  input(hess);
  output(hess);
  symbols(hess);
  auto* deriv = app.add_subcommand("derivative", "TSV of the order-M derivative tensor");
  deriv->add_option("-m,--order", opt.order, "Derivative order")->required()->check(CLI::PositiveNumber);
  input(deriv);
  output(deriv);
  symbols(deriv);
  auto* marginal = app.add_subcommand("marginal", "Expected co-occurrence of a transition tuple");
  input(marginal);
  marginal->add_option("--tuple", opt.tuple, "\"src dst sym[; src dst sym]\"")->required();
  marginal->add_flag("--prefix-form", opt.prefix_form, "Sum derivatives over tuple prefixes instead");
  marginal->add_option("--budget", opt.budget, "Largest permutation count")->capture_default_str();
  auto* expect = app.add_subcommand("expect", "Second-order expectation E[r t'] as an R x T TSV");
  input(expect);
  output(expect);
  expect->add_option("-r,--rfunc", opt.rfunc, "Function file r")->required()->check(CLI::ExistingFile);
  expect->add_option("-t,--tfunc", opt.tfunc, "Function file t (default: r)")->check(CLI::ExistingFile);
  expect->add_flag("--covariance", opt.covariance, "Print Cov[r] instead");
  expect->add_flag("--first-order", opt.first_order, "Print E[r] as one row instead");
  auto* bench_cmd = app.add_subcommand("bench", "Hessian scaling benchmark as TSV");
  output(bench_cmd);
  bench_cmd->add_option("--min-states", opt.bench.min_states)->capture_default_str();
  bench_cmd->add_option("--max-states", opt.bench.max_states)->capture_default_str();
  bench_cmd->add_option("--alphabet", opt.bench.alphabet)->capture_default_str();
  bench_cmd->add_option("--seeds", opt.bench.seeds)->capture_default_str();
  bench_cmd->add_option("--methods", opt.methods, "Comma list of closed, fd, naive")->capture_default_str();
  bench_cmd->add_option("--min-time", opt.bench.min_seconds, "Seconds of repetition per timing")
      ->capture_default_str();
  bench_cmd->add_flag("--fit", opt.fit, "Append fitted log-log exponents as comments");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (check->parsed()) return cmd_check(opt, out);
    if (partition->parsed()) return cmd_partition(opt, out);
    if (grad->parsed()) return cmd_tensor(opt, out, 1);
    if (hess->parsed()) return cmd_tensor(opt, out, 2);
    if (deriv->parsed()) return cmd_tensor(opt, out, opt.order);
    if (marginal->parsed()) return cmd_marginal(opt, out);
    if (expect->parsed()) return cmd_expect(opt, out);
    if (bench_cmd->parsed()) return cmd_bench(opt, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << "usage error: no subcommand\n";
  return 2;
}

}  // namespace wfsm::cli
