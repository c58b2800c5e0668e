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
#include "wfsm/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

namespace wfsm::io {
namespace {

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

struct Line {
  std::size_t number;  // 1-based
  std::vector<Token> tokens;
};

// Splits into non-empty statement lines with comments removed.
std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view raw = text.substr(pos, eol - pos);
    ++number;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    Line line{number, {}};
    std::size_t i = 0;
    while (i < raw.size()) {
      while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
      const std::size_t begin = i;
      while (i < raw.size() && !std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
      if (i > begin) line.tokens.push_back({raw.substr(begin, i - begin), begin + 1});
    }
    if (!line.tokens.empty()) lines.push_back(std::move(line));
    if (eol == text.size()) break;
    pos = eol + 1;
  }
  return lines;
}

[[noreturn]] void fail(const Line& line, const Token& tok, const std::string& msg) {
  throw ParseError(line.number, tok.column, msg);
}

void expect_arity(const Line& line, std::size_t count, const char* usage) {
  if (line.tokens.size() != count) {
    const Token& at = line.tokens.size() > count ? line.tokens[count] : line.tokens.back();
    fail(line, at, std::string("expected '") + usage + "'");
  }
}

std::size_t to_index(const Line& line, const Token& tok) {
  std::size_t v = 0;
  const auto* first = tok.text.data();
  const auto* last = first + tok.text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) fail(line, tok, "expected a nonnegative integer, got '" + std::string(tok.text) + "'");
  return v;
}

double to_number(const Line& line, const Token& tok) {
  double v = 0.0;
  const auto* first = tok.text.data();
  const auto* last = first + tok.text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    fail(line, tok, "expected a finite decimal number, got '" + std::string(tok.text) + "'");
  }
  return v;
}

void expect_header(const std::vector<Line>& lines, std::string_view kind) {
  if (lines.empty()) throw ParseError(1, 1, "empty input; expected '" + std::string(kind) + " v1'");
  const Line& first = lines.front();
  if (first.tokens.size() != 2 || first.tokens[0].text != kind || first.tokens[1].text != "v1") {
    fail(first, first.tokens[0], "expected header '" + std::string(kind) + " v1'");
  }
}

std::string located(const Line& line, const std::string& msg) {
  return "line " + std::to_string(line.number) + ": " + msg;
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%#.17g", value);
  return buf;
}

double parse_number(std::string_view text) {
  const Line line{1, {{text, 1}}};
  return to_number(line, line.tokens[0]);
}

Machine<double> parse_machine(std::string_view text) {
  const auto lines = tokenize(text);
  expect_header(lines, "wfsm");

  std::optional<std::size_t> states;
  const Line* symbols_line = nullptr;
  struct Weighted {
    const Line* line;
    std::size_t src, dst;
    std::string_view symbol;
    double weight;
  };
  std::vector<Weighted> starts, ends, arcs;

  for (std::size_t k = 1; k < lines.size(); ++k) {
    const Line& line = lines[k];
    const auto kw = line.tokens[0].text;
    if (kw == "states") {
      expect_arity(line, 2, "states N");
      if (states) fail(line, line.tokens[0], "duplicate 'states' declaration");
      states = to_index(line, line.tokens[1]);
      if (*states == 0) fail(line, line.tokens[1], "a machine needs at least one state");
    } else if (kw == "symbols") {
      if (symbols_line) fail(line, line.tokens[0], "duplicate 'symbols' declaration");
      if (line.tokens.size() < 2) fail(line, line.tokens[0], "expected 'symbols s1 s2 ...'");
      symbols_line = &line;
    } else if (kw == "start" || kw == "end") {
      expect_arity(line, 3, kw == "start" ? "start i w" : "end i w");
      Weighted w{&line, to_index(line, line.tokens[1]), 0, {}, to_number(line, line.tokens[2])};
      (kw == "start" ? starts : ends).push_back(w);
    } else if (kw == "arc") {
      expect_arity(line, 5, "arc i j sym w");
      arcs.push_back({&line, to_index(line, line.tokens[1]), to_index(line, line.tokens[2]),
                      line.tokens[3].text, to_number(line, line.tokens[4])});
    } else {
      fail(line, line.tokens[0], "unknown statement '" + std::string(kw) + "'");
    }
  }
  if (!states) {
    throw ParseError(lines.back().number + 1, 1, "missing 'states N' declaration");
  }

  std::vector<std::string> symbols;
  if (symbols_line) {
    for (std::size_t t = 1; t < symbols_line->tokens.size(); ++t) {
      symbols.emplace_back(symbols_line->tokens[t].text);
    }
  }
  {
    std::set<std::string> seen;
    for (const auto& s : symbols) {
      if (!seen.insert(s).second) {
        throw ValidationError(located(*symbols_line, "duplicate symbol '" + s + "'"));
      }
    }
    if (!seen.contains(std::string(kEpsilon))) symbols.emplace_back(kEpsilon);
  }

  const auto n = static_cast<Eigen::Index>(*states);
  DenseVector start = DenseVector::Zero(n);
  DenseVector end = DenseVector::Zero(n);
  std::vector<DenseMatrix> trans(symbols.size(), DenseMatrix::Zero(n, n));

  const auto check_state = [&](const Line& line, std::size_t s) {
    if (s >= *states) {
      throw ValidationError(located(line, "state " + std::to_string(s) + " out of range for " +
                                              std::to_string(*states) + " states"));
    }
  };
  const auto check_weight = [&](const Line& line, double w) {
    if (w < 0.0) throw ValidationError(located(line, "negative weight " + format_number(w)));
  };
  const auto fill_vector = [&](const std::vector<Weighted>& entries, DenseVector& into,
                               const char* what) {
    std::set<std::size_t> seen;
    for (const auto& en : entries) {
      check_state(*en.line, en.src);
      check_weight(*en.line, en.weight);
      if (!seen.insert(en.src).second) {
        throw ValidationError(located(*en.line, std::string("duplicate ") + what + " weight for state " +
                                                    std::to_string(en.src)));
      }
      into(static_cast<Eigen::Index>(en.src)) = en.weight;
    }
  };
  fill_vector(starts, start, "start");
  fill_vector(ends, end, "end");

  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen_arcs;
  for (const auto& arc : arcs) {
    check_state(*arc.line, arc.src);
    check_state(*arc.line, arc.dst);
    check_weight(*arc.line, arc.weight);
    std::size_t a = 0;
    while (a < symbols.size() && symbols[a] != arc.symbol) ++a;
    if (a == symbols.size()) {
      throw ValidationError(located(*arc.line, "undeclared symbol '" + std::string(arc.symbol) + "'"));
    }
    if (!seen_arcs.insert({a, arc.src, arc.dst}).second) {
      throw ValidationError(located(*arc.line, "duplicate arc"));
    }
    trans[a](static_cast<Eigen::Index>(arc.src), static_cast<Eigen::Index>(arc.dst)) = arc.weight;
  }

  Machine<double> machine(std::move(symbols), std::move(start), std::move(end), std::move(trans));
  try {
    (void)kleene_star(total_matrix(machine));
  } catch (const DivergentMachine& e) {
    throw ValidationError(std::string("machine diverges: ") + e.what());
  }
  return machine;
}

std::string serialize_machine(const Machine<double>& m) {
  std::ostringstream out;
  out << "wfsm v1\nstates " << m.num_states() << "\nsymbols";
  for (const auto& s : m.symbols()) out << ' ' << s;
  out << '\n';
  const auto n = static_cast<Eigen::Index>(m.num_states());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (m.start()(i) != 0.0) out << "start " << i << ' ' << format_number(m.start()(i)) << '\n';
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (m.end()(i) != 0.0) out << "end " << i << ' ' << format_number(m.end()(i)) << '\n';
  }
  for (std::size_t a = 0; a < m.num_symbols(); ++a) {
    const auto& w = m.transition(a);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (w(i, j) != 0.0) {
          out << "arc " << i << ' ' << j << ' ' << m.symbol_name(a) << ' ' << format_number(w(i, j)) << '\n';
        }
      }
    }
  }
  return out.str();
}

DecomposableFunction<double> parse_function(std::string_view text, const Machine<double>& m) {
  const auto lines = tokenize(text);
  expect_header(lines, "func");
  std::optional<Eigen::Index> dim;
  struct Raw {
    const Line* line;
    Transition transition;
    std::size_t index;
    double value;
  };
  std::vector<Raw> entries;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const Line& line = lines[k];
    const auto kw = line.tokens[0].text;
    if (kw == "dim") {
      expect_arity(line, 2, "dim R");
      if (dim) fail(line, line.tokens[0], "duplicate 'dim' declaration");
      dim = static_cast<Eigen::Index>(to_index(line, line.tokens[1]));
    } else if (kw == "entry") {
      expect_arity(line, 6, "entry src dst sym index value");
      const auto sym = m.symbol_id(line.tokens[3].text);
      if (!sym) {
        throw ValidationError(located(line, "unknown symbol '" + std::string(line.tokens[3].text) + "'"));
      }
      entries.push_back({&line,
                         Transition{*sym, to_index(line, line.tokens[1]), to_index(line, line.tokens[2])},
                         to_index(line, line.tokens[4]), to_number(line, line.tokens[5])});
    } else {
      fail(line, line.tokens[0], "unknown statement '" + std::string(kw) + "'");
    }
  }
  if (!dim) throw ParseError(lines.back().number + 1, 1, "missing 'dim R' declaration");

  DecomposableFunction<double> f(m.space(), *dim);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  const auto space = m.space();
  for (const auto& en : entries) {
    if (!space.contains(en.transition)) {
      throw ValidationError(located(*en.line, "state out of range for " + std::to_string(m.num_states()) + " states"));
    }
    if (static_cast<Eigen::Index>(en.index) >= *dim) {
      throw ValidationError(located(*en.line, "index " + std::to_string(en.index) + " outside dim " +
                                                  std::to_string(*dim)));
    }
    if (!seen.insert({space.index(en.transition), en.index}).second) {
      throw ValidationError(located(*en.line, "duplicate entry"));
    }
    f.add(en.transition, static_cast<Eigen::Index>(en.index), en.value);
  }
  return f;
}

std::string serialize_function(const DecomposableFunction<double>& f, const Machine<double>& m) {
  std::ostringstream out;
  out << "func v1\ndim " << f.dim() << '\n';
  const auto space = f.space();
  for (std::size_t x = 0; x < space.size(); ++x) {
    const Transition t = space.at(x);
    for (SparseVector<double>::InnerIterator it(f.value(x)); it; ++it) {
      out << "entry " << t.src << ' ' << t.dst << ' ' << m.symbol_name(t.symbol) << ' ' << it.index()
          << ' ' << format_number(it.value()) << '\n';
    }
  }
  return out.str();
}

std::vector<Transition> parse_tuple(std::string_view text, const Machine<double>& m) {
  std::vector<Transition> tuple;
  std::size_t pos = 0;
  std::size_t offset = 0;
  while (true) {
    const std::size_t semi = text.find(';', pos);
    const std::string_view part = text.substr(pos, semi == std::string_view::npos ? text.npos : semi - pos);
    auto lines = tokenize(part);
    const std::size_t column = pos + 1;
    if (lines.empty()) throw ParseError(1, column, "empty transition in tuple");
    Line& line = lines.front();
    for (auto& tok : line.tokens) tok.column += offset;
    if (line.tokens.size() != 3) fail(line, line.tokens.front(), "expected 'src dst sym'");
    const auto sym = m.symbol_id(line.tokens[2].text);
    if (!sym) fail(line, line.tokens[2], "unknown symbol '" + std::string(line.tokens[2].text) + "'");
    const Transition t{*sym, to_index(line, line.tokens[0]), to_index(line, line.tokens[1])};
    if (!m.space().contains(t)) fail(line, line.tokens[0], "state out of range");
    tuple.push_back(t);
    if (semi == std::string_view::npos) break;
    pos = semi + 1;
    offset = pos;
  }
  return tuple;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<bool> visible_symbols(const Machine<double>& m, bool include_unused_epsilon) {
  std::vector<bool> visible(m.num_symbols(), true);
  const auto eps = m.epsilon_id();
  if (!include_unused_epsilon && m.transition(eps).isZero(0.0)) visible[eps] = false;
  return visible;
}

void write_tensor_tsv(std::ostream& out, const Machine<double>& m,
                      const DerivativeTensor<double>& tensor, const std::vector<bool>& visible) {
  for (std::size_t flat = 0; flat < tensor.size(); ++flat) {
    const auto tuple = tensor.unravel(flat);
    bool shown = true;
    for (const auto& t : tuple) shown = shown && visible[t.symbol];
    if (!shown) continue;
    for (const auto& t : tuple) out << m.symbol_name(t.symbol) << '\t' << t.src << '\t' << t.dst << '\t';
    out << format_number(tensor[flat]) << '\n';
  }
}

void write_matrix_tsv(std::ostream& out, const DenseMatrix& matrix) {
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (j) out << '\t';
      out << format_number(matrix(i, j));
    }
    out << '\n';
  }
}

}  // namespace wfsm::io
