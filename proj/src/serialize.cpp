#include "univqm/serialize.hpp"

#include <charconv>
#include <sstream>
#include <vector>

#include <fmt/format.h>

namespace univqm {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw FormatError(fmt::format("not a number: '{}'", s));
  return v;
}

std::size_t parse_size(const std::string& s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw FormatError(fmt::format("not a count: '{}'", s));
  return v;
}

std::string header(const SubsystemLayout& layout, std::string_view kind, Eigen::Index rows, Eigen::Index cols) {
  std::string out = fmt::format("univqm {}\n", kind);
  for (const auto& sub : layout.subsystems()) {
    out += fmt::format("subsystem {} {}", sub.id(), sub.dim());
    for (const auto& l : sub.basis()) out += " " + l.name;
    out += '\n';
  }
  out += fmt::format("entries {} {}\n", rows, cols);
  return out;
}

std::string body(const CMatrix& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ' ';
      out += format_complex(m(r, c));
    }
    out += '\n';
  }
  return out;
}

struct Parsed {
  SubsystemLayout layout;
  CMatrix matrix;
};

Parsed parse_document(std::string_view text, std::string_view expected_kind) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto line = trim(text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
    if (!line.empty() && line.front() != '#') lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  std::size_t i = 0;
  if (lines.empty()) throw FormatError("empty document");
  const auto head = split_ws(lines[i++]);
  if (head.size() != 2 || head[0] != "univqm" || head[1] != expected_kind) {
    throw FormatError(fmt::format("expected header 'univqm {}'", expected_kind));
  }
  std::vector<Subsystem> subs;
  while (i < lines.size() && lines[i].starts_with("subsystem")) {
    auto tok = split_ws(lines[i++]);
    if (tok.size() < 3) throw FormatError("subsystem line needs an id and a dimension");
    const std::size_t dim = parse_size(tok[2]);
    if (tok.size() != 3 + dim) {
      throw FormatError(fmt::format("subsystem '{}' declares dimension {} but lists {} labels", tok[1], dim,
                                    tok.size() - 3));
    }
    subs.emplace_back(tok[1], std::vector<std::string>(tok.begin() + 3, tok.end()));
  }
  if (i >= lines.size()) throw FormatError("missing 'entries' line");
  const auto ent = split_ws(lines[i++]);
  if (ent.size() != 3 || ent[0] != "entries") throw FormatError("malformed 'entries' line");
  const auto rows = static_cast<Eigen::Index>(parse_size(ent[1]));
  const auto cols = static_cast<Eigen::Index>(parse_size(ent[2]));
  if (lines.size() - i != static_cast<std::size_t>(rows)) {
    throw FormatError(fmt::format("expected {} data rows, found {}", rows, lines.size() - i));
  }
  CMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto tok = split_ws(lines[i++]);
    if (static_cast<Eigen::Index>(tok.size()) != cols) {
      throw FormatError(fmt::format("row {} has {} entries, expected {}", r, tok.size(), cols));
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = parse_complex(tok[static_cast<std::size_t>(c)]);
  }
  return {SubsystemLayout(std::move(subs)), std::move(m)};
}

}  // namespace

std::string format_complex(Complex z) { return fmt::format("{:.17g},{:.17g}", z.real(), z.imag()); }

Complex parse_complex(std::string_view text) {
  text = trim(text);
  const auto comma = text.find(',');
  if (comma == std::string_view::npos) return {parse_double(text), 0.0};
  return {parse_double(text.substr(0, comma)), parse_double(text.substr(comma + 1))};
}

std::string to_text(const StateVector& s) {
  return header(s.layout(), "state", s.amplitudes().size(), 1) + body(s.amplitudes());
}

std::string to_text(const DensityMatrix& rho) {
  return header(rho.layout(), "density", rho.matrix().rows(), rho.matrix().cols()) + body(rho.matrix());
}

std::string to_text(const UnitaryOperator& u) {
  return header(u.layout(), "unitary", u.matrix().rows(), u.matrix().cols()) + body(u.matrix());
}

StateVector parse_state(std::string_view text) {
  auto p = parse_document(text, "state");
  if (p.matrix.cols() != 1) throw FormatError("a state must have exactly one column");
  return StateVector(std::move(p.layout), p.matrix.col(0));
}

DensityMatrix parse_density(std::string_view text) {
  auto p = parse_document(text, "density");
  return DensityMatrix(std::move(p.layout), std::move(p.matrix));
}

UnitaryOperator parse_unitary(std::string_view text) {
  auto p = parse_document(text, "unitary");
  return UnitaryOperator(std::move(p.layout), std::move(p.matrix));
}

CMatrix parse_inline_matrix(std::string_view text) {
  std::vector<std::vector<Complex>> rows;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto semi = text.find(';', start);
    const auto row = trim(text.substr(start, semi == std::string_view::npos ? std::string_view::npos : semi - start));
    std::vector<Complex> entries;
    for (const auto& tok : split_ws(row)) entries.push_back(parse_complex(tok));
    if (entries.empty()) throw FormatError("empty matrix row");
    rows.push_back(std::move(entries));
    if (semi == std::string_view::npos) break;
    start = semi + 1;
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  CMatrix m(n, static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != m.cols()) {
      throw FormatError(fmt::format("matrix row {} has {} entries, expected {}", r,
                                    rows[static_cast<std::size_t>(r)].size(), m.cols()));
    }
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace univqm
