#pragma once

// Line-oriented model format:
//
//   # comment
//   species M P
//   reaction 0 -> M @ 100
//   reaction M -> M + P @ 1
//   reaction 2*A -> B @ 0.5e-2
//
// `species` lines come first. `0` is the empty multiset. Rates are mass-action
// constants; a homodimerization 2A -> ... fires at k·x_A·(x_A - 1).

#include <cctype>
#include <charconv>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "driftbound/error.hpp"
#include "driftbound/network.hpp"

namespace driftbound {

enum class ParseErrc { Syntax, UnknownSpecies, NegativeRate, DuplicateSpecies, OrderTooHigh };

inline const char* to_string(ParseErrc kind) {
  switch (kind) {
    case ParseErrc::Syntax: return "syntax error";
    case ParseErrc::UnknownSpecies: return "unknown species";
    case ParseErrc::NegativeRate: return "non-positive rate";
    case ParseErrc::DuplicateSpecies: return "duplicate species";
    case ParseErrc::OrderTooHigh: return "reaction order too high";
  }
  return "error";
}

class ParseError : public KindedError<ParseErrc> {
 public:
  ParseError(ParseErrc kind, std::string source, std::size_t line, std::size_t column, std::string detail)
      : KindedError(kind, source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                              to_string(kind) + ": " + detail),
        source_(std::move(source)),
        line_(line),
        column_(column),
        detail_(std::move(detail)) {}

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }      // 1-based
  std::size_t column() const { return column_; }  // 1-based byte column
  const std::string& detail() const { return detail_; }

 private:
  std::string source_;
  std::size_t line_;
  std::size_t column_;
  std::string detail_;
};

struct ModelDocument {
  std::string source_name;
  std::vector<std::string> lines;
  ReactionNetwork parsed;
};

namespace detail {

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

// Splits on whitespace, and makes "->", "+", "@" and "*" separate tokens even
// when written without surrounding spaces.
inline std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == ' ' || c == '\t') {
      ++i;
      continue;
    }
    if (c == '#') break;
    if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') {
      out.push_back({line.substr(i, 2), i + 1});
      i += 2;
      continue;
    }
    if (c == '+' || c == '@' || c == '*') {
      out.push_back({line.substr(i, 1), i + 1});
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < line.size()) {
      const char d = line[j];
      if (d == ' ' || d == '\t' || d == '#' || d == '@' || d == '*') break;
      if (d == '+' && !(j > i && (line[j - 1] == 'e' || line[j - 1] == 'E') &&
                        std::isdigit(static_cast<unsigned char>(line[i])))) {
        break;
      }
      if (d == '-' && j + 1 < line.size() && line[j + 1] == '>') break;
      ++j;
    }
    out.push_back({line.substr(i, j - i), i + 1});
    i = j;
  }
  return out;
}

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  const auto first = static_cast<unsigned char>(s[0]);
  if (!(std::isalpha(first) || s[0] == '_')) return false;
  for (const char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (!(std::isalnum(u) || c == '_')) return false;
  }
  return true;
}

inline std::optional<long> parse_count(std::string_view s) {
  long value = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

inline std::optional<double> parse_real(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string_view body = s;
  bool negative = false;
  if (body.front() == '+' || body.front() == '-') {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  if (body.empty() || !(std::isdigit(static_cast<unsigned char>(body.front())) || body.front() == '.')) {
    return std::nullopt;
  }
  double value = 0.0;
  const auto* end = body.data() + body.size();
  auto [ptr, ec] = std::from_chars(body.data(), end, value, std::chars_format::general);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return negative ? -value : value;
}

class ModelParser {
 public:
  explicit ModelParser(std::string source) : source_(std::move(source)) {}

  ModelDocument parse(std::string_view text) {
    ModelDocument doc;
    doc.source_name = source_;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(start, end - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      doc.lines.emplace_back(line);
      if (end == text.size()) break;
      start = end + 1;
    }
    for (std::size_t i = 0; i < doc.lines.size(); ++i) parse_line(doc.lines[i], i + 1);
    try {
      doc.parsed = build_network(species_, reactions_);
    } catch (const NetworkError& e) {
      // Every per-reaction condition is checked with positions above; this is
      // a backstop so no network error escapes as a different type.
      throw ParseError(ParseErrc::Syntax, source_, 1, 1, e.what());
    }
    return doc;
  }

 private:
  [[noreturn]] void fail(ParseErrc kind, std::size_t line, std::size_t column, std::string detail) const {
    throw ParseError(kind, source_, line, column, std::move(detail));
  }

  void parse_line(std::string_view line, std::size_t lineno) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      const auto c = static_cast<unsigned char>(line[i]);
      if (c == '#') break;
      if (c >= 0x80 || (c < 0x20 && c != '\t')) {
        fail(ParseErrc::Syntax, lineno, i + 1, "unexpected character");
      }
    }
    const auto tokens = tokenize(line);
    if (tokens.empty()) return;
    const Token& head = tokens.front();
    if (head.text == "species") {
      if (!reactions_.empty()) {
        fail(ParseErrc::Syntax, lineno, head.column, "species must be declared before reactions");
      }
      if (tokens.size() == 1) {
        fail(ParseErrc::Syntax, lineno, head.column, "expected at least one species name");
      }
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        const Token& t = tokens[i];
        if (!is_identifier(t.text)) {
          fail(ParseErrc::Syntax, lineno, t.column, "invalid species name '" + std::string(t.text) + "'");
        }
        if (index_.contains(std::string(t.text))) {
          fail(ParseErrc::DuplicateSpecies, lineno, t.column, "'" + std::string(t.text) + "' already declared");
        }
        index_[std::string(t.text)] = species_.size();
        species_.emplace_back(t.text);
      }
      return;
    }
    if (head.text == "reaction") {
      parse_reaction(tokens, lineno, line.size());
      return;
    }
    fail(ParseErrc::Syntax, lineno, head.column,
         "expected 'species' or 'reaction', got '" + std::string(head.text) + "'");
  }

  // Consumes a multiset starting at tokens[pos]; stops at `stop`.
  Stoichiometry parse_side(const std::vector<Token>& tokens, std::size_t& pos, std::string_view stop,
                           std::size_t lineno, std::size_t eol) {
    Stoichiometry side;
    auto at_end = [&] { return pos >= tokens.size() || tokens[pos].text == stop; };
    if (at_end()) {
      fail(ParseErrc::Syntax, lineno, pos < tokens.size() ? tokens[pos].column : eol + 1, "expected a multiset");
    }
    if (tokens[pos].text == "0") {
      ++pos;
      return side;
    }
    while (true) {
      if (at_end()) {
        fail(ParseErrc::Syntax, lineno, pos < tokens.size() ? tokens[pos].column : eol + 1,
             "expected a species term");
      }
      int count = 1;
      const Token* name = &tokens[pos];
      if (!is_identifier(name->text)) {
        const auto k = parse_count(name->text);
        if (!k || *k < 1 || *k > 1000000) {
          fail(ParseErrc::Syntax, lineno, name->column, "invalid term '" + std::string(name->text) + "'");
        }
        if (pos + 1 >= tokens.size() || tokens[pos + 1].text != "*") {
          fail(ParseErrc::Syntax, lineno, pos + 1 < tokens.size() ? tokens[pos + 1].column : eol + 1,
               "expected '*' after stoichiometric coefficient");
        }
        count = static_cast<int>(*k);
        pos += 2;
        if (pos >= tokens.size()) fail(ParseErrc::Syntax, lineno, eol + 1, "expected a species name");
        name = &tokens[pos];
        if (!is_identifier(name->text)) {
          fail(ParseErrc::Syntax, lineno, name->column, "invalid species name '" + std::string(name->text) + "'");
        }
      }
      const auto it = index_.find(std::string(name->text));
      if (it == index_.end()) {
        fail(ParseErrc::UnknownSpecies, lineno, name->column, "'" + std::string(name->text) + "' is not declared");
      }
      side[it->second] += count;
      ++pos;
      if (at_end()) return side;
      if (tokens[pos].text != "+") {
        fail(ParseErrc::Syntax, lineno, tokens[pos].column, "expected '+' or '" + std::string(stop) + "'");
      }
      ++pos;
    }
  }

  void parse_reaction(const std::vector<Token>& tokens, std::size_t lineno, std::size_t eol) {
    std::size_t pos = 1;
    const std::size_t lhs_column = pos < tokens.size() ? tokens[pos].column : eol + 1;
    Stoichiometry reactants = parse_side(tokens, pos, "->", lineno, eol);
    if (pos >= tokens.size() || tokens[pos].text != "->") {
      fail(ParseErrc::Syntax, lineno, pos < tokens.size() ? tokens[pos].column : eol + 1, "expected '->'");
    }
    ++pos;
    Stoichiometry products = parse_side(tokens, pos, "@", lineno, eol);
    if (pos >= tokens.size() || tokens[pos].text != "@") {
      fail(ParseErrc::Syntax, lineno, pos < tokens.size() ? tokens[pos].column : eol + 1, "expected '@' and a rate");
    }
    ++pos;
    if (pos >= tokens.size()) fail(ParseErrc::Syntax, lineno, eol + 1, "expected a rate constant");
    const Token& rate_token = tokens[pos];
    const auto rate = parse_real(rate_token.text);
    if (!rate) {
      fail(ParseErrc::Syntax, lineno, rate_token.column, "invalid rate '" + std::string(rate_token.text) + "'");
    }
    if (*rate <= 0.0) fail(ParseErrc::NegativeRate, lineno, rate_token.column, "rate must be positive");
    if (pos + 1 < tokens.size()) {
      fail(ParseErrc::Syntax, lineno, tokens[pos + 1].column, "unexpected trailing token");
    }
    Reaction reaction{std::move(reactants), std::move(products), *rate};
    if (reaction.order() > 2) {
      fail(ParseErrc::OrderTooHigh, lineno, lhs_column,
           "reactant order " + std::to_string(reaction.order()) + " exceeds 2");
    }
    bool changes = false;
    for (std::size_t s = 0; s < species_.size(); ++s) {
      const auto get = [s](const Stoichiometry& m) {
        const auto it = m.find(s);
        return it == m.end() ? 0 : it->second;
      };
      if (get(reaction.reactants) != get(reaction.products)) changes = true;
    }
    if (!changes) fail(ParseErrc::Syntax, lineno, lhs_column, "reaction has zero net change");
    reactions_.push_back(std::move(reaction));
  }

  std::string source_;
  std::vector<std::string> species_;
  std::map<std::string, std::size_t> index_;
  std::vector<Reaction> reactions_;
};

inline std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace detail

inline ModelDocument parse_document(std::string_view text, std::string source_name = "<input>") {
  return detail::ModelParser(std::move(source_name)).parse(text);
}

/// Parses a model; throws ParseError carrying the 1-based line and column of
/// the first offending token.
inline ReactionNetwork parse_model(std::string_view text, std::string source_name = "<input>") {
  return parse_document(text, std::move(source_name)).parsed;
}

/// Canonical text: one species line, reactions in input order, terms sorted by
/// species index, rates in shortest round-trip form.
inline std::string serialize_model(const ReactionNetwork& net) {
  std::ostringstream out;
  if (net.dimension() > 0) {
    out << "species";
    for (const auto& s : net.species()) out << ' ' << s.name;
    out << '\n';
  }
  auto side = [&](const Stoichiometry& m) {
    if (m.empty()) return std::string("0");
    std::string text;
    for (const auto& [s, count] : m) {
      if (!text.empty()) text += " + ";
      if (count != 1) text += std::to_string(count) + "*";
      text += net.species()[s].name;
    }
    return text;
  };
  for (const auto& r : net.reactions()) {
    out << "reaction " << side(r.reactants) << " -> " << side(r.products) << " @ "
        << detail::format_real(r.rate_constant) << '\n';
  }
  return out.str();
}

}  // namespace driftbound
