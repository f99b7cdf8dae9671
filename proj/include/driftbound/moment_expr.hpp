#pragma once

// Polynomials of degree ≤ 2 over species names, e.g. "m", "m^2", "2*m*p",
// "x1 + 0.5*x2^2 - 3". Used by the CLI to name moment functions.

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "driftbound/error.hpp"
#include "driftbound/generator.hpp"
#include "driftbound/network.hpp"
#include "driftbound/reaction_dsl.hpp"

namespace driftbound {

enum class ExprErrc { Syntax, UnknownSpecies, UnsupportedDegree };

using ExprError = KindedError<ExprErrc>;

namespace detail {

class ExprParser {
 public:
  ExprParser(std::string_view text, const ReactionNetwork& net) : s_(text), net_(net) {}

  QuadraticForm parse() {
    const auto n = static_cast<Eigen::Index>(net_.dimension());
    QuadraticForm f = QuadraticForm::zero(n);
    skip();
    if (pos_ == s_.size()) fail(ExprErrc::Syntax, "empty expression");
    double sign = 1.0;
    if (peek() == '-' || peek() == '+') {
      sign = take() == '-' ? -1.0 : 1.0;
    }
    term(f, sign);
    while (true) {
      skip();
      if (pos_ == s_.size()) break;
      const char c = take();
      if (c != '+' && c != '-') fail(ExprErrc::Syntax, std::string("unexpected '") + c + "'");
      term(f, c == '-' ? -1.0 : 1.0);
    }
    return f;
  }

 private:
  // term := factor ('*' factor)*, factor := number | species ['^' integer]
  void term(QuadraticForm& f, double coeff) {
    std::vector<Eigen::Index> vars;
    while (true) {
      skip();
      if (pos_ == s_.size()) fail(ExprErrc::Syntax, "expected a factor");
      if (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.') {
        coeff *= number();
      } else {
        const Eigen::Index v = species();
        int power = 1;
        skip();
        if (pos_ < s_.size() && peek() == '^') {
          take();
          skip();
          const std::size_t start = pos_;
          while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
          if (start == pos_) fail(ExprErrc::Syntax, "expected an integer exponent");
          power = std::stoi(std::string(s_.substr(start, pos_ - start)));
        }
        for (int k = 0; k < power && vars.size() <= 2; ++k) vars.push_back(v);
      }
      skip();
      if (pos_ < s_.size() && peek() == '*') {
        take();
        continue;
      }
      break;
    }
    if (vars.size() > 2) fail(ExprErrc::UnsupportedDegree, "degree above 2 is not supported");
    const auto n = static_cast<Eigen::Index>(net_.dimension());
    switch (vars.size()) {
      case 0: f = f + QuadraticForm::constant(n, coeff); break;
      case 1: f = f + coeff * QuadraticForm::coordinate(n, vars[0]); break;
      default: f = f + coeff * QuadraticForm::product(n, vars[0], vars[1]); break;
    }
  }

  double number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                ((s_[pos_] == '+' || s_[pos_] == '-') && pos_ > start &&
                                 (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E')))) {
      ++pos_;
    }
    const auto v = parse_real(s_.substr(start, pos_ - start));
    if (!v) fail(ExprErrc::Syntax, "bad number '" + std::string(s_.substr(start, pos_ - start)) + "'");
    return *v;
  }

  Eigen::Index species() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    const std::string name(s_.substr(start, pos_ - start));
    if (name.empty()) fail(ExprErrc::Syntax, std::string("unexpected '") + s_[start] + "'");
    const std::size_t idx = net_.find_species(name);
    if (idx == ReactionNetwork::npos) fail(ExprErrc::UnknownSpecies, "unknown species '" + name + "'");
    return static_cast<Eigen::Index>(idx);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  char peek() const { return s_[pos_]; }
  char take() { return s_[pos_++]; }

  [[noreturn]] void fail(ExprErrc kind, const std::string& what) const {
    throw ExprError(kind, "'" + std::string(s_) + "': " + what);
  }

  std::string_view s_;
  const ReactionNetwork& net_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline QuadraticForm parse_moment_expression(std::string_view text, const ReactionNetwork& net) {
  return detail::ExprParser(text, net).parse();
}

}  // namespace driftbound
