#include <gtest/gtest.h>

#include <random>

#include "driftbound/reaction_dsl.hpp"
#include "fixtures.hpp"

using namespace driftbound;

namespace {

ParseError parse_error(std::string_view text) {
  try {
    parse_model(text);
  } catch (const ParseError& e) {
    return e;
  }
  ADD_FAILURE() << "expected a parse error for:\n" << text;
  return ParseError(ParseErrc::Syntax, "", 0, 0, "");
}

TEST(Dsl, GeneModel) {
  const auto net = parse_model(
      "species M P\n"
      "reaction 0 -> M @ 100\n"
      "reaction M -> 0 @ 1\n"
      "reaction M -> M + P @ 1\n"
      "reaction P -> 0 @ 0.1\n");
  ASSERT_EQ(net.dimension(), 2u);
  ASSERT_EQ(net.transitions().size(), 4u);
  EXPECT_EQ(net.transitions()[0].law, RateLaw::Constant);
  EXPECT_EQ(net.transitions()[2].law, RateLaw::Linear);
  EXPECT_EQ(net.transitions()[2].first, 0u);
  EXPECT_EQ(net.transitions()[2].change, Eigen::Vector2i(0, 1));
  EXPECT_DOUBLE_EQ(net.transitions()[3].rate_constant, 0.1);
}

TEST(Dsl, CommentsWhitespaceAndCoefficients) {
  const auto net = parse_model(
      "# header\n"
      "  species\ta b   # trailing\n"
      "\n"
      "reaction 2*a->b@1.5e-1\n"
      "reaction b -> 2 * a + b @ 3\n");
  ASSERT_EQ(net.reactions().size(), 2u);
  EXPECT_EQ(net.reactions()[0].reactants.at(0), 2);
  EXPECT_DOUBLE_EQ(net.reactions()[0].rate_constant, 0.15);
  EXPECT_EQ(net.transitions()[1].change, Eigen::Vector2i(2, 0));
}

TEST(Dsl, NegativeRate) {
  const auto e = parse_error("species A\nreaction A -> 0 @ -1\n");
  EXPECT_EQ(e.kind(), ParseErrc::NegativeRate);
  EXPECT_EQ(e.line(), 2u);
  EXPECT_EQ(e.column(), 19u);
}

TEST(Dsl, UndeclaredSpecies) {
  const auto e = parse_error("reaction A -> B @ 1\n");
  EXPECT_EQ(e.kind(), ParseErrc::UnknownSpecies);
  EXPECT_EQ(e.line(), 1u);
  EXPECT_EQ(e.column(), 10u);
}

TEST(Dsl, OtherErrors) {
  EXPECT_EQ(parse_error("species a a\n").kind(), ParseErrc::DuplicateSpecies);
  EXPECT_EQ(parse_error("species a\nreaction 3*a -> 0 @ 1\n").kind(), ParseErrc::OrderTooHigh);
  EXPECT_EQ(parse_error("species a\nreaction a + a + a -> 0 @ 1\n").kind(), ParseErrc::OrderTooHigh);
  EXPECT_EQ(parse_error("species a\nreaction a -> 0\n").kind(), ParseErrc::Syntax);
  EXPECT_EQ(parse_error("species a\nreaction a 0 @ 1\n").kind(), ParseErrc::Syntax);
  EXPECT_EQ(parse_error("species a\nreaction a -> 0 @ 1 extra\n").kind(), ParseErrc::Syntax);
  EXPECT_EQ(parse_error("species a\nreaction a -> 0 @ abc\n").kind(), ParseErrc::Syntax);
  EXPECT_EQ(parse_error("species a\nfoo a\n").kind(), ParseErrc::Syntax);
  EXPECT_EQ(parse_error("species a\nreaction a -> a @ 1\n").kind(), ParseErrc::Syntax);
}

TEST(Dsl, FirstErrorWins) {
  const auto e = parse_error("species a\nreaction b -> 0 @ 1\nreaction a -> 0 @ -1\n");
  EXPECT_EQ(e.kind(), ParseErrc::UnknownSpecies);
  EXPECT_EQ(e.line(), 2u);
}

TEST(Dsl, SerializeGene) {
  const auto net = fixtures::load("gene.model");
  const std::string text = serialize_model(net);
  EXPECT_EQ(text,
            "species m p\n"
            "reaction 0 -> m @ 100\n"
            "reaction m -> 0 @ 1\n"
            "reaction m -> m + p @ 1\n"
            "reaction p -> 0 @ 0.1\n");
}

TEST(Dsl, SerializeEmptyNetwork) {
  const auto net = build_network({}, std::vector<Reaction>{});
  EXPECT_EQ(serialize_model(net), "");
  EXPECT_EQ(parse_model(""), net);
}

TEST(Dsl, Lin3RoundTrip) {
  const auto net = fixtures::load("lin3.model");
  EXPECT_EQ(net.reactions().size(), 7u);
  EXPECT_EQ(parse_model(serialize_model(net)), net);
}

TEST(Dsl, DocumentKeepsLines) {
  const auto doc = parse_document("species a\nreaction 0 -> a @ 1", "x.model");
  EXPECT_EQ(doc.source_name, "x.model");
  ASSERT_EQ(doc.lines.size(), 2u);
  EXPECT_EQ(doc.lines[1], "reaction 0 -> a @ 1");
}

TEST(DslProperty, RoundTripRandomNetworks) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const auto net = fixtures::random_network(rng, 6, 12);
    const std::string text = serialize_model(net);
    ASSERT_EQ(parse_model(text), net) << text;
    ASSERT_EQ(serialize_model(parse_model(text)), text);
  }
}

TEST(DslProperty, ErrorPositionsPointIntoInput) {
  std::mt19937_64 rng(22);
  const std::string alphabet = "ab01 +-*>@#.e\n\t2x";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  int errors = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text = serialize_model(fixtures::random_network(rng, 3, 4));
    if (text.empty()) continue;
    std::uniform_int_distribution<std::size_t> where(0, text.size() - 1);
    for (int k = 0; k < 3; ++k) text[where(rng)] = alphabet[pick(rng)];
    try {
      parse_model(text);
    } catch (const ParseError& e) {
      ++errors;
      std::vector<std::string> lines;
      std::size_t start = 0;
      while (true) {
        const auto nl = text.find('\n', start);
        lines.push_back(text.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
        if (nl == std::string::npos) break;
        start = nl + 1;
      }
      ASSERT_GE(e.line(), 1u) << text;
      ASSERT_LE(e.line(), lines.size()) << text;
      ASSERT_GE(e.column(), 1u) << text;
      // end-of-line errors point one past the last byte
      ASSERT_LE(e.column(), lines[e.line() - 1].size() + 1) << text << "\n" << e.what();
    }
  }
  EXPECT_GT(errors, 100);
}

}  // namespace
