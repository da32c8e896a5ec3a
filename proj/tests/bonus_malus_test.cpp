#include <stdexcept>

#include <gtest/gtest.h>

#include "ruinlab/bonus_malus.hpp"
#include "ruinlab/experiments.hpp"

using namespace ruinlab;

namespace {

const ScenarioCatalog& cat() { return ScenarioCatalog::standard(); }

TEST(Scale, Validation) {
  EXPECT_THROW(PremiumScale(std::vector<Amount>{}), std::invalid_argument);
  EXPECT_THROW(PremiumScale(std::vector<Amount>{3, 3}), std::invalid_argument);
  EXPECT_THROW(PremiumScale(std::vector<Amount>{0, 3}), std::invalid_argument);
  const PremiumScale s(std::vector<Amount>{11, 12, 14, 16, 18});
  EXPECT_EQ(s.premium(3), 14);
  EXPECT_EQ(s.max_premium(), 18);
  EXPECT_THROW(s.premium(6), std::domain_error);
}

TEST(Rules, ThresholdExamples) {
  const auto r = RuleSet::threshold(3, 14, 5);
  EXPECT_EQ(rule_apply(r, 3, 2), 2);
  EXPECT_EQ(rule_apply(r, 1, 0), 1);
  EXPECT_EQ(rule_apply(r, 5, 20), 5);
  EXPECT_EQ(rule_apply(r, 3, 14), 3);
  EXPECT_EQ(rule_apply(r, 3, 15), 4);
  EXPECT_THROW(rule_apply(r, 0, 1), std::domain_error);
  EXPECT_THROW(rule_apply(r, 6, 1), std::domain_error);
  EXPECT_EQ(r.saturation(), 15);
}

TEST(Rules, ThresholdMovesAtMostOneLevel) {
  const auto r = RuleSet::threshold(3, 14, 5);
  for (LevelIndex i = 1; i <= 5; ++i) {
    for (Amount s = 0; s < 40; ++s) EXPECT_LE(std::abs(r.apply(i, s) - i), 1);
  }
}

TEST(Rules, TableRuleValidation) {
  // two levels: trigger 0 goes to 1, anything else to 2
  const auto ok = RuleSet::table({{1, 0, 0, 1}, {1, 1, std::nullopt, 2}, {2, 0, 0, 1}, {2, 1, std::nullopt, 2}}, 2);
  EXPECT_EQ(ok.apply(2, 0), 1);
  EXPECT_EQ(ok.apply(1, 9), 2);
  // gap at trigger 1 for level 1
  EXPECT_THROW(RuleSet::table({{1, 0, 0, 1}, {1, 2, std::nullopt, 2}, {2, 0, std::nullopt, 2}}, 2),
               std::invalid_argument);
  // level 2 never reaches an open-ended range
  EXPECT_THROW(RuleSet::table({{1, 0, std::nullopt, 1}, {2, 0, 5, 2}}, 2), std::invalid_argument);
}

TEST(Matrix, AggregateExamples) {
  const auto h = transition_matrix(cat().distribution('H'), cat().rules_for(Principle::AggregateReported),
                                   Principle::AggregateReported);
  EXPECT_NEAR(h(0, 0), 0.76743, 5e-6);
  EXPECT_NEAR(h(0, 1), 0.23257, 5e-6);
  EXPECT_NEAR(h(1, 0), 0.30556, 5e-6);
  const auto l = transition_matrix(cat().distribution('L'), cat().rules_for(Principle::AggregateReported),
                                   Principle::AggregateReported);
  EXPECT_NEAR(l(4, 3), 0.26258, 5e-6);
  EXPECT_NEAR(l(4, 4), 0.73742, 5e-6);
}

TEST(Matrix, CountExample) {
  const auto h = transition_matrix(cat().distribution('H'), cat().rules_for(Principle::ReportedCount),
                                   Principle::ReportedCount);
  const double row3[] = {0, 1.0 / 6.0, 0, 5.0 / 6.0, 0};
  for (int j = 0; j < 5; ++j) EXPECT_NEAR(h(2, j), row3[j], 1e-14);
}

TEST(Matrix, RowsSumToOneAndAreTridiagonal) {
  for (Principle p : {Principle::AggregateReported, Principle::ReportedCount}) {
    for (char f : {'H', 'M', 'L'}) {
      const auto m = transition_matrix(cat().distribution(f), cat().rules_for(p), p);
      for (int i = 0; i < 5; ++i) {
        EXPECT_NEAR(m.row(i).sum(), 1.0, 1e-10);
        for (int j = 0; j < 5; ++j) {
          EXPECT_GE(m(i, j), 0.0);
          if (std::abs(i - j) > 1) EXPECT_EQ(m(i, j), 0.0);
        }
      }
    }
  }
}

TEST(Matrix, SettledTriggersAreRejected) {
  for (Principle p : {Principle::AggregateSettled, Principle::SettledCount}) {
    try {
      transition_matrix(cat().distribution('H'), cat().rules_for(p), p);
      FAIL() << "expected rejection";
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find("homogeneous"), std::string::npos) << e.what();
    }
  }
}

TEST(Stationary, Examples) {
  const auto ph = transition_matrix(cat().distribution('H'), cat().rules_for(Principle::AggregateReported),
                                    Principle::AggregateReported);
  const auto pi = stationary_distribution(ph);
  const double expect[] = {0.32082, 0.24419, 0.18586, 0.14146, 0.10767};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(pi(i), expect[i], 5e-6);
  EXPECT_NEAR(pi.sum(), 1.0, 1e-12);
  EXPECT_LT((pi.transpose() * ph - pi.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(expected_premium(pi, cat().scale()), 13.26, 0.005);

  const auto pl = transition_matrix(cat().distribution('L'), cat().rules_for(Principle::ReportedCount),
                                    Principle::ReportedCount);
  const auto pil = stationary_distribution(pl);
  const double expect_l[] = {0.00227, 0.00975, 0.04177, 0.17901, 0.76720};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(pil(i), expect_l[i], 5e-6);
}

TEST(Stationary, PermutationMatrixGivesUniform) {
  Matrix p = Matrix::Zero(4, 4);
  p(0, 1) = p(1, 2) = p(2, 3) = p(3, 0) = 1.0;
  const auto pi = stationary_distribution(p);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(pi(i), 0.25, 1e-14);
}

TEST(Stationary, ReducibleAndMalformedInputsFail) {
  Matrix p = Matrix::Identity(3, 3);
  EXPECT_THROW(stationary_distribution(p), std::invalid_argument);
  Matrix q(2, 2);
  q << 0.5, 0.6, 0.5, 0.5;
  EXPECT_THROW(stationary_distribution(q), std::invalid_argument);
  EXPECT_THROW(stationary_distribution(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST(Premium, Examples) {
  Vector e3 = Vector::Zero(5);
  e3(2) = 1.0;
  EXPECT_EQ(expected_premium(e3, cat().scale()), 14.0);
  EXPECT_THROW(expected_premium(Vector::Zero(3), cat().scale()), std::domain_error);
}

}  // namespace
