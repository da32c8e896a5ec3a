#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "ruinlab/claims.hpp"

using namespace ruinlab;

namespace {

const JointClaimPMF H = JointClaimPMF::geometric_h();
const JointClaimPMF L = JointClaimPMF::geometric_l();
const JointClaimPMF M = JointClaimPMF::mixture(0.5, H, L);

TEST(Pmf, GeometricFamilies) {
  EXPECT_NEAR(H.pmf(0, 0), 1.0 / 6.0, 1e-15);
  EXPECT_EQ(H.pmf(2, 1), 0.0);
  EXPECT_NEAR(H.pmf(3, 3), (1.0 / 6.0) * std::pow(5.0 / 6.0, 3), 1e-15);
  EXPECT_NEAR(L.pmf(1, 0), 5.0 / 252.0, 1e-15);
  for (auto* d : {&H, &L, &M}) EXPECT_EQ(d->pmf(0, 3), 0.0);
}

TEST(Pmf, NegativeArgumentsAreDomainErrors) {
  EXPECT_THROW(H.pmf(-1, 0), std::domain_error);
  EXPECT_THROW(L.pmf(0, -2), std::domain_error);
  EXPECT_THROW(H.marginal_x(-1), std::domain_error);
  EXPECT_THROW(H.xi(-1, 2), std::domain_error);
}

TEST(Pmf, MixtureIsPointwiseLinear) {
  for (Amount x = 0; x < 30; ++x) {
    for (Amount y = 0; y < 30; ++y) {
      EXPECT_DOUBLE_EQ(M.pmf(x, y), 0.5 * H.pmf(x, y) + 0.5 * L.pmf(x, y));
    }
  }
}

TEST(Marginals, ClosedForms) {
  EXPECT_NEAR(H.marginal_x(3), 0.0964506, 1e-7);
  EXPECT_NEAR(L.marginal_y(0), 12.0 / 42.0, 1e-15);
  for (Amount y = 0; y < 40; ++y) {
    EXPECT_NEAR(M.marginal_y(y), 0.5 * H.marginal_y(y) + 0.5 * L.marginal_y(y), 1e-15);
  }
}

TEST(Marginals, AgreeWithJointRowSums) {
  for (auto* d : {&H, &L, &M}) {
    for (Amount x = 0; x <= 60; ++x) {
      double row = 0.0;
      for (Amount y = 0; y <= d->y_cutoff() + 50; ++y) row += d->pmf(x, y);
      EXPECT_NEAR(row, d->marginal_x(x), 1e-12) << "x=" << x;
    }
  }
}

TEST(Tails, TailX) {
  EXPECT_EQ(H.tail_x(-1), 1.0);
  for (Amount n = 0; n < 50; ++n) {
    EXPECT_NEAR(H.tail_x(n), std::pow(5.0 / 6.0, n + 1), 1e-14);
    EXPECT_LE(L.tail_x(n + 1), L.tail_x(n));
  }
}

TEST(Tails, RowTailMatchesDirectSum) {
  for (auto* d : {&H, &L, &M}) {
    for (Amount x = 1; x < 10; ++x) {
      for (Amount k = -1; k < 10; ++k) {
        double direct = 0.0;
        for (Amount y = k + 1; y <= k + 400; ++y) direct += d->pmf(x, y);
        EXPECT_NEAR(d->row_tail(x, k), direct, 1e-13);
      }
    }
  }
}

TEST(Xi, Examples) {
  EXPECT_EQ(H.xi(5, 0), 0.0);
  EXPECT_NEAR(H.xi(1, 1), 5.0 / 36.0, 1e-15);  // single term f(1,1)
  EXPECT_EQ(H.xi(1, 2), 0.0);  // f(1,2) is off the diagonal
  EXPECT_NEAR(H.xi(0, 2), (1.0 / 6.0) * (5.0 / 6.0), 1e-15);
}

TEST(Xi, TailSumIdentity) {
  for (auto* d : {&H, &L, &M}) {
    EXPECT_EQ(d->xi_tail_sum(0), 0.0);
    for (Amount n = 0; n <= 200; n += (n < 20 ? 1 : 15)) {
      double brute = 0.0;
      for (Amount y = 1; y <= d->y_cutoff() + n; ++y) brute += d->xi(y, n);
      const double v = d->xi_tail_sum(n);
      EXPECT_NEAR(v, brute, 10 * d->truncation_epsilon()) << "n=" << n;
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Normalisation, BoxHoldsAlmostAllMass) {
  for (auto* d : {&H, &L, &M}) {
    double total = 0.0;
    d->for_each_in_box([&](Amount, Amount, double p) { total += p; });
    // each axis may drop up to epsilon
    EXPECT_GE(total, 1.0 - 2 * d->truncation_epsilon());
    EXPECT_LE(total, 1.0 + 1e-12);
  }
}

TEST(Statistics, PublishedCorrelations) {
  const auto h = H.statistics();
  EXPECT_NEAR(h.mean_x, 5.0, 1e-9);
  EXPECT_NEAR(h.mean_y, 5.0, 1e-9);
  EXPECT_NEAR(*h.corr_xy, 1.0, 1e-9);
  EXPECT_NEAR(*h.corr_counts, 1.0, 1e-9);
  EXPECT_NEAR(*M.statistics().corr_xy, 0.5401, 1e-4);
  EXPECT_NEAR(*L.statistics().corr_xy, 0.1443, 1e-4);
  EXPECT_NEAR(*M.statistics().corr_counts, 0.8272, 1e-4);
  EXPECT_NEAR(*L.statistics().corr_counts, 0.7071, 1e-4);
}

TEST(Statistics, DegenerateVarianceGivesNoCorrelation) {
  const auto d = JointClaimPMF::table({{2, 0, 1.0}});
  const auto st = d.statistics();
  EXPECT_FALSE(st.corr_xy.has_value());
  EXPECT_FALSE(st.corr_counts.has_value());
}

TEST(Table, Validation) {
  EXPECT_THROW(JointClaimPMF::table({{0, 1, 0.5}, {1, 0, 0.5}}), std::invalid_argument);
  EXPECT_THROW(JointClaimPMF::table({{1, 1, 0.5}, {1, 1, 0.5}}), std::invalid_argument);
  EXPECT_THROW(JointClaimPMF::table({{1, 1, 0.5}, {2, 0, 0.4}}), std::invalid_argument);
  EXPECT_THROW(JointClaimPMF::table({{1, 1, -0.5}, {2, 0, 1.5}}), std::invalid_argument);
  EXPECT_THROW(JointClaimPMF::table({}), std::invalid_argument);
}

TEST(Table, Evaluation) {
  const auto d = JointClaimPMF::table({{0, 0, 0.25}, {3, 0, 0.25}, {3, 2, 0.5}});
  EXPECT_EQ(d.support_kind(), JointClaimPMF::SupportKind::FiniteTable);
  EXPECT_TRUE(d.has_finite_support());
  EXPECT_EQ(d.pmf(3, 2), 0.5);
  EXPECT_EQ(d.pmf(7, 7), 0.0);
  EXPECT_EQ(d.marginal_x(3), 0.75);
  EXPECT_EQ(d.marginal_y(2), 0.5);
  EXPECT_NEAR(d.tail_x(2), 0.75, 1e-15);
  EXPECT_NEAR(d.tail_y(0), 0.5, 1e-15);
  EXPECT_NEAR(d.row_tail(3, 0), 0.5, 1e-15);
  EXPECT_EQ(d.finite_support().size(), 3u);
  EXPECT_FALSE(H.has_finite_support());
}

}  // namespace
