#include <gtest/gtest.h>

#include <cmath>

#include "betareg/links.hpp"
#include "betareg/random.hpp"

using namespace betareg;

namespace {

constexpr LinkKind kAll[] = {LinkKind::logit, LinkKind::loglog, LinkKind::log, LinkKind::sqrt,
                             LinkKind::identity};

double draw_in_domain(LinkKind k, RandomStream& rs) {
  if (is_mean_link(k)) return rs.uniform(1e-4, 1 - 1e-4);
  return rs.uniform(1e-3, 500.0);
}

}  // namespace

TEST(Links, NamesRoundTrip) {
  for (LinkKind k : kAll) EXPECT_EQ(parse_link(link_name(k)), k);
  EXPECT_THROW(parse_link("probit"), UsageError);
}

TEST(Links, Families) {
  EXPECT_TRUE(is_mean_link(LinkKind::logit));
  EXPECT_TRUE(is_mean_link(LinkKind::loglog));
  EXPECT_TRUE(is_precision_link(LinkKind::log));
  EXPECT_TRUE(is_precision_link(LinkKind::sqrt));
  EXPECT_TRUE(is_precision_link(LinkKind::identity));
  EXPECT_FALSE(is_precision_link(LinkKind::logit));
}

TEST(Links, KnownValues) {
  EXPECT_DOUBLE_EQ(link_value(LinkKind::logit, 0.5), 0.0);
  EXPECT_NEAR(link_value(LinkKind::loglog, std::exp(-1.0)), 0.0, 1e-15);
  EXPECT_NEAR(link_value(LinkKind::logit, 0.88), std::log(0.88 / 0.12), 1e-14);
  EXPECT_NEAR(link_value(LinkKind::logit, 0.88), 1.9924301646902063, 1e-14);
  EXPECT_DOUBLE_EQ(link_inverse(LinkKind::logit, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(link_inverse(LinkKind::log, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(link_deriv(LinkKind::logit, 0.5), 4.0);
  EXPECT_DOUBLE_EQ(link_deriv(LinkKind::log, 2.0), 0.5);
}

TEST(Links, DomainErrors) {
  EXPECT_THROW(link_value(LinkKind::logit, 0.0), DomainError);
  EXPECT_THROW(link_value(LinkKind::logit, 1.0), DomainError);
  EXPECT_THROW(link_value(LinkKind::loglog, 1.5), DomainError);
  EXPECT_THROW(link_value(LinkKind::log, 0.0), DomainError);
  EXPECT_THROW(link_value(LinkKind::sqrt, -1.0), DomainError);
  EXPECT_THROW(link_inverse(LinkKind::sqrt, -0.1), DomainError);
  EXPECT_THROW(link_deriv(LinkKind::logit, 1.0), DomainError);
}

TEST(Links, RoundTrip) {
  RandomStream rs(11);
  for (LinkKind k : kAll)
    for (int i = 0; i < 1000; ++i) {
      const double m = draw_in_domain(k, rs);
      EXPECT_NEAR(link_inverse(k, link_value(k, m)), m, 1e-12 * std::max(1.0, m))
          << link_name(k) << " m=" << m;
    }
}

TEST(Links, DerivativeMatchesFiniteDifference) {
  RandomStream rs(12);
  for (LinkKind k : kAll)
    for (int i = 0; i < 500; ++i) {
      double m = draw_in_domain(k, rs);
      if (is_mean_link(k)) m = std::clamp(m, 0.01, 0.99);
      const double h = 1e-6 * std::max(1.0, m);
      const double fd = (link_value(k, m + h) - link_value(k, m - h)) / (2 * h);
      const double an = link_deriv(k, m);
      EXPECT_NEAR(an, fd, 1e-7 * std::max(1.0, std::abs(an))) << link_name(k) << " m=" << m;
    }
}

TEST(Links, StrictlyIncreasingWithPositiveDerivative) {
  for (LinkKind k : kAll) {
    const double lo = is_mean_link(k) ? 0.001 : 0.01;
    const double hi = is_mean_link(k) ? 0.999 : 100.0;
    double prev = link_value(k, lo);
    for (int i = 1; i <= 200; ++i) {
      const double m = lo + (hi - lo) * i / 200.0;
      const double v = link_value(k, m);
      EXPECT_GT(v, prev) << link_name(k);
      EXPECT_GT(link_deriv(k, m), 0.0) << link_name(k);
      prev = v;
    }
  }
}

TEST(Links, LogitInverseStableForLargeArguments) {
  EXPECT_GT(link_inverse(LinkKind::logit, -700.0), 0.0);
  EXPECT_LE(link_inverse(LinkKind::logit, 700.0), 1.0);
  EXPECT_FALSE(std::isnan(link_inverse(LinkKind::logit, -1e4)));
}
