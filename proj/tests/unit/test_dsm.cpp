#include <cmath>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "dsmis/dsm.hpp"
#include "dsmis/random.hpp"
#include "oracles.hpp"

using namespace dsmis;

namespace {

std::vector<Base> bases(const char* s) {
  const Sequence seq = Sequence::parse(s);
  return {seq.bases().begin(), seq.bases().end()};
}

std::string random_dna(Rng& rng, std::size_t n) {
  std::string s(n, 'A');
  for (auto& c : s) c = "ACGT"[rng() % 4];
  return s;
}

}  // namespace

TEST(ContextMultiplier, NoCgNeighbours) {
  const DsmModel cpg = make_cpg_model({0.5, 1.0});
  const Sequence seq = Sequence::parse("TCAT");
  for (Base b : {0, 2, 3}) EXPECT_EQ(context_multiplier(cpg, seq, 1, b), 1.0);
}

TEST(ContextMultiplier, CFollowedByG) {
  const DsmModel cpg = make_cpg_model({0.3, 1.0});
  const Sequence seq = Sequence::parse("ACGA");
  EXPECT_DOUBLE_EQ(context_multiplier(cpg, seq, 1, 0), 0.3);
  EXPECT_DOUBLE_EQ(context_multiplier(cpg, seq, 2, 3), 0.3);
  EXPECT_EQ(context_multiplier(cpg, seq, 0, 1), 1.0);
}

TEST(ContextMultiplier, UnitLambdaIsNeutral) {
  const DsmModel cpg = make_cpg_model({1.0, 1.0});
  Rng rng = make_stream(1, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const Sequence seq = Sequence::parse(random_dna(rng, 12));
    for (std::size_t i = 0; i < 12; ++i)
      for (Base b = 0; b < 4; ++b)
        if (b != seq[i]) {
          EXPECT_EQ(context_multiplier(cpg, seq, i, b), 1.0);
        }
  }
}

TEST(ContextMultiplier, ProposedBaseMustDiffer) {
  const DsmModel cpg = make_cpg_model({0.5, 1.0});
  EXPECT_THROW(context_multiplier(cpg, Sequence::parse("ACGT"), 1, 1), std::invalid_argument);
}

TEST(TotalRate, UnitLambdaIsLength) {
  const DsmModel cpg = make_cpg_model({1.0, 1.0});
  Rng rng = make_stream(2, 0);
  for (std::size_t n : {3u, 10u, 57u})
    EXPECT_NEAR(total_rate(cpg, Sequence::parse(random_dna(rng, n))), double(n), 1e-12);
}

TEST(TotalRate, OneCgPair) {
  const DsmModel cpg = make_cpg_model({2.0, 1.0});
  EXPECT_NEAR(total_rate(cpg, Sequence::parse("ACGT")), 6.0, 1e-14);
}

TEST(TotalRate, MatchesScanAndBounds) {
  Rng rng = make_stream(3, 0);
  for (double lambda : {0.25, 0.5, 2.0, 7.0}) {
    const DsmModel cpg = make_cpg_model({lambda, 1.3});
    for (int rep = 0; rep < 100; ++rep) {
      const std::string s = random_dna(rng, 30);
      const double total = total_rate(cpg, Sequence::parse(s));
      EXPECT_NEAR(total, oracle::cpg_total_rate(s, lambda, 1.3), 1e-12);
      EXPECT_GE(total, 30 * 1.3 * std::min(1.0, lambda * lambda) - 1e-12);
      EXPECT_LE(total, 30 * 1.3 * std::max(1.0, lambda * lambda) + 1e-12);
    }
  }
}

TEST(TotalRateDelta, CreatingCg) {
  const DsmModel cpg = make_cpg_model({2.0, 1.0});
  auto state = bases("ACAT");
  EXPECT_NEAR(total_rate_delta(cpg, state, {0.1, 2, 2}), 2.0, 1e-14);
  EXPECT_EQ(Sequence(state, 4).str(), "ACGT");
}

TEST(TotalRateDelta, UnitLambdaIsZero) {
  const DsmModel cpg = make_cpg_model({1.0, 1.0});
  Rng rng = make_stream(4, 0);
  auto state = bases(random_dna(rng, 20).c_str());
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t i = rng() % 20;
    const Base b = static_cast<Base>((state[i] + 1 + rng() % 3) % 4);
    EXPECT_EQ(total_rate_delta(cpg, state, {0.5, i, b}), 0.0);
  }
}

TEST(TotalRateDelta, RunningTotalMatchesRescan) {
  const DsmModel cpg = make_cpg_model({0.37, 1.0});
  Rng rng = make_stream(5, 0);
  auto state = bases(random_dna(rng, 25).c_str());
  double running = total_rate(cpg, Sequence(state, 4));
  const double bound = 2.0 * std::abs(1.0 - 0.37);
  for (int rep = 0; rep < 10000; ++rep) {
    const std::size_t i = rng() % state.size();
    const Base b = static_cast<Base>((state[i] + 1 + rng() % 3) % 4);
    const double d = total_rate_delta(cpg, state, {0.5, i, b});
    EXPECT_LE(std::abs(d), bound + 1e-12);
    running += d;
    const double fresh = total_rate(cpg, Sequence(state, 4));
    ASSERT_LE(std::abs(running - fresh), 1e-9 * fresh);
  }
}

TEST(TotalRateDelta, ExponentBoundOverManyJumps) {
  for (double lambda : {0.5, 3.0}) {
    const DsmModel cpg = make_cpg_model({lambda, 1.0});
    Rng rng = make_stream(6, 0);
    auto state = bases(random_dna(rng, 40).c_str());
    const double bound = 2.0 * std::abs(1.0 - lambda) + 1e-12;
    for (int rep = 0; rep < 100000; ++rep) {
      const std::size_t i = rng() % state.size();
      const Base b = static_cast<Base>((state[i] + 1 + rng() % 3) % 4);
      ASSERT_LE(std::abs(total_rate_delta(cpg, state, {0.5, i, b})), bound);
    }
  }
}

TEST(DsmDensity, EmptyPath) {
  const DsmModel cpg = make_cpg_model({0.5, 1.0});
  const SequencePair p(Sequence::parse("ACGTT"), Sequence::parse("ACGTT"));
  const double expected = -0.4 * oracle::cpg_total_rate("ACGTT", 0.5);
  EXPECT_NEAR(dsm_path_log_density(cpg, Path(0.4), p, 0.4), expected, 1e-14);
}

TEST(DsmDensity, SingleJump) {
  const double lambda = 0.5, t = 0.15, T = 0.6;
  const DsmModel cpg = make_cpg_model({lambda, 1.0});
  // C at site 1 is in a CG pair; mutating it to T removes the pair.
  const SequencePair p(Sequence::parse("ACGA"), Sequence::parse("ATGA"));
  const double expected = std::log(lambda / 3.0) - t * oracle::cpg_total_rate("ACGA", lambda) -
                          (T - t) * oracle::cpg_total_rate("ATGA", lambda);
  EXPECT_NEAR(dsm_path_log_density(cpg, Path({{t, 1, 3}}, T), p, T), expected, 1e-14);
}

TEST(DsmDensity, UnitLambdaEqualsIsmBitForBit) {
  const DsmModel cpg = make_cpg_model({1.0, 1.0});
  const SequencePair p(Sequence::parse("TTCATTCATT"), Sequence::parse("TTTGTTTGTT"));
  Rng rng = make_stream(7, 0);
  for (int rep = 0; rep < 2000; ++rep) {
    const Path path = sample_joint_path(cpg.ism(), p, 0.5, rng);
    EXPECT_EQ(dsm_path_log_density(cpg, path, p, 0.5),
              ism_path_log_density(cpg.ism(), path, p, 0.5));
  }
}

TEST(DsmDensity, TimeShiftFromNeutralStart) {
  // The start has no CG, so extra waiting there costs the same under both
  // models and the weight is unchanged.
  const DsmModel cpg = make_cpg_model({0.5, 1.0});
  const SequencePair p(Sequence::parse("TTCATT"), Sequence::parse("TTTGTT"));
  const Path path({{0.05, 2, 3}, {0.12, 3, 2}}, 0.2);
  const Path shifted({{0.35, 2, 3}, {0.42, 3, 2}}, 0.5);
  const auto a = path_log_densities(cpg, path, p, 0.2);
  const auto b = path_log_densities(cpg, shifted, p, 0.5);
  EXPECT_NEAR(a.dsm - a.ism, b.dsm - b.ism, 1e-14);
}

TEST(CpgModel, MultiplierValues) {
  const DsmModel cpg = make_cpg_model({0.5, 1.0});
  EXPECT_EQ(cpg.context().k(), 2u);
  EXPECT_EQ(cpg.context().phi_min(), 0.25);
  EXPECT_EQ(cpg.context().phi_max(), 1.0);
  std::set<double> seen;
  Rng rng = make_stream(8, 0);
  for (int rep = 0; rep < 2000; ++rep) {
    const auto s = bases(random_dna(rng, 8).c_str());
    for (std::size_t i = 0; i < s.size(); ++i)
      for (Base b = 0; b < 4; ++b)
        if (b != s[i]) seen.insert(cpg.context().at(s, i, b));
  }
  // The current base cannot close a CG on both sides, so lambda^2 is never
  // attained; the declared lower bound still is lambda^2.
  EXPECT_EQ(seen, (std::set<double>{0.5, 1.0}));
}

TEST(CpgModel, BoundsForLargeLambda) {
  const DsmModel cpg = make_cpg_model({3.0, 1.0});
  EXPECT_EQ(cpg.context().phi_min(), 1.0);
  EXPECT_EQ(cpg.context().phi_max(), 9.0);
}

TEST(CpgModel, Locality) {
  const DsmModel cpg = make_cpg_model({0.5, 1.0});
  Rng rng = make_stream(9, 0);
  for (int rep = 0; rep < 500; ++rep) {
    auto a = bases(random_dna(rng, 9).c_str());
    auto b = bases(random_dna(rng, 9).c_str());
    for (std::size_t j = 3; j <= 5; ++j) b[j] = a[j];
    for (Base p = 0; p < 4; ++p)
      if (p != a[4]) {
        EXPECT_EQ(cpg.context().at(a, 4, p), cpg.context().at(b, 4, p));
      }
  }
}

TEST(CpgModel, RejectsBadLambda) {
  EXPECT_THROW(make_cpg_model({0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(make_cpg_model({-1.0, 1.0}), std::invalid_argument);
}

TEST(ContextModel, OutOfBoundsMultiplierRejected) {
  auto fn = [](Base, std::span<const int> w) { return w[1] == 0 ? 5.0 : 1.0; };
  EXPECT_THROW(ContextModel(4, 2, fn, 1.0, 2.0), std::invalid_argument);
  EXPECT_NO_THROW(ContextModel(4, 2, fn, 1.0, 5.0));
}

TEST(ContextModel, OddWidthRejected) {
  auto fn = [](Base, std::span<const int>) { return 1.0; };
  EXPECT_THROW(ContextModel(4, 1, fn, 1.0, 1.0), std::invalid_argument);
}

TEST(ContextModel, BoundaryWindowsMarkAbsent) {
  auto fn = [](Base, std::span<const int> w) {
    return (w[0] == ContextModel::kAbsent || w[4] == ContextModel::kAbsent) ? 2.0 : 1.0;
  };
  const ContextModel ctx(4, 4, fn, 1.0, 2.0);
  const auto s = bases("ACGTACG");
  EXPECT_EQ(ctx.at(s, 0, 1), 2.0);
  EXPECT_EQ(ctx.at(s, 1, 0), 2.0);
  EXPECT_EQ(ctx.at(s, 3, 0), 1.0);
  EXPECT_EQ(ctx.at(s, 6, 0), 2.0);
}

TEST(DsmModel, LengthChecks) {
  const DsmModel cpg = make_cpg_model({0.5, 1.0});
  EXPECT_THROW(cpg.check_length(2), std::invalid_argument);
  EXPECT_NO_THROW(cpg.check_length(3));
}

TEST(DsmModel, LongDoubleAgrees) {
  const DsmModel cpg = make_cpg_model({0.2, 1.0});
  const SequencePair p(Sequence::parse("TTCATTCATTCATT"), Sequence::parse("TTTGTTTGTTTGTT"));
  Rng rng = make_stream(10, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const Path path = sample_joint_path(cpg.ism(), p, 0.3, rng);
    const double d = dsm_path_log_density(cpg, path, p, 0.3);
    const long double l = dsm_path_log_density<long double>(cpg, path, p, 0.3);
    EXPECT_NEAR(d, static_cast<double>(l), 1e-11);
  }
}
