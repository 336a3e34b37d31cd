#include "leaf/core.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace leaf;

namespace {

Transition make_transition(double tag, Eigen::Index action_dim = 2, Eigen::Index latent_dim = 2) {
  Transition t;
  t.s = {tag, 0.0};
  t.a = Vec::Constant(action_dim, tag);
  t.s_next = {tag, 1.0};
  t.goal = LatentState(Vec::Zero(latent_dim));
  t.step_index = 1;
  return t;
}

}  // namespace

TEST(ReplayBuffer, PushCountsUp) {
  ReplayBuffer buf(2, 2, 2);
  buf.push(make_transition(1));
  EXPECT_EQ(buf.size(), 1u);
}

TEST(ReplayBuffer, EvictsOldestFirst) {
  ReplayBuffer buf(2, 2, 2);
  buf.push(make_transition(1));
  buf.push(make_transition(2));
  buf.push(make_transition(3));
  ASSERT_EQ(buf.size(), 2u);
  EXPECT_EQ(buf.at(0).s.x, 2.0);
  EXPECT_EQ(buf.at(1).s.x, 3.0);
}

TEST(ReplayBuffer, RejectsWrongActionDim) {
  ReplayBuffer buf(2, 2, 2);
  EXPECT_THROW(buf.push(make_transition(1, 3)), InvalidArgument);
  EXPECT_THROW(buf.push(make_transition(1, 2, 3)), InvalidArgument);
  auto t = make_transition(1);
  t.step_index = 0;
  EXPECT_THROW(buf.push(t), InvalidArgument);
}

TEST(ReplayBuffer, SingleElementSample) {
  ReplayBuffer buf(4, 2, 2);
  buf.push(make_transition(7));
  Rng rng(1);
  const auto batch = buf.sample(3, rng);
  ASSERT_EQ(batch.size(), 3u);
  for (const auto& t : batch) EXPECT_EQ(t.s.x, 7.0);
}

TEST(ReplayBuffer, SampleIsDeterministicUnderSeed) {
  ReplayBuffer buf(1000, 2, 2);
  for (int i = 0; i < 1000; ++i) buf.push(make_transition(i));
  Rng a(42), b(42);
  const auto x = buf.sample(128, a);
  const auto y = buf.sample(128, b);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i].s.x, y[i].s.x);
}

TEST(ReplayBuffer, SampleErrors) {
  ReplayBuffer buf(4, 2, 2);
  Rng rng(0);
  EXPECT_THROW((void)buf.sample(1, rng), NotReady);
  buf.push(make_transition(1));
  EXPECT_THROW((void)buf.sample(0, rng), InvalidArgument);
}

TEST(ReplayBuffer, FifoPropertyAfterOverflow) {
  for (std::size_t cap : {1u, 3u, 10u}) {
    for (int m : {1, 5, 17}) {
      ReplayBuffer buf(cap, 2, 2);
      const int total = static_cast<int>(cap) + m;
      for (int i = 0; i < total; ++i) buf.push(make_transition(i));
      ASSERT_EQ(buf.size(), cap);
      std::set<double> present;
      for (std::size_t i = 0; i < buf.size(); ++i) present.insert(buf.at(i).s.x);
      for (int i = 0; i < m; ++i) EXPECT_FALSE(present.count(i)) << "cap=" << cap << " m=" << m;
    }
  }
}

TEST(ReplayBuffer, ReplayedOperationsAreBitIdentical) {
  auto run = [] {
    Rng rng(9);
    ReplayBuffer buf(50, 2, 2);
    std::vector<double> trace;
    for (int i = 0; i < 200; ++i) {
      buf.push(make_transition(rng.uniform()));
      for (const auto& t : buf.sample(3, rng)) trace.push_back(t.s.x);
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}

TEST(Rng, SameSeedSameStream) {
  Rng a(123), b(123), c(124);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformRangeAndMoments) {
  Rng rng(5);
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 3 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12, 0.002);
}

TEST(Rng, NormalMoments) {
  Rng rng(6);
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 3 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, IntegerRanges) {
  Rng rng(7);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const int v = rng.uniform_int(3, 7);
    ASSERT_GE(v, 3);
    ASSERT_LE(v, 7);
    ++hits[static_cast<std::size_t>(v - 3)];
  }
  for (int h : hits) EXPECT_GT(h, 800);
  EXPECT_THROW(rng.index(0), InvalidArgument);
  EXPECT_THROW(rng.uniform_int(2, 1), InvalidArgument);
}

TEST(Rng, ForksAreIndependentOfParentPosition) {
  Rng a(11), b(11);
  for (int i = 0; i < 10; ++i) (void)b.next_u64();
  Rng fa = a.fork(3), fb = b.fork(3), other = a.fork(4);
  EXPECT_EQ(fa.next_u64(), fb.next_u64());
  EXPECT_NE(a.fork(3).next_u64(), other.next_u64());
}

TEST(LatentState, DistanceAndDimensionCheck) {
  EXPECT_DOUBLE_EQ(latent_distance({0, 0}, {3, 4}), 5.0);
  EXPECT_THROW((void)latent_distance({0, 0}, {0, 0, 0}), InvalidArgument);
  EXPECT_TRUE(LatentState({1, 2}).finite());
  EXPECT_FALSE(LatentState({1, std::nan("")}).finite());
}
