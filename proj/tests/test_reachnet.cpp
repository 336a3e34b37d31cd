#include "leaf/reachnet.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace leaf;
using namespace leaf::reach;

namespace {

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t m = i; m <= j; ++m) r[idx[m]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<LabeledPair> sample_batch(const std::vector<LabeledPair>& pool, std::size_t n, Rng& rng) {
  std::vector<LabeledPair> b;
  for (std::size_t i = 0; i < n; ++i) b.push_back(pool[rng.index(pool.size())]);
  return b;
}

ReachNet trained_on_synthetic(int steps, int k_max, std::uint64_t seed) {
  Rng rng(seed);
  ReachNet net(2, k_max, rng);
  ReachOptimizer opt;
  for (int s = 0; s < steps; ++s) train_on_batch(net, leaf::testing::synthetic_pairs(128, k_max, 4.0, rng), opt);
  return net;
}

}  // namespace

TEST(LabelPair, Examples) {
  EXPECT_EQ(label_pair(4, 5), Label::Reachable);
  EXPECT_EQ(label_pair(7, 5, 1.3), Label::Unreachable);
  EXPECT_EQ(label_pair(6, 5, 1.3), Label::Skip);
}

TEST(LabelPair, LiteralConvention) {
  const auto lit = LabelConvention::PaperLiteral;
  EXPECT_EQ(label_pair(7, 5, 1.3, lit), Label::Reachable);
  EXPECT_EQ(label_pair(4, 5, 1.3, lit), Label::Unreachable);
  EXPECT_EQ(label_pair(6, 5, 1.3, lit), Label::Skip);
}

TEST(LabelPair, Preconditions) {
  EXPECT_THROW((void)label_pair(0, 5), InvalidArgument);
  EXPECT_THROW((void)label_pair(1, 0), InvalidArgument);
  EXPECT_THROW((void)label_pair(1, 1, 1.0), InvalidArgument);
}

TEST(LabelPair, MonotonicityAndPartition) {
  for (double alpha : {1.1, 1.3, 2.0}) {
    for (int gap = 1; gap <= 60; ++gap) {
      for (int k = 1; k <= 60; ++k) {
        const Label l = label_pair(gap, k, alpha);
        // Exactly one outcome, matching the defining inequalities.
        const bool pos = gap <= k, neg = gap >= alpha * k;
        ASSERT_FALSE(pos && neg);
        ASSERT_EQ(l, pos ? Label::Reachable : neg ? Label::Unreachable : Label::Skip);
        if (l == Label::Reachable)
          for (int k2 = k; k2 <= 80; ++k2) ASSERT_EQ(label_pair(gap, k2, alpha), Label::Reachable);
        if (l == Label::Unreachable)
          for (int k2 = 1; k2 <= k; ++k2)
            if (gap >= alpha * k2) ASSERT_EQ(label_pair(gap, k2, alpha), Label::Unreachable);
      }
    }
  }
}

TEST(AppendEpisodePairs, Combinatorics) {
  auto lat = [](int n) {
    std::vector<LatentState> v;
    for (int i = 0; i < n; ++i) v.push_back({static_cast<double>(i), 0.0});
    return v;
  };
  ReachDataset d4;
  append_episode_pairs(d4, lat(4));
  ASSERT_EQ(d4.size(), 6u);
  std::vector<int> gaps;
  for (std::size_t i = 0; i < d4.size(); ++i) {
    gaps.push_back(d4[i].gap);
    EXPECT_EQ(d4[i].z_j.z[0] - d4[i].z_i.z[0], d4[i].gap);
  }
  std::sort(gaps.begin(), gaps.end());
  EXPECT_EQ(gaps, (std::vector<int>{1, 1, 1, 2, 2, 3}));
  ReachDataset d2, d1;
  append_episode_pairs(d2, lat(2));
  ASSERT_EQ(d2.size(), 1u);
  EXPECT_EQ(d2[0].gap, 1);
  append_episode_pairs(d1, lat(1));
  EXPECT_EQ(d1.size(), 0u);
  ReachDataset d10;
  append_episode_pairs(d10, lat(10));
  EXPECT_EQ(d10.size(), 45u);
}

TEST(ReachDataset, FifoCapacity) {
  ReachDataset d(3);
  for (int i = 1; i <= 5; ++i) d.add({LatentState{1.0 * i, 0}, LatentState{0, 0}, i});
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0].gap, 3);
  EXPECT_THROW(d.add({LatentState{0, 0}, LatentState{0, 0, 0}, 1}), InvalidArgument);
}

TEST(MakeTrainingBatch, SinglePositiveSampleFlagsBalanceCap) {
  ReachDataset d;
  d.add({LatentState{0, 0}, LatentState{1, 0}, 1});
  Rng rng(1);
  BatchOptions opt;
  opt.batch_size = 10;
  opt.k_max = 1;
  const auto b = make_training_batch(d, opt, rng);
  EXPECT_TRUE(b.balance_cap_reached);
  EXPECT_EQ(b.records.size(), b.positives());
  EXPECT_EQ(b.records.size(), 6u);  // ceil(0.6 * 10) positives, then no negatives exist
}

TEST(MakeTrainingBatch, LargeGapWithSmallKIsNegative) {
  EXPECT_EQ(label_pair(10, 2, 1.3), Label::Unreachable);
  ReachDataset d;
  d.add({LatentState{0, 0}, LatentState{1, 0}, 10});
  Rng rng(2);
  BatchOptions opt;
  opt.batch_size = 20;
  opt.k_max = 7;  // 10 >= 1.3 k for every k <= 7
  const auto b = make_training_batch(d, opt, rng);
  for (const auto& r : b.records) {
    EXPECT_EQ(r.label, 0);
    EXPECT_EQ(r.gap, 10);
  }
}

TEST(MakeTrainingBatch, MixedDatasetEmitsBothClassesWithinBalance) {
  ReachDataset d;
  Rng rng(3);
  for (int g = 1; g <= 40; ++g) d.add({LatentState{0, 0}, LatentState{g * 0.1, 0}, g});
  BatchOptions opt;
  opt.k_max = 20;
  std::size_t pos = 0, total = 0;
  for (int i = 0; i < 80; ++i) {  // > 10 000 draws
    const auto b = make_training_batch(d, opt, rng);
    EXPECT_EQ(b.records.size(), opt.batch_size);
    EXPECT_LE(b.positives(), 77u);
    EXPECT_GE(b.positives(), opt.batch_size - 77u);
    for (const auto& r : b.records) {
      EXPECT_NE(label_pair(r.gap, r.k, opt.alpha), Label::Skip);
      EXPECT_EQ(r.label, label_pair(r.gap, r.k, opt.alpha) == Label::Reachable ? 1 : 0);
    }
    pos += b.positives();
    total += b.records.size();
  }
  EXPECT_GT(pos, 0u);
  EXPECT_LT(pos, total);
}

TEST(MakeTrainingBatch, EmptyDatasetErrors) {
  ReachDataset d;
  Rng rng(0);
  EXPECT_THROW((void)make_training_batch(d, {}, rng), NotReady);
}

TEST(ReachForward, ZeroDecoderGivesHalf) {
  Rng rng(4);
  ReachNet net(2, 10, rng);
  for (std::size_t l = 0; l < net.decoder().num_layers(); ++l) {
    net.decoder().weight(l).setZero();
    net.decoder().bias(l).setZero();
  }
  EXPECT_EQ(net.reach_forward({0.1, 0.2}, {0.5, -0.3}, 3), 0.5);
}

TEST(ReachForward, OpenUnitIntervalAndErrors) {
  Rng rng(5);
  ReachNet net(2, 10, rng);
  for (int i = 0; i < 1000; ++i) {
    const double s = net.reach_forward(LatentState(rng.normal_vec(2)), LatentState(rng.normal_vec(2)),
                                       rng.uniform_int(1, 10));
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
  EXPECT_THROW((void)net.reach_forward({0, 0}, {0, 0, 0}, 1), InvalidArgument);
  EXPECT_THROW((void)net.reach_forward({0, 0}, {0, 0}, 0), InvalidArgument);
}

TEST(ReachForward, GridMatchesPointwiseScores) {
  Rng rng(6);
  ReachNet net(2, 12, rng);
  const LatentState z0{0.2, -0.4};
  std::vector<LatentState> zs;
  for (int i = 0; i < 7; ++i) zs.emplace_back(Vec(rng.normal_vec(2)));
  const Mat g = net.score_grid(z0, zs, 12);
  for (int k = 1; k <= 12; ++k)
    for (std::size_t i = 0; i < zs.size(); ++i)
      EXPECT_NEAR(g(static_cast<Eigen::Index>(i), k - 1), net.reach_forward(z0, zs[i], k), 1e-12);
}

TEST(ReachTraining, SyntheticHeldOutAccuracy) {
  const int k_max = 12;
  ReachNet net = trained_on_synthetic(5000, k_max, 7);
  Rng test_rng(1007);
  EXPECT_GE(accuracy(net, leaf::testing::synthetic_pairs(4000, k_max, 4.0, test_rng)), 0.95);
}

TEST(ReachTraining, SingleRecordLossDropsBelowThreshold) {
  Rng rng(8);
  ReachNet net(2, 10, rng);
  ReachOptimizer opt;
  const std::vector<LabeledPair> rec{{LatentState{0.3, 0.1}, LatentState{-0.2, 0.5}, 4, 1, 3}};
  double loss = 1.0;
  for (int s = 0; s < 2000 && loss >= 0.01; ++s) loss = train_on_batch(net, rec, opt);
  EXPECT_LT(net.loss_and_gradients(rec, nullptr), 0.01);
}

TEST(ReachTraining, RandomLabelsPlateauAtLn2) {
  Rng rng(9);
  ReachNet net(2, 10, rng);
  ReachOptimizer opt;
  std::vector<double> trace;
  for (int s = 0; s < 400; ++s) {
    std::vector<LabeledPair> b;
    for (int i = 0; i < 128; ++i)
      b.push_back({LatentState(rng.normal_vec(2)), LatentState(rng.normal_vec(2)), rng.uniform_int(1, 10), i % 2, 1});
    trace.push_back(train_on_batch(net, b, opt));
  }
  const double tail = std::accumulate(trace.end() - 100, trace.end(), 0.0) / 100.0;
  EXPECT_NEAR(tail, std::log(2.0), 0.1);
}

TEST(ReachTraining, ZeroStepsLeavesParametersUnchanged) {
  Rng rng(10);
  ReachNet net(2, 10, rng);
  const ReachNet before = net;
  ReachDataset d;
  d.add({LatentState{0, 0}, LatentState{1, 1}, 2});
  ReachOptimizer opt;
  const auto trace = train_reachnet(net, d, 0, {}, opt, rng);
  EXPECT_TRUE(trace.empty());
  for (std::size_t l = 0; l < net.decoder().num_layers(); ++l) EXPECT_EQ(net.decoder().weight(l), before.decoder().weight(l));
  for (std::size_t l = 0; l < net.state_encoder().num_layers(); ++l)
    EXPECT_EQ(net.state_encoder().weight(l), before.state_encoder().weight(l));
}

TEST(ReachTraining, TraceIsFiniteAndEmptyDatasetErrors) {
  Rng rng(11);
  ReachNet net(2, 10, rng);
  ReachOptimizer opt;
  ReachDataset d;
  EXPECT_THROW((void)train_reachnet(net, d, 5, {}, opt, rng), NotReady);
  append_episode_pairs(d, {{0, 0}, {0.1, 0}, {0.2, 0}, {0.3, 0.1}, {0.3, 0.3}});
  BatchOptions bo;
  bo.k_max = 10;
  for (double l : train_reachnet(net, d, 20, bo, opt, rng)) EXPECT_TRUE(std::isfinite(l));
}

TEST(ReachTraining, TiedEncoderGradientSumsBothPaths) {
  Rng rng(12);
  ReachNetShape small;
  small.encoder_hidden = {8, 12};
  small.encoder_out = 10;
  small.decoder_hidden = {9};
  ReachNet net(2, 10, rng, small);
  std::vector<LabeledPair> recs;
  for (int i = 0; i < 6; ++i)
    recs.push_back({LatentState(rng.normal_vec(2)), LatentState(rng.normal_vec(2)), rng.uniform_int(1, 10), i % 2, 1});
  ReachNet::Gradients g;
  net.loss_and_gradients(recs, &g);

  // Central differences through the whole network, perturbing the shared encoder.
  constexpr double h = 1e-6;
  auto views = net.state_encoder().views();
  auto gviews = g.state_enc.views();
  int checked = 0;
  for (std::size_t v = 0; v < views.size(); ++v) {
    for (Eigen::Index i = 0; i < views[v].size; ++i) {
      double& p = views[v].data[i];
      const double orig = p;
      p = orig + h;
      const double lp = net.loss_and_gradients(recs, nullptr);
      p = orig - h;
      const double lm = net.loss_and_gradients(recs, nullptr);
      p = orig;
      const double numeric = (lp - lm) / (2 * h);
      const double analytic = gviews[v].data[i];
      EXPECT_LT(std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6}), 1e-4)
          << "tensor " << v << " index " << i;
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);

  // The z_j path alone does not reproduce the full gradient: both slots contribute.
  nn::ForwardCache cj;
  Mat zj(2, static_cast<Eigen::Index>(recs.size()));
  for (std::size_t c = 0; c < recs.size(); ++c) zj.col(static_cast<Eigen::Index>(c)) = recs[c].z_j.z;
  net.state_encoder().forward_cached(zj, cj);
  const auto only_j = net.state_encoder().backward(cj, g.decoder.input.middleRows(10, 10));
  const auto only_i_norm = (g.state_enc.weights[0] - only_j.weights[0]).norm();
  EXPECT_GT(only_i_norm, 1e-8);
  EXPECT_GT(only_j.weights[0].norm(), 1e-8);
}

TEST(ReachTraining, ScoreTrendsUpwardInK) {
  const int k_max = 12;
  ReachNet net = trained_on_synthetic(1500, k_max, 13);
  Rng rng(113);
  std::vector<double> ks, mean_scores;
  std::vector<std::pair<LatentState, LatentState>> pairs;
  for (int i = 0; i < 100; ++i)
    pairs.emplace_back(LatentState{rng.uniform(-4, 4), rng.uniform(-4, 4)}, LatentState{rng.uniform(-4, 4), rng.uniform(-4, 4)});
  for (int k = 1; k <= k_max; ++k) {
    double s = 0;
    for (const auto& [a, b] : pairs) s += net.reach_forward(a, b, k);
    ks.push_back(k);
    mean_scores.push_back(s / 100.0);
  }
  EXPECT_GT(spearman(ks, mean_scores), 0.8);
}

TEST(ReachTraining, Accuracy) {
  Rng rng(14);
  ReachNet net(2, 10, rng);
  EXPECT_EQ(accuracy(net, {}), 0.0);
}
