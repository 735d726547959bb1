// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0

#include "gatesplat/pgr.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

namespace gs = gatesplat;
using gs::Vec3;

namespace {

gs::GridPartition small_partition(gs::Platform p, std::size_t bins0) {
  std::array<std::size_t, gs::kLayoutDims> bins{};
  bins.fill(1);
  bins[0] = bins0;
  return {gs::layout_bounds(p), bins};
}

double chi_square_p(const std::vector<std::size_t>& observed, const std::vector<double>& w, std::size_t n) {
  double stat = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double e = w[i] * static_cast<double>(n);
    stat += (static_cast<double>(observed[i]) - e) * (static_cast<double>(observed[i]) - e) / e;
  }
  const boost::math::chi_squared dist(static_cast<double>(w.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST(TaskLoss, ClosedForm) {
  const std::vector<gs::GateRecord> gates = {{0, true, 1, Vec3::Zero(), 0.2, gs::Outcome::success},
                                             {1, true, 2, Vec3::Zero(), 0.3, gs::Outcome::frame_collision}};
  EXPECT_DOUBLE_EQ(gs::task_loss(gates, 1.0), (0.2 + 1.0) / 2);
  EXPECT_DOUBLE_EQ(gs::task_loss(gates, 0.5), (0.1 + 1.0) / 2);
  EXPECT_THROW(gs::task_loss({}, 1.0), gs::ParameterError);
}

TEST(Weights, NormalizedWithFloor) {
  gs::Rng rng(61);
  for (int c = 0; c < 500; ++c) {
    const std::size_t m = 1 + rng.uniform_index(2000);
    std::vector<double> l(m);
    for (auto& x : l) x = rng.bernoulli(0.3) ? 0.0 : rng.uniform(0, 10);
    const double beta = rng.uniform();
    const auto w = gs::pgr_weights(l, beta);
    double sum = 0.0, lsum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sum += w[i];
      lsum += l[i];
      EXPECT_GE(w[i], beta / static_cast<double>(m) * (1 - 1e-15));
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    if (lsum > 0)
      for (std::size_t i = 0; i < m; ++i)
        EXPECT_NEAR(w[i], (1 - beta) * l[i] / lsum + beta / static_cast<double>(m), 1e-15);
  }
  const auto u = gs::pgr_weights({0.0, 0.0, 0.0, 0.0}, 0.2);
  for (const double x : u) EXPECT_DOUBLE_EQ(x, 0.25);
  EXPECT_THROW(gs::pgr_weights({}, 0.1), gs::ParameterError);
  EXPECT_THROW(gs::pgr_weights({1.0}, 1.5), gs::ParameterError);
  EXPECT_THROW(gs::pgr_weights({-1.0}, 0.1), gs::ValidationError);
  EXPECT_THROW(gs::pgr_weights({std::nan("")}, 0.1), gs::ValidationError);
}

TEST(Resample, CellFrequenciesFollowWeights) {
  const auto part = gs::desk_partition(gs::Platform::uav);
  gs::Rng rng(62);
  std::vector<double> l(part.cell_count());
  for (auto& x : l) x = rng.uniform() < 0.5 ? rng.uniform(0, 1) : 0.0;
  for (const double beta : {0.05, 1.0}) {
    const auto w = gs::pgr_weights(l, beta);
    const std::size_t n = 100000;
    const auto set = gs::resample(part, w, n, rng);
    ASSERT_EQ(set.size(), n);
    std::vector<std::size_t> counts(part.cell_count(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[set.cells[i]];
      if (i % 97 == 0) EXPECT_EQ(part.cell_of(set.layouts[i]), set.cells[i]);
    }
    EXPECT_GT(chi_square_p(counts, w, n), 0.01) << "beta " << beta;
  }
}

TEST(Resample, MultinomialCountWithinThreeSigma) {
  const auto part = small_partition(gs::Platform::uav, 4);
  const std::vector<double> w = {0.1, 0.2, 0.3, 0.4};
  gs::Rng rng(63);
  const std::size_t n = 20000;
  const auto set = gs::resample(part, w, n, rng);
  std::vector<std::size_t> counts(4, 0);
  for (const auto c : set.cells) ++counts[c];
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(static_cast<double>(counts[i]), w[i] * n, 3 * std::sqrt(n * w[i] * (1 - w[i])));
}

TEST(Resample, ExhaustedCellsAreDropped) {
  const auto part = small_partition(gs::Platform::uav, 4);
  const auto cell0 = part.cell_bounds(0);
  const gs::LayoutPredicate reject_cell0 = [&](const gs::TwoGateLayout& l) { return !(l.g[0] < cell0.hi[0]); };
  gs::Rng rng(64);
  std::vector<bool> dead;
  gs::SamplingStats st;
  const auto set = gs::resample(part, {0.7, 0.1, 0.1, 0.1}, 200, rng, reject_cell0, 5, 1, &dead, &st);
  EXPECT_EQ(set.size(), 200u);
  EXPECT_TRUE(dead[0]);
  EXPECT_GE(st.skipped, 1u);
  EXPECT_EQ(st.rejections % 5, 0u);
  for (const auto c : set.cells) EXPECT_NE(c, 0u);
  EXPECT_THROW(gs::resample(part, {0.25, 0.25, 0.25, 0.25}, 3, rng, [](const auto&) { return false; }, 3),
               gs::SamplingError);
  EXPECT_THROW(gs::resample(part, {1.0}, 3, rng), gs::ParameterError);
}

TEST(Resample, IndependentOfThreadCount) {
  const auto part = gs::desk_partition(gs::Platform::quad);
  const gs::LayoutPredicate half = [](const gs::TwoGateLayout& l) { return l.g[1] > 0.0; };
  const auto w = gs::pgr_weights(std::vector<double>(part.cell_count(), 1.0), 0.1);
  gs::Rng r1(65), r4(65);
  const auto a = gs::resample(part, w, 500, r1, half, 10, 1);
  const auto b = gs::resample(part, w, 500, r4, half, 10, 4);
  EXPECT_EQ(a.layouts, b.layouts);
  EXPECT_EQ(a.cells, b.cells);
  const auto c = gs::per_cell_layouts(part, 2, 7, half, 10, 1);
  const auto d = gs::per_cell_layouts(part, 2, 7, half, 10, 3);
  EXPECT_EQ(c.layouts, d.layouts);
}

TEST(Concentration, TopDecileCounts) {
  gs::PgrResult a, b;
  a.history.resize(2);
  b.history.resize(2);
  a.history[0].losses = {0.1, 0.9, 0.2, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.8};
  a.history[1].samples.assign(20, 1);
  a.history[1].samples[1] = 7;
  a.history[1].samples[19] = 5;
  b.history[1].samples.assign(20, 2);
  const auto c = gs::top_decile_allocation(a, b);
  ASSERT_EQ(c.pgr.size(), 1u);
  EXPECT_EQ(c.pgr[0], 12u);
  EXPECT_EQ(c.reference[0], 4u);
}

TEST(PgrRun, SmallRunIsConsistentAndReproducible) {
  const auto part = small_partition(gs::Platform::quad, 2);
  const gs::QuadModel model;
  const auto expert = std::make_shared<gs::ExpertPolicy<gs::QuadModel>>();
  gs::PgrConfig cfg;
  cfg.iterations = 2;
  cfg.initial_per_cell = 3;
  cfg.validation_per_cell = 2;
  cfg.seed = 5;
  const auto run = [&](unsigned jobs) {
    gs::PgrConfig c = cfg;
    c.jobs = jobs;
    gs::SyntheticLearner<gs::QuadModel> learner(part, expert);
    return gs::pgr_run(c, learner, *expert, part, model, gs::SimConfig{});
  };
  const auto r = run(1);
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.validation.size(), 4u);
  EXPECT_EQ(r.dataset.entries.size(), 12u);
  for (const auto& h : r.history) {
    EXPECT_NEAR(std::accumulate(h.weights.begin(), h.weights.end(), 0.0), 1.0, 1e-12);
    EXPECT_EQ(std::accumulate(h.samples.begin(), h.samples.end(), std::size_t{0}), 6u);
  }
  EXPECT_EQ(gs::pgr_history_json(r).dump(), gs::pgr_history_json(run(2)).dump());
  cfg.beta = 2.0;
  gs::SyntheticLearner<gs::QuadModel> learner(part, expert);
  EXPECT_THROW(gs::pgr_run(cfg, learner, *expert, part, model, gs::SimConfig{}), gs::ConfigError);
}
