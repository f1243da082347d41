#include <algorithm>
#include <cmath>
#include <sstream>

#include "bcops/errors.h"
#include "bcops/evalkit.h"
#include "bcops/methods.h"
#include "bcops/simulate.h"
#include "gtest/gtest.h"
#include "test_support.h"

namespace bcops {
namespace {

LearnerConfig Glm() {
  LearnerConfig config;
  config.kind = LearnerKind::kLogistic;
  return config;
}

LearnerConfig SmallForest() {
  LearnerConfig config;
  config.num_trees = 30;
  return config;
}

TEST(EstimateGammaTest, WorkedExample) {
  const std::vector<double> pi = {0.3, 0.3}, gk = {0.1, 0.1};
  const RateEstimate g = EstimateGamma(100, 30, pi, gk);
  EXPECT_DOUBLE_EQ(g.value, 0.6);
  EXPECT_FALSE(g.no_outliers);
}

TEST(EstimateGammaTest, NoOutlierMassAndClipping) {
  const std::vector<double> full = {0.5, 0.5}, gk = {0.1, 0.1};
  const RateEstimate g = EstimateGamma(100, 30, full, gk);
  EXPECT_TRUE(g.no_outliers);
  EXPECT_DOUBLE_EQ(g.value, 1.0);
  EXPECT_DOUBLE_EQ(EstimateGamma(100, 5, full, gk).value, 0.0);
  const std::vector<double> pi = {0.3, 0.3};
  EXPECT_DOUBLE_EQ(EstimateGamma(100, 2, pi, gk).value, 0.0);
  EXPECT_THROW(EstimateGamma(0, 0, pi, gk), InputError);
  EXPECT_THROW(EstimateGamma(10, 11, pi, gk), InputError);
}

TEST(EstimateGammaTest, ReproducesDefinitionOnConstructedInstances) {
  struct Case {
    std::vector<double> pi, gamma_k;
    double gamma;
  };
  const std::vector<Case> cases = {{{0.3, 0.2}, {0.1, 0.05}, 0.6},
                                   {{0.25, 0.25, 0.25}, {0.0, 0.2, 0.4}, 1.0},
                                   {{0.5, 0.125}, {0.5, 0.25}, 0.25}};
  const std::size_t n = 8000;
  for (const auto& c : cases) {
    double eps = 1.0, inlier_empty = 0.0, inlier_labeled = 0.0;
    for (std::size_t k = 0; k < c.pi.size(); ++k) {
      eps -= c.pi[k];
      inlier_empty += c.pi[k] * c.gamma_k[k];
      inlier_labeled += c.pi[k] * (1.0 - c.gamma_k[k]);
    }
    const double expected_empty = static_cast<double>(n) * (inlier_empty + eps * c.gamma);
    const auto n_empty = static_cast<std::size_t>(std::llround(expected_empty));
    ASSERT_NEAR(static_cast<double>(n_empty), expected_empty, 1e-9);
    EXPECT_NEAR(EstimateGamma(n, n_empty, c.pi, c.gamma_k).value, c.gamma, 1e-12);
    const double labeled = static_cast<double>(n - n_empty);
    const double outliers_labeled = static_cast<double>(n) * eps * (1.0 - c.gamma);
    EXPECT_NEAR(EstimateFlr(n, n_empty, c.pi, c.gamma_k),
                labeled > 0 ? outliers_labeled / labeled : 0.0, 1e-12);
    EXPECT_NEAR(outliers_labeled + static_cast<double>(n) * inlier_labeled, labeled, 1e-9);
  }
}

TEST(EstimateFlrTest, WorkedExamples) {
  const std::vector<double> pi = {0.3, 0.3}, gk = {0.1, 0.1};
  EXPECT_NEAR(EstimateFlr(100, 30, pi, gk), 16.0 / 70.0, 1e-15);
  EXPECT_DOUBLE_EQ(EstimateFlr(100, 100, pi, gk), 0.0);
  const std::vector<double> zero = {0.0, 0.0};
  EXPECT_DOUBLE_EQ(EstimateFlr(100, 40, zero, gk), 1.0);
  const std::vector<double> full = {0.5, 0.5};
  EXPECT_DOUBLE_EQ(EstimateFlr(100, 10, full, gk), 0.0);
}

PredictionSet Set(std::vector<ClassId> members) {
  PredictionSet set;
  set.members = std::move(members);
  return set;
}

TEST(RealizedMetricsTest, HandCount) {
  const std::vector<PredictionSet> sets = {Set({1}), Set({1, 2}), Set({})};
  const std::vector<ClassId> truth = {1, 2, kOutlierClass};
  const MetricsReport r = RealizedMetrics(sets, truth, 2);
  EXPECT_DOUBLE_EQ(r.classes[0].coverage, 1.0);
  EXPECT_DOUBLE_EQ(r.classes[1].coverage, 1.0);
  EXPECT_DOUBLE_EQ(r.classes[0].type2, 0.0);
  EXPECT_DOUBLE_EQ(r.classes[1].type2, 1.0);
  EXPECT_DOUBLE_EQ(r.classes[0].accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.classes[1].accuracy, 0.0);
  EXPECT_DOUBLE_EQ(r.realized_gamma, 1.0);
  EXPECT_DOUBLE_EQ(r.flp, 0.0);
  EXPECT_EQ(r.n_empty, 1u);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
  for (const auto& c : r.classes) EXPECT_DOUBLE_EQ(c.type1, 1.0 - c.coverage);
}

TEST(RealizedMetricsTest, AllEmpty) {
  const std::vector<PredictionSet> sets = {Set({}), Set({}), Set({})};
  const std::vector<ClassId> truth = {1, 2, kOutlierClass};
  const MetricsReport r = RealizedMetrics(sets, truth, 2);
  EXPECT_DOUBLE_EQ(r.classes[0].coverage, 0.0);
  EXPECT_DOUBLE_EQ(r.classes[1].abstention, 1.0);
  EXPECT_DOUBLE_EQ(r.realized_gamma, 1.0);
  EXPECT_DOUBLE_EQ(r.flp, 0.0);
}

TEST(RealizedMetricsTest, FalseLabelingProportion) {
  const std::vector<PredictionSet> sets = {Set({1}), Set({2}), Set({1}), Set({})};
  const std::vector<ClassId> truth = {kOutlierClass, kOutlierClass, 1, kOutlierClass};
  const MetricsReport r = RealizedMetrics(sets, truth, 2);
  EXPECT_NEAR(r.flp, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.realized_gamma, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.outliers.type2, 2.0 / 3.0, 1e-15);
  const std::vector<ClassId> short_truth = {1};
  EXPECT_THROW(RealizedMetrics(sets, short_truth, 2), InputError);
}

// Leave-one-out oracle for the held-fold estimate, computed directly from
// the stored calibration lists.
std::vector<double> HeldFoldOracle(const PredictionSetModel& model, const Dataset& train,
                                   double alpha) {
  std::vector<double> out;
  const std::vector<int> folds = model.folded() ? std::vector<int>{1, 2} : std::vector<int>{0};
  for (ClassId k = 1; k <= model.class_count; ++k) {
    std::size_t rows = 0, empty = 0;
    for (int t : folds) {
      for (std::size_t r : model.Scorer(k, t).calibration_rows) {
        ++rows;
        bool any = false;
        for (ClassId j = 1; j <= model.class_count; ++j) {
          const auto& entry = model.Scorer(j, t);
          const double v = entry.score->Score(train.row(r));
          std::vector<double> calib = entry.calibration;
          if (j == k) calib.erase(std::find(calib.begin(), calib.end(), v));
          std::size_t at_most = 1;
          for (double z : calib) at_most += z <= v ? 1 : 0;
          const double m1 = static_cast<double>(calib.size() + 1);
          any = any || at_most >= static_cast<std::size_t>(std::floor(m1 * alpha + 1e-9));
        }
        empty += any ? 0 : 1;
      }
    }
    out.push_back(static_cast<double>(empty) / static_cast<double>(rows));
  }
  return out;
}

class GammaKTest : public ::testing::TestWithParam<Method> {};

TEST_P(GammaKTest, HeldFoldMatchesLeaveOneOutOracle) {
  const SimulatedData sim = GenerateTwoClassSim(40);
  const PredictionSetModel model = FitMethod(GetParam(), sim.train, sim.test, SmallForest(), 40);
  for (double alpha : {0.0, 0.05, 0.3, 0.7, 0.99}) {
    const auto got = EstimateGammaK(model, sim.train, alpha);
    const auto oracle = HeldFoldOracle(model, sim.train, alpha);
    ASSERT_EQ(got.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_DOUBLE_EQ(got[k], oracle[k]) << alpha;
  }
}

TEST_P(GammaKTest, BoundaryLevels) {
  const SimulatedData sim = GenerateTwoClassSim(41);
  const PredictionSetModel model = FitMethod(GetParam(), sim.train, sim.test, Glm(), 41);
  for (double g : EstimateGammaK(model, sim.train, 0.0)) EXPECT_EQ(g, 0.0);
  for (double g : EstimateGammaK(model, sim.train, 0.05)) EXPECT_LE(g, 0.1);
  for (double g : EstimateGammaK(model, sim.train, 0.99)) EXPECT_GT(g, 0.9);
}

INSTANTIATE_TEST_SUITE_P(Methods, GammaKTest,
                         ::testing::Values(Method::kBcops, Method::kDls, Method::kIrs),
                         [](const auto& info) { return MethodName(info.param); });

TEST(GammaKModeTest, InSampleReadingUsesTrainingFoldCalibration) {
  const SimulatedData sim = GenerateTwoClassSim(42);
  const PredictionSetModel model = FitBcops(sim.train, sim.test, Glm(), 42);
  const double alpha = 0.2;
  std::vector<double> expected;
  for (ClassId k = 1; k <= 2; ++k) {
    std::size_t rows = 0, empty = 0;
    for (int t = 1; t <= 2; ++t) {
      for (std::size_t r : model.Scorer(k, t).calibration_rows) {
        ++rows;
        bool any = false;
        for (ClassId j = 1; j <= 2; ++j) {
          const auto& entry = model.Scorer(j, t);
          const std::size_t count =
              ConformalCount(entry.score->Score(sim.train.row(r)), entry.in_sample_calibration);
          any = any || count >= ThresholdCount(entry.in_sample_calibration.size(), alpha);
        }
        empty += any ? 0 : 1;
      }
    }
    expected.push_back(static_cast<double>(empty) / static_cast<double>(rows));
  }
  EXPECT_EQ(EstimateGammaK(model, sim.train, alpha, GammaKMode::kInSample), expected);
  EXPECT_EQ(ParseGammaKMode(GammaKModeName(GammaKMode::kInSample)), GammaKMode::kInSample);
  EXPECT_THROW(ParseGammaKMode("loo"), InputError);
}

TEST(GammaKModeTest, WrongTrainingDataIsRejected) {
  const SimulatedData sim = GenerateTwoClassSim(43);
  const PredictionSetModel model = FitIrs(sim.train, Glm(), 43);
  const SimulatedData other = GenerateTwoClassSim(44);
  const std::vector<std::size_t> head = {0, 1, 2, 3, 4, 5, 6, 7, 500, 501, 502, 503};
  EXPECT_THROW(EstimateGammaK(model, Subset(other.train, head), 0.1), InputError);
}

TEST(AlphaGridTest, Parse) {
  const auto grid = ParseAlphaGrid("0.01:0.99:0.01");
  ASSERT_EQ(grid.size(), 99u);
  EXPECT_EQ(grid.front(), 0.01);
  EXPECT_EQ(grid[28], 0.29);
  EXPECT_EQ(grid.back(), 0.99);
  EXPECT_EQ(ParseAlphaGrid("0.05:0.05:0.01"), std::vector<double>{0.05});
  EXPECT_EQ(ParseAlphaGrid("0.1:0.5:0.2"), (std::vector<double>{0.1, 0.3, 0.5}));
  for (const char* bad : {"", "0.1:0.5", "a:b:c", "0.5:0.1:0.1", "0.1:0.5:0", "0.1:0.5:0.1:1"}) {
    EXPECT_THROW(ParseAlphaGrid(bad), InputError) << bad;
  }
}

class CurveTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    sim_ = new SimulatedData(GenerateTwoClassSim(45));
    CurveOptions options;
    options.learner = SmallForest();
    options.alphas = AlphaGrid(0.01, 0.99, 0.01);
    options.seed = 45;
    curve_ = new TradeoffCurve(
        ComputeTradeoffCurve(sim_->train, sim_->test, options, std::span<const ClassId>(sim_->truth)));
  }
  static void TearDownTestSuite() {
    delete curve_;
    delete sim_;
  }
  static SimulatedData* sim_;
  static TradeoffCurve* curve_;
};

SimulatedData* CurveTest::sim_ = nullptr;
TradeoffCurve* CurveTest::curve_ = nullptr;

TEST_F(CurveTest, EmptyCountIsMonotoneAndRatesBounded) {
  ASSERT_EQ(curve_->points.size(), 99u);
  std::size_t previous = 0;
  for (const auto& p : curve_->points) {
    const auto& a = p.abstention;
    EXPECT_GE(a.n_empty, previous);
    previous = a.n_empty;
    EXPECT_GE(a.gamma_hat, 0.0);
    EXPECT_LE(a.gamma_hat, 1.0);
    EXPECT_GE(a.flr_hat, 0.0);
    EXPECT_LE(a.flr_hat, 1.0);
    ASSERT_TRUE(a.realized_gamma && a.flp && p.metrics);
    EXPECT_EQ(a.n, 1500u);
  }
}

TEST_F(CurveTest, EstimatesTrackRealizedRates) {
  double gap_gamma = 0.0, gap_flr = 0.0;
  for (const auto& p : curve_->points) {
    gap_gamma += std::abs(p.abstention.gamma_hat - *p.abstention.realized_gamma);
    gap_flr += std::abs(p.abstention.flr_hat - *p.abstention.flp);
  }
  EXPECT_LE(gap_gamma / 99.0, 0.1);
  EXPECT_LE(gap_flr / 99.0, 0.1);
}

TEST_F(CurveTest, CsvHasOneRowPerAlpha) {
  std::istringstream in(curve_->ToCsv());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line,
            "alpha,gamma_hat,flr_hat,gamma_realized,flp,n_empty,coverage_1,coverage_2,type2_1,"
            "type2_2,type2_R");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 99);
  const auto j = curve_->ToJson();
  EXPECT_EQ(j.at("points").size(), 99u);
  EXPECT_EQ(j.at("gamma_k_mode"), "held-fold");
}

TEST_F(CurveTest, SingleAlphaGridMatchesDirectReport) {
  const PredictionSetModel model = FitBcops(sim_->train, sim_->test, SmallForest(), 45);
  const std::vector<double> grid = {0.05};
  const TradeoffCurve single = EvaluateCurve(model, sim_->train, sim_->test, curve_->mixture, grid,
                                             std::span<const ClassId>(sim_->truth));
  ASSERT_EQ(single.points.size(), 1u);
  EXPECT_EQ(single.points[0].abstention.ToJson(), curve_->points[4].abstention.ToJson());
  EXPECT_EQ(single.points[0].abstention.gamma_k, EstimateGammaK(model, sim_->train, 0.05));
}

TEST(CurveOptionsTest, RejectsBoundaryAlphas) {
  const SimulatedData sim = GenerateTwoClassSim(46);
  CurveOptions options;
  options.learner = Glm();
  options.alphas = {0.0, 0.5};
  EXPECT_THROW(ComputeTradeoffCurve(sim.train, sim.test, options), InputError);
  options.alphas = {0.5, 0.2};
  EXPECT_THROW(ComputeTradeoffCurve(sim.train, sim.test, options), InputError);
}

TEST(FlrControlTest, ChosenAlphaKeepsFalseLabelingLow) {
  double flp = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const SimulatedData sim = GenerateTwoClassSim(500 + s);
    CurveOptions options;
    options.learner = SmallForest();
    options.alphas = AlphaGrid(0.01, 0.99, 0.01);
    options.seed = 500 + s;
    const TradeoffCurve curve =
        ComputeTradeoffCurve(sim.train, sim.test, options, std::span<const ClassId>(sim.truth));
    const auto chosen = std::find_if(curve.points.begin(), curve.points.end(),
                                     [](const auto& p) { return p.abstention.flr_hat <= 0.1; });
    ASSERT_NE(chosen, curve.points.end());
    flp += *chosen->abstention.flp / seeds;
  }
  EXPECT_LE(flp, 0.15);
}

TEST(OutlierScoreTest, ConformingPointScoresZero) {
  RankVector ranks;
  ranks.counts = {20, 20};
  ranks.calibration_sizes = {19, 19};
  const auto grid = AlphaGrid(0.01, 0.95, 0.01);
  std::vector<double> curve(grid.size(), 0.7);
  EXPECT_EQ(OutlierScore(ranks, grid, curve), 0.0);
}

TEST(OutlierScoreTest, LowestRankEmptiesAtFirstThresholdAboveOne) {
  const std::size_t m = 19;
  RankVector ranks;
  ranks.counts = {1, 1};
  ranks.calibration_sizes = {m, m};
  const auto grid = AlphaGrid(0.01, 0.99, 0.01);
  std::vector<double> curve;
  for (double a : grid) curve.push_back(a * a);
  std::size_t first = 0;
  while (ThresholdCount(m, grid[first]) < 2) ++first;
  EXPECT_EQ(grid[first], 0.1);
  EXPECT_EQ(OutlierScore(ranks, grid, curve), curve[first]);
}

TEST(OutlierScoreTest, EmptyingLevelRisesWithRank) {
  const std::size_t m = 49;
  const auto grid = AlphaGrid(0.01, 0.99, 0.01);
  std::vector<double> index_curve;
  for (std::size_t i = 0; i < grid.size(); ++i) index_curve.push_back(static_cast<double>(i + 1));
  double previous = 0.0;
  for (std::size_t c = 1; c < m; ++c) {
    RankVector ranks;
    ranks.counts = {c, 1};
    ranks.calibration_sizes = {m, m};
    const double level = OutlierScore(ranks, grid, index_curve);
    EXPECT_GT(level, 0.0);
    EXPECT_GE(level, previous);
    previous = level;
  }
  RankVector top;
  top.counts = {m, 1};
  top.calibration_sizes = {m, m};
  EXPECT_EQ(OutlierScore(top, grid, index_curve), 0.0);
}

TEST(OutlierScoreTest, Errors) {
  RankVector ranks;
  ranks.counts = {1};
  ranks.calibration_sizes = {4};
  EXPECT_THROW(OutlierScore(ranks, std::vector<double>{}, std::vector<double>{}), InputError);
  EXPECT_THROW(OutlierScore(ranks, std::vector<double>{0.1, 0.2}, std::vector<double>{0.1}),
               InputError);
}

}  // namespace
}  // namespace bcops
