#include "bcops/evalkit.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bcops/csv.h"
#include "bcops/errors.h"
#include "bcops/methods.h"
#include "bcops/random.h"

namespace bcops {
namespace {

std::size_t CountAtLeast(double v, const std::vector<double>& sorted) {
  return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), v) -
                                  sorted.begin());
}

// Rank vectors of the training rows used to estimate gamma_k, grouped by
// class (index k-1).
std::vector<std::vector<RankVector>> TrainingRanks(const PredictionSetModel& model,
                                                   const Dataset& train, GammaKMode mode) {
  RequireTrainingLabels(train);
  if (train.dimension() != model.dimension || train.class_count != model.class_count) {
    throw InputError("training data does not match the model");
  }
  const int K = model.class_count;
  std::vector<std::vector<RankVector>> out(static_cast<std::size_t>(K));
  const std::vector<int> folds = model.folded() ? std::vector<int>{1, 2} : std::vector<int>{0};

  for (ClassId k = 1; k <= K; ++k) {
    for (int t : folds) {
      const auto& own = model.Scorer(k, t);
      for (std::size_t r : own.calibration_rows) {
        if (r >= train.size() || train.label(r) != k) {
          throw InputError("training data does not match the model's calibration rows");
        }
        const auto x = train.row(r);
        RankVector ranks;
        for (ClassId j = 1; j <= K; ++j) {
          const auto& entry = model.Scorer(j, t);
          const double v = entry.score->Score(x);
          if (model.folded() && mode == GammaKMode::kInSample) {
            ranks.counts.push_back(CountAtLeast(v, entry.in_sample_calibration) + 1);
            ranks.calibration_sizes.push_back(entry.in_sample_calibration.size());
          } else if (j == k) {
            // x is itself one of the calibration points: leave it out.
            ranks.counts.push_back(CountAtLeast(v, entry.calibration));
            ranks.calibration_sizes.push_back(entry.m() - 1);
          } else {
            ranks.counts.push_back(CountAtLeast(v, entry.calibration) + 1);
            ranks.calibration_sizes.push_back(entry.m());
          }
        }
        out[static_cast<std::size_t>(k - 1)].push_back(std::move(ranks));
      }
    }
  }
  return out;
}

bool EmptyAt(const RankVector& ranks, double alpha) {
  for (std::size_t i = 0; i < ranks.counts.size(); ++i) {
    if (ranks.calibration_sizes[i] == 0) return false;
    if (ranks.Accepts(static_cast<ClassId>(i + 1), alpha)) return false;
  }
  return true;
}

std::vector<double> GammaKFromRanks(const std::vector<std::vector<RankVector>>& ranks,
                                    double alpha) {
  std::vector<double> gamma_k;
  for (const auto& rows : ranks) {
    std::size_t empty = 0;
    for (const auto& r : rows) empty += EmptyAt(r, alpha) ? 1 : 0;
    gamma_k.push_back(rows.empty() ? 0.0
                                   : static_cast<double>(empty) / static_cast<double>(rows.size()));
  }
  return gamma_k;
}

double Rate(std::size_t count, std::size_t total) {
  return total == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(total);
}

nlohmann::json ClassMetricsJson(const ClassMetrics& m) {
  return {{"count", m.count},       {"coverage", m.coverage}, {"type1", m.type1},
          {"type2", m.type2},       {"accuracy", m.accuracy}, {"abstention", m.abstention}};
}

}  // namespace

std::string GammaKModeName(GammaKMode mode) {
  return mode == GammaKMode::kHeldFold ? "held-fold" : "in-sample";
}

GammaKMode ParseGammaKMode(const std::string& name) {
  if (name == "held-fold") return GammaKMode::kHeldFold;
  if (name == "in-sample") return GammaKMode::kInSample;
  throw InputError("unknown gamma-k mode '" + name + "'");
}

std::vector<double> EstimateGammaK(const PredictionSetModel& model, const Dataset& train,
                                   double alpha, GammaKMode mode) {
  CheckAlpha(alpha);
  return GammaKFromRanks(TrainingRanks(model, train, mode), alpha);
}

RateEstimate EstimateGamma(std::size_t n, std::size_t n_empty, std::span<const double> pi,
                           std::span<const double> gamma_k) {
  if (n == 0) throw InputError("N must be positive");
  if (n_empty > n) throw InputError("N_empty exceeds N");
  if (pi.size() != gamma_k.size()) throw InputError("pi and gamma_k lengths differ");
  const double N = static_cast<double>(n);
  double pi_sum = 0.0, expected_inlier_empty = 0.0;
  for (std::size_t k = 0; k < pi.size(); ++k) {
    pi_sum += pi[k];
    expected_inlier_empty += N * pi[k] * gamma_k[k];
  }
  const double numerator = std::max(static_cast<double>(n_empty) - expected_inlier_empty, 0.0);
  const double denominator = std::max(N * (1.0 - pi_sum), 1.0);
  RateEstimate out;
  out.value = std::min(numerator / denominator, 1.0);
  out.no_outliers = pi_sum >= 1.0 - 1e-12;
  return out;
}

double EstimateFlr(std::size_t n, std::size_t n_empty, std::span<const double> pi,
                   std::span<const double> gamma_k) {
  if (n == 0) throw InputError("N must be positive");
  if (n_empty > n) throw InputError("N_empty exceeds N");
  if (pi.size() != gamma_k.size()) throw InputError("pi and gamma_k lengths differ");
  const double N = static_cast<double>(n);
  const double labeled = static_cast<double>(n - n_empty);
  double expected_inlier_labeled = 0.0;
  for (std::size_t k = 0; k < pi.size(); ++k) {
    expected_inlier_labeled += N * pi[k] * (1.0 - gamma_k[k]);
  }
  return std::max(labeled - expected_inlier_labeled, 0.0) / std::max(labeled, 1.0);
}

MetricsReport RealizedMetrics(std::span<const PredictionSet> sets, std::span<const ClassId> truth,
                              int class_count) {
  if (sets.size() != truth.size()) throw InputError("sets and truth differ in length");
  struct Tally {
    std::size_t count = 0, covered = 0, exact = 0, wrong = 0, empty = 0;
  };
  std::vector<Tally> classes(static_cast<std::size_t>(class_count));
  Tally outliers;
  std::size_t n_empty = 0, labeled = 0, labeled_outliers = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto& set = sets[i];
    const ClassId y = truth[i];
    if (y != kOutlierClass && (y < 1 || y > class_count)) {
      throw InputError("truth label outside 1..K and not R");
    }
    if (set.empty()) ++n_empty;
    else ++labeled;
    Tally& tally = y == kOutlierClass ? outliers : classes[static_cast<std::size_t>(y - 1)];
    ++tally.count;
    if (set.empty()) ++tally.empty;
    const bool covered = set.Contains(y);
    if (covered) ++tally.covered;
    if (covered && set.members.size() == 1) ++tally.exact;
    if (set.members.size() > (covered ? 1u : 0u)) ++tally.wrong;
    if (y == kOutlierClass && !set.empty()) ++labeled_outliers;
  }

  MetricsReport report;
  report.n = sets.size();
  report.n_empty = n_empty;
  std::size_t inliers = 0, exact = 0;
  for (const auto& t : classes) {
    ClassMetrics m;
    m.count = t.count;
    m.coverage = Rate(t.covered, t.count);
    m.type1 = 1.0 - m.coverage;
    m.type2 = Rate(t.wrong, t.count);
    m.accuracy = Rate(t.exact, t.count);
    m.abstention = Rate(t.empty, t.count);
    report.classes.push_back(m);
    inliers += t.count;
    exact += t.exact;
  }
  report.outliers.count = outliers.count;
  report.outliers.type2 = Rate(outliers.wrong, outliers.count);
  report.outliers.abstention = Rate(outliers.empty, outliers.count);
  report.accuracy = Rate(exact, inliers);
  report.realized_gamma = report.outliers.abstention;
  report.flp = static_cast<double>(labeled_outliers) / static_cast<double>(std::max<std::size_t>(labeled, 1));
  return report;
}

nlohmann::json MetricsReport::ToJson() const {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& c : classes) per_class.push_back(ClassMetricsJson(c));
  return {{"n", n},
          {"n_empty", n_empty},
          {"accuracy", accuracy},
          {"realized_gamma", realized_gamma},
          {"flp", flp},
          {"classes", per_class},
          {"outliers", {{"count", outliers.count},
                        {"type2", outliers.type2},
                        {"abstention", outliers.abstention}}}};
}

nlohmann::json AbstentionReport::ToJson() const {
  nlohmann::json j = {{"alpha", alpha},           {"gamma_k", gamma_k},
                      {"n", n},                   {"n_empty", n_empty},
                      {"gamma_hat", gamma_hat},   {"no_outliers", no_outliers},
                      {"flr_hat", flr_hat}};
  j["realized_gamma"] = realized_gamma ? nlohmann::json(*realized_gamma) : nlohmann::json();
  j["flp"] = flp ? nlohmann::json(*flp) : nlohmann::json();
  return j;
}

std::vector<double> AlphaGrid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(lo <= hi) || !(lo >= 0.0) || !(hi <= 1.0)) {
    throw InputError("alpha grid needs 0 <= lo <= hi <= 1 and step > 0");
  }
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid;
  for (std::size_t i = 0; i < count; ++i) {
    grid.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  return grid;
}

std::vector<double> ParseAlphaGrid(const std::string& spec) {
  std::stringstream in(spec);
  std::string part;
  std::vector<double> values;
  while (std::getline(in, part, ':')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw InputError("bad alpha grid '" + spec + "' (expected lo:hi:step)");
    }
  }
  if (values.size() != 3) throw InputError("bad alpha grid '" + spec + "' (expected lo:hi:step)");
  return AlphaGrid(values[0], values[1], values[2]);
}

TradeoffCurve EvaluateCurve(const PredictionSetModel& model, const Dataset& train,
                            const Dataset& test, const MixtureEstimate& mixture,
                            std::span<const double> alphas,
                            std::optional<std::span<const ClassId>> truth, GammaKMode mode) {
  if (alphas.empty()) throw InputError("empty alpha grid");
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    CheckAlpha(alphas[i]);
    if (i > 0 && !(alphas[i] > alphas[i - 1])) throw InputError("alpha grid must ascend");
  }
  if (truth && truth->size() != test.size()) throw InputError("truth length differs from test");
  const auto test_ranks = model.RankTestSet(test);
  const auto train_ranks = TrainingRanks(model, train, mode);

  TradeoffCurve curve;
  curve.alphas.assign(alphas.begin(), alphas.end());
  curve.mixture = mixture;
  curve.gamma_k_mode = mode;
  for (double alpha : alphas) {
    std::vector<PredictionSet> sets;
    sets.reserve(test_ranks.size());
    std::size_t n_empty = 0;
    for (const auto& r : test_ranks) {
      sets.push_back(ApplyAlpha(r, alpha));
      n_empty += sets.back().empty() ? 1 : 0;
    }
    TradeoffPoint point;
    auto& a = point.abstention;
    a.alpha = alpha;
    a.gamma_k = GammaKFromRanks(train_ranks, alpha);
    a.n = test.size();
    a.n_empty = n_empty;
    const RateEstimate gamma = EstimateGamma(a.n, n_empty, mixture.pi, a.gamma_k);
    a.gamma_hat = gamma.value;
    a.no_outliers = gamma.no_outliers;
    a.flr_hat = EstimateFlr(a.n, n_empty, mixture.pi, a.gamma_k);
    if (truth) {
      point.metrics = RealizedMetrics(sets, *truth, model.class_count);
      a.realized_gamma = point.metrics->realized_gamma;
      a.flp = point.metrics->flp;
    }
    curve.points.push_back(std::move(point));
  }
  return curve;
}

std::string TradeoffCurve::ToCsv() const {
  std::ostringstream out;
  const std::size_t K = mixture.pi.size();
  out << "alpha,gamma_hat,flr_hat,gamma_realized,flp,n_empty";
  for (std::size_t k = 1; k <= K; ++k) out << ",coverage_" << k;
  for (std::size_t k = 1; k <= K; ++k) out << ",type2_" << k;
  out << ",type2_R\n";
  for (const auto& p : points) {
    const auto& a = p.abstention;
    out << FormatDouble(a.alpha) << ',' << FormatDouble(a.gamma_hat) << ','
        << FormatDouble(a.flr_hat) << ',';
    out << (a.realized_gamma ? FormatDouble(*a.realized_gamma) : "") << ',';
    out << (a.flp ? FormatDouble(*a.flp) : "") << ',' << a.n_empty;
    for (std::size_t k = 0; k < K; ++k) {
      out << ',' << (p.metrics ? FormatDouble(p.metrics->classes[k].coverage) : "");
    }
    for (std::size_t k = 0; k < K; ++k) {
      out << ',' << (p.metrics ? FormatDouble(p.metrics->classes[k].type2) : "");
    }
    out << ',' << (p.metrics && p.metrics->outliers.count > 0
                       ? FormatDouble(p.metrics->outliers.type2)
                       : "");
    out << '\n';
  }
  return out.str();
}

nlohmann::json TradeoffCurve::ToJson() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : points) {
    nlohmann::json row = p.abstention.ToJson();
    if (p.metrics) row["metrics"] = p.metrics->ToJson();
    rows.push_back(row);
  }
  return {{"alphas", alphas},
          {"gamma_k_mode", GammaKModeName(gamma_k_mode)},
          {"mixture", mixture.ToJson()},
          {"points", rows}};
}

PredictionSetModel FitMethod(Method method, const Dataset& train, const Dataset& test,
                             const LearnerConfig& learner, std::uint64_t seed) {
  switch (method) {
    case Method::kBcops:
      return FitBcops(train, test, learner, seed);
    case Method::kDls:
      return FitDls(train, seed);
    case Method::kIrs:
      return FitIrs(train, learner, seed);
  }
  throw InputError("unknown method");
}

TradeoffCurve ComputeTradeoffCurve(const Dataset& train, const Dataset& test,
                                   const CurveOptions& options,
                                   std::optional<std::span<const ClassId>> truth) {
  for (double a : options.alphas) {
    if (!(a > 0.0 && a < 1.0)) throw InputError("curve alphas must lie in (0, 1)");
  }
  const PredictionSetModel model =
      FitMethod(options.method, train, test, options.learner, options.seed);
  const MixtureEstimate mixture =
      MixEstimate(train, test, options.zeta, options.learner,
                  DeriveSeed(options.seed, {kTagMixEstimate}));
  return EvaluateCurve(model, train, test, mixture, options.alphas, truth, options.gamma_k_mode);
}

double OutlierScore(const RankVector& ranks, std::span<const double> alphas,
                    std::span<const double> gamma_curve) {
  if (alphas.empty()) throw InputError("empty alpha grid");
  if (alphas.size() != gamma_curve.size()) throw InputError("gamma curve misaligned with grid");
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (i > 0 && !(alphas[i] > alphas[i - 1])) throw InputError("alpha grid must ascend");
    if (EmptyAt(ranks, alphas[i])) return gamma_curve[i];
  }
  return 0.0;
}

double OutlierScore(const PredictionSetModel& model, std::span<const double> x,
                    std::optional<int> fold, std::span<const double> alphas,
                    std::span<const double> gamma_curve) {
  return OutlierScore(model.Ranks(x, fold), alphas, gamma_curve);
}

}  // namespace bcops
