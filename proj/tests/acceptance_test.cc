// Acceptance suite. Usage: bcops_acceptance <path-to-bcops-cli>
// Prints one PASS/FAIL line per criterion; exits non-zero if any fails.

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "bcops/conformal.h"
#include "bcops/evalkit.h"
#include "bcops/methods.h"
#include "bcops/mixshift.h"
#include "bcops/random.h"
#include "bcops/simulate.h"

namespace bcops {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string Fixed(double v, int digits = 3) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

LearnerConfig Glm() {
  LearnerConfig config;
  config.kind = LearnerKind::kLogistic;
  return config;
}

LearnerConfig Forest(int trees = 100) {
  LearnerConfig config;
  config.num_trees = trees;
  return config;
}

MetricsReport RunAt(Method method, const SimulatedData& sim, const LearnerConfig& learner,
                    std::uint64_t seed, double alpha) {
  const PredictionSetModel model = FitMethod(method, sim.train, sim.test, learner, seed);
  std::vector<PredictionSet> sets;
  for (const RankVector& r : model.RankTestSet(sim.test)) sets.push_back(ApplyAlpha(r, alpha));
  return RealizedMetrics(sets, sim.truth, sim.train.class_count);
}

constexpr Method kMethods[] = {Method::kBcops, Method::kDls, Method::kIrs};

Outcome Coverage() {
  constexpr int kSeeds = 200;
  Outcome out;
  for (Method method : kMethods) {
    double cov[2] = {0.0, 0.0};
    for (int s = 0; s < kSeeds; ++s) {
      const auto seed = static_cast<std::uint64_t>(10000 + s);
      const MetricsReport report = RunAt(method, GenerateTwoClassSim(seed), Glm(), seed, 0.05);
      for (int k = 0; k < 2; ++k) cov[k] += report.classes[k].coverage / kSeeds;
    }
    out.pass = out.pass && cov[0] >= 0.94 && cov[1] >= 0.94;
    out.detail += MethodName(method) + " (" + Fixed(cov[0]) + ", " + Fixed(cov[1]) + ") ";
  }
  return out;
}

Outcome TableMedians() {
  constexpr int kSeeds = 20;
  std::vector<double> abstention[3], accuracy[3];
  for (int s = 0; s < kSeeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(20000 + s);
    const SimulatedData sim = GenerateTwoClassSim(seed);
    for (int m = 0; m < 3; ++m) {
      const MetricsReport report = RunAt(kMethods[m], sim, Forest(), seed, 0.05);
      abstention[m].push_back(report.realized_gamma);
      accuracy[m].push_back(report.accuracy);
    }
  }
  double abst[3], acc[3];
  Outcome out;
  for (int m = 0; m < 3; ++m) {
    abst[m] = Median(abstention[m]);
    acc[m] = Median(accuracy[m]);
    out.detail += MethodName(kMethods[m]) + " abst " + Fixed(abst[m]) + " acc " + Fixed(acc[m]) + "; ";
  }
  const double bcops_abst = abst[0], dls_abst = abst[1], irs_abst = abst[2];
  out.pass = bcops_abst >= 0.70 && bcops_abst <= 0.95 && acc[0] >= 0.90 &&
             irs_abst <= 0.40 && acc[2] >= 0.88 &&
             dls_abst >= 0.30 && dls_abst <= 0.65 && acc[1] <= 0.75 &&
             bcops_abst > dls_abst && dls_abst > irs_abst && acc[0] > acc[1];
  return out;
}

Outcome MixtureConsistency() {
  constexpr int kSeeds = 20;
  double gap[2] = {0.0, 0.0};
  double mean_pi[2] = {0.0, 0.0};
  std::vector<double> control;
  for (int s = 0; s < kSeeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(30000 + s);
    const SimulatedData sim = GenerateTwoClassSim(seed);
    const MixtureEstimate est = MixEstimate(sim.train, sim.test, kDefaultZeta, Forest(), seed);
    for (int k = 0; k < 2; ++k) {
      gap[k] += std::abs(est.pi[k] - 1.0 / 3.0) / kSeeds;
      mean_pi[k] += est.pi[k] / kSeeds;
    }

    Rng rng(DeriveSeed(seed, {kTagSimulation}));
    std::uniform_int_distribution<std::size_t> pick(0, sim.train.size() - 1);
    std::vector<std::size_t> rows(sim.train.size());
    for (std::size_t& r : rows) r = pick(rng);
    Dataset boot = Subset(sim.train, rows);
    boot.labels.reset();
    control.push_back(MixEstimate(sim.train, boot, kDefaultZeta, Forest(), seed).epsilon);
  }
  const double worst = *std::max_element(control.begin(), control.end());
  Outcome out;
  out.pass = gap[0] <= 0.06 && gap[1] <= 0.06 && worst <= 0.05;
  out.detail = "mean |pi-1/3| (" + Fixed(gap[0]) + ", " + Fixed(gap[1]) + "), mean pi (" +
               Fixed(mean_pi[0]) + ", " + Fixed(mean_pi[1]) + "); no-shift eps max " +
               Fixed(worst) + " over " + std::to_string(kSeeds) + " bootstraps";
  return out;
}

Outcome CurveTracking() {
  constexpr int kSeeds = 5;
  Outcome out;
  for (int s = 0; s < kSeeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(40000 + s);
    const SimulatedData sim = GenerateTwoClassSim(seed);
    CurveOptions options;
    options.learner = Forest();
    options.alphas = AlphaGrid(0.01, 0.99, 0.01);
    options.seed = seed;
    const TradeoffCurve curve =
        ComputeTradeoffCurve(sim.train, sim.test, options, std::span<const ClassId>(sim.truth));
    double gamma_gap = 0.0, flr_gap = 0.0;
    for (const TradeoffPoint& p : curve.points) {
      gamma_gap += std::abs(p.abstention.gamma_hat - *p.abstention.realized_gamma);
      flr_gap += std::abs(p.abstention.flr_hat - *p.abstention.flp);
    }
    gamma_gap /= static_cast<double>(curve.points.size());
    flr_gap /= static_cast<double>(curve.points.size());
    out.pass = out.pass && gamma_gap <= 0.10 && flr_gap <= 0.10;
    out.detail += "(" + Fixed(gamma_gap) + ", " + Fixed(flr_gap) + ") ";
  }
  out.detail = "per-seed mean gaps (gamma, flr): " + out.detail;
  return out;
}

bool RankUniformity(double* p_value) {
  constexpr std::size_t m = 19;
  constexpr int kReplicates = 10000;
  Rng rng(50000);
  std::uniform_real_distribution<double> unit;
  std::vector<int> hits(m + 1, 0);
  std::vector<double> calib(m);
  for (int r = 0; r < kReplicates; ++r) {
    for (double& z : calib) z = unit(rng);
    std::sort(calib.begin(), calib.end());
    ++hits[ConformalCount(unit(rng), calib) - 1];
  }
  const double expected = static_cast<double>(kReplicates) / (m + 1);
  double stat = 0.0;
  for (int h : hits) stat += (h - expected) * (h - expected) / expected;
  *p_value = boost::math::cdf(
      boost::math::complement(boost::math::chi_squared(static_cast<double>(m)), stat));
  return *p_value > 0.001;
}

bool Nested() {
  const SimulatedData sim = GenerateTwoClassSim(50001);
  const std::vector<double> grid = AlphaGrid(0.01, 0.99, 0.01);
  for (Method method : kMethods) {
    const PredictionSetModel model = FitMethod(method, sim.train, sim.test, Glm(), 50001);
    for (const RankVector& r : model.RankTestSet(sim.test)) {
      std::vector<ClassId> previous = {1, 2};
      for (double alpha : grid) {
        const std::vector<ClassId> members = ApplyAlpha(r, alpha).members;
        if (!std::includes(previous.begin(), previous.end(), members.begin(), members.end())) {
          return false;
        }
        previous = members;
      }
    }
  }
  return true;
}

Dataset RandomClasses(const std::vector<std::size_t>& sizes, std::size_t p, Rng& rng,
                      bool labeled) {
  std::normal_distribution<double> normal;
  Matrix features(0, p);
  std::vector<ClassId> labels;
  std::vector<double> row(p);
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    for (std::size_t i = 0; i < sizes[k]; ++i) {
      for (std::size_t j = 0; j < p; ++j) row[j] = normal(rng) + (j == 0 ? 1.5 * k : 0.0);
      features.AppendRow(row);
      labels.push_back(static_cast<ClassId>(k + 1));
    }
  }
  if (!labeled) return MakeDataset(std::move(features), std::nullopt, 2);
  return MakeDataset(std::move(features), std::move(labels), static_cast<int>(sizes.size()));
}

// Refits on every augmented class and counts directly, without the library's
// sorted-calibration path.
bool FullConformalBruteForce(int* instances) {
  Rng rng(50002);
  std::uniform_int_distribution<std::size_t> class_size(1, 5), test_size(3, 8);
  const LearnerConfig learners[] = {Glm(), Forest(10)};
  *instances = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const LearnerConfig& learner = learners[trial % 2];
    const BinaryFitter fitter = LearnerFitter(learner);
    const Dataset train = RandomClasses({class_size(rng), class_size(rng)}, 2, rng, true);
    const Dataset test = RandomClasses({test_size(rng)}, 2, rng, false);
    const auto seed = static_cast<std::uint64_t>(trial);
    for (std::size_t xi = 0; xi < test.size(); ++xi) {
      std::vector<std::size_t> rest_rows;
      for (std::size_t i = 0; i < test.size(); ++i) {
        if (i != xi) rest_rows.push_back(i);
      }
      const Dataset rest = Subset(test, rest_rows);
      std::vector<double> ranks;
      std::vector<std::size_t> counts;
      for (ClassId k = 1; k <= 2; ++k) {
        Dataset augmented = ClassSubset(train, k);
        augmented.features.AppendRow(test.row(xi));
        augmented.labels->push_back(k);
        const auto score =
            fitter(augmented, rest, DeriveSeed(seed, {kTagLearner, static_cast<std::uint64_t>(k)}));
        const double vx = score->Score(test.row(xi));
        std::size_t count = 0;
        for (std::size_t i = 0; i < augmented.size(); ++i) {
          count += score->Score(augmented.row(i)) <= vx ? 1 : 0;
        }
        counts.push_back(count);
        ranks.push_back(static_cast<double>(count) / static_cast<double>(augmented.size()));
      }
      for (int a = 0; a <= 20; ++a) {
        const double alpha = a / 20.0;
        const PredictionSet set = BcopsFullConformal(train, test, xi, fitter, alpha, seed);
        std::vector<ClassId> expected;
        for (ClassId k = 1; k <= 2; ++k) {
          const std::size_t n = ClassRows(train, k).size() + 1;
          const auto needed = static_cast<std::size_t>(n * a / 20);
          if (counts[k - 1] >= needed) expected.push_back(k);
        }
        if (set.members != expected || set.ranks != ranks) return false;
      }
      ++*instances;
    }
  }
  return true;
}

Outcome ConformalPrimitives() {
  double p_value = 0.0;
  int instances = 0;
  const bool uniform = RankUniformity(&p_value);
  const bool nested = Nested();
  const bool full = FullConformalBruteForce(&instances);
  Outcome out;
  out.pass = uniform && nested && full;
  out.detail = "chi-square p " + Fixed(p_value, 4) + ", nested " + (nested ? "yes" : "no") +
               ", full conformal exact on " + std::to_string(instances) + " queries " +
               (full ? "yes" : "no");
  return out;
}

double Objective(const DesignSystem& s, double a, double b) {
  double total = 0.0;
  for (std::size_t l = 0; l < 2; ++l) {
    const double r = s.response[l] - s.design(l, 0) * a - s.design(l, 1) * b;
    total += r * r;
  }
  return total;
}

Outcome Solver() {
  Rng rng(60000);
  std::uniform_real_distribution<double> unit;
  double worst = 0.0;
  bool feasible = true;
  for (int trial = 0; trial < 100; ++trial) {
    DesignSystem s;
    s.design = Matrix(2, 2, {0.6 + 0.4 * unit(rng), 0.3 * unit(rng), 0.3 * unit(rng),
                             0.6 + 0.4 * unit(rng)});
    s.response = {1.2 * unit(rng) - 0.1, 1.2 * unit(rng) - 0.1};
    s.empty_region = {false, false};
    const std::vector<double> pi = SolveConstrainedLeastSquares(s).pi;
    int best_i = 0, best_j = 0;
    double best = Objective(s, 0.0, 0.0);
    for (int i = 0; i <= 1000; ++i) {
      for (int j = 0; i + j <= 1000; ++j) {
        const double v = Objective(s, i / 1000.0, j / 1000.0);
        if (v < best) {
          best = v;
          best_i = i;
          best_j = j;
        }
      }
    }
    worst = std::max({worst, std::abs(pi[0] - best_i / 1000.0), std::abs(pi[1] - best_j / 1000.0)});
    feasible = feasible && pi[0] >= 0.0 && pi[1] >= 0.0 && pi[0] + pi[1] <= 1.0;
  }
  Outcome out;
  out.pass = worst <= 2e-3 && feasible;
  out.detail = "max sup-norm gap " + Fixed(worst, 5) + ", feasible " + (feasible ? "yes" : "no");
  return out;
}

bool Run(const std::string& command) { return std::system(command.c_str()) == 0; }

// Runs a full CLI session with relative paths inside `dir`.
bool CliSession(const std::string& cli, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string cd = "cd '" + dir.string() + "' && '" + cli + "' ";
  const std::string quiet = " > /dev/null 2>&1";
  const std::string data = " --train sim/train.csv --test sim/test.csv --label-col label";
  return Run(cd + "simulate --seed 7 --out sim" + quiet) &&
         Run(cd + "fit-predict" + data + " --method bcops --trees 30 --alpha 0.05 --seed 7 --out bcops" +
             quiet) &&
         Run(cd + "fit-predict" + data + " --method irs --learner glm --alpha 0.1 --seed 7 --out irs" +
             quiet) &&
         Run(cd + "fit-predict" + data + " --method dls --alpha 0.1 --seed 7 --out dls" + quiet) &&
         Run(cd + "predict --model bcops/model.json --test sim/test.csv --label-col label" +
             " --alpha 0.2 --seed 7 --out predict" + quiet) &&
         Run(cd + "mix-estimate" + data + " --trees 30 --seed 7 --out mix" + quiet) &&
         Run(cd + "curve" + data + " --trees 30 --alpha-grid 0.05:0.95:0.05 --seed 7 --out curve" +
             quiet) &&
         Run(cd + "evaluate --sets bcops/sets.csv --test sim/test.csv --label-col label --seed 7" +
             " --out evaluate" + quiet);
}

std::string ReadAll(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome Determinism(const std::string& cli) {
  Outcome out;
  const fs::path root = fs::temp_directory_path() / ("bcops_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const fs::path first = root / "a", second = root / "b";
  if (!CliSession(cli, first) || !CliSession(cli, second)) {
    out.pass = false;
    out.detail = "CLI session failed";
    fs::remove_all(root);
    return out;
  }
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(first)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const fs::path twin = second / fs::relative(entry.path(), first);
    if (!fs::exists(twin) || ReadAll(entry.path()) != ReadAll(twin)) ++differing;
  }
  std::size_t second_files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(second)) {
    second_files += entry.is_regular_file() ? 1 : 0;
  }
  out.pass = differing == 0 && files == second_files && files > 0;
  out.detail = std::to_string(files) + " files, " + std::to_string(differing) + " differ";
  fs::remove_all(root);
  return out;
}

}  // namespace
}  // namespace bcops

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <bcops-cli>\n", argv[0]);
    return 2;
  }
  const std::string cli = std::filesystem::absolute(argv[1]).string();
  struct Criterion {
    const char* name;
    std::function<bcops::Outcome()> run;
  };
  const Criterion criteria[] = {
      {"1 coverage", bcops::Coverage},
      {"2 rf medians", bcops::TableMedians},
      {"3 mixture", bcops::MixtureConsistency},
      {"4 curve tracking", bcops::CurveTracking},
      {"5 conformal primitives", bcops::ConformalPrimitives},
      {"6 solver", bcops::Solver},
      {"7 determinism", [&] { return bcops::Determinism(cli); }},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    bcops::Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s [%s] %s (%.1fs)\n", outcome.pass ? "PASS" : "FAIL", c.name,
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
