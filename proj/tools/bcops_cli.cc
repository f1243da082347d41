#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bcops/csv.h"
#include "bcops/errors.h"
#include "bcops/evalkit.h"
#include "bcops/methods.h"
#include "bcops/mixshift.h"
#include "bcops/random.h"
#include "bcops/simulate.h"
#include "bcops/version.h"
#include "json.hpp"

namespace bcops {
namespace {

constexpr int kExitInputError = 2;
constexpr int kExitComputeError = 3;

struct RunConfig {
  std::string subcommand;
  std::string method = "bcops";
  std::string learner = "rf";
  int trees = 100;
  double lambda = 1e-3;
  double l1 = 0.0;
  double alpha = 0.05;
  double zeta = kDefaultZeta;
  std::string alpha_grid = "0.01:0.99:0.01";
  std::string gamma_k_mode = "held-fold";
  std::uint64_t seed = 0;
  std::string train;
  std::string test;
  std::string model;
  std::string sets;
  std::string label_col = "label";
  std::string out = ".";
  bool variance_parameterization = false;

  LearnerConfig Learner() const {
    LearnerConfig config;
    config.kind = ParseLearnerKind(learner);
    config.num_trees = trees;
    config.l2 = lambda;
    config.l1 = l1;
    config.seed = seed;
    config.Validate();
    return config;
  }

  nlohmann::json ToJson() const {
    nlohmann::json j = {{"subcommand", subcommand}, {"seed", seed}, {"out", out}};
    const auto& s = subcommand;
    if (s != "simulate" && s != "evaluate") {
      j["learner"] = Learner().ToJson();
    }
    if (s == "fit" || s == "fit-predict" || s == "curve") j["method"] = method;
    if (s == "fit-predict" || s == "predict") j["alpha"] = alpha;
    if (s == "mix-estimate" || s == "curve") j["zeta"] = zeta;
    if (s == "curve") {
      j["alpha_grid"] = alpha_grid;
      j["gamma_k_mode"] = gamma_k_mode;
    }
    if (s == "simulate") j["variance_parameterization"] = variance_parameterization;
    if (!train.empty()) j["train"] = train;
    if (!test.empty()) j["test"] = test;
    if (!model.empty()) j["model"] = model;
    if (!sets.empty()) j["sets"] = sets;
    if (s != "simulate") j["label_col"] = label_col;
    return j;
  }
};

std::vector<std::string> ProvenanceLines(const RunConfig& config) {
  return {"bcops " + std::string(kVersion), "config " + config.ToJson().dump()};
}

nlohmann::json Envelope(const RunConfig& config) {
  return {{"version", kVersion}, {"seed", config.seed}, {"config", config.ToJson()}};
}

std::filesystem::path OutPath(const RunConfig& config, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(config.out, ec);
  if (ec) throw InputError("cannot create output directory '" + config.out + "'");
  return std::filesystem::path(config.out) / name;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

void WriteJson(const std::filesystem::path& path, const nlohmann::json& j) {
  WriteText(path, j.dump(2) + "\n");
}

std::string CommentBlock(const RunConfig& config) {
  std::string block;
  for (const auto& line : ProvenanceLines(config)) block += "# " + line + "\n";
  return block;
}

void RequireFile(const std::string& path, const std::string& flag) {
  if (path.empty()) throw InputError(flag + " is required");
  if (!std::filesystem::is_regular_file(path)) {
    throw InputError(flag + " '" + path + "' is not a readable file");
  }
}

Dataset LoadTrain(const RunConfig& config) {
  RequireFile(config.train, "--train");
  CsvReadOptions options;
  options.label_column = config.label_col;
  Dataset train = LoadCsv(config.train, options);
  RequireTrainingLabels(train);
  return train;
}

// Test features plus ground truth when the label column is present.
struct TestData {
  Dataset features;
  std::optional<std::vector<ClassId>> truth;
};

TestData LoadTest(const RunConfig& config, const std::vector<std::string>& class_names) {
  RequireFile(config.test, "--test");
  CsvReadOptions options;
  options.label_column = config.label_col;
  options.label_column_optional = true;
  options.vocabulary = class_names;
  TestData data;
  data.features = LoadCsv(config.test, options);
  if (data.features.labels) {
    data.truth = std::move(*data.features.labels);
    data.features.labels.reset();
  }
  return data;
}

void CheckOpenUnit(double value, const std::string& name) {
  if (!(value > 0.0 && value < 1.0)) throw InputError(name + " must lie in (0, 1)");
}

std::string SetsCsv(const RunConfig& config, const std::vector<PredictionSet>& sets,
                    const std::vector<std::string>& class_names) {
  std::ostringstream out;
  out << CommentBlock(config);
  out << "row,set";
  for (const auto& name : class_names) out << ",s_" << name;
  out << ",alpha\n";
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto& set = sets[i];
    out << i << ',';
    for (std::size_t m = 0; m < set.members.size(); ++m) {
      if (m > 0) out << ';';
      out << class_names[static_cast<std::size_t>(set.members[m] - 1)];
    }
    for (double s : set.ranks) out << ',' << FormatDouble(s);
    out << ',' << FormatDouble(set.alpha) << '\n';
  }
  return out.str();
}

void EmitPredictions(const RunConfig& config, const std::vector<PredictionSet>& sets,
                     const std::vector<std::string>& class_names,
                     const std::optional<std::vector<ClassId>>& truth) {
  WriteText(OutPath(config, "sets.csv"), SetsCsv(config, sets, class_names));
  if (truth) {
    const auto report = RealizedMetrics(sets, *truth, static_cast<int>(class_names.size()));
    nlohmann::json j = Envelope(config);
    j["metrics"] = report.ToJson();
    j["class_names"] = class_names;
    WriteJson(OutPath(config, "metrics.json"), j);
  }
}

PredictionSetModel LoadModel(const std::string& path) {
  RequireFile(path, "--model");
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("cannot parse model '" + path + "': " + e.what());
  }
  if (!j.contains("model")) throw InputError("'" + path + "' is not a model file");
  return PredictionSetModel::FromJson(j.at("model"));
}

void WriteModel(const RunConfig& config, const PredictionSetModel& model) {
  nlohmann::json j = Envelope(config);
  j["model"] = model.ToJson();
  WriteJson(OutPath(config, "model.json"), j);
}

std::vector<PredictionSet> PredictAll(const PredictionSetModel& model, const Dataset& test,
                                      double alpha) {
  std::vector<PredictionSet> sets;
  for (const auto& ranks : model.RankTestSet(test)) sets.push_back(ApplyAlpha(ranks, alpha));
  return sets;
}

void RunSimulate(const RunConfig& config) {
  const SimulatedData sim = GenerateTwoClassSim(config.seed, config.variance_parameterization);
  const auto comments = ProvenanceLines(config);
  SaveCsv(sim.train, OutPath(config, "train.csv").string(), "label", comments);
  SaveCsv(sim.LabeledTest(), OutPath(config, "test.csv").string(), "label", comments);
}

void RunFit(const RunConfig& config, bool predict) {
  CheckAlpha(config.alpha);
  const Dataset train = LoadTrain(config);
  const TestData test = LoadTest(config, train.class_names);
  const LearnerConfig learner = config.Learner();
  if (config.method == "bcops-full") {
    if (!predict) throw InputError("bcops-full keeps no model; use fit-predict");
    std::vector<PredictionSet> sets;
    for (std::size_t i = 0; i < test.features.size(); ++i) {
      sets.push_back(BcopsFullConformal(train, test.features, i, learner, config.alpha, config.seed));
    }
    EmitPredictions(config, sets, train.class_names, test.truth);
    return;
  }
  const PredictionSetModel model =
      FitMethod(ParseMethod(config.method), train, test.features, learner, config.seed);
  WriteModel(config, model);
  if (predict) {
    EmitPredictions(config, PredictAll(model, test.features, config.alpha), train.class_names,
                    test.truth);
  }
}

void RunPredict(const RunConfig& config) {
  CheckAlpha(config.alpha);
  const PredictionSetModel model = LoadModel(config.model);
  const TestData test = LoadTest(config, model.class_names);
  EmitPredictions(config, PredictAll(model, test.features, config.alpha), model.class_names,
                  test.truth);
}

void RunMixEstimate(const RunConfig& config) {
  CheckOpenUnit(config.zeta, "--zeta");
  const Dataset train = LoadTrain(config);
  const TestData test = LoadTest(config, train.class_names);
  const MixtureEstimate mixture = MixEstimate(train, test.features, config.zeta, config.Learner(),
                                              DeriveSeed(config.seed, {kTagMixEstimate}));
  nlohmann::json j = Envelope(config);
  j["class_names"] = train.class_names;
  j["mixture"] = mixture.ToJson();
  WriteJson(OutPath(config, "mix.json"), j);
}

void RunCurve(const RunConfig& config) {
  CheckOpenUnit(config.zeta, "--zeta");
  const std::vector<double> alphas = ParseAlphaGrid(config.alpha_grid);
  for (double a : alphas) CheckOpenUnit(a, "every --alpha-grid value");
  const GammaKMode mode = ParseGammaKMode(config.gamma_k_mode);
  const Dataset train = LoadTrain(config);
  const TestData test = LoadTest(config, train.class_names);
  const LearnerConfig learner = config.Learner();

  PredictionSetModel model;
  if (!config.model.empty()) {
    model = LoadModel(config.model);
    if (model.class_names != train.class_names) {
      throw InputError("model classes differ from the training data");
    }
  } else {
    if (config.method == "bcops-full") throw InputError("curve does not support bcops-full");
    model = FitMethod(ParseMethod(config.method), train, test.features, learner, config.seed);
  }
  const MixtureEstimate mixture = MixEstimate(train, test.features, config.zeta, learner,
                                              DeriveSeed(config.seed, {kTagMixEstimate}));
  std::optional<std::span<const ClassId>> truth;
  if (test.truth) truth = std::span<const ClassId>(*test.truth);
  const TradeoffCurve curve =
      EvaluateCurve(model, train, test.features, mixture, alphas, truth, mode);

  WriteText(OutPath(config, "curve.csv"), CommentBlock(config) + curve.ToCsv());
  nlohmann::json j = Envelope(config);
  j["method"] = MethodName(model.method);
  j["class_names"] = train.class_names;
  j["curve"] = curve.ToJson();
  WriteJson(OutPath(config, "curve.json"), j);
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

void RunEvaluate(const RunConfig& config) {
  RequireFile(config.sets, "--sets");
  std::ifstream in(config.sets);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = SplitCsvLine(line);
    break;
  }
  if (header.size() < 4 || header[0] != "row" || header[1] != "set" || header.back() != "alpha") {
    throw InputError("'" + config.sets + "' is not a prediction-set file");
  }
  std::vector<std::string> class_names;
  std::map<std::string, ClassId> ids;
  for (std::size_t c = 2; c + 1 < header.size(); ++c) {
    if (header[c].rfind("s_", 0) != 0) throw InputError("unexpected column '" + header[c] + "'");
    class_names.push_back(header[c].substr(2));
    ids[class_names.back()] = static_cast<ClassId>(class_names.size());
  }

  std::vector<PredictionSet> sets;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != header.size()) throw InputError("ragged row in '" + config.sets + "'");
    PredictionSet set;
    std::stringstream members(cells[1]);
    std::string name;
    while (std::getline(members, name, ';')) {
      const auto it = ids.find(name);
      if (it == ids.end()) throw InputError("unknown class '" + name + "' in prediction sets");
      set.members.push_back(it->second);
    }
    try {
      for (std::size_t c = 2; c + 1 < cells.size(); ++c) set.ranks.push_back(std::stod(cells[c]));
      set.alpha = std::stod(cells.back());
    } catch (const std::exception&) {
      throw InputError("non-numeric rank in '" + config.sets + "'");
    }
    sets.push_back(std::move(set));
  }

  const TestData test = LoadTest(config, class_names);
  if (!test.truth) throw InputError("--test has no '" + config.label_col + "' column");
  if (test.truth->size() != sets.size()) throw InputError("--sets and --test differ in length");
  const auto report = RealizedMetrics(sets, *test.truth, static_cast<int>(class_names.size()));
  nlohmann::json j = Envelope(config);
  j["metrics"] = report.ToJson();
  j["class_names"] = class_names;
  WriteJson(OutPath(config, "metrics.json"), j);
}

int Main(int argc, char** argv) {
  RunConfig config;
  CLI::App app{"Conformal prediction sets under distribution shift with outliers"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  auto add_seed_out = [&](CLI::App* cmd) {
    cmd->add_option("--seed", config.seed, "Run seed");
    cmd->add_option("--out", config.out, "Output directory");
  };
  auto add_data = [&](CLI::App* cmd, bool test) {
    cmd->add_option("--train", config.train, "Labeled training CSV")->required();
    if (test) cmd->add_option("--test", config.test, "Test CSV")->required();
    cmd->add_option("--label-col", config.label_col, "Label column name");
  };
  auto add_learner = [&](CLI::App* cmd) {
    cmd->add_option("--learner", config.learner, "rf | glm")
        ->check(CLI::IsMember({"rf", "glm"}));
    cmd->add_option("--trees", config.trees, "Random forest size");
    cmd->add_option("--lambda", config.lambda, "Logistic L2 penalty");
    cmd->add_option("--l1", config.l1, "Logistic L1 penalty");
  };
  auto add_method = [&](CLI::App* cmd, bool full) {
    std::vector<std::string> methods{"bcops", "dls", "irs"};
    if (full) methods.push_back("bcops-full");
    cmd->add_option("--method", config.method, "Prediction set method")
        ->check(CLI::IsMember(methods));
  };

  auto* simulate = app.add_subcommand("simulate", "Write the two-class simulation as train/test CSVs");
  simulate->add_flag("--variance", config.variance_parameterization,
                     "Read the class-2 spread of 0.5 as a variance");
  add_seed_out(simulate);

  auto* fit = app.add_subcommand("fit", "Fit and store a model");
  add_data(fit, true);
  add_method(fit, false);
  add_learner(fit);
  add_seed_out(fit);

  auto* fit_predict = app.add_subcommand("fit-predict", "Fit, then predict the test set");
  add_data(fit_predict, true);
  add_method(fit_predict, true);
  add_learner(fit_predict);
  fit_predict->add_option("--alpha", config.alpha, "Miscoverage level");
  add_seed_out(fit_predict);

  auto* predict = app.add_subcommand("predict", "Predict with a stored model");
  predict->add_option("--model", config.model, "model.json")->required();
  predict->add_option("--test", config.test, "Test CSV")->required();
  predict->add_option("--label-col", config.label_col, "Label column name");
  predict->add_option("--alpha", config.alpha, "Miscoverage level");
  add_seed_out(predict);

  auto* mix = app.add_subcommand("mix-estimate", "Estimate test mixture proportions");
  add_data(mix, true);
  add_learner(mix);
  mix->add_option("--zeta", config.zeta, "Left-out mass of the high-density regions");
  add_seed_out(mix);

  auto* curve = app.add_subcommand("curve", "Abstention and false-labeling curves over alpha");
  add_data(curve, true);
  add_method(curve, false);
  add_learner(curve);
  curve->add_option("--model", config.model, "Reuse a stored model instead of fitting");
  curve->add_option("--zeta", config.zeta, "Left-out mass of the high-density regions");
  curve->add_option("--alpha-grid", config.alpha_grid, "lo:hi:step");
  curve->add_option("--gamma-k-mode", config.gamma_k_mode, "held-fold | in-sample")
      ->check(CLI::IsMember({"held-fold", "in-sample"}));
  add_seed_out(curve);

  auto* evaluate = app.add_subcommand("evaluate", "Score a sets.csv against ground truth");
  evaluate->add_option("--sets", config.sets, "sets.csv")->required();
  evaluate->add_option("--test", config.test, "Test CSV with a truth column")->required();
  evaluate->add_option("--label-col", config.label_col, "Label column name");
  add_seed_out(evaluate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInputError;
  }

  try {
    if (simulate->parsed()) {
      config.subcommand = "simulate";
      RunSimulate(config);
    } else if (fit->parsed()) {
      config.subcommand = "fit";
      RunFit(config, false);
    } else if (fit_predict->parsed()) {
      config.subcommand = "fit-predict";
      RunFit(config, true);
    } else if (predict->parsed()) {
      config.subcommand = "predict";
      RunPredict(config);
    } else if (mix->parsed()) {
      config.subcommand = "mix-estimate";
      RunMixEstimate(config);
    } else if (curve->parsed()) {
      config.subcommand = "curve";
      RunCurve(config);
    } else if (evaluate->parsed()) {
      config.subcommand = "evaluate";
      RunEvaluate(config);
    }
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const ComputeError& e) {
    std::cerr << "compute failure: " << e.what() << "\n";
    return kExitComputeError;
  } catch (const std::exception& e) {
    std::cerr << "compute failure: " << e.what() << "\n";
    return kExitComputeError;
  }
  return 0;
}

}  // namespace
}  // namespace bcops

int main(int argc, char** argv) { return bcops::Main(argc, argv); }
