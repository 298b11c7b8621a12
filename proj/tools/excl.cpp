#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "excl/commands.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int fail(const char* kind, const std::string& what, int code) {
  std::string msg = what;
  for (char& c : msg)
    if (c == '\n' || c == '\r') c = ' ';
  std::cerr << "excl: error[" << kind << "]: " << msg << '\n';
  return code;
}

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw excl::ConfigError("--thresholds: '" + item + "' is not a number");
    }
  }
  return out;
}

excl::RunConfig load_run_config(const std::string& path) {
  excl::RunConfig cfg = excl::RunConfig::load(path);
  if (const char* env = std::getenv("EXCL_SEED")) {
    try {
      std::size_t used = 0;
      cfg.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw excl::ConfigError(std::string("EXCL_SEED must be a nonnegative integer (got '") + env + "')");
    }
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ExCL temporal span localization"};
  app.require_subcommand(1);

  std::string config, train_ann, val_ann, ann, features, out, checkpoint, thresholds, pred;
  double eps = 1e-4;
  double fps = 5.0;

  auto* train = app.add_subcommand("train", "Train a model and keep the best checkpoint");
  train->add_option("--config", config, "Run config (JSON)")->required();
  train->add_option("--train-ann", train_ann, "Training annotations (JSON lines)")->required();
  train->add_option("--val-ann", val_ann, "Validation annotations (JSON lines)")->required();
  train->add_option("--features", features, "Feature directory")->required();
  train->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Print R@1 for a checkpoint");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--ann", ann)->required();
  eval->add_option("--features", features)->required();
  eval->add_option("--thresholds", thresholds, "Comma-separated IoU thresholds");
  eval->add_option("--out", out, "Also write the JSON metrics here");

  auto* predict = app.add_subcommand("predict", "Write predicted spans as JSON lines");
  predict->add_option("--checkpoint", checkpoint)->required();
  predict->add_option("--ann", ann)->required();
  predict->add_option("--features", features)->required();
  predict->add_option("--out", out)->required();

  auto* score = app.add_subcommand("score", "R@1 of a predictions file");
  score->add_option("--pred", pred)->required();
  score->add_option("--ann", ann)->required();
  score->add_option("--features", features)->required();
  score->add_option("--fps", fps);
  score->add_option("--thresholds", thresholds);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--config", config, "Synthetic config (JSON); defaults when omitted");
  synth->add_option("--out", out)->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every variant");
  gradcheck->add_option("--eps", eps);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kUsage);
  }

  try {
    if (*train) {
      const auto cfg = load_run_config(config);
      const auto res = excl::cmd_train(cfg, train_ann, val_ann, features, out, &std::cerr);
      std::cout << "best epoch " << res.best.epoch << " R@1[" << cfg.early_stop_iou << "] " << res.best.best_metric
                << " checkpoint " << (fs::path(out) / "best.ckpt").string() << '\n';
    } else if (*eval) {
      std::optional<std::vector<double>> th;
      if (!thresholds.empty()) th = parse_thresholds(thresholds);
      const auto rep = excl::cmd_eval(checkpoint, ann, features, th);
      std::cout << rep.table << rep.json << '\n';
      if (!out.empty()) {
        std::ofstream os(out);
        if (!os) throw excl::DataError("cannot write " + out);
        os << rep.json << '\n';
      }
    } else if (*predict) {
      const auto preds = excl::cmd_predict(checkpoint, ann, features, out);
      std::cout << "wrote " << preds.size() << " predictions to " << out << '\n';
    } else if (*score) {
      excl::EvalConfig cfg;
      cfg.fps = fps;
      if (!thresholds.empty()) cfg.thresholds = parse_thresholds(thresholds);
      const auto r = excl::cmd_score(pred, ann, features, cfg);
      for (std::size_t k = 0; k < r.size(); ++k) std::cout << "R@1 IoU=" << cfg.thresholds[k] << ' ' << r[k] << '\n';
    } else if (*synth) {
      const auto cfg = config.empty() ? excl::SynthConfig{} : excl::load_synth_config(config);
      const auto split = excl::cmd_synth(cfg, out);
      std::cout << "train " << split.train.size() << " val " << split.val.size() << " test " << split.test.size()
                << '\n';
    } else if (*gradcheck) {
      const auto rep = excl::cmd_gradcheck(eps);
      std::cout << rep.text;
      if (!rep.passed) return kNumeric;
    }
  } catch (const excl::ConfigError& e) {
    return fail("config", e.what(), kUsage);
  } catch (const excl::NumericError& e) {
    return fail("numeric", e.what(), kNumeric);
  } catch (const excl::DataError& e) {
    return fail("data", e.what(), kData);
  } catch (const excl::ShapeError& e) {
    return fail("data", e.what(), kData);
  } catch (const fs::filesystem_error& e) {
    return fail("data", e.what(), kData);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kData);
  }
  return kOk;
}
