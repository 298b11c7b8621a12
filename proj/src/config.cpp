#include "excl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace excl {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json parse_flat(std::string_view text, const std::set<std::string>& allowed, const char* what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a flat JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(std::string(what) + ": unknown key '" + key + "' (allowed: " + list + ")");
    }
    if (value.is_object() || (value.is_array() && key != "thresholds"))
      throw ConfigError(std::string(what) + ": key '" + key + "' must be a scalar");
  }
  return j;
}

template <typename T>
T field(const json& j, const char* key, const char* domain) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' must be " + domain);
  }
}

void check(bool ok, const char* key, const char* domain) {
  if (!ok) throw ConfigError(std::string("config field '") + key + "' must be " + domain);
}

}  // namespace

void RunConfig::validate() const {
  check(embedding_dim >= 1, "embedding_dim", "an integer >= 1");
  check(query_hidden >= 1, "query_hidden", "an integer >= 1");
  check(video_hidden >= 1, "video_hidden", "an integer >= 1");
  check(predictor_hidden >= 1, "predictor_hidden", "an integer >= 1");
  check(mlp_hidden >= 1, "mlp_hidden", "an integer >= 1");
  check(batch_size >= 1, "batch_size", "an integer >= 1");
  check(adam.lr > 0.0, "lr", "a number > 0");
  check(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "beta1", "in [0, 1)");
  check(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "beta2", "in [0, 1)");
  check(adam.eps > 0.0, "adam_eps", "a number > 0");
  check(dropout >= 0.0 && dropout < 1.0, "dropout", "in [0, 1)");
  check(max_epochs >= 1, "max_epochs", "an integer >= 1");
  check(patience >= 0, "patience", "an integer >= 0");
  check(fps > 0.0, "fps", "a number > 0");
  check(vocab_size >= 0, "vocab_size", "an integer >= 0");
  try {
    eval_config().validate();
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("config field 'thresholds': ") + e.what());
  }
  bool found = false;
  for (double t : thresholds) found = found || t == early_stop_iou;
  check(found, "early_stop_iou", "one of the configured thresholds");
}

std::string RunConfig::variant() const {
  return std::string(1, video_lstm ? '2' : '1') + "-" + predictor_letter(predictor);
}

void RunConfig::set_variant(std::string_view v) {
  if (v.size() != 3 || v[1] != '-' || (v[0] != '1' && v[0] != '2') || v[2] < 'a' || v[2] > 'c')
    throw ConfigError("config field 'variant' must be one of 1-a, 1-b, 1-c, 2-a, 2-b, 2-c (got '" +
                      std::string(v) + "')");
  video_lstm = v[0] == '2';
  predictor = predictor_from_letter(v[2]);
}

std::string RunConfig::label() const {
  return variant_label(objective == Objective::reg, video_lstm, predictor_letter(predictor));
}

ModelSpec RunConfig::model_spec(int vocab, int feature_dim) const {
  ModelSpec s;
  s.objective = objective;
  s.video_lstm = video_lstm;
  s.predictor = predictor;
  s.vocab_size = vocab;
  s.embedding_dim = embedding_dim;
  s.feature_dim = feature_dim;
  s.query_hidden = query_hidden;
  s.video_hidden = video_hidden;
  s.predictor_hidden = predictor_hidden;
  s.mlp_hidden = mlp_hidden;
  s.dropout = dropout;
  s.reg_loss = reg_loss;
  return s;
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig e;
  e.thresholds = thresholds;
  e.fps = fps;
  return e;
}

std::string RunConfig::to_json() const {
  json j;
  j["objective"] = objective == Objective::clf ? "clf" : "reg";
  j["variant"] = variant();
  j["embedding_dim"] = embedding_dim;
  j["query_hidden"] = query_hidden;
  j["video_hidden"] = video_hidden;
  j["predictor_hidden"] = predictor_hidden;
  j["mlp_hidden"] = mlp_hidden;
  j["batch_size"] = batch_size;
  j["lr"] = adam.lr;
  j["beta1"] = adam.beta1;
  j["beta2"] = adam.beta2;
  j["adam_eps"] = adam.eps;
  j["dropout"] = dropout;
  j["max_epochs"] = max_epochs;
  j["patience"] = patience;
  j["early_stop_iou"] = early_stop_iou;
  j["thresholds"] = thresholds;
  j["fps"] = fps;
  j["vocab_size"] = vocab_size;
  j["reg_loss"] = reg_loss == RegLossKind::abs ? "abs" : "mse";
  j["seed"] = seed;
  j["glove"] = glove;
  return j.dump();
}

RunConfig RunConfig::from_json(std::string_view text) {
  static const std::set<std::string> keys = {
      "objective", "variant", "video_lstm", "predictor", "embedding_dim", "query_hidden", "video_hidden",
      "predictor_hidden", "mlp_hidden", "batch_size", "lr", "beta1", "beta2", "adam_eps", "dropout",
      "max_epochs", "patience", "early_stop_iou", "thresholds", "fps", "vocab_size", "reg_loss", "seed", "glove"};
  const json j = parse_flat(text, keys, "run config");
  RunConfig c;
  if (j.contains("objective")) {
    const auto o = field<std::string>(j, "objective", "\"clf\" or \"reg\"");
    check(o == "clf" || o == "reg", "objective", "\"clf\" or \"reg\"");
    c.objective = o == "clf" ? Objective::clf : Objective::reg;
  }
  if (j.contains("variant")) c.set_variant(field<std::string>(j, "variant", "a string like \"2-b\""));
  if (j.contains("video_lstm")) {
    const int v = field<int>(j, "video_lstm", "1 (off) or 2 (on)");
    check(v == 1 || v == 2, "video_lstm", "1 (off) or 2 (on)");
    if (j.contains("variant")) check((v == 2) == c.video_lstm, "video_lstm", "consistent with 'variant'");
    c.video_lstm = v == 2;
  }
  if (j.contains("predictor")) {
    const auto p = field<std::string>(j, "predictor", "\"a\", \"b\" or \"c\"");
    check(p == "a" || p == "b" || p == "c", "predictor", "\"a\", \"b\" or \"c\"");
    if (j.contains("variant"))
      check(predictor_from_letter(p[0]) == c.predictor, "predictor", "consistent with 'variant'");
    c.predictor = predictor_from_letter(p[0]);
  }
  auto get_int = [&](const char* key, int& out) {
    if (j.contains(key)) out = field<int>(j, key, "an integer");
  };
  auto get_double = [&](const char* key, double& out) {
    if (j.contains(key)) out = field<double>(j, key, "a number");
  };
  get_int("embedding_dim", c.embedding_dim);
  get_int("query_hidden", c.query_hidden);
  get_int("video_hidden", c.video_hidden);
  get_int("predictor_hidden", c.predictor_hidden);
  get_int("mlp_hidden", c.mlp_hidden);
  get_int("batch_size", c.batch_size);
  get_double("lr", c.adam.lr);
  get_double("beta1", c.adam.beta1);
  get_double("beta2", c.adam.beta2);
  get_double("adam_eps", c.adam.eps);
  get_double("dropout", c.dropout);
  get_int("max_epochs", c.max_epochs);
  get_int("patience", c.patience);
  get_double("early_stop_iou", c.early_stop_iou);
  if (j.contains("thresholds")) c.thresholds = field<std::vector<double>>(j, "thresholds", "a list of numbers");
  get_double("fps", c.fps);
  get_int("vocab_size", c.vocab_size);
  if (j.contains("reg_loss")) {
    const auto r = field<std::string>(j, "reg_loss", "\"abs\" or \"mse\"");
    check(r == "abs" || r == "mse", "reg_loss", "\"abs\" or \"mse\"");
    c.reg_loss = r == "abs" ? RegLossKind::abs : RegLossKind::mse;
  }
  if (j.contains("seed")) c.seed = field<std::uint64_t>(j, "seed", "a nonnegative integer");
  if (j.contains("glove")) c.glove = field<std::string>(j, "glove", "a path string");
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_json(read_text(path)); }

SynthConfig parse_synth_config(std::string_view text) {
  static const std::set<std::string> keys = {"mode",          "num_items",     "num_classes", "min_frames",
                                             "max_frames",    "feature_dim",   "noise_sigma", "min_span_frac",
                                             "max_span_frac", "end_rank",      "distractors", "fps",
                                             "seed"};
  const json j = parse_flat(text, keys, "synth config");
  SynthConfig c;
  if (j.contains("mode")) {
    const auto m = field<std::string>(j, "mode", "\"pattern\" or \"temporal-context\"");
    check(m == "pattern" || m == "temporal-context", "mode", "\"pattern\" or \"temporal-context\"");
    c.mode = m == "pattern" ? SynthMode::pattern : SynthMode::temporal_context;
  }
  auto get_int = [&](const char* key, int& out) {
    if (j.contains(key)) out = field<int>(j, key, "an integer");
  };
  auto get_double = [&](const char* key, double& out) {
    if (j.contains(key)) out = field<double>(j, key, "a number");
  };
  get_int("num_items", c.num_items);
  get_int("num_classes", c.num_classes);
  get_int("min_frames", c.min_frames);
  get_int("max_frames", c.max_frames);
  get_int("feature_dim", c.feature_dim);
  get_double("noise_sigma", c.noise_sigma);
  get_double("min_span_frac", c.min_span_frac);
  get_double("max_span_frac", c.max_span_frac);
  get_int("end_rank", c.end_rank);
  get_int("distractors", c.distractors);
  get_double("fps", c.fps);
  if (j.contains("seed")) c.seed = field<std::uint64_t>(j, "seed", "a nonnegative integer");
  try {
    c.validate();
  } catch (const ShapeError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

SynthConfig load_synth_config(const std::filesystem::path& path) { return parse_synth_config(read_text(path)); }

}  // namespace excl
