#include "run_config.h"

#include <fstream>
#include <sstream>

#include "msunet/digest.h"
#include "msunet/error.h"
#include "msunet/rng.h"

namespace msunet::cli {

using nlohmann::json;

namespace {

std::string AttenuationName(nn::AttenuationMode m) {
  return m == nn::AttenuationMode::kMeanBce ? "mean_bce" : "likelihood";
}

nn::AttenuationMode ParseAttenuation(const std::string& s) {
  if (s == "likelihood") return nn::AttenuationMode::kMeanLikelihood;
  if (s == "mean_bce") return nn::AttenuationMode::kMeanBce;
  throw ConfigError("train.attenuation", "expected likelihood or mean_bce, got '" + s + "'");
}

// Overlays `patch` onto `base`, refusing keys or types the defaults lack.
void Merge(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError(path.empty() ? "config" : path, "expected an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string child = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError(child, "unknown configuration key");
    json& slot = base[key];
    if (slot.is_object()) {
      Merge(slot, value, child);
      continue;
    }
    const bool both_numbers = slot.is_number() && value.is_number();
    if (slot.type() != value.type() && !both_numbers) {
      throw ConfigError(child, "expected " + std::string(slot.type_name()) + ", got " +
                                   std::string(value.type_name()));
    }
    if (slot.is_number_integer() && !value.is_number_integer()) {
      throw ConfigError(child, "expected an integer");
    }
    slot = value;
  }
}

void ApplyOverride(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set", "expected key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // bare strings
  // Build a nested patch from the dotted path.
  json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (size_t pos; (pos = rest.find('.')) != std::string::npos;) {
    parts.push_back(rest.substr(0, pos));
    rest = rest.substr(pos + 1);
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  Merge(tree, patch, "");
}

// Re-raises a component error with its section prefix.
template <typename Fn>
void WithPrefix(const std::string& section, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    const std::string& field = e.field();
    if (field.rfind(section + ".", 0) == 0) throw;
    std::string message = e.what();
    if (message.rfind(field + ": ", 0) == 0) message = message.substr(field.size() + 2);
    throw ConfigError(section + "." + field, message);
  }
}

}  // namespace

ensemble::SelectionPolicy EnsembleConfig::Policy() const {
  if (policy == "threshold") return ensemble::SelectionPolicy::Threshold(threshold);
  return ensemble::SelectionPolicy::TopK(top_k);
}

json RunConfig::ToJson() const {
  json j;
  j["seed"] = seed;
  j["phantom"] = {{"image_size", phantom.image_size},
                  {"n_train", phantom.n_train},
                  {"n_vs1", phantom.n_vs1},
                  {"n_vs2", phantom.n_vs2},
                  {"n_test", phantom.n_test},
                  {"vessel_count_min", phantom.vessel_count_min},
                  {"vessel_count_max", phantom.vessel_count_max},
                  {"vessel_radius_min", phantom.vessel_radius_min},
                  {"vessel_radius_max", phantom.vessel_radius_max},
                  {"speckle_sigma", phantom.speckle_sigma},
                  {"adjacency_prob", phantom.adjacency_prob}};
  j["model"] = {{"base_channels", model.base_channels},
                {"depth", model.depth},
                {"dropout_rate", model.dropout_rate},
                {"level_dropout_rates", model.level_dropout_rates},
                {"use_attention", model.use_attention}};
  j["train"] = {{"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"beta1", train.beta1},
                {"beta2", train.beta2},
                {"epsilon", train.epsilon},
                {"max_epochs", train.max_epochs},
                {"patience", train.patience},
                {"attenuation_samples", train.attenuation_samples},
                {"attenuation", AttenuationName(train.attenuation)}};
  j["ensemble"] = {{"candidates", ensemble.candidates},
                   {"policy", ensemble.policy},
                   {"top_k", ensemble.top_k},
                   {"threshold", ensemble.threshold},
                   {"append_image", ensemble.append_image}};
  j["eval"] = {{"mc_passes", eval.mc_passes},
               {"threshold", eval.threshold},
               {"paired_test", eval.paired_test},
               {"kde_grid", eval.kde_grid},
               {"kde_cap", eval.kde_cap},
               {"render_images", eval.render_images}};
  j["divergence"] = {{"k", divergence.k},
                     {"alpha", divergence.alpha},
                     {"jitter_scale", divergence.jitter_scale}};
  j["stats"] = {{"gamma", stats.gamma},
                {"replicates", stats.replicates},
                {"ci_level", stats.ci_level}};
  return j;
}

RunConfig RunConfig::FromJson(const json& j) {
  RunConfig c;
  try {
    c.seed = j.at("seed").get<uint64_t>();
    const json& p = j.at("phantom");
    c.phantom.image_size = p.at("image_size").get<int>();
    c.phantom.n_train = p.at("n_train").get<int>();
    c.phantom.n_vs1 = p.at("n_vs1").get<int>();
    c.phantom.n_vs2 = p.at("n_vs2").get<int>();
    c.phantom.n_test = p.at("n_test").get<int>();
    c.phantom.vessel_count_min = p.at("vessel_count_min").get<int>();
    c.phantom.vessel_count_max = p.at("vessel_count_max").get<int>();
    c.phantom.vessel_radius_min = p.at("vessel_radius_min").get<double>();
    c.phantom.vessel_radius_max = p.at("vessel_radius_max").get<double>();
    c.phantom.speckle_sigma = p.at("speckle_sigma").get<double>();
    c.phantom.adjacency_prob = p.at("adjacency_prob").get<double>();
    c.phantom.master_seed = DeriveSeed(c.seed, "phantom");
    const json& m = j.at("model");
    c.model.base_channels = m.at("base_channels").get<int>();
    c.model.depth = m.at("depth").get<int>();
    c.model.dropout_rate = m.at("dropout_rate").get<float>();
    c.model.level_dropout_rates = m.at("level_dropout_rates").get<std::vector<float>>();
    c.model.use_attention = m.at("use_attention").get<bool>();
    const json& t = j.at("train");
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.learning_rate = t.at("learning_rate").get<double>();
    c.train.beta1 = t.at("beta1").get<double>();
    c.train.beta2 = t.at("beta2").get<double>();
    c.train.epsilon = t.at("epsilon").get<double>();
    c.train.max_epochs = t.at("max_epochs").get<int>();
    c.train.patience = t.at("patience").get<int>();
    c.train.attenuation_samples = t.at("attenuation_samples").get<int>();
    c.train.attenuation = ParseAttenuation(t.at("attenuation").get<std::string>());
    const json& e = j.at("ensemble");
    c.ensemble.candidates = e.at("candidates").get<int>();
    c.ensemble.policy = e.at("policy").get<std::string>();
    c.ensemble.top_k = e.at("top_k").get<int>();
    c.ensemble.threshold = e.at("threshold").get<double>();
    c.ensemble.append_image = e.at("append_image").get<bool>();
    const json& v = j.at("eval");
    c.eval.mc_passes = v.at("mc_passes").get<int>();
    c.eval.threshold = v.at("threshold").get<double>();
    c.eval.paired_test = v.at("paired_test").get<std::string>();
    c.eval.kde_grid = v.at("kde_grid").get<int>();
    c.eval.kde_cap = v.at("kde_cap").get<int>();
    c.eval.render_images = v.at("render_images").get<int>();
    const json& d = j.at("divergence");
    c.divergence.k = d.at("k").get<int>();
    c.divergence.alpha = d.at("alpha").get<double>();
    c.divergence.jitter_scale = d.at("jitter_scale").get<double>();
    c.divergence.jitter_seed = DeriveSeed(c.seed, "jitter");
    const json& s = j.at("stats");
    c.stats.gamma = s.at("gamma").get<double>();
    c.stats.replicates = s.at("replicates").get<int>();
    c.stats.ci_level = s.at("ci_level").get<double>();
  } catch (const json::exception& ex) {
    throw ConfigError("config", ex.what());
  }
  return c;
}

void RunConfig::Validate() const {
  WithPrefix("phantom", [&] { phantom.Validate(); });
  WithPrefix("model", [&] { model.Validate(); });
  WithPrefix("train", [&] { train.Validate(); });
  WithPrefix("divergence", [&] { divergence.Validate(); });
  if (ensemble.candidates < 2) throw ConfigError("ensemble.candidates", "must be >= 2");
  if (ensemble.policy != "top_k" && ensemble.policy != "threshold") {
    throw ConfigError("ensemble.policy", "expected top_k or threshold");
  }
  if (ensemble.policy == "top_k" && (ensemble.top_k < 1 || ensemble.top_k > ensemble.candidates)) {
    throw ConfigError("ensemble.top_k", "must lie in [1, ensemble.candidates]");
  }
  if (!(ensemble.threshold >= 0.0 && ensemble.threshold <= 1.0)) {
    throw ConfigError("ensemble.threshold", "must lie in [0, 1]");
  }
  if (eval.mc_passes < 1) throw ConfigError("eval.mc_passes", "must be >= 1");
  if (!(eval.threshold > 0.0 && eval.threshold < 1.0)) {
    throw ConfigError("eval.threshold", "must lie in (0, 1)");
  }
  metrics::ParsePairedTestKind(eval.paired_test);
  if (eval.kde_grid < 2) throw ConfigError("eval.kde_grid", "must be >= 2");
  if (eval.kde_cap < 2) throw ConfigError("eval.kde_cap", "must be >= 2");
  if (eval.render_images < 0) throw ConfigError("eval.render_images", "must be >= 0");
  if (!(stats.gamma > 0.0 && stats.gamma <= 1.0)) throw ConfigError("stats.gamma", "must lie in (0, 1]");
  if (stats.replicates < 1) throw ConfigError("stats.replicates", "must be >= 1");
  if (!(stats.ci_level > 0.0 && stats.ci_level < 1.0)) {
    throw ConfigError("stats.ci_level", "must lie in (0, 1)");
  }
}

std::string RunConfig::SectionDigest(const std::vector<std::string>& sections) const {
  const json tree = ToJson();
  json subset{{"seed", tree["seed"]}};
  for (const auto& s : sections) {
    std::string pointer = "/" + s;
    for (char& c : pointer) {
      if (c == '.') c = '/';
    }
    subset[s] = tree.at(json::json_pointer(pointer));
  }
  return DigestHex(subset.dump());
}

RunConfig LoadRunConfig(const std::filesystem::path& config_file,
                        const std::vector<std::string>& overrides, const uint64_t* seed) {
  json tree = RunConfig{}.ToJson();
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw ConfigError("--config", "cannot read " + config_file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const json patch = json::parse(ss.str(), nullptr, false);
    if (patch.is_discarded()) throw ConfigError("--config", "malformed JSON in " + config_file.string());
    Merge(tree, patch, "");
  }
  if (seed) tree["seed"] = *seed;
  for (const auto& o : overrides) ApplyOverride(tree, o);
  RunConfig config = RunConfig::FromJson(tree);
  config.Validate();
  return config;
}

}  // namespace msunet::cli
