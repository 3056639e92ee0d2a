#include "pupinet/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "pupinet/errors.hpp"

namespace pupinet {

namespace fs = std::filesystem;
using nlohmann::json;

GeneratorConfig TrainConfig::generator_config() const {
  GeneratorConfig g;
  g.direction = direction;
  g.base_width = gen_base_width;
  g.n_stages = gen_stages;
  g.attention_groups = attention_groups;
  g.attention_on = modules.attention_on;
  g.wavelet_on = modules.wavelet_on;
  return g;
}

DiscriminatorConfig TrainConfig::discriminator_config() const {
  return {2, disc_base_width, disc_stages};
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (dims.d < 2 || dims.h < 2 || dims.w < 2) fail("dims must be >= 2 on every axis");
  try {
    generator_config().validate();
    generator_config().check_input(dims);
    weights.validate();
  } catch (const std::exception& e) {
    fail(e.what());
  }
  const int64_t f = int64_t{1} << disc_stages;
  if (disc_stages < 1 || dims.d % f || dims.h % f || dims.w % f) {
    fail("dims must be divisible by 2^discriminator.n_stages");
  }
  double total = 0.0;
  for (double r : split_ratios) {
    if (!(r > 0.0)) fail("split ratios must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("split ratios must sum to 1");
  if (steps < 0 || epochs < 0) fail("steps and epochs must be >= 0");
  if (batch_size < 1 || grad_accumulation < 1) fail("batch_size and grad_accumulation must be >= 1");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (!(learning_rate > 0.0)) fail("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail("betas must lie in [0, 1)");
  if (!(ada.p >= 0.0 && ada.p <= 1.0)) fail("ada.p must lie in [0, 1]");
  if (ada.interval < 1) fail("ada.interval must be >= 1");
  if (!(ada.step_size >= 0.0)) fail("ada.step_size must be >= 0");
  if (vsm_epochs < 0 || hfc_epochs < 0) fail("supervisor epochs must be >= 0");
}

json to_json(const TrainConfig& c) {
  return {
      {"direction", to_string(c.direction)},
      {"dims", {c.dims.d, c.dims.h, c.dims.w}},
      {"seed", c.seed},
      {"data", {{"path", c.dataset}, {"split", c.split_ratios}}},
      {"schedule",
       {{"steps", c.steps},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"grad_accumulation", c.grad_accumulation},
        {"checkpoint_every", c.checkpoint_every}}},
      {"optimizer", {{"lr", c.learning_rate}, {"betas", {c.beta1, c.beta2}}}},
      {"loss",
       {{"lambda_A", c.weights.lambda_A},
        {"lambda_B", c.weights.lambda_B},
        {"lambda_C", c.weights.lambda_C},
        {"lambda_A_prime", c.weights.lambda_A_prime},
        {"tv_reduction", c.tv_reduction == TvReduction::Sum ? "sum" : "mean"}}},
      {"ada",
       {{"enabled", c.ada_on},
        {"p", c.ada.p},
        {"target_rt", c.ada.target_rt},
        {"step_size", c.ada.step_size},
        {"interval", c.ada.interval},
        {"ema_rt", c.ada.ema_rt}}},
      {"modules",
       {{"vsm_on", c.modules.vsm_on},
        {"hfc_on", c.modules.hfc_on},
        {"attention_on", c.modules.attention_on},
        {"wavelet_on", c.modules.wavelet_on}}},
      {"generator",
       {{"base_width", c.gen_base_width}, {"n_stages", c.gen_stages}, {"attention_groups", c.attention_groups}}},
      {"discriminator", {{"base_width", c.disc_base_width}, {"n_stages", c.disc_stages}}},
      {"supervisors",
       {{"vsm_checkpoint", c.vsm_checkpoint},
        {"hfc_checkpoint", c.hfc_checkpoint},
        {"vsm_epochs", c.vsm_epochs},
        {"hfc_epochs", c.hfc_epochs},
        {"lr", c.supervisor_lr}}},
      {"output", {{"dir", c.out_dir}}},
  };
}

namespace {

// Reads known keys of one object, rejecting anything unexpected.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + qualified(key) + "': " + e.what());
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + qualified(item.key()) + "'");
    }
  }

 private:
  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  Section top(j, "");
  if (!j.is_object() || !j.contains("seed")) throw ConfigError("config must set 'seed'");

  std::string direction = to_string(c.direction);
  top.read("direction", direction);
  try {
    c.direction = direction_from_string(direction);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  std::array<int64_t, 3> dims{c.dims.d, c.dims.h, c.dims.w};
  top.read("dims", dims);
  c.dims = {dims[0], dims[1], dims[2]};
  top.read("seed", c.seed);

  if (const json* s = top.sub("data")) {
    Section d(*s, "data");
    d.read("path", c.dataset);
    d.read("split", c.split_ratios);
    d.finish();
  }
  if (const json* s = top.sub("schedule")) {
    Section d(*s, "schedule");
    d.read("steps", c.steps);
    d.read("epochs", c.epochs);
    d.read("batch_size", c.batch_size);
    d.read("grad_accumulation", c.grad_accumulation);
    d.read("checkpoint_every", c.checkpoint_every);
    d.finish();
  }
  if (const json* s = top.sub("optimizer")) {
    Section d(*s, "optimizer");
    d.read("lr", c.learning_rate);
    std::array<double, 2> betas{c.beta1, c.beta2};
    d.read("betas", betas);
    c.beta1 = betas[0];
    c.beta2 = betas[1];
    d.finish();
  }
  if (const json* s = top.sub("loss")) {
    Section d(*s, "loss");
    d.read("lambda_A", c.weights.lambda_A);
    d.read("lambda_B", c.weights.lambda_B);
    d.read("lambda_C", c.weights.lambda_C);
    d.read("lambda_A_prime", c.weights.lambda_A_prime);
    std::string tv = "sum";
    d.read("tv_reduction", tv);
    if (tv != "sum" && tv != "mean") throw ConfigError("loss.tv_reduction must be 'sum' or 'mean'");
    c.tv_reduction = tv == "sum" ? TvReduction::Sum : TvReduction::Mean;
    d.finish();
  }
  if (const json* s = top.sub("ada")) {
    Section d(*s, "ada");
    d.read("enabled", c.ada_on);
    d.read("p", c.ada.p);
    d.read("target_rt", c.ada.target_rt);
    d.read("step_size", c.ada.step_size);
    d.read("interval", c.ada.interval);
    c.ada.ema_rt = c.ada.target_rt;
    d.read("ema_rt", c.ada.ema_rt);
    d.finish();
  }
  if (const json* s = top.sub("modules")) {
    Section d(*s, "modules");
    d.read("vsm_on", c.modules.vsm_on);
    d.read("hfc_on", c.modules.hfc_on);
    d.read("attention_on", c.modules.attention_on);
    d.read("wavelet_on", c.modules.wavelet_on);
    d.finish();
  }
  if (const json* s = top.sub("generator")) {
    Section d(*s, "generator");
    d.read("base_width", c.gen_base_width);
    d.read("n_stages", c.gen_stages);
    d.read("attention_groups", c.attention_groups);
    d.finish();
  }
  if (const json* s = top.sub("discriminator")) {
    Section d(*s, "discriminator");
    d.read("base_width", c.disc_base_width);
    d.read("n_stages", c.disc_stages);
    d.finish();
  }
  if (const json* s = top.sub("supervisors")) {
    Section d(*s, "supervisors");
    d.read("vsm_checkpoint", c.vsm_checkpoint);
    d.read("hfc_checkpoint", c.hfc_checkpoint);
    d.read("vsm_epochs", c.vsm_epochs);
    d.read("hfc_epochs", c.hfc_epochs);
    d.read("lr", c.supervisor_lr);
    d.finish();
  }
  if (const json* s = top.sub("output")) {
    Section d(*s, "output");
    d.read("dir", c.out_dir);
    d.finish();
  }
  top.finish();
  c.validate();
  return c;
}

TrainConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config(const TrainConfig& cfg, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(cfg).dump(2) << '\n';
}

void set_config_value(json& doc, const std::string& dotted_key, const json& value) {
  json* node = &doc;
  size_t start = 0;
  while (true) {
    const size_t dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("bad config key '" + dotted_key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace pupinet
