#include "pupinet/trainer.hpp"

#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include <torch/torch.h>

#include "pupinet/ada.hpp"
#include "pupinet/archive.hpp"
#include "pupinet/digest.hpp"
#include "pupinet/errors.hpp"
#include "pupinet/layers.hpp"

namespace pupinet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCheckpointKind = "pupinet-train";

torch::Tensor to_signed(const Volume3D& v) { return to_tensor(v) * 2.0 - 1.0; }

std::string serialize_optimizer(torch::optim::Optimizer& opt) {
  torch::serialize::OutputArchive ar;
  opt.save(ar);
  std::ostringstream out;
  ar.save_to(out);
  return out.str();
}

void restore_optimizer(torch::optim::Optimizer& opt, const std::string& blob) {
  torch::serialize::InputArchive ar;
  std::istringstream in(blob);
  ar.load_from(in);
  opt.load(ar);
}

template <typename Rng>
std::string rng_state(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

template <typename Rng>
void restore_rng(Rng& rng, const std::string& state) {
  std::istringstream in(state);
  in >> rng;
  if (!in) throw IoError("corrupt generator state in checkpoint");
}

const std::string& blob(const Archive& a, const std::string& name) {
  auto it = a.blobs.find(name);
  if (it == a.blobs.end()) throw IoError("checkpoint has no '" + name + "' entry");
  return it->second;
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.set_requires_grad(on);
}

}  // namespace

void apply_thread_policy() {
  const char* flag = std::getenv("PUPINET_DETERMINISTIC");
  if (flag && std::string(flag) == "1") {
    torch::set_num_threads(1);
  }
}

std::map<std::string, std::string> Supervisors::digests() const {
  std::map<std::string, std::string> out;
  if (vsm) out["vsm"] = vsm->flag.digest;
  if (hfc) {
    out["hfc.ilm_opl"] = hfc->ilm_opl_flag.digest;
    out["hfc.opl_bm"] = hfc->opl_bm_flag.digest;
  }
  return out;
}

void Supervisors::verify() const {
  if (vsm && !verify_frozen(*vsm->net, vsm->flag)) {
    throw TrainingAbort("VSM parameters drifted from their freeze digest");
  }
  if (hfc && (!verify_frozen(*hfc->ilm_opl, hfc->ilm_opl_flag) ||
              !verify_frozen(*hfc->opl_bm, hfc->opl_bm_flag))) {
    throw TrainingAbort("HFC parameters drifted from their freeze digests");
  }
}

Supervisors load_supervisors(const TrainConfig& cfg) {
  Supervisors sup;
  auto require = [](const std::string& path, const char* what) {
    if (path.empty()) throw TrainingAbort(std::string(what) + " checkpoint is required but not configured");
    if (!fs::exists(path)) throw TrainingAbort(std::string(what) + " checkpoint " + path + " does not exist");
  };
  if (cfg.needs_vsm()) {
    require(cfg.vsm_checkpoint, "VSM");
    sup.vsm = load_vsm(cfg.vsm_checkpoint);
  }
  if (cfg.needs_hfc()) {
    require(cfg.hfc_checkpoint, "HFC");
    sup.hfc = load_hfc(cfg.hfc_checkpoint);
  }
  return sup;
}

Trainer::Trainer(TrainConfig cfg, Dataset train_pairs, Supervisors sup)
    : cfg_(std::move(cfg)), sup_(std::move(sup)), data_rng_(cfg_.seed ^ 0xd1b54a32d192ed03ULL),
      aug_rng_(cfg_.seed ^ 0x8cb92ba72f3d8dd7ULL) {
  cfg_.validate();
  if (train_pairs.empty()) throw ConfigError("training split is empty");
  if (cfg_.needs_vsm() && !sup_.vsm) throw TrainingAbort("VSM is toggled on but no frozen VSM was provided");
  if (cfg_.needs_hfc() && !sup_.hfc) throw TrainingAbort("HFC is toggled on but no frozen HFC was provided");
  sup_.verify();
  if (sup_.vsm && !(sup_.vsm->net->dims == cfg_.dims)) throw ConfigError("VSM dims do not match config dims");

  for (const auto& p : train_pairs) {
    if (!(p.oct.dims() == cfg_.dims) || !(p.octa.dims() == cfg_.dims)) {
      throw ConfigError("pair " + p.id + " has dims " + p.oct.dims().str() + ", config expects " +
                        cfg_.dims.str());
    }
    const bool fwd = cfg_.direction == Direction::OctToOcta;
    sources_.push_back(to_signed(fwd ? p.oct : p.octa));
    targets_.push_back(to_signed(fwd ? p.octa : p.oct));
  }

  gen_ = make_generator(cfg_.generator_config(), cfg_.seed);
  disc_ = PatchDiscriminator3d(cfg_.discriminator_config());
  init_weights(*disc_, cfg_.seed + 1);
  const auto betas = std::make_tuple(cfg_.beta1, cfg_.beta2);
  opt_g_ = std::make_unique<torch::optim::Adam>(gen_->parameters(),
                                                torch::optim::AdamOptions(cfg_.learning_rate).betas(betas));
  opt_d_ = std::make_unique<torch::optim::Adam>(disc_->parameters(),
                                                torch::optim::AdamOptions(cfg_.learning_rate).betas(betas));
  ada_ = cfg_.ada;
}

std::vector<torch::Tensor> Trainer::generator_optimizer_params() const {
  std::vector<torch::Tensor> out;
  for (const auto& g : opt_g_->param_groups()) out.insert(out.end(), g.params().begin(), g.params().end());
  return out;
}

std::vector<torch::Tensor> Trainer::discriminator_optimizer_params() const {
  std::vector<torch::Tensor> out;
  for (const auto& g : opt_d_->param_groups()) out.insert(out.end(), g.params().begin(), g.params().end());
  return out;
}

Trainer::Batch Trainer::next_batch() {
  std::vector<torch::Tensor> src, tgt;
  for (int64_t b = 0; b < cfg_.batch_size; ++b) {
    if (cursor_ == order_.size()) {
      order_.resize(sources_.size());
      std::iota(order_.begin(), order_.end(), size_t{0});
      std::shuffle(order_.begin(), order_.end(), data_rng_);
      cursor_ = 0;
    }
    const size_t i = order_[cursor_++];
    src.push_back(sources_[i]);
    tgt.push_back(targets_[i]);
  }
  return {torch::cat(src, 0), torch::cat(tgt, 0)};
}

// One fresh transform per pair; condition and candidate share it.
torch::Tensor Trainer::augment_pairs(const torch::Tensor& pairs) {
  if (!cfg_.ada_on) return pairs;
  std::vector<torch::Tensor> out;
  for (int64_t n = 0; n < pairs.size(0); ++n) {
    const auto params = sample_augment(ada_.p, pairs.size(-2), pairs.size(-1), aug_rng_);
    out.push_back(apply_augment(pairs.narrow(0, n, 1), params));
  }
  return out.size() == 1 ? out.front() : torch::cat(out, 0);
}

LossReport Trainer::step(const TrainHooks& hooks) {
  const int64_t k = cfg_.grad_accumulation;
  const double inv_k = 1.0 / static_cast<double>(k);
  const long step_id = step_ + 1;
  gen_->train();
  disc_->train();

  std::vector<Batch> batches;
  std::vector<torch::Tensor> fakes;
  for (int64_t i = 0; i < k; ++i) {
    batches.push_back(next_batch());
    fakes.push_back(gen_->forward(batches.back().source));
  }

  // Discriminator update on real and detached fake pairs.
  opt_d_->zero_grad();
  double adv_d = 0.0;
  std::vector<torch::Tensor> d_losses;
  for (int64_t i = 0; i < k; ++i) {
    const auto& b = batches[i];
    auto d_real = disc_->forward_pair(augment_pairs(torch::cat({b.source, b.target}, 1)));
    auto d_fake = disc_->forward_pair(augment_pairs(torch::cat({b.source, fakes[i].detach()}, 1)));
    auto loss = adv_losses(d_real, d_fake).d * inv_k;
    adv_d += loss.item<double>();
    d_losses.push_back(loss);
    if (cfg_.ada_on) {
      auto signs = d_real.detach().sign().to(torch::kFloat64).contiguous().flatten();
      pending_signs_.insert(pending_signs_.end(), signs.data_ptr<double>(),
                            signs.data_ptr<double>() + signs.numel());
    }
  }
  if (!std::isfinite(adv_d)) {
    throw TrainingAbort("non-finite loss term 'adv_d' at step " + std::to_string(step_id), "adv_d", step_id);
  }
  for (auto& l : d_losses) l.backward();
  opt_d_->step();
  if (cfg_.ada_on && ++d_steps_ % ada_.interval == 0) {
    ada_ = ada_update(ada_, pending_signs_);
    pending_signs_.clear();
  }

  // Generator update against the refreshed discriminator.
  set_requires_grad(*disc_, false);
  opt_g_->zero_grad();
  const bool forward_dir = cfg_.direction == Direction::OctToOcta;
  const auto& w = cfg_.weights;
  std::vector<std::pair<std::string, double>> sums;
  auto add = [&](const std::string& name, const torch::Tensor& t) {
    const double v = t.item<double>() * inv_k;
    for (auto& [n, s] : sums) {
      if (n == name) {
        s += v;
        return;
      }
    }
    sums.emplace_back(name, v);
  };
  std::vector<torch::Tensor> totals;
  for (int64_t i = 0; i < k; ++i) {
    const auto& b = batches[i];
    const auto& fake = fakes[i];
    auto adv_g = adv_g_loss(disc_->forward_pair(augment_pairs(torch::cat({b.source, fake}, 1))));
    auto fake01 = (fake + 1.0) * 0.5;
    auto real01 = (b.target + 1.0) * 0.5;
    auto l1 = l1_3d(fake01, real01);
    add("adv_g", adv_g);
    add("l1", l1);
    torch::Tensor total;
    if (forward_dir) {
      auto zero = torch::zeros({}, fake.options());
      auto hfc = zero;
      if (cfg_.needs_hfc()) {
        const auto& h = *sup_.hfc;
        auto tv = tv3d(fake01, cfg_.tv_reduction);
        auto proj = proj_loss(real01, fake01);
        auto ilm = layer_proj_loss(h.ilm_opl, h.ilm_opl_flag, real01, fake01);
        auto opl = layer_proj_loss(h.opl_bm, h.opl_bm_flag, real01, fake01);
        hfc = hfc_total(proj, ilm, opl, tv, w);
        add("tv3d", tv);
        add("proj", proj);
        add("ilm_opl", ilm);
        add("opl_bm", opl);
        add("hfc_total", hfc);
      }
      auto vsm = zero;
      if (cfg_.needs_vsm()) {
        vsm = vsm_loss(*sup_.vsm, fake01, real01);
        add("vsm", vsm);
      }
      auto gan = gan_term(adv_g, l1, w);
      add("gan", gan);
      total = octa_total(gan, vsm, hfc, w);
    } else {
      total = oct_total(adv_g, l1, w);
    }
    add("total", total);
    totals.push_back(total * inv_k);
  }

  LossReport report;
  report.step = step_id;
  report.set("adv_d", adv_d);
  for (const auto& [name, v] : sums) report.set(name, v);
  report.set("ada_p", ada_.p);
  if (hooks.on_report) hooks.on_report(report);
  if (const auto bad = report.first_non_finite(); !bad.empty()) {
    set_requires_grad(*disc_, true);
    throw TrainingAbort("non-finite loss term '" + bad + "' at step " + std::to_string(step_id), bad, step_id);
  }
  for (auto& t : totals) t.backward();
  opt_g_->step();
  set_requires_grad(*disc_, true);
  step_ = step_id;
  return report;
}

double Trainer::train_l1() {
  torch::NoGradGuard no_grad;
  gen_->eval();
  double sum = 0.0;
  for (size_t i = 0; i < sources_.size(); ++i) {
    auto fake = gen_->forward(sources_[i]);
    sum += l1_3d((fake + 1.0) * 0.5, (targets_[i] + 1.0) * 0.5).item<double>();
  }
  gen_->train();
  return sum / static_cast<double>(sources_.size());
}

void Trainer::save_checkpoint(const fs::path& path) {
  sup_.verify();
  Archive a;
  a.manifest = {{"kind", kCheckpointKind},
                {"config", to_json(cfg_)},
                {"step", step_},
                {"seed", cfg_.seed},
                {"ada",
                 {{"p", ada_.p},
                  {"ema_rt", ada_.ema_rt},
                  {"step", ada_.updates},
                  {"target_rt", ada_.target_rt},
                  {"step_size", ada_.step_size},
                  {"interval", ada_.interval}}},
                {"supervisor_digests", sup_.digests()},
                {"stream",
                 {{"order", order_},
                  {"cursor", cursor_},
                  {"d_steps", d_steps_},
                  {"pending_signs", pending_signs_}}}};
  put_module(a, "generator", *gen_);
  put_module(a, "discriminator", *disc_);
  a.blobs["optimizer.generator"] = serialize_optimizer(*opt_g_);
  a.blobs["optimizer.discriminator"] = serialize_optimizer(*opt_d_);
  a.blobs["rng.data"] = rng_state(data_rng_);
  a.blobs["rng.augment"] = rng_state(aug_rng_);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_archive(a, path);
}

void Trainer::resume(const fs::path& path) {
  const Archive a = read_archive(path);
  const auto& m = a.manifest;
  if (m.value("kind", "") != kCheckpointKind) throw IoError(path.string() + " is not a training checkpoint");
  json saved = m.at("config"), current = to_json(cfg_);
  saved.erase("output");
  current.erase("output");
  if (saved != current) {
    throw ConfigError("checkpoint " + path.string() + " was written under a different config");
  }
  if (m.at("supervisor_digests").get<std::map<std::string, std::string>>() != sup_.digests()) {
    throw TrainingAbort("checkpoint " + path.string() + " was trained against different supervisors");
  }
  load_module(a, "generator", *gen_);
  load_module(a, "discriminator", *disc_);
  restore_optimizer(*opt_g_, blob(a, "optimizer.generator"));
  restore_optimizer(*opt_d_, blob(a, "optimizer.discriminator"));
  restore_rng(data_rng_, blob(a, "rng.data"));
  restore_rng(aug_rng_, blob(a, "rng.augment"));
  step_ = m.at("step").get<long>();
  ada_.p = m.at("ada").at("p").get<double>();
  ada_.ema_rt = m.at("ada").at("ema_rt").get<double>();
  ada_.updates = m.at("ada").at("step").get<int64_t>();
  const auto& st = m.at("stream");
  order_ = st.at("order").get<std::vector<size_t>>();
  cursor_ = st.at("cursor").get<size_t>();
  d_steps_ = st.at("d_steps").get<int64_t>();
  pending_signs_ = st.at("pending_signs").get<std::vector<double>>();
}

int64_t planned_steps(const TrainConfig& cfg, int64_t n_train) {
  if (cfg.epochs == 0) return cfg.steps;
  const int64_t per_step = cfg.batch_size * cfg.grad_accumulation;
  return cfg.epochs * ((n_train + per_step - 1) / per_step);
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_pairs, const Supervisors& sup,
                  const TrainHooks& hooks) {
  apply_thread_policy();
  Trainer trainer(cfg, train_pairs, sup);
  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  save_config(cfg, out / "config.json");
  std::ofstream csv(out / "losses.csv", std::ios::trunc);
  if (!csv) throw IoError("cannot write " + (out / "losses.csv").string());
  csv << "step,term,value\n";

  TrainResult result;
  result.initial_l1 = trainer.train_l1();
  const int64_t total = planned_steps(cfg, static_cast<int64_t>(train_pairs.size()));
  for (int64_t s = 0; s < total; ++s) {
    LossReport report;
    try {
      report = trainer.step(hooks);
    } catch (const TrainingAbort& e) {
      std::ofstream diag(out / "abort_report.txt", std::ios::trunc);
      diag << "step " << e.step() << "\nterm " << e.term() << "\n" << e.what() << "\n";
      throw;
    }
    csv << report.csv_rows();
    result.history.push_back(std::move(report));
    if (cfg.checkpoint_every > 0 && trainer.steps_done() % cfg.checkpoint_every == 0) {
      trainer.save_checkpoint(out / ("checkpoint_" + std::to_string(trainer.steps_done()) + ".pupi"));
    }
  }
  csv.flush();
  result.final_l1 = trainer.train_l1();
  result.checkpoint = out / "checkpoint.pupi";
  trainer.save_checkpoint(result.checkpoint);
  result.ada = trainer.ada();
  result.supervisor_digests = trainer.supervisors().digests();
  result.generator = trainer.generator_ptr();
  return result;
}

Dataset split_part(const Dataset& data, const std::array<double, 3>& ratios, const std::string& split) {
  const auto idx = split_dataset(static_cast<int64_t>(data.size()), ratios);
  if (split == "train") return select(data, idx.train);
  if (split == "val") return select(data, idx.val);
  if (split == "test") return select(data, idx.test);
  throw ConfigError("unknown split '" + split + "' (expected train, val or test)");
}

TrainResult train(const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (cfg.dataset.empty()) throw ConfigError("config data.path is empty");
  const Supervisors sup = load_supervisors(cfg);
  const Dataset data = load_dataset(cfg.dataset);
  return train(cfg, split_part(data, cfg.split_ratios, "train"), sup, hooks);
}

Checkpoint load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("checkpoint " + path.string() + " does not exist");
  const Archive a = read_archive(path);
  const auto& m = a.manifest;
  if (m.value("kind", "") != kCheckpointKind) throw IoError(path.string() + " is not a training checkpoint");
  Checkpoint c;
  c.cfg = config_from_json(m.at("config"));
  c.step = m.at("step").get<long>();
  c.ada = c.cfg.ada;
  c.ada.p = m.at("ada").at("p").get<double>();
  c.ada.ema_rt = m.at("ada").at("ema_rt").get<double>();
  c.ada.updates = m.at("ada").at("step").get<int64_t>();
  c.supervisor_digests = m.at("supervisor_digests").get<std::map<std::string, std::string>>();
  c.generator = make_generator(c.cfg.generator_config(), c.cfg.seed);
  load_module(a, "generator", *c.generator);
  c.discriminator = PatchDiscriminator3d(c.cfg.discriminator_config());
  load_module(a, "discriminator", *c.discriminator);
  c.generator->eval();
  c.discriminator->eval();
  return c;
}

Volume3D translate(GeneratorNet& gen, const Volume3D& source) {
  gen.config().check_input(source.dims());
  torch::NoGradGuard no_grad;
  gen.eval();
  auto out = (gen.forward(to_signed(source)) + 1.0) * 0.5;
  return volume_from_tensor(out.clamp(0.0, 1.0), {0.0, 1.0});
}

Translator make_translator(std::shared_ptr<GeneratorNet> gen) {
  return [gen](const Volume3D& v) { return translate(*gen, v); };
}

MetricsReport evaluate_checkpoint(const fs::path& ckpt, const std::string& split,
                                  const std::optional<Dataset>& data) {
  Checkpoint c = load_checkpoint(ckpt);
  Dataset all;
  if (data) {
    all = *data;
  } else {
    if (c.cfg.dataset.empty()) throw ConfigError("checkpoint config has no dataset path");
    all = load_dataset(c.cfg.dataset);
  }
  const Dataset part = split_part(all, c.cfg.split_ratios, split);
  if (part.empty()) throw ConfigError("split '" + split + "' is empty");
  return evaluate_split(make_translator(c.generator), part, c.cfg.direction, split);
}

}  // namespace pupinet
