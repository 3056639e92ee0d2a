#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <torch/torch.h>

#include "pupinet/ablation.hpp"
#include "pupinet/layers.hpp"
#include "pupinet/trainer.hpp"
#include "test_util.hpp"

using namespace pupinet;
namespace fs = std::filesystem;
using testutil::kTinyDims;
using testutil::TempDir;
using testutil::tiny_config;

namespace {

Supervisors tiny_supervisors(uint64_t seed = 5) {
  Supervisors s;
  FrozenVsm v{VsmNet(kTinyDims, 4), {}};
  init_weights(*v.net, seed, 0.1);
  v.flag = freeze(*v.net);
  s.vsm = v;
  FrozenHfc h;
  h.ilm_opl = HfcNet(kTinyDims.h, kTinyDims.w, 4);
  h.opl_bm = HfcNet(kTinyDims.h, kTinyDims.w, 4);
  init_weights(*h.ilm_opl, seed + 1, 0.1);
  init_weights(*h.opl_bm, seed + 2, 0.1);
  h.ilm_opl_flag = freeze(*h.ilm_opl);
  h.opl_bm_flag = freeze(*h.opl_bm);
  h.boundaries = phantom_boundaries(kTinyDims);
  s.hfc = h;
  return s;
}

const Dataset& tiny_data() {
  static const Dataset d = make_phantom_dataset(3, 3, kTinyDims, 3);
  return d;
}

Dataset tiny_train() { return Dataset(tiny_data().begin(), tiny_data().begin() + 2); }

std::vector<std::string> term_names(const LossReport& r) {
  std::vector<std::string> out;
  for (const auto& [name, v] : r.terms) out.push_back(name);
  return out;
}

void expect_same_parameters(torch::nn::Module& a, torch::nn::Module& b) {
  const auto pa = a.named_parameters(), pb = b.named_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (const auto& item : pa) {
    EXPECT_TRUE(torch::equal(item.value(), pb[item.key()])) << item.key();
  }
}

}  // namespace

TEST(Trainer, ReportsTermsInFixedOrder) {
  TempDir dir("trainer_terms");
  Trainer fwd(tiny_config(Direction::OctToOcta, dir / "a"), tiny_train(), tiny_supervisors());
  const auto r = fwd.step();
  EXPECT_EQ(term_names(r), (std::vector<std::string>{"adv_d", "adv_g", "l1", "tv3d", "proj", "ilm_opl",
                                                      "opl_bm", "hfc_total", "vsm", "gan", "total", "ada_p"}));
  const auto& w = fwd.config().weights;
  // Terms are float32 scalars; recomposition holds to float precision.
  auto tol = [](double v) { return 1e-6 * std::abs(v) + 1e-9; };
  EXPECT_NEAR(r.get("gan"), r.get("adv_g") + w.lambda_A * r.get("l1"), tol(r.get("gan")));
  const double slab_sum = r.get("proj") + r.get("ilm_opl") + r.get("opl_bm") + r.get("tv3d");
  EXPECT_NEAR(r.get("hfc_total"), w.lambda_B * slab_sum, tol(r.get("hfc_total")));
  EXPECT_NEAR(r.get("total"), r.get("gan") + w.lambda_C * r.get("vsm") + r.get("hfc_total"), tol(r.get("total")));

  Trainer back(tiny_config(Direction::OctaToOct, dir / "b"), tiny_train(), {});
  const auto rb = back.step();
  EXPECT_EQ(term_names(rb), (std::vector<std::string>{"adv_d", "adv_g", "l1", "total", "ada_p"}));
  EXPECT_NEAR(rb.get("total"), rb.get("adv_g") + w.lambda_A_prime * rb.get("l1"), tol(rb.get("total")));
}

TEST(Trainer, ToggledOffSupervisorsLeaveNoRows) {
  TempDir dir("trainer_toggle");
  auto cfg = tiny_config(Direction::OctToOcta, dir / "a");
  cfg.modules.vsm_on = false;
  Supervisors sup = tiny_supervisors();
  sup.vsm.reset();
  Trainer t(cfg, tiny_train(), sup);
  const auto r = t.step();
  EXPECT_FALSE(r.has("vsm"));
  EXPECT_TRUE(r.has("hfc_total"));

  cfg.modules.hfc_on = false;
  Trainer bare(cfg, tiny_train(), {});
  const auto rb = bare.step();
  EXPECT_FALSE(rb.has("hfc_total"));
  EXPECT_FALSE(rb.has("tv3d"));
  EXPECT_NEAR(rb.get("total"), rb.get("gan"), 1e-9);
}

TEST(Trainer, MissingSupervisorsAbortBeforeTraining) {
  TempDir dir("trainer_staging");
  auto cfg = tiny_config(Direction::OctToOcta, dir / "a");
  EXPECT_THROW(Trainer(cfg, tiny_train(), {}), TrainingAbort);
  EXPECT_THROW(load_supervisors(cfg), TrainingAbort);
  cfg.vsm_checkpoint = (dir / "nope.pupi").string();
  cfg.hfc_checkpoint = (dir / "nope2.pupi").string();
  EXPECT_THROW(load_supervisors(cfg), TrainingAbort);
  cfg.direction = Direction::OctaToOct;
  EXPECT_NO_THROW(load_supervisors(cfg));
}

TEST(Trainer, SupervisorsNeverReachOptimizers) {
  TempDir dir("trainer_optim");
  const Supervisors sup = tiny_supervisors();
  Trainer t(tiny_config(Direction::OctToOcta, dir / "a"), tiny_train(), sup);
  std::vector<torch::Tensor> frozen;
  for (const auto& p : sup.vsm->net->parameters()) frozen.push_back(p);
  for (const auto& p : sup.hfc->ilm_opl->parameters()) frozen.push_back(p);
  for (const auto& p : sup.hfc->opl_bm->parameters()) frozen.push_back(p);
  auto opt = t.generator_optimizer_params();
  const auto d = t.discriminator_optimizer_params();
  opt.insert(opt.end(), d.begin(), d.end());
  for (const auto& f : frozen) {
    for (const auto& o : opt) EXPECT_FALSE(f.is_same(o));
  }
  const auto before = sup.digests();
  for (int i = 0; i < 3; ++i) t.step();
  EXPECT_EQ(t.supervisors().digests(), before);
  EXPECT_NO_THROW(t.supervisors().verify());
}

TEST(Trainer, TamperedSupervisorBlocksCheckpoint) {
  TempDir dir("trainer_tamper");
  Supervisors sup = tiny_supervisors();
  Trainer t(tiny_config(Direction::OctToOcta, dir / "a"), tiny_train(), sup);
  t.step();
  {
    torch::NoGradGuard no_grad;
    sup.vsm->net->parameters().front().view(-1)[0].add_(1.0f);
  }
  EXPECT_THROW(t.save_checkpoint(dir / "c.pupi"), TrainingAbort);
  EXPECT_FALSE(fs::exists(dir / "c.pupi"));
}

TEST(Trainer, NonFiniteTermAbortsWithNameAndStep) {
  TempDir dir("trainer_nan");
  auto cfg = tiny_config(Direction::OctToOcta, dir / "run");
  cfg.steps = 4;
  TrainHooks hooks;
  hooks.on_report = [](LossReport& r) {
    if (r.step == 2) r.set("vsm", std::numeric_limits<double>::quiet_NaN());
  };
  try {
    train(cfg, tiny_train(), tiny_supervisors(), hooks);
    FAIL() << "expected TrainingAbort";
  } catch (const TrainingAbort& e) {
    EXPECT_EQ(e.term(), "vsm");
    EXPECT_EQ(e.step(), 2);
    EXPECT_NE(std::string(e.what()).find("'vsm'"), std::string::npos);
  }
  const std::string diag = testutil::read_file(dir / "run" / "abort_report.txt");
  EXPECT_NE(diag.find("term vsm"), std::string::npos);
  EXPECT_NE(diag.find("step 2"), std::string::npos);
  const std::string csv = testutil::read_file(dir / "run" / "losses.csv");
  EXPECT_NE(csv.find("\n1,total,"), std::string::npos);
  EXPECT_EQ(csv.find("\n2,"), std::string::npos);
}

TEST(Trainer, AbortLeavesGeneratorUntouched) {
  TempDir dir("trainer_nan_gen");
  Trainer t(tiny_config(Direction::OctToOcta, dir / "a"), tiny_train(), tiny_supervisors());
  t.step();
  std::vector<torch::Tensor> before;
  for (const auto& p : t.generator().parameters()) before.push_back(p.detach().clone());
  TrainHooks hooks;
  hooks.on_report = [](LossReport& r) { r.set("l1", std::numeric_limits<double>::infinity()); };
  EXPECT_THROW(t.step(hooks), TrainingAbort);
  const auto after = t.generator().parameters();
  for (size_t i = 0; i < before.size(); ++i) EXPECT_TRUE(torch::equal(before[i], after[i]));
  EXPECT_EQ(t.steps_done(), 1);
}

TEST(Trainer, RunsAreDeterministic) {
  TempDir dir("trainer_det");
  const auto a = train(tiny_config(Direction::OctToOcta, dir / "a"), tiny_train(), tiny_supervisors());
  const auto b = train(tiny_config(Direction::OctToOcta, dir / "b"), tiny_train(), tiny_supervisors());
  EXPECT_EQ(testutil::read_file(dir / "a" / "losses.csv"), testutil::read_file(dir / "b" / "losses.csv"));
  expect_same_parameters(*a.generator, *b.generator);
  EXPECT_EQ(a.final_l1, b.final_l1);
}

TEST(Trainer, CheckpointRestoresBitwiseOutputs) {
  TempDir dir("trainer_ckpt");
  auto cfg = tiny_config(Direction::OctToOcta, dir / "run");
  cfg.checkpoint_every = 2;
  cfg.steps = 4;
  const auto result = train(cfg, tiny_train(), tiny_supervisors());
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint_2.pupi"));
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint_4.pupi"));
  EXPECT_TRUE(fs::exists(dir / "run" / "config.json"));

  const Checkpoint c = load_checkpoint(result.checkpoint);
  EXPECT_EQ(c.step, 4);
  EXPECT_EQ(c.supervisor_digests, result.supervisor_digests);
  EXPECT_EQ(to_json(c.cfg), to_json(cfg));
  EXPECT_EQ(c.ada.p, result.ada.p);
  const Volume3D& src = tiny_data()[2].oct;
  EXPECT_EQ(translate(*c.generator, src), translate(*result.generator, src));
  EXPECT_THROW(load_checkpoint(dir / "missing.pupi"), IoError);
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  TempDir dir("trainer_resume");
  auto cfg = tiny_config(Direction::OctToOcta, dir / "a");
  cfg.ada.interval = 1;
  cfg.ada.step_size = 0.05;
  const auto sup = tiny_supervisors();

  Trainer straight(cfg, tiny_train(), sup);
  std::vector<LossReport> expected;
  for (int i = 0; i < 5; ++i) expected.push_back(straight.step());

  Trainer first(cfg, tiny_train(), sup);
  for (int i = 0; i < 3; ++i) first.step();
  first.save_checkpoint(dir / "mid.pupi");
  auto other_out = cfg;
  other_out.out_dir = (dir / "b").string();
  Trainer second(other_out, tiny_train(), sup);
  second.resume(dir / "mid.pupi");
  EXPECT_EQ(second.steps_done(), 3);
  for (int i = 3; i < 5; ++i) {
    const auto r = second.step();
    EXPECT_EQ(r.step, expected[i].step);
    EXPECT_EQ(r.terms, expected[i].terms) << "step " << r.step;
  }
  expect_same_parameters(straight.generator(), second.generator());
  EXPECT_EQ(second.ada().p, straight.ada().p);
  EXPECT_EQ(second.ada().updates, straight.ada().updates);

  auto changed = cfg;
  changed.weights.lambda_A = 100.0;
  Trainer mismatched(changed, tiny_train(), sup);
  EXPECT_THROW(mismatched.resume(dir / "mid.pupi"), ConfigError);
  Trainer other_sup(cfg, tiny_train(), tiny_supervisors(99));
  EXPECT_THROW(other_sup.resume(dir / "mid.pupi"), TrainingAbort);
}

TEST(Trainer, ZeroProbabilityMatchesNoAugmentation) {
  TempDir dir("trainer_p0");
  auto with = tiny_config(Direction::OctaToOct, dir / "a");
  with.ada.p = 0.0;
  with.ada.step_size = 0.0;
  with.ada.interval = 1;
  auto without = with;
  without.ada_on = false;
  Trainer a(with, tiny_train(), {}), b(without, tiny_train(), {});
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a.step().terms, b.step().terms);
  EXPECT_EQ(a.ada().updates, 3);
  EXPECT_EQ(b.ada().updates, 0);
}

TEST(Trainer, AdaControllerAdvancesOnInterval) {
  TempDir dir("trainer_ada");
  auto cfg = tiny_config(Direction::OctaToOct, dir / "a");
  cfg.ada.interval = 2;
  Trainer t(cfg, tiny_train(), {});
  for (int i = 0; i < 5; ++i) t.step();
  EXPECT_EQ(t.ada().updates, 2);
  EXPECT_GE(t.ada().p, 0.0);
  EXPECT_LE(t.ada().p, 2 * cfg.ada.step_size + 1e-12);
}

TEST(Trainer, BatchingAndAccumulation) {
  TempDir dir("trainer_batch");
  auto cfg = tiny_config(Direction::OctaToOct, dir / "a");
  cfg.batch_size = 2;
  cfg.grad_accumulation = 2;
  Trainer t(cfg, tiny_train(), {});
  const auto r = t.step();
  EXPECT_TRUE(r.first_non_finite().empty());
  EXPECT_EQ(planned_steps(cfg, 2), cfg.steps);
  cfg.epochs = 3;
  EXPECT_EQ(planned_steps(cfg, 9), 3 * 3);
  cfg.batch_size = 1;
  cfg.grad_accumulation = 1;
  EXPECT_EQ(planned_steps(cfg, 9), 27);
}

TEST(Trainer, RejectsMismatchedInputs) {
  TempDir dir("trainer_dims");
  auto cfg = tiny_config(Direction::OctaToOct, dir / "a");
  cfg.dims = {8, 16, 12};
  EXPECT_THROW(cfg.validate(), ConfigError);
  auto ok = tiny_config(Direction::OctaToOct, dir / "a");
  const Dataset wrong = make_phantom_dataset(1, 1, {16, 16, 16}, 2);
  EXPECT_THROW(Trainer(ok, wrong, {}), ConfigError);
  EXPECT_THROW(Trainer(ok, {}, {}), ConfigError);
}

TEST(Translate, OutputsOnUnitRangeAndChecksDims) {
  auto gen = make_generator(tiny_config(Direction::OctToOcta, "x").generator_config(), 4);
  const Volume3D out = translate(*gen, tiny_data()[0].oct);
  EXPECT_EQ(out.dims(), kTinyDims);
  const auto [lo, hi] = out.min_max();
  EXPECT_GE(lo, 0.0f);
  EXPECT_LE(hi, 1.0f);
  EXPECT_EQ(out, translate(*gen, tiny_data()[0].oct));
  EXPECT_THROW(translate(*gen, Volume3D({8, 16, 12})), ShapeError);
}

TEST(SplitPart, NamesAndErrors) {
  const auto& d = tiny_data();
  EXPECT_EQ(split_part(d, {1.0 / 3, 1.0 / 3, 1.0 / 3}, "train").size(), 1u);
  EXPECT_EQ(split_part(d, {1.0 / 3, 1.0 / 3, 1.0 / 3}, "test").front().id, d[2].id);
  EXPECT_THROW(split_part(d, {1.0 / 3, 1.0 / 3, 1.0 / 3}, "holdout"), ConfigError);
}

TEST(Ablation, GridOrderAndLabels) {
  nlohmann::json base = to_json(tiny_config(Direction::OctToOcta, "grid"));
  const AblationGrid g = grid_from_json({{"base", base},
                                         {"axes",
                                          {{{"key", "modules.vsm_on"}, {"values", {false, true}}},
                                           {{"key", "modules.hfc_on"}, {"values", {false, true}}}}}});
  ASSERT_EQ(g.cell_count(), 4u);
  const std::vector<std::pair<bool, bool>> expected = {{false, false}, {true, false}, {false, true}, {true, true}};
  for (size_t i = 0; i < 4; ++i) {
    const TrainConfig c = config_from_json(g.cell_document(i));
    EXPECT_EQ(c.modules.vsm_on, expected[i].first);
    EXPECT_EQ(c.modules.hfc_on, expected[i].second);
  }
  EXPECT_EQ(axis_header("loss.lambda_A"), "λ_A");
  EXPECT_EQ(axis_header("modules.attention_on"), "Attn");
  EXPECT_EQ(axis_header("schedule.steps"), "schedule.steps");

  nlohmann::json bad = {{"base", base}, {"axes", {{{"key", "loss.lambda_A"}, {"values", {100, -1}}}}}};
  EXPECT_THROW(grid_from_json(bad), ConfigError);
  EXPECT_THROW(grid_from_json({{"axes", nlohmann::json::array()}}), ConfigError);
}

TEST(Ablation, CellMatchesStandaloneRunAndFailuresAreRecorded) {
  TempDir dir("ablation_cells");
  auto cfg = tiny_config(Direction::OctaToOct, dir / "grid");
  cfg.steps = 2;
  const AblationGrid g = grid_from_json(
      {{"base", to_json(cfg)}, {"axes", {{{"key", "loss.lambda_A_prime"}, {"values", {15.0, 30.0}}}}}});
  const auto result = run_ablation(g, tiny_data(), {});
  EXPECT_EQ(result.headers, (std::vector<std::string>{"λ_A'"}));
  ASSERT_EQ(result.rows.size(), 2u);
  EXPECT_EQ(result.rows[0].labels, (std::vector<std::string>{"15"}));
  EXPECT_EQ(result.rows[1].labels, (std::vector<std::string>{"30"}));

  auto solo_cfg = cfg;
  solo_cfg.out_dir = (dir / "solo").string();
  const auto solo = train(solo_cfg, split_part(tiny_data(), cfg.split_ratios, "train"), {});
  const auto report = evaluate_split(make_translator(solo.generator),
                                     split_part(tiny_data(), cfg.split_ratios, "test"), cfg.direction, "test");
  EXPECT_EQ(result.rows[0].metrics.psnr, report.mean.psnr);
  EXPECT_EQ(result.rows[0].metrics.ssim, report.mean.ssim);
  EXPECT_EQ(result.rows[0].metrics.mae, report.mean.mae);
  EXPECT_TRUE(fs::exists(dir / "grid" / "cell_1" / "checkpoint.pupi"));

  // A cell needing a missing supervisor fails alone.
  auto fwd = tiny_config(Direction::OctToOcta, dir / "grid2");
  fwd.steps = 1;
  fwd.modules.hfc_on = false;
  const AblationGrid g2 = grid_from_json(
      {{"base", to_json(fwd)}, {"axes", {{{"key", "modules.vsm_on"}, {"values", {false, true}}}}}});
  const auto r2 = run_ablation(g2, tiny_data(), {});
  EXPECT_EQ(r2.headers, (std::vector<std::string>{"pix2pixGAN", "VSM"}));
  EXPECT_TRUE(r2.rows[0].failure.empty());
  EXPECT_FALSE(r2.rows[1].failure.empty());
  EXPECT_EQ(r2.rows[1].labels, (std::vector<std::string>{"✓", "✓"}));
  EXPECT_NE(r2.table.find("pix2pixGAN"), std::string::npos);
}
