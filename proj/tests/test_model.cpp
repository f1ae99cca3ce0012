#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "gradcheck.hpp"
#include "pc2dae/model.hpp"
#include "pc2dae/ops.hpp"

using namespace pc2dae;
using namespace pc2dae::ad;
using testutil::max_grad_rel_error;
using testutil::random_tensor;

namespace {

Tensor find_param(Pc2daeModel& model, const std::string& name) {
  for (auto& [n, t] : model.parameters()) {
    if (n == name) return t;
  }
  FAIL("parameter not found: " << name);
  return Tensor();
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("variant names round-trip") {
  CHECK(variant_from_name(variant_name(Variant::Lean)) == Variant::Lean);
  CHECK(variant_from_name(variant_name(Variant::Wide)) == Variant::Wide);
  CHECK(variant_from_name(variant_name(Variant::UnconstrainedAblation)) ==
        Variant::UnconstrainedAblation);
  CHECK_THROWS_AS(variant_from_name("enormous"), config_error);
}

TEST_CASE("built-in configs validate and differ where they should") {
  const ModelConfig lean = ModelConfig::lean();
  const ModelConfig wide = ModelConfig::wide();
  const ModelConfig ablation = ModelConfig::ablation();
  CHECK_NOTHROW(lean.validate());
  CHECK_NOTHROW(wide.validate());
  CHECK_NOTHROW(ablation.validate());
  CHECK_NOTHROW(ModelConfig::miniature().validate());

  CHECK(lean.constrained);
  CHECK(wide.constrained);
  CHECK_FALSE(ablation.constrained);

  // The ablation reuses the lean geometry so parameter budgets match.
  CHECK(ablation.encoder_channels == lean.encoder_channels);
  CHECK(ablation.decoder_channels == lean.decoder_channels);
  CHECK_FALSE(lean.same_architecture(wide));
  CHECK_FALSE(lean.same_architecture(ablation));

  CHECK(lean.encoder_dilations == std::array<Index, 3>{1, 2, 4});
  CHECK(lean.decoder_dilations == std::array<Index, 3>{4, 2, 1});
  CHECK(lean.kernel_size == 5);
}

TEST_CASE("config validation rejects broken geometry") {
  ModelConfig cfg = ModelConfig::lean();
  cfg.kernel_size = 4;
  CHECK_THROWS_AS(cfg.validate(), config_error);

  cfg = ModelConfig::lean();
  cfg.groups = 3;  // does not divide the channel widths
  CHECK_THROWS_AS(cfg.validate(), config_error);

  cfg = ModelConfig::lean();
  cfg.smoothing_kernel = 4;
  CHECK_THROWS_AS(cfg.validate(), config_error);

  cfg = ModelConfig::lean();
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), config_error);

  cfg = ModelConfig::lean();
  cfg.softplus_beta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), config_error);
}

TEST_CASE("configs serialize to text and back unchanged") {
  for (const ModelConfig& cfg :
       {ModelConfig::lean(), ModelConfig::wide(), ModelConfig::ablation(),
        ModelConfig::miniature()}) {
    const ModelConfig back = ModelConfig::deserialize(cfg.serialize());
    CHECK(back.same_architecture(cfg));
    CHECK(back.serialize() == cfg.serialize());
  }
  CHECK_THROWS_AS(ModelConfig::deserialize("variant = lean\nnonsense"),
                  checkpoint_error);
}

TEST_CASE("parameter budgets are frozen per variant") {
  Pc2daeModel lean(ModelConfig::lean(), 1);
  Pc2daeModel wide(ModelConfig::wide(), 1);
  Pc2daeModel ablation(ModelConfig::ablation(), 1);
  CHECK(lean.parameter_count() == 19816);
  CHECK(wide.parameter_count() == 186461);
  // Identity instead of softplus costs nothing in parameters.
  CHECK(ablation.parameter_count() == lean.parameter_count());
}

TEST_CASE("the registry names every parameter exactly once") {
  Pc2daeModel model(ModelConfig::miniature(), 3);
  std::set<std::string> names;
  Index total = 0;
  for (const auto& [name, t] : model.parameters()) {
    CHECK(names.insert(name).second);
    CHECK(t.requires_grad());
    total += t.size();
  }
  CHECK(total == model.parameter_count());
  // Spot-check the naming scheme used by checkpoints.
  CHECK(names.count("enc.0.conv.w") == 1);
  CHECK(names.count("dec.2.gn.beta") == 1);
  CHECK(names.count("env.l1.w") == 1);
  CHECK(names.count("head.gas.proj.b") == 1);
  CHECK(names.count("head.co2.smooth") == 1);
  CHECK(names.count("head.bc.alpha") == 1);
}

TEST_CASE("initialization is seed-deterministic") {
  Pc2daeModel a(ModelConfig::miniature(), 11);
  Pc2daeModel b(ModelConfig::miniature(), 11);
  Pc2daeModel c(ModelConfig::miniature(), 12);

  bool all_equal = true, any_diff = false;
  for (size_t i = 0; i < a.parameters().size(); ++i) {
    const auto& av = a.parameters()[i].second.values();
    const auto& bv = b.parameters()[i].second.values();
    const auto& cv = c.parameters()[i].second.values();
    all_equal = all_equal && (av == bv).all();
    any_diff = any_diff || (av != cv).any();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("forward produces canonical [batch,15,time] outputs") {
  Pc2daeModel model(ModelConfig::miniature(), 5);
  Tensor x = random_tensor({2, kNumChannels, 32}, 6, false);
  Tensor env = random_tensor({2, kNumEnv, 32}, 7, false);

  const auto outs = model.forward_families(x, env);
  CHECK(outs[0].shape() == Shape({2, 4, 32}));
  CHECK(outs[1].shape() == Shape({2, 9, 32}));
  CHECK(outs[2].shape() == Shape({2, 2, 32}));

  Tensor y = model.forward(x, env);
  REQUIRE(y.shape() == Shape({2, kNumChannels, 32}));

  // forward is the channel concatenation of the family heads.
  const Array& yv = y.values();
  const Index widths[3] = {4, 9, 2};
  const Index starts[3] = {0, 4, 13};
  for (Index b = 0; b < 2; ++b) {
    for (int f = 0; f < 3; ++f) {
      const Index len = widths[f] * 32;
      const auto got = yv.segment(b * kNumChannels * 32 + starts[f] * 32, len);
      const auto expect = outs[static_cast<size_t>(f)].values().segment(
          b * len, len);
      CHECK((got == expect).all());
    }
  }
}

TEST_CASE("encoder output width follows the config") {
  ModelConfig cfg = ModelConfig::miniature();
  Pc2daeModel model(cfg, 8);
  Tensor x = random_tensor({1, kNumChannels, 48}, 9, false);
  Tensor z = model.encode(x);
  CHECK(z.shape() == Shape({1, cfg.encoder_channels[2], 48}));
  Tensor h = model.decode(z);
  CHECK(h.shape() == Shape({1, cfg.decoder_channels[1], 48}));
}

TEST_CASE("constrained variants emit strictly positive values") {
  Pc2daeModel model(ModelConfig::miniature(), 21);
  for (std::uint64_t s = 50; s < 53; ++s) {
    Tensor x = random_tensor({2, kNumChannels, 32}, s, false);
    Tensor env = random_tensor({2, kNumEnv, 32}, s + 100, false);
    Tensor y = model.forward(x, env);
    CHECK(y.values().minCoeff() > 0.0);
  }
}

TEST_CASE("the unconstrained ablation can cross zero") {
  ModelConfig cfg = ModelConfig::miniature();
  cfg.variant = Variant::UnconstrainedAblation;
  cfg.constrained = false;
  Pc2daeModel model(cfg, 22);
  bool any_negative = false;
  for (std::uint64_t s = 60; s < 63 && !any_negative; ++s) {
    Tensor x = random_tensor({2, kNumChannels, 32}, s, false);
    Tensor env = random_tensor({2, kNumEnv, 32}, s + 100, false);
    any_negative = model.forward(x, env).values().minCoeff() < 0.0;
  }
  CHECK(any_negative);
}

TEST_CASE("training mode with nonzero dropout demands an rng") {
  Pc2daeModel model(ModelConfig::lean(), 23);
  Tensor x = random_tensor({1, kNumChannels, 128}, 24, false);
  Tensor env = random_tensor({1, kNumEnv, 128}, 25, false);
  CHECK_THROWS_AS(model.forward(x, env, /*training=*/true, nullptr),
                  numeric_error);
  RngStream rng(1);
  CHECK_NOTHROW(model.forward(x, env, true, &rng));
}

TEST_CASE("a strongly negative blend logit disables output smoothing") {
  ModelConfig cfg = ModelConfig::miniature();
  Pc2daeModel model(cfg, 31);
  Tensor x = random_tensor({1, kNumChannels, 32}, 32, false);
  Tensor env = random_tensor({1, kNumEnv, 32}, 33, false);

  Tensor alpha = find_param(model, "head.bc.alpha");
  Tensor smooth = find_param(model, "head.bc.smooth");

  // sigmoid(-40) ~ 4e-18: whatever the kernel holds cannot reach the output.
  alpha.mutable_values()(0) = -40.0;
  const Array base = model.forward(x, env).values();
  smooth.mutable_values().setRandom();
  const Array perturbed = model.forward(x, env).values();
  CHECK((base - perturbed).abs().maxCoeff() < 1e-12);
}

TEST_CASE("a one-hot smoothing kernel acts as the identity") {
  ModelConfig cfg = ModelConfig::miniature();
  Pc2daeModel model(cfg, 34);
  Tensor x = random_tensor({1, kNumChannels, 32}, 35, false);
  Tensor env = random_tensor({1, kNumEnv, 32}, 36, false);

  Tensor alpha = find_param(model, "head.bc.alpha");
  Tensor smooth = find_param(model, "head.bc.smooth");

  alpha.mutable_values()(0) = -40.0;
  const Array unsmoothed = model.forward(x, env).values();

  // Softmax of a large center logit is a near-delta kernel, so even a
  // fully-on blend leaves the head output unchanged.
  alpha.mutable_values()(0) = 40.0;
  smooth.mutable_values().setZero();
  const Index ks = cfg.smoothing_kernel;
  for (Index c = 0; c < 4; ++c) {
    smooth.mutable_values()(c * ks + ks / 2) = 60.0;
  }
  const Array spiked = model.forward(x, env).values();
  CHECK((spiked - unsmoothed).abs().maxCoeff() < 1e-9);
}

TEST_CASE("checkpoints round-trip config and parameters bitwise") {
  const std::string path = "model_test_ckpt.bin";
  Pc2daeModel model(ModelConfig::miniature(), 41);
  model.save_checkpoint(path);
  Pc2daeModel loaded = Pc2daeModel::load_checkpoint(path);
  std::remove(path.c_str());

  CHECK(loaded.config().serialize() == model.config().serialize());
  REQUIRE(loaded.parameters().size() == model.parameters().size());
  for (size_t i = 0; i < model.parameters().size(); ++i) {
    CHECK(loaded.parameters()[i].first == model.parameters()[i].first);
    CHECK((loaded.parameters()[i].second.values() ==
           model.parameters()[i].second.values())
              .all());
  }
}

TEST_CASE("load_parameters enforces matching architectures atomically") {
  const std::string path = "model_test_arch.bin";
  Pc2daeModel mini(ModelConfig::miniature(), 42);
  mini.save_checkpoint(path);

  Pc2daeModel lean(ModelConfig::lean(), 43);
  const Array before = lean.parameters()[0].second.values();
  CHECK_THROWS_AS(lean.load_parameters(path), checkpoint_error);
  CHECK((lean.parameters()[0].second.values() == before).all());

  Pc2daeModel mini2(ModelConfig::miniature(), 44);
  CHECK_NOTHROW(mini2.load_parameters(path));
  CHECK((mini2.parameters()[3].second.values() ==
         mini.parameters()[3].second.values())
            .all());
  std::remove(path.c_str());
}

TEST_CASE("corrupted checkpoint files are rejected") {
  const std::string path = "model_test_bad.bin";
  Pc2daeModel model(ModelConfig::miniature(), 45);
  model.save_checkpoint(path);

  // Truncate the footer off.
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(),
              static_cast<std::streamsize>(bytes.size() - 12));
  }
  CHECK_THROWS_AS(Pc2daeModel::load_checkpoint(path), checkpoint_error);

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOTACKPT";
  }
  CHECK_THROWS_AS(Pc2daeModel::load_checkpoint(path), checkpoint_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(Pc2daeModel::load_checkpoint(path), checkpoint_error);
}

TEST_CASE("the convolutional stack spans 57 input steps") {
  Pc2daeModel model(ModelConfig::miniature(), 51);
  CHECK(receptive_field_span(model) == 57);
}

TEST_CASE("gradcheck: full forward pass at miniature scale") {
  ModelConfig cfg = ModelConfig::miniature();
  Pc2daeModel model(cfg, 61);
  Tensor x = random_tensor({1, kNumChannels, 16}, 62, true);
  Tensor env = random_tensor({1, kNumEnv, 16}, 63, true);
  Tensor w = random_tensor({1, kNumChannels, 16}, 64, false);

  std::vector<Tensor> leaves = {x, env,
                                find_param(model, "enc.0.conv.w"),
                                find_param(model, "dec.2.conv.b"),
                                find_param(model, "head.gas.attn1.w"),
                                find_param(model, "head.bc.smooth"),
                                find_param(model, "head.co2.alpha"),
                                find_param(model, "env.l2.w")};
  auto fn = [&] { return sum(mul(model.forward(x, env), w)); };
  CHECK(max_grad_rel_error(fn, leaves, 1e-5, 12, 65) < 2e-5);
}

}  // TEST_SUITE("model")
