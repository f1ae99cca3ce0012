#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pc2dae/ops.hpp"
#include "pc2dae/rng.hpp"
#include "pc2dae/series.hpp"

namespace pc2dae {

enum class Variant { Lean, Wide, UnconstrainedAblation };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // throws config_error

struct ModelConfig {
  Variant variant = Variant::Lean;
  std::array<ad::Index, 3> encoder_channels{20, 28, 20};
  std::array<ad::Index, 2> decoder_channels{28, 20};
  ad::Index env_dim = 12;
  double softplus_beta = 5.0;
  double dropout = 0.1;
  ad::Index kernel_size = 5;
  std::array<ad::Index, 3> encoder_dilations{1, 2, 4};
  std::array<ad::Index, 3> decoder_dilations{4, 2, 1};
  ad::Index smoothing_kernel = 5;
  ad::Index groups = 4;
  ad::Index input_channels = kNumChannels;
  // Physics activation on (softplus) or off (identity); off only in the
  // ablation variant.
  bool constrained = true;

  static ModelConfig lean();
  static ModelConfig wide();
  static ModelConfig ablation();  // Lean geometry, constraints off
  // Tiny geometry for finite-difference tests.
  static ModelConfig miniature();

  void validate() const;
  std::string serialize() const;  // flat key = value block
  static ModelConfig deserialize(const std::string& text);
  bool same_architecture(const ModelConfig& other) const;
};

struct TcnBlockParams {
  ad::Tensor conv_w, conv_b;
  ad::Tensor gn_gamma, gn_beta;
  ad::Tensor res_w, res_b;  // undefined when in/out widths match
  ad::Index in_ch = 0, out_ch = 0, dilation = 1;
};

struct HeadParams {
  ad::Tensor attn_w1, attn_b1, attn_w2, attn_b2;
  ad::Tensor env_w, env_b;
  ad::Tensor proj_w, proj_b;
  ad::Tensor smooth_raw;  // [n_channels, smoothing_kernel]
  ad::Tensor alpha_raw;   // [1]
  ad::Index n_channels = 0;
};

// Conv1D + GroupNorm + ELU + dropout with a residual connection (identity,
// or 1x1 conv when widths differ). Exposed as a free function so the block
// can be tested in isolation.
ad::Tensor tcn_block(const ad::Tensor& x, const TcnBlockParams& params,
                     ad::Index kernel_size, ad::Index groups, double dropout_p,
                     bool training, RngStream* rng);

class Pc2daeModel {
 public:
  Pc2daeModel(const ModelConfig& cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }

  ad::Tensor encode(const ad::Tensor& x, bool training = false,
                    RngStream* rng = nullptr);
  ad::Tensor decode(const ad::Tensor& z, bool training = false,
                    RngStream* rng = nullptr);
  ad::Tensor encode_env(const ad::Tensor& env);
  ad::Tensor head_forward(Family family, const ad::Tensor& h,
                          const ad::Tensor& env_embed);
  // Family-ordered outputs: BC [B,4,T], Gas [B,9,T], CO2 [B,2,T].
  std::array<ad::Tensor, kNumFamilies> forward_families(
      const ad::Tensor& x, const ad::Tensor& env, bool training = false,
      RngStream* rng = nullptr);
  // Concatenated canonical-order output [B,15,T].
  ad::Tensor forward(const ad::Tensor& x, const ad::Tensor& env,
                     bool training = false, RngStream* rng = nullptr);

  std::vector<std::pair<std::string, ad::Tensor>>& parameters() {
    return registry_;
  }
  const std::vector<std::pair<std::string, ad::Tensor>>& parameters() const {
    return registry_;
  }
  ad::Index parameter_count() const;
  void zero_grad();

  void save_checkpoint(const std::string& path) const;
  static Pc2daeModel load_checkpoint(const std::string& path);
  // Loads parameters from a checkpoint whose architecture must match this
  // model's; the model is untouched on any error.
  void load_parameters(const std::string& path);

 private:
  ModelConfig cfg_;
  std::array<TcnBlockParams, 3> encoder_;
  std::array<TcnBlockParams, 3> decoder_;
  ad::Tensor env_w1_, env_b1_, env_w2_, env_b2_;
  std::array<HeadParams, kNumFamilies> heads_;
  std::vector<std::pair<std::string, ad::Tensor>> registry_;
};

// Number of time steps with nonzero input gradient when one mid-window
// output step of the encoder+decoder stack is perturbed. Normalization
// statistics are frozen during the probe so the result reflects the
// convolutional span rather than the window length.
ad::Index receptive_field_span(Pc2daeModel& model, ad::Index window_len = 128);

}  // namespace pc2dae
