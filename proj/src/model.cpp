#include "pc2dae/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace pc2dae {

using ad::Array;
using ad::Index;
using ad::Shape;
using ad::Tensor;

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Lean:
      return "lean";
    case Variant::Wide:
      return "wide";
    case Variant::UnconstrainedAblation:
      return "ablation";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "lean") return Variant::Lean;
  if (name == "wide") return Variant::Wide;
  if (name == "ablation") return Variant::UnconstrainedAblation;
  throw config_error("unknown variant '" + name +
                     "' (expected lean, wide or ablation)");
}

ModelConfig ModelConfig::lean() { return ModelConfig{}; }

ModelConfig ModelConfig::wide() {
  ModelConfig c;
  c.variant = Variant::Wide;
  c.encoder_channels = {64, 96, 64};
  c.decoder_channels = {96, 64};
  c.env_dim = 16;
  c.softplus_beta = 3.0;
  c.dropout = 0.15;
  c.groups = 8;
  return c;
}

ModelConfig ModelConfig::ablation() {
  ModelConfig c;  // Lean geometry
  c.variant = Variant::UnconstrainedAblation;
  c.constrained = false;
  return c;
}

ModelConfig ModelConfig::miniature() {
  ModelConfig c;
  c.encoder_channels = {4, 6, 4};
  c.decoder_channels = {6, 4};
  c.env_dim = 4;
  c.groups = 2;
  c.dropout = 0.0;
  return c;
}

void ModelConfig::validate() const {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw config_error("kernel_size must be odd and >= 1");
  }
  if (smoothing_kernel < 1 || smoothing_kernel % 2 == 0) {
    throw config_error("smoothing_kernel must be odd and >= 1");
  }
  if (env_dim < 1) throw config_error("env_dim must be >= 1");
  if (softplus_beta <= 0.0) throw config_error("softplus_beta must be > 0");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw config_error("dropout must be in [0,1)");
  }
  const std::array<Index, 6> widths = {
      encoder_channels[0], encoder_channels[1], encoder_channels[2],
      decoder_channels[0], decoder_channels[1], encoder_channels[2]};
  for (Index w : widths) {
    if (w < 1) throw config_error("channel widths must be >= 1");
    if (w % groups != 0) {
      throw config_error("groups=" + std::to_string(groups) +
                         " does not divide channel width " +
                         std::to_string(w));
    }
  }
  if (variant == Variant::UnconstrainedAblation && constrained) {
    throw config_error("ablation variant must have constraints off");
  }
}

std::string ModelConfig::serialize() const {
  std::ostringstream os;
  os << "variant = " << variant_name(variant) << '\n';
  os << "encoder_channels = " << encoder_channels[0] << ','
     << encoder_channels[1] << ',' << encoder_channels[2] << '\n';
  os << "decoder_channels = " << decoder_channels[0] << ','
     << decoder_channels[1] << '\n';
  os << "env_dim = " << env_dim << '\n';
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", softplus_beta);
  os << "softplus_beta = " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", dropout);
  os << "dropout = " << buf << '\n';
  os << "kernel_size = " << kernel_size << '\n';
  os << "encoder_dilations = " << encoder_dilations[0] << ','
     << encoder_dilations[1] << ',' << encoder_dilations[2] << '\n';
  os << "decoder_dilations = " << decoder_dilations[0] << ','
     << decoder_dilations[1] << ',' << decoder_dilations[2] << '\n';
  os << "smoothing_kernel = " << smoothing_kernel << '\n';
  os << "groups = " << groups << '\n';
  os << "input_channels = " << input_channels << '\n';
  os << "constrained = " << (constrained ? 1 : 0) << '\n';
  return os.str();
}

namespace {

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

ModelConfig ModelConfig::deserialize(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw checkpoint_error(std::string("config block missing key '") + key +
                             "'");
    }
    return it->second;
  };
  ModelConfig c;
  c.variant = variant_from_name(need("variant"));
  auto enc = split_csv_list(need("encoder_channels"));
  auto dec = split_csv_list(need("decoder_channels"));
  auto ed = split_csv_list(need("encoder_dilations"));
  auto dd = split_csv_list(need("decoder_dilations"));
  if (enc.size() != 3 || dec.size() != 2 || ed.size() != 3 || dd.size() != 3) {
    throw checkpoint_error("config block has malformed channel/dilation lists");
  }
  for (int i = 0; i < 3; ++i) {
    c.encoder_channels[static_cast<size_t>(i)] = std::stol(enc[static_cast<size_t>(i)]);
    c.encoder_dilations[static_cast<size_t>(i)] = std::stol(ed[static_cast<size_t>(i)]);
    c.decoder_dilations[static_cast<size_t>(i)] = std::stol(dd[static_cast<size_t>(i)]);
  }
  c.decoder_channels[0] = std::stol(dec[0]);
  c.decoder_channels[1] = std::stol(dec[1]);
  c.env_dim = std::stol(need("env_dim"));
  c.softplus_beta = std::stod(need("softplus_beta"));
  c.dropout = std::stod(need("dropout"));
  c.kernel_size = std::stol(need("kernel_size"));
  c.smoothing_kernel = std::stol(need("smoothing_kernel"));
  c.groups = std::stol(need("groups"));
  c.input_channels = std::stol(need("input_channels"));
  c.constrained = need("constrained") == "1";
  c.validate();
  return c;
}

bool ModelConfig::same_architecture(const ModelConfig& other) const {
  return serialize() == other.serialize();
}

// ------------------------------------------------------------ construction

namespace {

Tensor init_conv_weight(RngStream& root, const std::string& name, Index out_ch,
                        Index in_per_group, Index k) {
  RngStream rng = root.fork(name);
  const double bound = 1.0 / std::sqrt(double(in_per_group * k));
  Array v(out_ch * in_per_group * k);
  for (Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-bound, bound);
  return Tensor::from_array({out_ch, in_per_group, k}, std::move(v), true);
}

Tensor init_conv_bias(RngStream& root, const std::string& name, Index out_ch,
                      Index in_per_group, Index k) {
  RngStream rng = root.fork(name);
  const double bound = 1.0 / std::sqrt(double(in_per_group * k));
  Array v(out_ch);
  for (Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-bound, bound);
  return Tensor::from_array({out_ch}, std::move(v), true);
}

}  // namespace

Pc2daeModel::Pc2daeModel(const ModelConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg) {
  cfg_.validate();
  RngStream root(init_seed);
  auto reg = [this](const std::string& name, Tensor t) {
    registry_.emplace_back(name, t);
    return t;
  };

  const Index k = cfg_.kernel_size;
  const std::array<Index, 7> plan = {
      cfg_.input_channels,     cfg_.encoder_channels[0],
      cfg_.encoder_channels[1], cfg_.encoder_channels[2],
      cfg_.decoder_channels[0], cfg_.decoder_channels[1],
      cfg_.encoder_channels[2]};
  for (int b = 0; b < 6; ++b) {
    TcnBlockParams p;
    p.in_ch = plan[static_cast<size_t>(b)];
    p.out_ch = plan[static_cast<size_t>(b) + 1];
    p.dilation = (b < 3) ? cfg_.encoder_dilations[static_cast<size_t>(b)]
                         : cfg_.decoder_dilations[static_cast<size_t>(b - 3)];
    const std::string base =
        (b < 3 ? "enc." : "dec.") + std::to_string(b % 3);
    p.conv_w = reg(base + ".conv.w",
                   init_conv_weight(root, base + ".conv.w", p.out_ch, p.in_ch, k));
    p.conv_b = reg(base + ".conv.b",
                   init_conv_bias(root, base + ".conv.b", p.out_ch, p.in_ch, k));
    p.gn_gamma = reg(base + ".gn.gamma", Tensor::full({p.out_ch}, 1.0, true));
    p.gn_beta = reg(base + ".gn.beta", Tensor::zeros({p.out_ch}, true));
    if (p.in_ch != p.out_ch) {
      p.res_w = reg(base + ".res.w",
                    init_conv_weight(root, base + ".res.w", p.out_ch, p.in_ch, 1));
      p.res_b = reg(base + ".res.b",
                    init_conv_bias(root, base + ".res.b", p.out_ch, p.in_ch, 1));
    }
    if (b < 3) {
      encoder_[static_cast<size_t>(b)] = p;
    } else {
      decoder_[static_cast<size_t>(b - 3)] = p;
    }
  }

  const Index de = cfg_.env_dim;
  env_w1_ = reg("env.l1.w", init_conv_weight(root, "env.l1.w", de, kNumEnv, 1));
  env_b1_ = reg("env.l1.b", init_conv_bias(root, "env.l1.b", de, kNumEnv, 1));
  env_w2_ = reg("env.l2.w", init_conv_weight(root, "env.l2.w", de, de, 1));
  env_b2_ = reg("env.l2.b", init_conv_bias(root, "env.l2.b", de, de, 1));

  const Index hidden = cfg_.encoder_channels[2];
  const Index bottleneck = std::max<Index>(1, hidden / 4);
  for (int f = 0; f < kNumFamilies; ++f) {
    const auto family = static_cast<Family>(f);
    const auto span = family_span(family);
    HeadParams h;
    h.n_channels = span.second - span.first;
    const std::string base = std::string("head.") + family_name(family);
    h.attn_w1 = reg(base + ".attn1.w", init_conv_weight(root, base + ".attn1.w",
                                                        bottleneck, hidden, 1));
    h.attn_b1 = reg(base + ".attn1.b", init_conv_bias(root, base + ".attn1.b",
                                                      bottleneck, hidden, 1));
    h.attn_w2 = reg(base + ".attn2.w", init_conv_weight(root, base + ".attn2.w",
                                                        hidden, bottleneck, 1));
    h.attn_b2 = reg(base + ".attn2.b", init_conv_bias(root, base + ".attn2.b",
                                                      hidden, bottleneck, 1));
    h.env_w = reg(base + ".env.w",
                  init_conv_weight(root, base + ".env.w", hidden, de, 1));
    h.env_b = reg(base + ".env.b",
                  init_conv_bias(root, base + ".env.b", hidden, de, 1));
    h.proj_w = reg(base + ".proj.w", init_conv_weight(root, base + ".proj.w",
                                                      h.n_channels, hidden, 1));
    h.proj_b = reg(base + ".proj.b", init_conv_bias(root, base + ".proj.b",
                                                    h.n_channels, hidden, 1));
    // Zero raw weights: softmax gives a uniform kernel; alpha starts at a
    // half blend.
    h.smooth_raw = reg(base + ".smooth",
                       Tensor::zeros({h.n_channels, cfg_.smoothing_kernel}, true));
    h.alpha_raw = reg(base + ".alpha", Tensor::zeros({1}, true));
    heads_[static_cast<size_t>(f)] = h;
  }
}

// ----------------------------------------------------------------- forward

ad::Tensor tcn_block(const Tensor& x, const TcnBlockParams& params,
                     Index kernel_size, Index groups, double dropout_p,
                     bool training, RngStream* rng) {
  if (x.ndim() != 3 || x.dim(1) != params.in_ch) {
    throw shape_error("tcn_block: input shape " + ad::shape_str(x.shape()) +
                      " does not provide " + std::to_string(params.in_ch) +
                      " channels");
  }
  const Index pad = params.dilation * (kernel_size - 1) / 2;
  Tensor h = ad::conv1d(x, params.conv_w, params.conv_b, params.dilation, pad);
  h = ad::group_norm(h, groups, params.gn_gamma, params.gn_beta);
  h = ad::elu(h);
  h = ad::dropout(h, dropout_p, training, rng);
  Tensor res = params.res_w.defined()
                   ? ad::conv1d(x, params.res_w, params.res_b, 1, 0)
                   : x;
  return ad::add(h, res);
}

Tensor Pc2daeModel::encode(const Tensor& x, bool training, RngStream* rng) {
  if (x.ndim() != 3 || x.dim(1) != cfg_.input_channels) {
    throw shape_error("encode: input shape " + ad::shape_str(x.shape()) +
                      " does not provide " +
                      std::to_string(cfg_.input_channels) + " channels");
  }
  Tensor h = x;
  for (const auto& block : encoder_) {
    h = tcn_block(h, block, cfg_.kernel_size, cfg_.groups, cfg_.dropout,
                  training, rng);
  }
  return h;
}

Tensor Pc2daeModel::decode(const Tensor& z, bool training, RngStream* rng) {
  Tensor h = z;
  for (const auto& block : decoder_) {
    h = tcn_block(h, block, cfg_.kernel_size, cfg_.groups, cfg_.dropout,
                  training, rng);
  }
  return h;
}

Tensor Pc2daeModel::encode_env(const Tensor& env) {
  if (env.ndim() != 3 || env.dim(1) != kNumEnv) {
    throw shape_error("encode_env: expected [B," + std::to_string(kNumEnv) +
                      ",T], got " + ad::shape_str(env.shape()));
  }
  Tensor h = ad::conv1d(env, env_w1_, env_b1_, 1, 0);
  h = ad::elu(h);
  return ad::conv1d(h, env_w2_, env_b2_, 1, 0);
}

Tensor Pc2daeModel::head_forward(Family family, const Tensor& h,
                                 const Tensor& env_embed) {
  const auto& head = heads_[static_cast<size_t>(family)];

  // Squeeze-and-excitation gate over hidden channels.
  Tensor squeezed = ad::mean_axis(h, 2);  // [B,H,1]
  Tensor gate = ad::conv1d(squeezed, head.attn_w1, head.attn_b1, 1, 0);
  gate = ad::relu(gate);
  gate = ad::conv1d(gate, head.attn_w2, head.attn_b2, 1, 0);
  gate = ad::sigmoid(gate);
  Tensor attended = ad::channel_scale(h, gate);

  // Additive environmental conditioning.
  Tensor cond = ad::conv1d(env_embed, head.env_w, head.env_b, 1, 0);
  Tensor mixed = ad::add(attended, cond);

  // Per-time-step projection to family channels, then the physics
  // activation.
  Tensor y = ad::conv1d(mixed, head.proj_w, head.proj_b, 1, 0);
  if (cfg_.constrained) y = ad::softplus(y, cfg_.softplus_beta);

  // Learnable smoothing: y_smooth = alpha * (K*y) + (1-alpha) * y with a
  // softmax-normalized depthwise kernel and edge-replicate padding.
  const Index ks = cfg_.smoothing_kernel;
  Tensor kernel = ad::softmax(head.smooth_raw, 1);
  kernel = ad::reshape(kernel, {head.n_channels, 1, ks});
  Tensor padded = ad::replicate_pad_time(y, (ks - 1) / 2);
  Tensor smoothed =
      ad::conv1d(padded, kernel, Tensor(), 1, 0, head.n_channels);
  Tensor alpha = ad::sigmoid(head.alpha_raw);
  Tensor one_minus = ad::sub(Tensor::scalar(1.0), alpha);
  return ad::add(ad::scale_by(smoothed, alpha), ad::scale_by(y, one_minus));
}

std::array<Tensor, kNumFamilies> Pc2daeModel::forward_families(
    const Tensor& x, const Tensor& env, bool training, RngStream* rng) {
  if (env.ndim() != 3 || x.ndim() != 3 || env.dim(0) != x.dim(0) ||
      env.dim(2) != x.dim(2)) {
    throw shape_error("forward: input " + ad::shape_str(x.shape()) +
                      " and env " + ad::shape_str(env.shape()) +
                      " batch/time dims do not match");
  }
  Tensor h = decode(encode(x, training, rng), training, rng);
  Tensor env_embed = encode_env(env);
  std::array<Tensor, kNumFamilies> out;
  for (int f = 0; f < kNumFamilies; ++f) {
    out[static_cast<size_t>(f)] =
        head_forward(static_cast<Family>(f), h, env_embed);
  }
  return out;
}

Tensor Pc2daeModel::forward(const Tensor& x, const Tensor& env, bool training,
                            RngStream* rng) {
  auto fams = forward_families(x, env, training, rng);
  return ad::concat_channels({fams[0], fams[1], fams[2]});
}

Index Pc2daeModel::parameter_count() const {
  Index n = 0;
  for (const auto& [name, t] : registry_) n += t.size();
  return n;
}

void Pc2daeModel::zero_grad() {
  for (auto& [name, t] : registry_) t.zero_grad();
}

// -------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'P', 'C', '2', 'D', 'A', 'E', '1', '\n'};
constexpr char kFooter[8] = {'E', 'N', 'D', 'C', 'K', 'P', 'T', '\n'};

void write_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

std::uint64_t read_u64(std::istream& is) {
  char b[8];
  if (!is.read(b, 8)) throw checkpoint_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= std::uint64_t(static_cast<unsigned char>(b[i])) << (8 * i);
  }
  return v;
}

}  // namespace

void Pc2daeModel::save_checkpoint(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw checkpoint_error("cannot open '" + path + "' for writing");
  os.write(kMagic, 8);
  const std::string cfg_text = cfg_.serialize();
  write_u64(os, cfg_text.size());
  os.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  write_u64(os, registry_.size());
  for (const auto& [name, t] : registry_) {
    write_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(os, t.shape().size());
    for (Index d : t.shape()) write_u64(os, std::uint64_t(d));
    write_u64(os, std::uint64_t(t.size()));
    os.write(reinterpret_cast<const char*>(t.values().data()),
             static_cast<std::streamsize>(sizeof(double)) * t.size());
  }
  os.write(kFooter, 8);
  if (!os) throw checkpoint_error("write to '" + path + "' failed");
}

namespace {

struct StagedCheckpoint {
  ModelConfig cfg;
  std::vector<std::pair<std::string, std::pair<Shape, Array>>> params;
};

StagedCheckpoint read_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw checkpoint_error("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw checkpoint_error("'" + path + "' is not a checkpoint file");
  }
  const std::uint64_t cfg_len = read_u64(is);
  if (cfg_len > (1u << 20)) throw checkpoint_error("config block too large");
  std::string cfg_text(cfg_len, '\0');
  if (!is.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len))) {
    throw checkpoint_error("checkpoint truncated in config block");
  }
  StagedCheckpoint staged;
  staged.cfg = ModelConfig::deserialize(cfg_text);
  const std::uint64_t n_params = read_u64(is);
  for (std::uint64_t p = 0; p < n_params; ++p) {
    const std::uint64_t name_len = read_u64(is);
    if (name_len > (1u << 16)) throw checkpoint_error("bad parameter name");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name_len))) {
      throw checkpoint_error("checkpoint truncated in parameter table");
    }
    const std::uint64_t ndim = read_u64(is);
    if (ndim > 8) throw checkpoint_error("bad parameter rank");
    Shape shape;
    for (std::uint64_t d = 0; d < ndim; ++d) {
      shape.push_back(static_cast<Index>(read_u64(is)));
    }
    const std::uint64_t count = read_u64(is);
    if (count != std::uint64_t(ad::shape_size(shape))) {
      throw checkpoint_error("parameter '" + name +
                             "' has inconsistent element count");
    }
    Array values(static_cast<Index>(count));
    if (!is.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(sizeof(double) * count))) {
      throw checkpoint_error("checkpoint truncated in parameter '" + name +
                             "'");
    }
    staged.params.emplace_back(std::move(name),
                               std::make_pair(std::move(shape), std::move(values)));
  }
  char footer[8];
  if (!is.read(footer, 8) || std::memcmp(footer, kFooter, 8) != 0) {
    throw checkpoint_error("checkpoint footer missing (file truncated?)");
  }
  return staged;
}

void assign_params(Pc2daeModel& model, const StagedCheckpoint& staged) {
  auto& registry = model.parameters();
  if (staged.params.size() != registry.size()) {
    throw checkpoint_error("checkpoint has " +
                           std::to_string(staged.params.size()) +
                           " parameters, model expects " +
                           std::to_string(registry.size()));
  }
  std::string offenders;
  for (size_t i = 0; i < registry.size(); ++i) {
    const auto& [name, t] = registry[i];
    const auto& [sname, payload] = staged.params[i];
    if (sname != name || payload.first != t.shape()) {
      offenders += offenders.empty() ? sname : (", " + sname);
    }
  }
  if (!offenders.empty()) {
    throw checkpoint_error("checkpoint parameter mismatch: " + offenders);
  }
  for (size_t i = 0; i < registry.size(); ++i) {
    registry[i].second.mutable_values() = staged.params[i].second.second;
  }
}

}  // namespace

Pc2daeModel Pc2daeModel::load_checkpoint(const std::string& path) {
  StagedCheckpoint staged = read_checkpoint_file(path);
  Pc2daeModel model(staged.cfg, 0);
  assign_params(model, staged);
  return model;
}

void Pc2daeModel::load_parameters(const std::string& path) {
  StagedCheckpoint staged = read_checkpoint_file(path);
  if (!cfg_.same_architecture(staged.cfg)) {
    throw checkpoint_error(
        "checkpoint architecture (" +
        std::string(variant_name(staged.cfg.variant)) +
        ") does not match this model (" + variant_name(cfg_.variant) + ")");
  }
  assign_params(*this, staged);
}

// ------------------------------------------------------------------ probes

Index receptive_field_span(Pc2daeModel& model, Index window_len) {
  const Index C = model.config().input_channels;
  RngStream rng(0xfeedULL);
  Array xv(C * window_len);
  for (Index i = 0; i < xv.size(); ++i) xv(i) = rng.normal();
  Tensor x = Tensor::from_array({1, C, window_len}, std::move(xv), true);

  Tensor h = model.decode(model.encode(x));
  const Index H = h.dim(1);
  // Select all channels at the middle time step.
  Array sel = Array::Zero(H * window_len);
  const Index mid = window_len / 2;
  for (Index c = 0; c < H; ++c) sel(c * window_len + mid) = 1.0;
  Tensor picked =
      ad::sum(ad::mul(h, Tensor::from_array({1, H, window_len}, sel)));
  {
    ad::FrozenStatsGuard freeze;
    ad::backward(picked);
  }
  const Array& g = x.grad();
  Index span = 0;
  for (Index t = 0; t < window_len; ++t) {
    double m = 0.0;
    for (Index c = 0; c < C; ++c) {
      m = std::max(m, std::abs(g(c * window_len + t)));
    }
    if (m > 0.0) ++span;
  }
  return span;
}

}  // namespace pc2dae
