#include "pc2dae/ops.hpp"

#include <cfloat>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace pc2dae::ad {

namespace {

thread_local ConvPath g_conv_path = ConvPath::DirectLoops;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw shape_error(std::string(op) + ": operand shapes differ, " +
                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_ndim(const char* op, const Tensor& x, int ndim) {
  if (x.ndim() != ndim) {
    throw shape_error(std::string(op) + ": expected " + std::to_string(ndim) +
                      "-d tensor, got shape " + shape_str(x.shape()));
  }
}

// Row-major [B,C,T] row accessors over flat storage.
inline Eigen::Map<Array> row(Array& a, Index b, Index c, Index C, Index T) {
  return Eigen::Map<Array>(a.data() + (b * C + c) * T, T);
}
inline Eigen::Map<const Array> row(const Array& a, Index b, Index c, Index C,
                                   Index T) {
  return Eigen::Map<const Array>(a.data() + (b * C + c) * T, T);
}

struct AxisSplit {
  Index outer, n, inner;
};

AxisSplit split_axis(const char* op, const Shape& shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw shape_error(std::string(op) + ": axis " + std::to_string(axis) +
                      " out of range for shape " + shape_str(shape));
  }
  AxisSplit s{1, shape[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) {
    s.inner *= shape[i];
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Array v = a.values() + b.values();
  check_finite("add", v);
  return make_op_result(a.shape(), std::move(v), {a.node(), b.node()},
                        [](Node& n) {
                          if (n.parents[0]->requires_grad)
                            n.parents[0]->accumulate(n.grad);
                          if (n.parents[1]->requires_grad)
                            n.parents[1]->accumulate(n.grad);
                        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Array v = a.values() - b.values();
  check_finite("sub", v);
  return make_op_result(a.shape(), std::move(v), {a.node(), b.node()},
                        [](Node& n) {
                          if (n.parents[0]->requires_grad)
                            n.parents[0]->accumulate(n.grad);
                          if (n.parents[1]->requires_grad)
                            n.parents[1]->accumulate(Array(-n.grad));
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Array v = a.values() * b.values();
  check_finite("mul", v);
  return make_op_result(
      a.shape(), std::move(v), {a.node(), b.node()}, [](Node& n) {
        if (n.parents[0]->requires_grad)
          n.parents[0]->accumulate(Array(n.grad * n.parents[1]->value));
        if (n.parents[1]->requires_grad)
          n.parents[1]->accumulate(Array(n.grad * n.parents[0]->value));
      });
}

Tensor scale(const Tensor& x, double c) {
  Array v = x.values() * c;
  check_finite("scale", v);
  return make_op_result(x.shape(), std::move(v), {x.node()}, [c](Node& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->accumulate(Array(n.grad * c));
  });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) {
    throw shape_error("scale_by: coefficient must have 1 element, got shape " +
                      shape_str(s.shape()));
  }
  Array v = x.values() * s.values()(0);
  check_finite("scale_by", v);
  return make_op_result(
      x.shape(), std::move(v), {x.node(), s.node()}, [](Node& n) {
        if (n.parents[0]->requires_grad)
          n.parents[0]->accumulate(Array(n.grad * n.parents[1]->value(0)));
        if (n.parents[1]->requires_grad) {
          Array gs(1);
          gs(0) = (n.grad * n.parents[0]->value).sum();
          n.parents[1]->accumulate(gs);
        }
      });
}

Tensor relu(const Tensor& x) {
  Array v = x.values().max(0.0);
  check_finite("relu", v);
  return make_op_result(x.shape(), std::move(v), {x.node()}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    const Array& xv = n.parents[0]->value;
    n.parents[0]->accumulate(
        Array((xv > 0.0).select(n.grad, Array::Zero(n.grad.size()))));
  });
}

Tensor elu(const Tensor& x) {
  const Array& xv = x.values();
  Array v = (xv > 0.0).select(xv, xv.exp() - 1.0);
  check_finite("elu", v);
  return make_op_result(x.shape(), std::move(v), {x.node()}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    const Array& xv = n.parents[0]->value;
    // For x <= 0 the local slope is exp(x) = value + 1.
    Array slope = (xv > 0.0).select(Array::Ones(xv.size()), n.value + 1.0);
    n.parents[0]->accumulate(Array(n.grad * slope));
  });
}

Tensor sigmoid(const Tensor& x) {
  const Array& xv = x.values();
  // Stable in both tails: exp of a non-positive argument only.
  Array e = (-xv.abs()).exp();
  Array v = (xv >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e));
  check_finite("sigmoid", v);
  return make_op_result(x.shape(), std::move(v), {x.node()}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    n.parents[0]->accumulate(Array(n.grad * n.value * (1.0 - n.value)));
  });
}

Tensor abs(const Tensor& x) {
  Array v = x.values().abs();
  check_finite("abs", v);
  return make_op_result(x.shape(), std::move(v), {x.node()}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    const Array& xv = n.parents[0]->value;
    n.parents[0]->accumulate(Array(n.grad * xv.sign()));
  });
}

Tensor softplus(const Tensor& x, double beta) {
  if (!(beta > 0.0)) {
    throw numeric_error("softplus: beta must be > 0, got " +
                        std::to_string(beta));
  }
  Array z = x.values() * beta;
  Array v = (z.max(0.0) + (-z.abs()).exp().log1p()) / beta;
  // log1p underflows to 0 for very negative z; clamp so the output stays
  // strictly positive.
  v = v.max(std::numeric_limits<double>::min());
  check_finite("softplus", v);
  return make_op_result(x.shape(), std::move(v), {x.node()}, [beta](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Array z = n.parents[0]->value * beta;
    Array e = (-z.abs()).exp();
    Array sig = (z >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e));
    n.parents[0]->accumulate(Array(n.grad * sig));
  });
}

// ---------------------------------------------------------------- reductions

Tensor sum(const Tensor& x) {
  Array v(1);
  v(0) = x.values().sum();
  check_finite("sum", v);
  return make_op_result({1}, std::move(v), {x.node()}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    n.parents[0]->accumulate(
        Array::Constant(n.parents[0]->value.size(), n.grad(0)));
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw shape_error("mean: empty tensor");
  Array v(1);
  v(0) = x.values().mean();
  check_finite("mean", v);
  return make_op_result({1}, std::move(v), {x.node()}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    const Index count = n.parents[0]->value.size();
    n.parents[0]->accumulate(
        Array::Constant(count, n.grad(0) / static_cast<double>(count)));
  });
}

Tensor mean_axis(const Tensor& x, int axis) {
  const AxisSplit s = split_axis("mean_axis", x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[static_cast<size_t>(axis)] = 1;
  Array v = Array::Zero(s.outer * s.inner);
  const Array& xv = x.values();
  for (Index o = 0; o < s.outer; ++o) {
    for (Index j = 0; j < s.n; ++j) {
      const Index base = (o * s.n + j) * s.inner;
      for (Index i = 0; i < s.inner; ++i) v(o * s.inner + i) += xv(base + i);
    }
  }
  v /= static_cast<double>(s.n);
  check_finite("mean_axis", v);
  return make_op_result(std::move(out_shape), std::move(v), {x.node()},
                        [s](Node& n) {
                          if (!n.parents[0]->requires_grad) return;
                          Array gin = Array::Zero(n.parents[0]->value.size());
                          const double inv = 1.0 / static_cast<double>(s.n);
                          for (Index o = 0; o < s.outer; ++o) {
                            for (Index j = 0; j < s.n; ++j) {
                              const Index base = (o * s.n + j) * s.inner;
                              for (Index i = 0; i < s.inner; ++i) {
                                gin(base + i) = n.grad(o * s.inner + i) * inv;
                              }
                            }
                          }
                          n.parents[0]->accumulate(gin);
                        });
}

Tensor softmax(const Tensor& x, int axis) {
  const AxisSplit s = split_axis("softmax", x.shape(), axis);
  const Array& xv = x.values();
  Array v(xv.size());
  for (Index o = 0; o < s.outer; ++o) {
    for (Index i = 0; i < s.inner; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Index j = 0; j < s.n; ++j) {
        mx = std::max(mx, xv((o * s.n + j) * s.inner + i));
      }
      double total = 0.0;
      for (Index j = 0; j < s.n; ++j) {
        const Index idx = (o * s.n + j) * s.inner + i;
        v(idx) = std::exp(xv(idx) - mx);
        total += v(idx);
      }
      for (Index j = 0; j < s.n; ++j) v((o * s.n + j) * s.inner + i) /= total;
    }
  }
  check_finite("softmax", v);
  return make_op_result(
      x.shape(), std::move(v), {x.node()}, [s](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Array gin(n.value.size());
        for (Index o = 0; o < s.outer; ++o) {
          for (Index i = 0; i < s.inner; ++i) {
            double dot = 0.0;
            for (Index j = 0; j < s.n; ++j) {
              const Index idx = (o * s.n + j) * s.inner + i;
              dot += n.grad(idx) * n.value(idx);
            }
            for (Index j = 0; j < s.n; ++j) {
              const Index idx = (o * s.n + j) * s.inner + i;
              gin(idx) = n.value(idx) * (n.grad(idx) - dot);
            }
          }
        }
        n.parents[0]->accumulate(gin);
      });
}

// ---------------------------------------------------------------- structural

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw shape_error("reshape: cannot view " + shape_str(x.shape()) + " as " +
                      shape_str(shape) + " (element counts differ)");
  }
  return make_op_result(std::move(shape), Array(x.values()), {x.node()},
                        [](Node& n) {
                          if (n.parents[0]->requires_grad)
                            n.parents[0]->accumulate(n.grad);
                        });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw shape_error("concat_channels: no inputs");
  for (const auto& p : parts) require_ndim("concat_channels", p, 3);
  const Index B = parts[0].dim(0);
  const Index T = parts[0].dim(2);
  Index C_total = 0;
  for (const auto& p : parts) {
    if (p.dim(0) != B || p.dim(2) != T) {
      throw shape_error(
          "concat_channels: batch/time dims differ, " +
          shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    C_total += p.dim(1);
  }
  Array v(B * C_total * T);
  std::vector<NodePtr> parents;
  std::vector<Index> widths;
  Index c_off = 0;
  for (const auto& p : parts) {
    const Index Ci = p.dim(1);
    for (Index b = 0; b < B; ++b) {
      v.segment((b * C_total + c_off) * T, Ci * T) =
          p.values().segment(b * Ci * T, Ci * T);
    }
    parents.push_back(p.node());
    widths.push_back(Ci);
    c_off += Ci;
  }
  check_finite("concat_channels", v);
  return make_op_result(
      {B, C_total, T}, std::move(v), std::move(parents),
      [B, T, C_total, widths](Node& n) {
        Index off = 0;
        for (size_t pi = 0; pi < widths.size(); ++pi) {
          const Index Ci = widths[pi];
          if (n.parents[pi]->requires_grad) {
            Array g(B * Ci * T);
            for (Index b = 0; b < B; ++b) {
              g.segment(b * Ci * T, Ci * T) =
                  n.grad.segment((b * C_total + off) * T, Ci * T);
            }
            n.parents[pi]->accumulate(g);
          }
          off += Ci;
        }
      });
}

Tensor replicate_pad_time(const Tensor& x, Index pad) {
  require_ndim("replicate_pad_time", x, 3);
  if (pad < 0) throw shape_error("replicate_pad_time: negative pad");
  const Index B = x.dim(0), C = x.dim(1), T = x.dim(2);
  const Index To = T + 2 * pad;
  Array v(B * C * To);
  const Array& xv = x.values();
  for (Index b = 0; b < B; ++b) {
    for (Index c = 0; c < C; ++c) {
      auto src = row(xv, b, c, C, T);
      auto dst = row(v, b, c, C, To);
      dst.segment(0, pad).setConstant(src(0));
      dst.segment(pad, T) = src;
      dst.segment(pad + T, pad).setConstant(src(T - 1));
    }
  }
  check_finite("replicate_pad_time", v);
  return make_op_result(
      {B, C, To}, std::move(v), {x.node()}, [B, C, T, pad, To](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Array gin = Array::Zero(B * C * T);
        for (Index b = 0; b < B; ++b) {
          for (Index c = 0; c < C; ++c) {
            auto g = row(n.grad, b, c, C, To);
            auto gi = row(gin, b, c, C, T);
            gi = g.segment(pad, T);
            gi(0) += g.segment(0, pad).sum();
            gi(T - 1) += g.segment(pad + T, pad).sum();
          }
        }
        n.parents[0]->accumulate(gin);
      });
}

Tensor time_diff(const Tensor& x) {
  require_ndim("time_diff", x, 3);
  const Index B = x.dim(0), C = x.dim(1), T = x.dim(2);
  if (T < 2) {
    throw shape_error("time_diff: time axis must have >= 2 samples, got " +
                      std::to_string(T));
  }
  Array v(B * C * (T - 1));
  const Array& xv = x.values();
  for (Index b = 0; b < B; ++b) {
    for (Index c = 0; c < C; ++c) {
      auto src = row(xv, b, c, C, T);
      row(v, b, c, C, T - 1) = src.tail(T - 1) - src.head(T - 1);
    }
  }
  check_finite("time_diff", v);
  return make_op_result({B, C, T - 1}, std::move(v), {x.node()},
                        [B, C, T](Node& n) {
                          if (!n.parents[0]->requires_grad) return;
                          Array gin = Array::Zero(B * C * T);
                          for (Index b = 0; b < B; ++b) {
                            for (Index c = 0; c < C; ++c) {
                              auto g = row(n.grad, b, c, C, T - 1);
                              auto gi = row(gin, b, c, C, T);
                              gi.tail(T - 1) += g;
                              gi.head(T - 1) -= g;
                            }
                          }
                          n.parents[0]->accumulate(gin);
                        });
}

Tensor channel_scale(const Tensor& x, const Tensor& gate) {
  require_ndim("channel_scale", x, 3);
  require_ndim("channel_scale", gate, 3);
  const Index B = x.dim(0), C = x.dim(1), T = x.dim(2);
  if (gate.dim(0) != B || gate.dim(1) != C || gate.dim(2) != 1) {
    throw shape_error("channel_scale: gate shape " + shape_str(gate.shape()) +
                      " does not match [" + std::to_string(B) + "," +
                      std::to_string(C) + ",1]");
  }
  Array v(B * C * T);
  const Array& xv = x.values();
  const Array& gv = gate.values();
  for (Index b = 0; b < B; ++b) {
    for (Index c = 0; c < C; ++c) {
      row(v, b, c, C, T) = row(xv, b, c, C, T) * gv(b * C + c);
    }
  }
  check_finite("channel_scale", v);
  return make_op_result(
      {B, C, T}, std::move(v), {x.node(), gate.node()}, [B, C, T](Node& n) {
        const Array& xv = n.parents[0]->value;
        const Array& gv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
          Array gx(B * C * T);
          for (Index b = 0; b < B; ++b) {
            for (Index c = 0; c < C; ++c) {
              row(gx, b, c, C, T) = row(n.grad, b, c, C, T) * gv(b * C + c);
            }
          }
          n.parents[0]->accumulate(gx);
        }
        if (n.parents[1]->requires_grad) {
          Array gg = Array::Zero(B * C);
          for (Index b = 0; b < B; ++b) {
            for (Index c = 0; c < C; ++c) {
              gg(b * C + c) =
                  (row(n.grad, b, c, C, T) * row(xv, b, c, C, T)).sum();
            }
          }
          n.parents[1]->accumulate(gg);
        }
      });
}

// -------------------------------------------------------------------- conv1d

void set_conv_path(ConvPath path) { g_conv_path = path; }
ConvPath conv_path() { return g_conv_path; }

Index conv1d_out_len(Index in_len, Index kernel, Index dilation,
                     Index padding) {
  return in_len + 2 * padding - dilation * (kernel - 1);
}

namespace {

struct ConvDims {
  Index B, Cin, T, Cout, Cg, K, To, group_in, group_out;
};

ConvDims conv_dims(const Shape& in_shape, const Shape& w_shape,
                   Index dilation, Index padding, Index groups) {
  if (in_shape.size() != 3) {
    throw shape_error("conv1d: input must be [batch,channels,time], got " +
                      shape_str(in_shape));
  }
  if (w_shape.size() != 3) {
    throw shape_error("conv1d: weight must be [out,in/groups,kernel], got " +
                      shape_str(w_shape));
  }
  if (groups < 1) throw shape_error("conv1d: groups must be >= 1");
  if (dilation < 1) throw shape_error("conv1d: dilation must be >= 1");
  if (padding < 0) throw shape_error("conv1d: padding must be >= 0");
  ConvDims d;
  d.B = in_shape[0];
  d.Cin = in_shape[1];
  d.T = in_shape[2];
  d.Cout = w_shape[0];
  d.Cg = w_shape[1];
  d.K = w_shape[2];
  if (d.Cin % groups != 0) {
    throw shape_error("conv1d: input channels " + std::to_string(d.Cin) +
                      " not divisible by groups " + std::to_string(groups));
  }
  if (d.Cout % groups != 0) {
    throw shape_error("conv1d: output channels " + std::to_string(d.Cout) +
                      " not divisible by groups " + std::to_string(groups));
  }
  if (d.Cg != d.Cin / groups) {
    throw shape_error("conv1d: weight expects " + std::to_string(d.Cg) +
                      " channels per group but input has " +
                      std::to_string(d.Cin / groups));
  }
  d.To = conv1d_out_len(d.T, d.K, dilation, padding);
  if (d.To < 1) {
    throw shape_error("conv1d: kernel span exceeds padded input (out length " +
                      std::to_string(d.To) + ")");
  }
  d.group_in = d.Cin / groups;
  d.group_out = d.Cout / groups;
  return d;
}

// Valid output range for one tap: in_t = t - padding + tap*dilation must
// land in [0, T).
inline void tap_range(Index T, Index To, Index padding, Index tap,
                      Index dilation, Index& t0, Index& t1) {
  const Index shift = tap * dilation - padding;
  t0 = std::max<Index>(0, -shift);
  t1 = std::min<Index>(To, T - shift);
}

}  // namespace

Array conv1d_direct(const Array& input, const Shape& in_shape,
                    const Array& weight, const Shape& w_shape, const Array* bias,
                    Index dilation, Index padding, Index groups) {
  const ConvDims d = conv_dims(in_shape, w_shape, dilation, padding, groups);
  Array out(d.B * d.Cout * d.To);
  for (Index b = 0; b < d.B; ++b) {
    for (Index oc = 0; oc < d.Cout; ++oc) {
      auto out_row = row(out, b, oc, d.Cout, d.To);
      out_row.setConstant(bias ? (*bias)(oc) : 0.0);
      const Index ic0 = (oc / d.group_out) * d.group_in;
      for (Index icg = 0; icg < d.group_in; ++icg) {
        auto in_row = row(input, b, ic0 + icg, d.Cin, d.T);
        for (Index tap = 0; tap < d.K; ++tap) {
          Index t0, t1;
          tap_range(d.T, d.To, padding, tap, dilation, t0, t1);
          if (t0 >= t1) continue;
          const double w = weight((oc * d.group_in + icg) * d.K + tap);
          const Index shift = tap * dilation - padding;
          out_row.segment(t0, t1 - t0) +=
              w * in_row.segment(t0 + shift, t1 - t0);
        }
      }
    }
  }
  return out;
}

Array conv1d_im2col(const Array& input, const Shape& in_shape,
                    const Array& weight, const Shape& w_shape, const Array* bias,
                    Index dilation, Index padding, Index groups) {
  const ConvDims d = conv_dims(in_shape, w_shape, dilation, padding, groups);
  Array out(d.B * d.Cout * d.To);
  // One patch row per (channel-in-group, tap); zeros where the tap falls
  // outside the input. Accumulation order over rows matches the direct
  // path, so results agree bit-for-bit.
  Array patches(d.group_in * d.K * d.To);
  for (Index b = 0; b < d.B; ++b) {
    for (Index g = 0; g < groups; ++g) {
      patches.setZero();
      for (Index icg = 0; icg < d.group_in; ++icg) {
        auto in_row = row(input, b, g * d.group_in + icg, d.Cin, d.T);
        for (Index tap = 0; tap < d.K; ++tap) {
          Index t0, t1;
          tap_range(d.T, d.To, padding, tap, dilation, t0, t1);
          if (t0 >= t1) continue;
          const Index shift = tap * dilation - padding;
          patches.segment((icg * d.K + tap) * d.To + t0, t1 - t0) =
              in_row.segment(t0 + shift, t1 - t0);
        }
      }
      for (Index ocg = 0; ocg < d.group_out; ++ocg) {
        const Index oc = g * d.group_out + ocg;
        auto out_row = row(out, b, oc, d.Cout, d.To);
        out_row.setConstant(bias ? (*bias)(oc) : 0.0);
        for (Index j = 0; j < d.group_in * d.K; ++j) {
          const double w = weight(oc * d.group_in * d.K + j);
          out_row += w * Eigen::Map<const Array>(
                             patches.data() + j * d.To, d.To);
        }
      }
    }
  }
  return out;
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              Index dilation, Index padding, Index groups) {
  const ConvDims d =
      conv_dims(input.shape(), weight.shape(), dilation, padding, groups);
  const bool has_bias = bias.defined();
  if (has_bias && (bias.ndim() != 1 || bias.dim(0) != d.Cout)) {
    throw shape_error("conv1d: bias shape " + shape_str(bias.shape()) +
                      " does not match output channels " +
                      std::to_string(d.Cout));
  }
  const Array* bias_ptr = has_bias ? &bias.values() : nullptr;
  Array v = (g_conv_path == ConvPath::DirectLoops)
                ? conv1d_direct(input.values(), input.shape(), weight.values(),
                                weight.shape(), bias_ptr, dilation, padding,
                                groups)
                : conv1d_im2col(input.values(), input.shape(), weight.values(),
                                weight.shape(), bias_ptr, dilation, padding,
                                groups);
  check_finite("conv1d", v);
  std::vector<NodePtr> parents{input.node(), weight.node()};
  if (has_bias) parents.push_back(bias.node());
  return make_op_result(
      {d.B, d.Cout, d.To}, std::move(v), std::move(parents),
      [d, dilation, padding, has_bias](Node& n) {
        const Array& in = n.parents[0]->value;
        const Array& w = n.parents[1]->value;
        const bool need_gin = n.parents[0]->requires_grad;
        const bool need_gw = n.parents[1]->requires_grad;
        const bool need_gb = has_bias && n.parents[2]->requires_grad;
        Array gin = need_gin ? Array::Zero(in.size()) : Array();
        Array gw = need_gw ? Array::Zero(w.size()) : Array();
        Array gb = need_gb ? Array::Zero(d.Cout) : Array();
        for (Index b = 0; b < d.B; ++b) {
          for (Index oc = 0; oc < d.Cout; ++oc) {
            auto g_row = row(n.grad, b, oc, d.Cout, d.To);
            if (need_gb) gb(oc) += g_row.sum();
            const Index ic0 = (oc / d.group_out) * d.group_in;
            for (Index icg = 0; icg < d.group_in; ++icg) {
              const Index ic = ic0 + icg;
              for (Index tap = 0; tap < d.K; ++tap) {
                Index t0, t1;
                tap_range(d.T, d.To, padding, tap, dilation, t0, t1);
                if (t0 >= t1) continue;
                const Index shift = tap * dilation - padding;
                const Index len = t1 - t0;
                const Index widx = (oc * d.group_in + icg) * d.K + tap;
                if (need_gw) {
                  gw(widx) += (g_row.segment(t0, len) *
                               row(in, b, ic, d.Cin, d.T)
                                   .segment(t0 + shift, len))
                                  .sum();
                }
                if (need_gin) {
                  row(gin, b, ic, d.Cin, d.T).segment(t0 + shift, len) +=
                      w(widx) * g_row.segment(t0, len);
                }
              }
            }
          }
        }
        if (need_gin) n.parents[0]->accumulate(gin);
        if (need_gw) n.parents[1]->accumulate(gw);
        if (need_gb) n.parents[2]->accumulate(gb);
      });
}

// ---------------------------------------------------------------- group_norm

Tensor group_norm(const Tensor& x, Index num_groups, const Tensor& gamma,
                  const Tensor& beta, double eps) {
  require_ndim("group_norm", x, 3);
  const Index B = x.dim(0), C = x.dim(1), T = x.dim(2);
  if (num_groups < 1 || C % num_groups != 0) {
    throw shape_error("group_norm: " + std::to_string(C) +
                      " channels not divisible into " +
                      std::to_string(num_groups) + " groups");
  }
  if (gamma.ndim() != 1 || gamma.dim(0) != C || beta.ndim() != 1 ||
      beta.dim(0) != C) {
    throw shape_error("group_norm: gamma/beta must be [" + std::to_string(C) +
                      "], got " + shape_str(gamma.shape()) + " and " +
                      shape_str(beta.shape()));
  }
  const Index G = num_groups;
  const Index Cg = C / G;
  const Index block = Cg * T;

  auto xhat = std::make_shared<Array>(B * C * T);
  auto invstd = std::make_shared<Array>(B * G);
  Array v(B * C * T);
  const Array& xv = x.values();
  const Array& gam = gamma.values();
  const Array& bet = beta.values();
  for (Index b = 0; b < B; ++b) {
    for (Index g = 0; g < G; ++g) {
      const Index off = (b * C + g * Cg) * T;
      Eigen::Map<const Array> seg(xv.data() + off, block);
      const double mu = seg.mean();
      const double var = (seg - mu).square().mean();
      const double is = 1.0 / std::sqrt(var + eps);
      (*invstd)(b * G + g) = is;
      Eigen::Map<Array> xh(xhat->data() + off, block);
      xh = (seg - mu) * is;
      for (Index cc = 0; cc < Cg; ++cc) {
        const Index c = g * Cg + cc;
        Eigen::Map<Array>(v.data() + (b * C + c) * T, T) =
            Eigen::Map<const Array>(xhat->data() + (b * C + c) * T, T) *
                gam(c) +
            bet(c);
      }
    }
  }
  check_finite("group_norm", v);
  return make_op_result(
      {B, C, T}, std::move(v), {x.node(), gamma.node(), beta.node()},
      [B, C, T, G, Cg, block, xhat, invstd](Node& n) {
        const Array& gam = n.parents[1]->value;
        const bool need_gx = n.parents[0]->requires_grad;
        const bool need_gg = n.parents[1]->requires_grad;
        const bool need_gb = n.parents[2]->requires_grad;
        Array gx = need_gx ? Array::Zero(B * C * T) : Array();
        Array gg = need_gg ? Array::Zero(C) : Array();
        Array gb = need_gb ? Array::Zero(C) : Array();
        const bool frozen = FrozenStatsGuard::active();
        Array dxhat(block);
        for (Index b = 0; b < B; ++b) {
          for (Index g = 0; g < G; ++g) {
            const Index off = (b * C + g * Cg) * T;
            Eigen::Map<const Array> xh(xhat->data() + off, block);
            Eigen::Map<const Array> gout(n.grad.data() + off, block);
            for (Index cc = 0; cc < Cg; ++cc) {
              const Index c = g * Cg + cc;
              auto g_row = gout.segment(cc * T, T);
              auto xh_row = xh.segment(cc * T, T);
              if (need_gg) gg(c) += (g_row * xh_row).sum();
              if (need_gb) gb(c) += g_row.sum();
              dxhat.segment(cc * T, T) = g_row * gam(c);
            }
            if (need_gx) {
              const double is = (*invstd)(b * G + g);
              Eigen::Map<Array> gx_seg(gx.data() + off, block);
              if (frozen) {
                gx_seg = dxhat * is;
              } else {
                const double m1 = dxhat.mean();
                const double m2 = (dxhat * xh).mean();
                gx_seg = (dxhat - m1 - xh * m2) * is;
              }
            }
          }
        }
        if (need_gx) n.parents[0]->accumulate(gx);
        if (need_gg) n.parents[1]->accumulate(gg);
        if (need_gb) n.parents[2]->accumulate(gb);
      });
}

// ------------------------------------------------------------------- dropout

Tensor dropout(const Tensor& x, double p, bool training, RngStream* rng) {
  if (p < 0.0 || p >= 1.0) {
    throw numeric_error("dropout: rate must be in [0,1), got " +
                        std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  if (!rng) throw numeric_error("dropout: rng required in training mode");
  const double keep_scale = 1.0 / (1.0 - p);
  auto mult = std::make_shared<Array>(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    (*mult)(i) = rng->bernoulli(p) ? 0.0 : keep_scale;
  }
  Array v = x.values() * (*mult);
  check_finite("dropout", v);
  return make_op_result(x.shape(), std::move(v), {x.node()}, [mult](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    n.parents[0]->accumulate(Array(n.grad * (*mult)));
  });
}

}  // namespace pc2dae::ad
