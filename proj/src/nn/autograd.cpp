#include "seqcr/nn/autograd.hpp"

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace seqcr::nn {

namespace {

thread_local bool g_grad_enabled = true;

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

void require_4d(const Tensor& x, const char* op) {
  if (x.ndim() != 4) throw std::invalid_argument(std::string(op) + ": expected (C, T, H, W), got " + shape_string(x.shape()));
}

bool wants(const Node& self, std::size_t i) { return i < self.inputs.size() && self.inputs[i]->requires_grad; }

template <typename F>
Var unary(const Var& x, Tensor out, F&& dfdx) {
  return Var::make(std::move(out), {x}, [dfdx](Node& self) {
    if (!wants(self, 0)) return;
    Node& in = *self.inputs[0];
    Tensor& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * dfdx(in.value[i], self.value[i]);
  });
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.numel() != value.numel() || grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Var::item() const {
  if (value().numel() != 1) throw std::logic_error("item() on a non-scalar");
  return value()[0];
}

Var Var::make(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  Var out(std::move(value), false);
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& v : inputs) any = any || v.requires_grad();
  if (!any) return out;
  out.node_->requires_grad = true;
  for (auto& v : inputs) out.node_->inputs.push_back(v.node_);
  out.node_->backward_fn = std::move(backward_fn);
  return out;
}

void backward(const Var& root) {
  if (root.value().numel() != 1) throw std::logic_error("backward() needs a scalar root");
  if (!root.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.numel() == n->value.numel()) n->backward_fn(*n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Var conv3d(const Var& x, const Var& weight, const Var& bias, const ConvGeometry& g) {
  const Tensor& in = x.value();
  const Tensor& w = weight.value();
  require_4d(in, "conv3d");
  if (w.ndim() != 5 || w.dim(1) != in.dim(0)) {
    throw std::invalid_argument("conv3d: weight " + shape_string(w.shape()) + " does not fit input " +
                                shape_string(in.shape()));
  }
  const int cin = in.dim(0), t = in.dim(1), h = in.dim(2), wd = in.dim(3);
  const int cout = w.dim(0), kt = w.dim(2), kh = w.dim(3), kw = w.dim(4);
  const auto [st, sh, sw] = g.stride;
  const auto [pt, ph, pw] = g.padding;
  const int to = (t + 2 * pt - kt) / st + 1;
  const int ho = (h + 2 * ph - kh) / sh + 1;
  const int wo = (wd + 2 * pw - kw) / sw + 1;
  if (to <= 0 || ho <= 0 || wo <= 0) throw std::invalid_argument("conv3d: input too small for kernel " + shape_string(in.shape()));
  if (bias.value().numel() != static_cast<std::size_t>(cout)) throw std::invalid_argument("conv3d: bias size mismatch");

  const int k = cin * kt * kh * kw;
  const int p = to * ho * wo;
  auto cols = std::make_shared<AlignedBuffer>(static_cast<std::size_t>(k) * p, 0.0);
  // im2col; row = ((ci*kt + a)*kh + b)*kw + c, column = (ot*ho + oh)*wo + ow.
  for (int ci = 0; ci < cin; ++ci)
    for (int a = 0; a < kt; ++a)
      for (int b = 0; b < kh; ++b)
        for (int c = 0; c < kw; ++c) {
          const int row = ((ci * kt + a) * kh + b) * kw + c;
          double* dst = cols->data() + static_cast<std::size_t>(row) * p;
          for (int ot = 0; ot < to; ++ot) {
            const int it = ot * st - pt + a;
            if (it < 0 || it >= t) continue;
            for (int oh = 0; oh < ho; ++oh) {
              const int ih = oh * sh - ph + b;
              if (ih < 0 || ih >= h) continue;
              const double* src = in.data() + ((static_cast<std::size_t>(ci) * t + it) * h + ih) * wd;
              double* drow = dst + (static_cast<std::size_t>(ot) * ho + oh) * wo;
              for (int ow = 0; ow < wo; ++ow) {
                const int iw = ow * sw - pw + c;
                if (iw >= 0 && iw < wd) drow[ow] = src[iw];
              }
            }
          }
        }

  Tensor out({cout, to, ho, wo});
  {
    MapRM o(out.data(), cout, p);
    CMapRM wm(w.data(), cout, k);
    CMapRM cm(cols->data(), k, p);
    o.noalias() = wm * cm;
    const double* bv = bias.value().data();
    for (int co = 0; co < cout; ++co) o.row(co).array() += bv[co];
  }

  return Var::make(std::move(out), {x, weight, bias},
                   [=](Node& self) {
                     CMapRM go(self.grad.data(), cout, p);
                     if (wants(self, 1)) {
                       Tensor& gw = self.inputs[1]->grad_buffer();
                       MapRM gwm(gw.data(), cout, k);
                       CMapRM cm(cols->data(), k, p);
                       gwm.noalias() += go * cm.transpose();
                     }
                     if (wants(self, 2)) {
                       Tensor& gb = self.inputs[2]->grad_buffer();
                       for (int co = 0; co < cout; ++co) gb[co] += go.row(co).sum();
                     }
                     if (wants(self, 0)) {
                       const Tensor& wv = self.inputs[1]->value;
                       CMapRM wm(wv.data(), cout, k);
                       MatRM gcols = wm.transpose() * go;
                       Tensor& gx = self.inputs[0]->grad_buffer();
                       for (int ci = 0; ci < cin; ++ci)
                         for (int a = 0; a < kt; ++a)
                           for (int b = 0; b < kh; ++b)
                             for (int c = 0; c < kw; ++c) {
                               const int row = ((ci * kt + a) * kh + b) * kw + c;
                               const double* src = gcols.data() + static_cast<std::size_t>(row) * p;
                               for (int ot = 0; ot < to; ++ot) {
                                 const int it = ot * st - pt + a;
                                 if (it < 0 || it >= t) continue;
                                 for (int oh = 0; oh < ho; ++oh) {
                                   const int ih = oh * sh - ph + b;
                                   if (ih < 0 || ih >= h) continue;
                                   double* dst = gx.data() + ((static_cast<std::size_t>(ci) * t + it) * h + ih) * wd;
                                   const double* srow = src + (static_cast<std::size_t>(ot) * ho + oh) * wo;
                                   for (int ow = 0; ow < wo; ++ow) {
                                     const int iw = ow * sw - pw + c;
                                     if (iw >= 0 && iw < wd) dst[iw] += srow[ow];
                                   }
                                 }
                               }
                             }
                     }
                   });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return unary(x, std::move(out), [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& x, double slope) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : slope * v;
  return unary(x, std::move(out), [slope](double in, double) { return in > 0.0 ? 1.0 : slope; });
}

Var sigmoid(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  return unary(x, std::move(out), [](double, double y) { return y * (1.0 - y); });
}

Var scale(const Var& x, double factor) {
  Tensor out = x.value();
  for (double& v : out.values()) v *= factor;
  return unary(x, std::move(out), [factor](double, double) { return factor; });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return Var::make(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants(self, k)) continue;
      Tensor& g = self.inputs[k]->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

Var mul_const(const Var& x, const Tensor& c) {
  require_same_shape(x.value(), c, "mul_const");
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c[i];
  return Var::make(std::move(out), {x}, [c](Node& self) {
    if (!wants(self, 0)) return;
    Tensor& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * c[i];
  });
}

Var mul_mask(const Var& x, const Tensor& mask) {
  const Tensor& v = x.value();
  require_4d(v, "mul_mask");
  const int c = v.dim(0), t = v.dim(1), hw = v.dim(2) * v.dim(3);
  const bool per_time = mask.ndim() == 3;
  if ((per_time && (mask.dim(0) != t || mask.dim(1) != v.dim(2) || mask.dim(2) != v.dim(3))) ||
      (!per_time && (mask.ndim() != 2 || mask.dim(0) != v.dim(2) || mask.dim(1) != v.dim(3)))) {
    throw std::invalid_argument("mul_mask: mask " + shape_string(mask.shape()) + " does not fit " + shape_string(v.shape()));
  }
  Tensor full(v.shape());
  for (int ci = 0; ci < c; ++ci)
    for (int ti = 0; ti < t; ++ti)
      for (int i = 0; i < hw; ++i)
        full[(static_cast<std::size_t>(ci) * t + ti) * hw + i] = mask[(per_time ? static_cast<std::size_t>(ti) * hw : 0) + i];
  return mul_const(x, full);
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: nothing to join");
  std::vector<int> shape = parts[0].shape();
  require_4d(parts[0].value(), "concat_channels");
  int channels = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != 4 || s[1] != shape[1] || s[2] != shape[2] || s[3] != shape[3]) {
      throw std::invalid_argument("concat_channels: incompatible piece " + shape_string(s));
    }
    channels += s[0];
  }
  shape[0] = channels;
  Tensor out(shape);
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + offset);
    offset += p.value().numel();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return Var::make(std::move(out), inputs, [offsets](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      if (!wants(self, k)) continue;
      Tensor& g = self.inputs[k]->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[offsets[k] + i];
    }
  });
}

Var stack_time(std::span<const Var> frames) {
  if (frames.empty()) throw std::invalid_argument("stack_time: nothing to stack");
  const auto s0 = frames[0].shape();
  require_4d(frames[0].value(), "stack_time");
  for (const auto& f : frames) {
    if (f.shape() != s0 || s0[1] != 1) throw std::invalid_argument("stack_time: frames must be identical (C, 1, H, W)");
  }
  const int c = s0[0], n = static_cast<int>(frames.size()), hw = s0[2] * s0[3];
  Tensor out({c, n, s0[2], s0[3]});
  for (int k = 0; k < n; ++k)
    for (int ci = 0; ci < c; ++ci)
      std::copy_n(frames[k].value().data() + static_cast<std::size_t>(ci) * hw, hw,
                  out.data() + (static_cast<std::size_t>(ci) * n + k) * hw);
  std::vector<Var> inputs(frames.begin(), frames.end());
  return Var::make(std::move(out), inputs, [c, n, hw](Node& self) {
    for (int k = 0; k < n; ++k) {
      if (!wants(self, k)) continue;
      Tensor& g = self.inputs[k]->grad_buffer();
      for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < hw; ++i)
          g[static_cast<std::size_t>(ci) * hw + i] += self.grad[(static_cast<std::size_t>(ci) * n + k) * hw + i];
    }
  });
}

Var slice_time(const Var& x, int t0, int length) {
  const Tensor& v = x.value();
  require_4d(v, "slice_time");
  const int c = v.dim(0), t = v.dim(1), hw = v.dim(2) * v.dim(3);
  if (t0 < 0 || length < 1 || t0 + length > t) throw std::out_of_range("slice_time: window outside sequence");
  Tensor out({c, length, v.dim(2), v.dim(3)});
  for (int ci = 0; ci < c; ++ci)
    std::copy_n(v.data() + (static_cast<std::size_t>(ci) * t + t0) * hw, static_cast<std::size_t>(length) * hw,
                out.data() + static_cast<std::size_t>(ci) * length * hw);
  return Var::make(std::move(out), {x}, [=](Node& self) {
    if (!wants(self, 0)) return;
    Tensor& g = self.inputs[0]->grad_buffer();
    for (int ci = 0; ci < c; ++ci)
      for (std::size_t i = 0; i < static_cast<std::size_t>(length) * hw; ++i)
        g[(static_cast<std::size_t>(ci) * t + t0) * hw + i] += self.grad[static_cast<std::size_t>(ci) * length * hw + i];
  });
}

Var slice_channels(const Var& x, int c0, int count) {
  const Tensor& v = x.value();
  require_4d(v, "slice_channels");
  if (c0 < 0 || count < 1 || c0 + count > v.dim(0)) throw std::out_of_range("slice_channels: range outside tensor");
  const std::size_t plane = v.numel() / v.dim(0);
  std::vector<int> shape = v.shape();
  shape[0] = count;
  Tensor out(shape);
  std::copy_n(v.data() + c0 * plane, count * plane, out.data());
  return Var::make(std::move(out), {x}, [=](Node& self) {
    if (!wants(self, 0)) return;
    Tensor& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < count * plane; ++i) g[c0 * plane + i] += self.grad[i];
  });
}

Var upsample_spatial(const Var& x, int factor) {
  const Tensor& v = x.value();
  require_4d(v, "upsample_spatial");
  const int ct = v.dim(0) * v.dim(1), h = v.dim(2), w = v.dim(3);
  const int oh = h * factor, ow = w * factor;
  Tensor out({v.dim(0), v.dim(1), oh, ow});
  for (int k = 0; k < ct; ++k)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j)
        out[(static_cast<std::size_t>(k) * oh + i) * ow + j] = v[(static_cast<std::size_t>(k) * h + i / factor) * w + j / factor];
  return Var::make(std::move(out), {x}, [=](Node& self) {
    if (!wants(self, 0)) return;
    Tensor& g = self.inputs[0]->grad_buffer();
    for (int k = 0; k < ct; ++k)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j)
          g[(static_cast<std::size_t>(k) * h + i / factor) * w + j / factor] += self.grad[(static_cast<std::size_t>(k) * oh + i) * ow + j];
  });
}

Var fit_spatial(const Var& x, int height, int width) {
  const Tensor& v = x.value();
  require_4d(v, "fit_spatial");
  const int ct = v.dim(0) * v.dim(1), h = v.dim(2), w = v.dim(3);
  if (h == height && w == width) return x;
  Tensor out({v.dim(0), v.dim(1), height, width});
  const int ch = std::min(h, height), cw = std::min(w, width);
  for (int k = 0; k < ct; ++k)
    for (int i = 0; i < ch; ++i)
      for (int j = 0; j < cw; ++j)
        out[(static_cast<std::size_t>(k) * height + i) * width + j] = v[(static_cast<std::size_t>(k) * h + i) * w + j];
  return Var::make(std::move(out), {x}, [=](Node& self) {
    if (!wants(self, 0)) return;
    Tensor& g = self.inputs[0]->grad_buffer();
    for (int k = 0; k < ct; ++k)
      for (int i = 0; i < ch; ++i)
        for (int j = 0; j < cw; ++j)
          g[(static_cast<std::size_t>(k) * h + i) * w + j] += self.grad[(static_cast<std::size_t>(k) * height + i) * width + j];
  });
}

Var reshape(const Var& x, std::vector<int> shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return Var::make(std::move(out), {x}, [](Node& self) {
    if (!wants(self, 0)) return;
    Tensor& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return Var::make(Tensor({1}, s), {x}, [](Node& self) {
    if (!wants(self, 0)) return;
    Tensor& g = self.inputs[0]->grad_buffer();
    const double d = self.grad[0];
    for (double& v : g.values()) v += d;
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().numel());
  return scale(sum(x), 1.0 / n);
}

Var mean_abs_diff(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mean_abs_diff");
  const std::size_t n = a.value().numel();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(a.value()[i] - b.value()[i]);
  return Var::make(Tensor({1}, s / static_cast<double>(n)), {a, b}, [n](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    const double d = self.grad[0] / static_cast<double>(n);
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants(self, k)) continue;
      Tensor& g = self.inputs[k]->grad_buffer();
      const double sign = k == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double diff = av[i] - bv[i];
        g[i] += sign * d * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
      }
    }
  });
}

Var mean_sq_diff(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mean_sq_diff");
  const std::size_t n = a.value().numel();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  return Var::make(Tensor({1}, s / static_cast<double>(n)), {a, b}, [n](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    const double d = 2.0 * self.grad[0] / static_cast<double>(n);
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants(self, k)) continue;
      Tensor& g = self.inputs[k]->grad_buffer();
      const double sign = k == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < n; ++i) g[i] += sign * d * (av[i] - bv[i]);
    }
  });
}

Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights) {
  if (scalars.size() != weights.size()) throw std::invalid_argument("weighted_sum: size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < scalars.size(); ++k) s += weights[k] * scalars[k].item();
  std::vector<double> w(weights.begin(), weights.end());
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  return Var::make(Tensor({1}, s), inputs, [w](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      if (!wants(self, k)) continue;
      self.inputs[k]->grad_buffer()[0] += w[k] * self.grad[0];
    }
  });
}

}  // namespace seqcr::nn
