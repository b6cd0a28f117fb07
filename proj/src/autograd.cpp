#include "acm/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "acm/nn_ops.hpp"

namespace acm::ag {

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  std::fill(grad.data().begin(), grad.data().end(), 0.0f);
}

Var Graph::push(Node node) {
  for (auto in : node.inputs) node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

void Graph::accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  for (std::size_t i = 0; i < g.numel(); ++i) n.grad[i] += g[i];
}

Var Graph::constant(Tensor t) {
  Node n;
  n.value = std::move(t);
  return push(std::move(n));
}

Var Graph::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::conv2d(Var input, Var kernel) {
  const ConvKernel k(node(kernel).value);
  Node n;
  n.value = conv2d_valid(node(input).value, k, opts_);
  n.inputs = {input.id, kernel.id};
  n.backward = [](Graph& g, std::size_t self) {
    const Node& s = g.nodes_[self];
    const std::size_t in = s.inputs[0], kid = s.inputs[1];
    if (g.needs_grad(in)) {
      const ConvKernel kk(g.nodes_[kid].value);
      g.accumulate(in, conv2d_valid_grad_input(s.grad, kk, g.nodes_[in].value.shape(), g.opts_));
    }
    if (g.needs_grad(kid))
      g.accumulate(kid, conv2d_valid_grad_kernel(g.nodes_[in].value, s.grad, g.nodes_[kid].value.shape(), g.opts_));
  };
  return push(std::move(n));
}

Var Graph::depthwise_corr(Var search, Var tmpl) {
  Node n;
  n.value = acm::depthwise_corr(node(search).value, node(tmpl).value, opts_);
  n.inputs = {search.id, tmpl.id};
  n.backward = [](Graph& g, std::size_t self) {
    const Node& s = g.nodes_[self];
    const std::size_t sid = s.inputs[0], tid = s.inputs[1];
    if (g.needs_grad(sid))
      g.accumulate(sid, depthwise_corr_grad_search(s.grad, g.nodes_[tid].value, g.nodes_[sid].value.shape()));
    if (g.needs_grad(tid))
      g.accumulate(tid, depthwise_corr_grad_template(g.nodes_[sid].value, s.grad, g.nodes_[tid].value.shape()));
  };
  return push(std::move(n));
}

Var Graph::xcorr(Var search, Var tmpl) {
  Node n;
  n.value = acm::xcorr(node(search).value, node(tmpl).value, opts_);
  n.inputs = {search.id, tmpl.id};
  n.backward = [](Graph& g, std::size_t self) {
    const Node& s = g.nodes_[self];
    const std::size_t sid = s.inputs[0], tid = s.inputs[1];
    const std::size_t C = g.nodes_[sid].value.dim(0);
    // the single output channel fans out to every input channel
    Tensor spread({C, s.grad.dim(1), s.grad.dim(2)});
    const std::size_t plane = s.grad.numel();
    for (std::size_t c = 0; c < C; ++c) std::copy_n(s.grad.ptr(), plane, spread.ptr() + c * plane);
    if (g.needs_grad(sid))
      g.accumulate(sid, depthwise_corr_grad_search(spread, g.nodes_[tid].value, g.nodes_[sid].value.shape()));
    if (g.needs_grad(tid))
      g.accumulate(tid, depthwise_corr_grad_template(g.nodes_[sid].value, spread, g.nodes_[tid].value.shape()));
  };
  return push(std::move(n));
}

Var Graph::head1x1(Var corr, Var kernel) {
  const Shape& ks = node(kernel).value.shape();
  if (ks.size() != 4 || ks[2] != 1 || ks[3] != 1)
    fail(ErrorCode::shape_mismatch, "head1x1 needs a 1x1 kernel, got " + shape_str(ks));
  return conv2d(corr, kernel);
}

Var Graph::add(Var a, Var b) {
  Node n;
  n.value = broadcast_add(node(a).value, node(b).value);
  n.inputs = {a.id, b.id};
  n.backward = [](Graph& g, std::size_t self) {
    const Node& s = g.nodes_[self];
    for (auto in : s.inputs)
      if (g.needs_grad(in)) {
        const Shape& target = g.nodes_[in].value.shape();
        g.accumulate(in, target == s.grad.shape() ? s.grad : reduce_to_shape(s.grad, target));
      }
  };
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  if (va.shape() != vb.shape())
    fail(ErrorCode::shape_mismatch, "mul " + shape_str(va.shape()) + " vs " + shape_str(vb.shape()));
  Node n;
  n.value = Tensor(va.shape());
  for (std::size_t i = 0; i < va.numel(); ++i) n.value[i] = va[i] * vb[i];
  n.inputs = {a.id, b.id};
  n.backward = [](Graph& g, std::size_t self) {
    const Node& s = g.nodes_[self];
    const std::size_t ia = s.inputs[0], ib = s.inputs[1];
    for (auto [dst, other] : {std::pair{ia, ib}, std::pair{ib, ia}}) {
      if (!g.needs_grad(dst)) continue;
      Tensor d(s.grad.shape());
      const Tensor& o = g.nodes_[other].value;
      for (std::size_t i = 0; i < d.numel(); ++i) d[i] = s.grad[i] * o[i];
      g.accumulate(dst, d);
    }
  };
  return push(std::move(n));
}

Var Graph::relu(Var x) {
  Node n;
  n.value = acm::relu(node(x).value);
  n.inputs = {x.id};
  n.is_relu = true;
  n.backward = [](Graph& g, std::size_t self) {
    const Node& s = g.nodes_[self];
    const std::size_t in = s.inputs[0];
    if (!g.needs_grad(in)) return;
    const Tensor& xv = g.nodes_[in].value;
    Tensor d(xv.shape());
    // derivative at exactly 0 is 0
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] = xv[i] > 0.0f ? s.grad[i] : 0.0f;
    g.accumulate(in, d);
  };
  return push(std::move(n));
}

Var Graph::linear(Var x, Var weight, Var bias) {
  const FcLayer layer{node(weight).value, node(bias).value};
  Node n;
  n.value = fc_forward(node(x).value, layer);
  if (opts_.stats) ++opts_.stats->fc_calls;
  n.inputs = {x.id, weight.id, bias.id};
  n.backward = [](Graph& g, std::size_t self) {
    const Node& s = g.nodes_[self];
    const std::size_t xid = s.inputs[0], wid = s.inputs[1], bid = s.inputs[2];
    const Tensor& xv = g.nodes_[xid].value;
    const Tensor& wv = g.nodes_[wid].value;
    const std::size_t out_n = wv.dim(0), in_n = wv.dim(1);
    if (g.needs_grad(xid)) {
      Tensor dx(xv.shape());
      for (std::size_t i = 0; i < in_n; ++i) {
        double acc = 0.0;
        for (std::size_t o = 0; o < out_n; ++o) acc += static_cast<double>(wv[o * in_n + i]) * s.grad[o];
        dx[i] = static_cast<float>(acc);
      }
      g.accumulate(xid, dx);
    }
    if (g.needs_grad(wid)) {
      Tensor dw(wv.shape());
      for (std::size_t o = 0; o < out_n; ++o)
        for (std::size_t i = 0; i < in_n; ++i) dw[o * in_n + i] = s.grad[o] * xv[i];
      g.accumulate(wid, dw);
    }
    if (g.needs_grad(bid)) g.accumulate(bid, s.grad.reshaped(g.nodes_[bid].value.shape()));
  };
  return push(std::move(n));
}

Var Graph::reshape(Var x, Shape shape) {
  Node n;
  n.value = node(x).value.reshaped(std::move(shape));
  n.inputs = {x.id};
  n.backward = [](Graph& g, std::size_t self) {
    const Node& s = g.nodes_[self];
    const std::size_t in = s.inputs[0];
    if (g.needs_grad(in)) g.accumulate(in, s.grad.reshaped(g.nodes_[in].value.shape()));
  };
  return push(std::move(n));
}

Var Graph::batchnorm(Var x, Var gamma, Var beta, const Tensor& running_mean, const Tensor& running_var, float eps) {
  const BatchNormParams p{node(gamma).value, node(beta).value, running_mean, running_var, eps};
  Node n;
  n.value = batchnorm_infer(node(x).value, p);
  n.inputs = {x.id, gamma.id, beta.id};
  n.backward = [mean = running_mean, var = running_var, eps](Graph& g, std::size_t self) {
    const Node& s = g.nodes_[self];
    const std::size_t xid = s.inputs[0], gid = s.inputs[1], bid = s.inputs[2];
    const Tensor& xv = g.nodes_[xid].value;
    const Tensor& gv = g.nodes_[gid].value;
    const std::size_t C = gv.numel(), plane = xv.numel() / C;
    Tensor dx(xv.shape()), dgamma(gv.shape()), dbeta(gv.shape());
    for (std::size_t c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(var[c]) + eps);
      double sg = 0.0, sgx = 0.0;
      for (std::size_t k = 0; k < plane; ++k) {
        const std::size_t i = c * plane + k;
        dx[i] = static_cast<float>(s.grad[i] * gv[c] * inv);
        sg += s.grad[i];
        sgx += s.grad[i] * (static_cast<double>(xv[i]) - mean[c]) * inv;
      }
      dgamma[c] = static_cast<float>(sgx);
      dbeta[c] = static_cast<float>(sg);
    }
    if (g.needs_grad(xid)) g.accumulate(xid, dx);
    if (g.needs_grad(gid)) g.accumulate(gid, dgamma);
    if (g.needs_grad(bid)) g.accumulate(bid, dbeta);
  };
  return push(std::move(n));
}

Var Graph::global_avg_pool(Var x) {
  Node n;
  n.value = acm::global_avg_pool(node(x).value);
  n.inputs = {x.id};
  n.backward = [](Graph& g, std::size_t self) {
    const Node& s = g.nodes_[self];
    const std::size_t in = s.inputs[0];
    if (!g.needs_grad(in)) return;
    const Shape& shape = g.nodes_[in].value.shape();
    const std::size_t plane = shape[1] * shape[2];
    Tensor d(shape);
    for (std::size_t c = 0; c < shape[0]; ++c)
      std::fill_n(d.ptr() + c * plane, plane, s.grad[c] / static_cast<float>(plane));
    g.accumulate(in, d);
  };
  return push(std::move(n));
}

Var Graph::sum(Var x) {
  double acc = 0.0;
  for (float v : node(x).value.data()) acc += v;
  Node n;
  n.value = Tensor({1}, static_cast<float>(acc));
  n.scalar64 = acc;
  n.inputs = {x.id};
  n.backward = [](Graph& g, std::size_t self) {
    const Node& s = g.nodes_[self];
    const std::size_t in = s.inputs[0];
    if (g.needs_grad(in)) g.accumulate(in, Tensor(g.nodes_[in].value.shape(), s.grad[0]));
  };
  return push(std::move(n));
}

double softmax_xent(std::span<const float> logits, std::size_t label) {
  if (label >= logits.size())
    fail(ErrorCode::label_out_of_range,
         "label " + std::to_string(label) + " with " + std::to_string(logits.size()) + " classes");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (float v : logits) z += std::exp(static_cast<double>(v) - m);
  return std::log(z) - (static_cast<double>(logits[label]) - m);
}

Var Graph::softmax_xent(Var logits, std::size_t label) {
  const double loss = ag::softmax_xent(node(logits).value.data(), label);
  Node n;
  n.value = Tensor({1}, static_cast<float>(loss));
  n.scalar64 = loss;
  n.inputs = {logits.id};
  n.backward = [label](Graph& g, std::size_t self) {
    const Node& s = g.nodes_[self];
    const std::size_t in = s.inputs[0];
    if (!g.needs_grad(in)) return;
    const Tensor& lv = g.nodes_[in].value;
    const double m = *std::max_element(lv.data().begin(), lv.data().end());
    double z = 0.0;
    for (float v : lv.data()) z += std::exp(static_cast<double>(v) - m);
    Tensor d(lv.shape());
    for (std::size_t k = 0; k < lv.numel(); ++k) {
      const double prob = std::exp(static_cast<double>(lv[k]) - m) / z;
      d[k] = static_cast<float>(s.grad[0] * (prob - (k == label ? 1.0 : 0.0)));
    }
    g.accumulate(in, d);
  };
  return push(std::move(n));
}

double Graph::scalar(Var v) const {
  const Node& n = node(v);
  if (n.value.numel() != 1) fail(ErrorCode::non_scalar_loss, "value is " + shape_str(n.value.shape()));
  return n.scalar64 ? *n.scalar64 : static_cast<double>(n.value[0]);
}

void Graph::backward(Var loss) {
  if (loss.id >= nodes_.size()) fail(ErrorCode::invalid_argument, "unknown node");
  if (nodes_[loss.id].value.numel() != 1)
    fail(ErrorCode::non_scalar_loss, "loss has shape " + shape_str(nodes_[loss.id].value.shape()));

  std::vector<char> reachable(loss.id + 1, 0);
  reachable[loss.id] = 1;
  bool any_param = false;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    if (!reachable[id]) continue;
    if (nodes_[id].param) any_param = true;
    for (auto in : nodes_[id].inputs) reachable[in] = 1;
  }
  if (!any_param) fail(ErrorCode::disconnected_loss, "no parameter reaches the loss");

  for (std::size_t id = 0; id <= loss.id; ++id) {
    nodes_[id].grad = Tensor();
    if (reachable[id] && nodes_[id].param) nodes_[id].param->zero_grad();
  }
  nodes_[loss.id].grad = Tensor(nodes_[loss.id].value.shape(), 1.0f);

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!reachable[id] || n.grad.empty() || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, id);
  }
  for (std::size_t id = 0; id <= loss.id; ++id) {
    Node& n = nodes_[id];
    if (!reachable[id] || !n.param || n.grad.empty()) continue;
    for (std::size_t i = 0; i < n.grad.numel(); ++i) n.param->grad[i] += n.grad[i];
  }
}

std::uint64_t Graph::relu_signature() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const Node& n : nodes_) {
    if (!n.is_relu) continue;
    const Tensor& x = nodes_[n.inputs[0]].value;
    for (float v : x.data()) {
      h ^= v > 0.0f ? 1u : 0u;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void sgd_step(std::span<Parameter* const> params, float lr) {
  if (!(lr > 0.0f)) fail(ErrorCode::invalid_argument, "learning rate must be positive");
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.numel(); ++i) p->value[i] -= lr * p->grad[i];
    p->zero_grad();
  }
}

Tensor init_uniform(Shape shape, std::size_t fan_in, Pcg32& rng) {
  const float bound = static_cast<float>(std::sqrt(6.0 / static_cast<double>(fan_in)));
  return random_uniform(std::move(shape), rng, -bound, bound);
}

FcParams FcParams::init(const std::string& name, std::size_t in, std::size_t out, Pcg32& rng) {
  return {Parameter(name + ".weight", init_uniform({out, in}, in, rng)), Parameter(name + ".bias", Tensor({out}))};
}

Mlp3Params init_mlp3(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, Pcg32& rng) {
  return {FcParams::init(name + ".0", in, hidden, rng), FcParams::init(name + ".1", hidden, hidden, rng),
          FcParams::init(name + ".2", hidden, out, rng)};
}

Mlp3 to_layers(const Mlp3Params& p) { return {p[0].layer(), p[1].layer(), p[2].layer()}; }

FusionWeights AcmParams::weights() const {
  FusionWeights w{ConvKernel(theta_z.value), ConvKernel(theta_x.value), std::nullopt, std::nullopt,
                  NormOrder::before_relu, box_scale};
  if (prior) w.prior = to_layers(*prior);
  if (norm) w.norm = BatchNormParams{norm->gamma.value, norm->beta.value, norm->running_mean, norm->running_var, norm->eps};
  return w;
}

std::vector<Parameter*> AcmParams::parameters() {
  std::vector<Parameter*> out{&theta_z, &theta_x};
  if (prior)
    for (auto& l : *prior) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
  if (norm) {
    out.push_back(&norm->gamma);
    out.push_back(&norm->beta);
  }
  return out;
}

Var fc(Graph& g, Var x, FcParams& p) { return g.linear(x, g.param(p.weight), g.param(p.bias)); }

Var mlp3(Graph& g, Var x, Mlp3Params& p) {
  Var h = g.relu(fc(g, x, p[0]));
  h = g.relu(fc(g, h, p[1]));
  return fc(g, h, p[2]);
}

Var acm(Graph& g, Var tmpl, Var search, AcmParams& p, std::optional<Var> prior_input, bool apply_relu) {
  if (p.prior.has_value() != prior_input.has_value())
    fail(ErrorCode::missing_box, "prior input must be given exactly when a prior branch is configured");
  const Var z_term = g.conv2d(tmpl, g.param(p.theta_z));
  Var pre = g.add(g.conv2d(search, g.param(p.theta_x)), z_term);
  if (p.prior) {
    const Var e = mlp3(g, *prior_input, *p.prior);
    pre = g.add(pre, g.reshape(e, {g.value(e).numel(), 1, 1}));
  }
  if (p.norm)
    pre = g.batchnorm(pre, g.param(p.norm->gamma), g.param(p.norm->beta), p.norm->running_mean,
                      p.norm->running_var, p.norm->eps);
  return apply_relu ? g.relu(pre) : pre;
}

}  // namespace acm::ag
