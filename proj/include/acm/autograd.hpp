#pragma once

// Tape-based reverse-mode differentiation over the nn_ops set.
//
// A Graph records every forward op as a node (value + backward closure) in
// creation order, which is already a topological order. backward() walks the
// tape in reverse from a scalar loss and accumulates into the Parameters
// that were bound with Graph::param(). One Graph per forward pass; graphs
// are single-threaded and not shared.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acm/exec.hpp"
#include "acm/fusion.hpp"
#include "acm/rng.hpp"
#include "acm/tensor.hpp"

namespace acm::ag {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad();
};

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

class Graph {
 public:
  explicit Graph(ComputeOptions opts = {}) : opts_(opts) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  // Leaf bound to `p`; backward() accumulates into p.grad. `p` must outlive
  // the graph.
  Var param(Parameter& p);

  Var conv2d(Var input, Var kernel);
  Var depthwise_corr(Var search, Var tmpl);
  Var xcorr(Var search, Var tmpl);
  Var head1x1(Var corr, Var kernel);
  Var add(Var a, Var b);  // broadcasting
  Var mul(Var a, Var b);  // same shape
  Var relu(Var x);
  Var linear(Var x, Var weight, Var bias);
  Var reshape(Var x, Shape shape);
  Var batchnorm(Var x, Var gamma, Var beta, const Tensor& running_mean, const Tensor& running_var,
                float eps = kBatchNormEps);
  Var global_avg_pool(Var x);  // [C,H,W] -> [C]
  Var sum(Var x);              // -> [1], f64 accumulation
  Var softmax_xent(Var logits, std::size_t label);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  // Scalar value at f64 precision where the producing op tracked it.
  double scalar(Var v) const;

  // Resets the grads of every reachable Parameter, then fills them with
  // d loss / d param. NonScalarLoss, DisconnectedLoss.
  void backward(Var loss);

  // Hash of every ReLU's active set; changes iff some unit crosses its kink.
  std::uint64_t relu_signature() const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    std::function<void(Graph&, std::size_t)> backward;
    Parameter* param = nullptr;
    std::optional<double> scalar64;
    bool requires_grad = false;
    bool is_relu = false;
  };

  Var push(Node node);
  const Node& node(Var v) const { return nodes_.at(v.id); }
  void accumulate(std::size_t id, const Tensor& g);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  ComputeOptions opts_;
  std::vector<Node> nodes_;
};

// p.value -= lr * p.grad, then zero the grad. lr must be positive.
void sgd_step(std::span<Parameter* const> params, float lr);

// Plain (non-graph) cross-entropy, with max-subtraction.
double softmax_xent(std::span<const float> logits, std::size_t label);

// Uniform in +-sqrt(6 / fan_in).
Tensor init_uniform(Shape shape, std::size_t fan_in, Pcg32& rng);

// ---- trainable counterparts of the nn_ops parameter types ----

struct FcParams {
  Parameter weight;  // [out, in]
  Parameter bias;    // [out]

  static FcParams init(const std::string& name, std::size_t in, std::size_t out, Pcg32& rng);
  FcLayer layer() const { return {weight.value, bias.value}; }
};

using Mlp3Params = std::array<FcParams, 3>;

Mlp3Params init_mlp3(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, Pcg32& rng);
Mlp3 to_layers(const Mlp3Params& p);

struct NormParams {
  Parameter gamma, beta;
  Tensor running_mean, running_var;
  float eps = kBatchNormEps;
};

struct AcmParams {
  Parameter theta_z;
  Parameter theta_x;
  std::optional<Mlp3Params> prior;
  std::optional<NormParams> norm;
  float box_scale = 255.0f;

  FusionWeights weights() const;
  std::vector<Parameter*> parameters();
};

Var fc(Graph& g, Var x, FcParams& p);
Var mlp3(Graph& g, Var x, Mlp3Params& p);

// Differentiable ACM block; `prior_input` is the raw 2-vector fed to the
// prior MLP (already scaled) and must be given iff p.prior is set.
Var acm(Graph& g, Var tmpl, Var search, AcmParams& p, std::optional<Var> prior_input, bool apply_relu);

}  // namespace acm::ag
