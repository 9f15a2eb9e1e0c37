#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace scenehgn::nn {

using Mat = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Mat value, grad, m, v;  // m, v: Adam moments
};

/// Named tensors in insertion order.
class ParameterStore {
 public:
  /// Adds a rows x cols tensor with N(0, scale^2) entries (zero when scale is 0).
  Parameter& add(const std::string& name, int rows, int cols, double scale, std::uint64_t seed);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

/// Reverse-mode tape over matrices. Columns index items (objects, slots).
class Graph {
 public:
  struct Var {
    int id = -1;
  };

  Var constant(Mat value);
  /// Leaf bound to a parameter; backward() accumulates into Parameter::grad.
  /// Forward-only use leaves the parameter untouched.
  Var param(const Parameter& p);

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  const Mat& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  /// Adds column vector b (rows x 1) to every column of x.
  Var add_bias(Var x, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double s);
  Var leaky_relu(Var a, double slope = 0.01);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var transpose(Var a);
  Var rows(Var a, int start, int count);
  Var cols(Var a, int start, int count);
  /// Row-wise sum over columns (rows x 1).
  Var sum_cols(Var a);
  /// Sum of all entries (1 x 1).
  Var sum(Var a);
  /// Stacks the column blocks [start, start + block) of a vertical vector into
  /// a (block x count) matrix: slot k takes rows [k*block, (k+1)*block).
  Var reshape_slots(Var a, int block, int count);
  /// Columns of `a` picked by index (repeats allowed).
  Var gather_cols(Var a, const std::vector<int>& index);
  /// out[:, index[k]] += a[:, k] for an output with `count` columns.
  Var scatter_add_cols(Var a, const std::vector<int>& index, int count);
  /// Softmax down each column.
  Var softmax_cols(Var a);

  /// Sum of binary cross-entropies of sigmoid(logits) against 0/1 targets.
  Var bce_logits(Var logits, const Mat& targets);
  /// Sum over columns of -log softmax(logits[:, j])[targets[j]].
  Var cross_entropy(Var logits, const std::vector<int>& targets);
  /// Sum of squared differences to a constant target.
  Var squared_error(Var a, const Mat& target);
  /// KL(N(mu, exp(logvar)) || N(0, I)) summed over entries.
  Var kl_divergence(Var mu, Var logvar);
  /// Scalar node with externally computed value and gradients d value / d input.
  Var external(const std::vector<Var>& inputs, double value, std::vector<Mat> grads);

  /// Propagates d out / d node for a 1 x 1 output.
  void backward(Var out);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Graph&, Node&)> back;
    Parameter* param = nullptr;
  };
  Var push(Mat value, std::function<void(Graph&, Node&)> back);
  Mat& g(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  void ensure_grad(int id);

  std::vector<Node> nodes_;
};

using Var = Graph::Var;

/// y = W x + b with parameters "<name>.W" (out x in) and "<name>.b" (out x 1).
Var dense(Graph& g, const ParameterStore& ps, const std::string& name, Var x);
/// Registers the dense layer's tensors: N(0, 1/in) weights, zero bias.
void add_dense(ParameterStore& ps, const std::string& name, int in, int out, std::uint64_t seed, bool bias = true);
/// y = W x without bias.
Var linear(Graph& g, const ParameterStore& ps, const std::string& name, Var x);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One Adam update over every parameter using the accumulated gradients.
void adam_step(ParameterStore& ps, const AdamConfig& cfg, int step);

}  // namespace scenehgn::nn
