#include "scenehgn/nn.hpp"

#include <cmath>

#include "scenehgn/errors.hpp"
#include "scenehgn/rng.hpp"

namespace scenehgn::nn {

Parameter& ParameterStore::add(const std::string& name, int rows, int cols, double scale, std::uint64_t seed) {
  if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Mat::Zero(rows, cols);
  if (scale != 0.0) {
    Rng rng(seed);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) p->value(r, c) = scale * rng.normal();
    }
  }
  p->grad = Mat::Zero(rows, cols);
  p->m = Mat::Zero(rows, cols);
  p->v = Mat::Zero(rows, cols);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return *params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return *params_[it->second];
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

// ---------------------------------------------------------------------------

Var Graph::push(Mat value, std::function<void(Graph&, Node&)> back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

void Graph::ensure_grad(int id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
}

Var Graph::constant(Mat value) { return push(std::move(value), nullptr); }

Var Graph::param(const Parameter& p) {
  Var v = push(p.value, nullptr);
  nodes_.back().param = const_cast<Parameter*>(&p);
  return v;
}

Var Graph::matmul(Var a, Var b) {
  return push(value(a) * value(b), [a, b](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.ensure_grad(b.id);
    gr.g(a.id).noalias() += n.grad * gr.value(b).transpose();
    gr.g(b.id).noalias() += gr.value(a).transpose() * n.grad;
  });
}

Var Graph::add(Var a, Var b) {
  return push(value(a) + value(b), [a, b](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.ensure_grad(b.id);
    gr.g(a.id) += n.grad;
    gr.g(b.id) += n.grad;
  });
}

Var Graph::add_bias(Var x, Var b) {
  Mat out = value(x);
  out.colwise() += value(b).col(0);
  return push(std::move(out), [x, b](Graph& gr, Node& n) {
    gr.ensure_grad(x.id);
    gr.ensure_grad(b.id);
    gr.g(x.id) += n.grad;
    gr.g(b.id) += n.grad.rowwise().sum();
  });
}

Var Graph::sub(Var a, Var b) {
  return push(value(a) - value(b), [a, b](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.ensure_grad(b.id);
    gr.g(a.id) += n.grad;
    gr.g(b.id) -= n.grad;
  });
}

Var Graph::mul(Var a, Var b) {
  return push(value(a).cwiseProduct(value(b)), [a, b](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.ensure_grad(b.id);
    gr.g(a.id) += n.grad.cwiseProduct(gr.value(b));
    gr.g(b.id) += n.grad.cwiseProduct(gr.value(a));
  });
}

Var Graph::scale(Var a, double s) {
  return push(s * value(a), [a, s](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.g(a.id) += s * n.grad;
  });
}

Var Graph::leaky_relu(Var a, double slope) {
  const Mat& x = value(a);
  Mat out = x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return push(std::move(out), [a, slope](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    const Mat& x = gr.value(a);
    gr.g(a.id) += n.grad.cwiseProduct(x.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }));
  });
}

Var Graph::sigmoid(Var a) {
  Mat out = value(a).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return push(std::move(out), [a](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.g(a.id) += n.grad.cwiseProduct(n.value.unaryExpr([](double s) { return s * (1.0 - s); }));
  });
}

namespace {
double softplus_value(double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); }
double sigmoid_value(double v) { return 1.0 / (1.0 + std::exp(-v)); }
}  // namespace

Var Graph::softplus(Var a) {
  return push(value(a).unaryExpr(&softplus_value), [a](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.g(a.id) += n.grad.cwiseProduct(gr.value(a).unaryExpr(&sigmoid_value));
  });
}

Var Graph::tanh(Var a) {
  Mat out = value(a).array().tanh().matrix();
  return push(std::move(out), [a](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.g(a.id) += n.grad.cwiseProduct(n.value.unaryExpr([](double t) { return 1.0 - t * t; }));
  });
}

Var Graph::exp(Var a) {
  Mat out = value(a).array().exp().matrix();
  return push(std::move(out), [a](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.g(a.id) += n.grad.cwiseProduct(n.value);
  });
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  Eigen::Index rows = 0, cols = value(parts.front()).cols();
  for (auto p : parts) {
    if (value(p).cols() != cols) throw ConfigError("concat_rows: column mismatch");
    rows += value(p).rows();
  }
  Mat out(rows, cols);
  Eigen::Index r = 0;
  for (auto p : parts) {
    out.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
  }
  return push(std::move(out), [parts](Graph& gr, Node& n) {
    Eigen::Index r = 0;
    for (auto p : parts) {
      gr.ensure_grad(p.id);
      const auto h = gr.value(p).rows();
      gr.g(p.id) += n.grad.middleRows(r, h);
      r += h;
    }
  });
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  Eigen::Index cols = 0, rows = value(parts.front()).rows();
  for (auto p : parts) {
    if (value(p).rows() != rows) throw ConfigError("concat_cols: row mismatch");
    cols += value(p).cols();
  }
  Mat out(rows, cols);
  Eigen::Index c = 0;
  for (auto p : parts) {
    out.middleCols(c, value(p).cols()) = value(p);
    c += value(p).cols();
  }
  return push(std::move(out), [parts](Graph& gr, Node& n) {
    Eigen::Index c = 0;
    for (auto p : parts) {
      gr.ensure_grad(p.id);
      const auto w = gr.value(p).cols();
      gr.g(p.id) += n.grad.middleCols(c, w);
      c += w;
    }
  });
}

Var Graph::transpose(Var a) {
  return push(value(a).transpose(), [a](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.g(a.id) += n.grad.transpose();
  });
}

Var Graph::rows(Var a, int start, int count) {
  return push(value(a).middleRows(start, count), [a, start, count](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.g(a.id).middleRows(start, count) += n.grad;
  });
}

Var Graph::cols(Var a, int start, int count) {
  return push(value(a).middleCols(start, count), [a, start, count](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.g(a.id).middleCols(start, count) += n.grad;
  });
}

Var Graph::sum_cols(Var a) {
  return push(value(a).rowwise().sum(), [a](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.g(a.id).colwise() += n.grad.col(0);
  });
}

Var Graph::sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), [a](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.g(a.id).array() += n.grad(0, 0);
  });
}

Var Graph::reshape_slots(Var a, int block, int count) {
  const Mat& x = value(a);
  if (x.cols() != 1 || x.rows() != static_cast<Eigen::Index>(block) * count) {
    throw ConfigError("reshape_slots: shape mismatch");
  }
  Mat out = Eigen::Map<const Mat>(x.data(), block, count);
  return push(std::move(out), [a, block, count](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.g(a.id) += Eigen::Map<const Mat>(n.grad.data(), static_cast<Eigen::Index>(block) * count, 1);
  });
}

Var Graph::gather_cols(Var a, const std::vector<int>& index) {
  const Mat& x = value(a);
  Mat out(x.rows(), static_cast<Eigen::Index>(index.size()));
  for (std::size_t k = 0; k < index.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = x.col(index[k]);
  return push(std::move(out), [a, index](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    for (std::size_t k = 0; k < index.size(); ++k) gr.g(a.id).col(index[k]) += n.grad.col(static_cast<Eigen::Index>(k));
  });
}

Var Graph::scatter_add_cols(Var a, const std::vector<int>& index, int count) {
  const Mat& x = value(a);
  Mat out = Mat::Zero(x.rows(), count);
  for (std::size_t k = 0; k < index.size(); ++k) out.col(index[k]) += x.col(static_cast<Eigen::Index>(k));
  return push(std::move(out), [a, index](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    for (std::size_t k = 0; k < index.size(); ++k) gr.g(a.id).col(static_cast<Eigen::Index>(k)) += n.grad.col(index[k]);
  });
}

Var Graph::softmax_cols(Var a) {
  const Mat& x = value(a);
  Mat out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Eigen::VectorXd e = (x.col(j).array() - x.col(j).maxCoeff()).exp().matrix();
    out.col(j) = e / e.sum();
  }
  return push(std::move(out), [a](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    for (Eigen::Index j = 0; j < n.value.cols(); ++j) {
      const double dot = n.grad.col(j).dot(n.value.col(j));
      gr.g(a.id).col(j) += n.value.col(j).cwiseProduct((n.grad.col(j).array() - dot).matrix());
    }
  });
}

Var Graph::bce_logits(Var logits, const Mat& targets) {
  const Mat& x = value(logits);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i), t = targets(i);
    // log(1 + e^-|v|) + max(v, 0) - v t
    loss += std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0) - v * t;
  }
  Mat out(1, 1);
  out(0, 0) = loss;
  return push(std::move(out), [logits, targets](Graph& gr, Node& n) {
    gr.ensure_grad(logits.id);
    const Mat& x = gr.value(logits);
    gr.g(logits.id) += n.grad(0, 0) * (x.unaryExpr(&sigmoid_value) - targets);
  });
}

Var Graph::cross_entropy(Var logits, const std::vector<int>& targets) {
  const Mat& x = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != x.cols()) throw ConfigError("cross_entropy: target count mismatch");
  Mat probs(x.rows(), x.cols());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mx = x.col(j).maxCoeff();
    const Eigen::VectorXd e = (x.col(j).array() - mx).exp().matrix();
    const double z = e.sum();
    probs.col(j) = e / z;
    loss += -(x(targets[j], j) - mx - std::log(z));
  }
  Mat out(1, 1);
  out(0, 0) = loss;
  return push(std::move(out), [logits, targets, probs](Graph& gr, Node& n) {
    gr.ensure_grad(logits.id);
    Mat d = probs;
    for (std::size_t j = 0; j < targets.size(); ++j) d(targets[j], static_cast<Eigen::Index>(j)) -= 1.0;
    gr.g(logits.id) += n.grad(0, 0) * d;
  });
}

Var Graph::squared_error(Var a, const Mat& target) {
  const Mat diff = value(a) - target;
  Mat out(1, 1);
  out(0, 0) = diff.squaredNorm();
  return push(std::move(out), [a, diff](Graph& gr, Node& n) {
    gr.ensure_grad(a.id);
    gr.g(a.id) += 2.0 * n.grad(0, 0) * diff;
  });
}

Var Graph::kl_divergence(Var mu, Var logvar) {
  const Mat& m = value(mu);
  const Mat& lv = value(logvar);
  Mat out(1, 1);
  out(0, 0) = -0.5 * (1.0 + lv.array() - m.array().square() - lv.array().exp()).sum();
  return push(std::move(out), [mu, logvar](Graph& gr, Node& n) {
    gr.ensure_grad(mu.id);
    gr.ensure_grad(logvar.id);
    const double s = n.grad(0, 0);
    gr.g(mu.id) += s * gr.value(mu);
    gr.g(logvar.id) += s * 0.5 * (gr.value(logvar).array().exp() - 1.0).matrix();
  });
}

Var Graph::external(const std::vector<Var>& inputs, double value, std::vector<Mat> grads) {
  Mat out(1, 1);
  out(0, 0) = value;
  return push(std::move(out), [inputs, grads = std::move(grads)](Graph& gr, Node& n) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      gr.ensure_grad(inputs[i].id);
      gr.g(inputs[i].id) += n.grad(0, 0) * grads[i];
    }
  });
}

void Graph::backward(Var out) {
  for (auto& n : nodes_) n.grad.resize(0, 0);
  ensure_grad(out.id);
  g(out.id).setOnes();
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0) continue;
    if (n.back) n.back(*this, n);
    if (n.param) n.param->grad += n.grad;
  }
}

// ---------------------------------------------------------------------------

Var dense(Graph& g, const ParameterStore& ps, const std::string& name, Var x) {
  const Var w = g.param(ps.get(name + ".W"));
  const Var b = g.param(ps.get(name + ".b"));
  return g.add_bias(g.matmul(w, x), b);
}

Var linear(Graph& g, const ParameterStore& ps, const std::string& name, Var x) {
  return g.matmul(g.param(ps.get(name + ".W")), x);
}

void add_dense(ParameterStore& ps, const std::string& name, int in, int out, std::uint64_t seed, bool bias) {
  ps.add(name + ".W", out, in, std::sqrt(1.0 / in), seed);
  if (bias) ps.add(name + ".b", out, 1, 0.0, 0);
}

void adam_step(ParameterStore& ps, const AdamConfig& cfg, int step) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, step);
  for (auto* p : ps.all()) {
    p->m = cfg.beta1 * p->m + (1.0 - cfg.beta1) * p->grad;
    p->v = cfg.beta2 * p->v + (1.0 - cfg.beta2) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= cfg.lr * (p->m.array() / bc1) / ((p->v.array() / bc2).sqrt() + cfg.epsilon);
  }
}

}  // namespace scenehgn::nn
