#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace scenehgn::ad {

class Tape;

/// Scalar tracked on a Tape. Each node stores up to two parents with the
/// local partial derivatives; `backward` sweeps the tape once in reverse.
struct Var {
  Tape* tape = nullptr;
  std::int32_t id = -1;  // -1 marks a constant
  double v = 0.0;

  Var() = default;
  Var(double value) : v(value) {}  // NOLINT: constants convert implicitly
  Var(Tape* t, std::int32_t i, double value) : tape(t), id(i), v(value) {}
};

class Tape {
 public:
  Var variable(double value) {
    nodes_.push_back({-1, -1, 0.0, 0.0});
    return Var(this, static_cast<std::int32_t>(nodes_.size() - 1), value);
  }

  Var unary(const Var& a, double value, double da) {
    if (a.id < 0) return Var(value);
    nodes_.push_back({a.id, -1, da, 0.0});
    return Var(this, static_cast<std::int32_t>(nodes_.size() - 1), value);
  }

  Var binary(const Var& a, const Var& b, double value, double da, double db) {
    if (a.id < 0 && b.id < 0) return Var(value);
    if (a.id < 0) return unary(b, value, db);
    if (b.id < 0) return unary(a, value, da);
    nodes_.push_back({a.id, b.id, da, db});
    return Var(this, static_cast<std::int32_t>(nodes_.size() - 1), value);
  }

  /// Adjoints of every node with respect to `out`.
  std::vector<double> backward(const Var& out) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    if (out.id < 0) return adj;
    adj[out.id] = 1.0;
    for (std::int32_t i = out.id; i >= 0; --i) {
      const double g = adj[i];
      if (g == 0.0) continue;
      const Node& n = nodes_[i];
      if (n.p0 >= 0) adj[n.p0] += g * n.d0;
      if (n.p1 >= 0) adj[n.p1] += g * n.d1;
    }
    return adj;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::int32_t p0, p1;
    double d0, d1;
  };
  std::vector<Node> nodes_;
};

inline Tape* tape_of(const Var& a, const Var& b) { return a.tape ? a.tape : b.tape; }

inline Var operator+(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  return t ? t->binary(a, b, a.v + b.v, 1.0, 1.0) : Var(a.v + b.v);
}
inline Var operator-(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  return t ? t->binary(a, b, a.v - b.v, 1.0, -1.0) : Var(a.v - b.v);
}
inline Var operator*(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  return t ? t->binary(a, b, a.v * b.v, b.v, a.v) : Var(a.v * b.v);
}
inline Var operator/(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  const double q = a.v / b.v;
  return t ? t->binary(a, b, q, 1.0 / b.v, -q / b.v) : Var(q);
}
inline Var operator-(const Var& a) { return a.tape ? a.tape->unary(a, -a.v, -1.0) : Var(-a.v); }

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

inline Var sin(const Var& a) { return a.tape ? a.tape->unary(a, std::sin(a.v), std::cos(a.v)) : Var(std::sin(a.v)); }
inline Var cos(const Var& a) { return a.tape ? a.tape->unary(a, std::cos(a.v), -std::sin(a.v)) : Var(std::cos(a.v)); }
inline Var sqrt(const Var& a) {
  const double r = std::sqrt(a.v);
  return a.tape ? a.tape->unary(a, r, 0.5 / r) : Var(r);
}
inline Var atan2(const Var& y, const Var& x) {
  Tape* t = tape_of(y, x);
  const double r2 = x.v * x.v + y.v * y.v;
  const double v = std::atan2(y.v, x.v);
  return t ? t->binary(y, x, v, x.v / r2, -y.v / r2) : Var(v);
}

inline double value(const Var& a) { return a.v; }
inline double value(double a) { return a; }

}  // namespace scenehgn::ad
