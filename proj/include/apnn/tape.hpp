#pragma once

#include <cassert>
#include <cmath>
#include <vector>

#include "apnn/mlp.hpp"

namespace apnn::rev {

// Small reverse-mode tape over scalars. The residual algebra that combines
// network jets into PDE residuals is written once against Var; its adjoints
// are then pulled back onto the recorded jet computation. Each node keeps at
// most two parents with constant local partials.
class Tape {
 public:
  int leaf(double v) { return push(v, -1, 0.0, -1, 0.0); }

  int push(double v, int ia, double da, int ib, double db) {
    vals_.push_back(v);
    recs_.push_back({ia, ib, da, db});
    return int(vals_.size()) - 1;
  }

  double val(int i) const { return vals_[i]; }
  int size() const { return int(vals_.size()); }

  void clear() {
    vals_.clear();
    recs_.clear();
    adj_.clear();
  }

  void seed(int i, double a) {
    if (adj_.size() != vals_.size()) adj_.assign(vals_.size(), 0.0);
    adj_[i] += a;
  }

  // One reverse sweep over everything recorded; call after all seeds.
  void backward() {
    if (adj_.size() != vals_.size()) adj_.assign(vals_.size(), 0.0);
    for (int i = int(vals_.size()) - 1; i >= 0; --i) {
      const double a = adj_[i];
      if (a == 0.0) continue;
      const Rec& r = recs_[i];
      if (r.ia >= 0) adj_[r.ia] += a * r.da;
      if (r.ib >= 0) adj_[r.ib] += a * r.db;
    }
  }

  double adj(int i) const { return adj_[i]; }

 private:
  struct Rec {
    int ia, ib;
    double da, db;
  };
  std::vector<double> vals_;
  std::vector<Rec> recs_;
  std::vector<double> adj_;
};

struct Var {
  Tape* tape = nullptr;
  int i = -1;
  double v() const { return tape->val(i); }
};

inline Var make_leaf(Tape& t, double v) { return {&t, t.leaf(v)}; }
inline Var make_const(Tape& t, double v) { return {&t, t.leaf(v)}; }

inline Var operator+(Var a, Var b) {
  return {a.tape, a.tape->push(a.v() + b.v(), a.i, 1.0, b.i, 1.0)};
}
inline Var operator-(Var a, Var b) {
  return {a.tape, a.tape->push(a.v() - b.v(), a.i, 1.0, b.i, -1.0)};
}
inline Var operator*(Var a, Var b) {
  return {a.tape, a.tape->push(a.v() * b.v(), a.i, b.v(), b.i, a.v())};
}
inline Var operator-(Var a) {
  return {a.tape, a.tape->push(-a.v(), a.i, -1.0, -1, 0.0)};
}
inline Var operator+(Var a, double c) {
  return {a.tape, a.tape->push(a.v() + c, a.i, 1.0, -1, 0.0)};
}
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) {
  return {a.tape, a.tape->push(c - a.v(), a.i, -1.0, -1, 0.0)};
}
inline Var operator*(Var a, double c) {
  return {a.tape, a.tape->push(a.v() * c, a.i, c, -1, 0.0)};
}
inline Var operator*(double c, Var a) { return a * c; }

inline Var exp(Var a) {
  const double e = std::exp(a.v());
  return {a.tape, a.tape->push(e, a.i, e, -1, 0.0)};
}

// softplus value, first and second derivative of softplus as tape nodes
inline Var softplus0(Var a) {
  return {a.tape,
          a.tape->push(apnn::softplus(a.v()), a.i, apnn::sigmoid(a.v()), -1, 0.0)};
}
inline Var softplus1(Var a) {
  const double s = apnn::sigmoid(a.v());
  return {a.tape, a.tape->push(s, a.i, s * (1.0 - s), -1, 0.0)};
}
inline Var softplus2(Var a) {
  const double s = apnn::sigmoid(a.v());
  return {a.tape,
          a.tape->push(s * (1.0 - s), a.i, s * (1.0 - s) * (1.0 - 2.0 * s), -1, 0.0)};
}

}
