#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "viref/rng.hpp"
#include "viref/tensor.hpp"
#include "viref/types.hpp"

namespace viref {

enum class Mode { train, eval };

template <typename S>
class Tape;

// Handle to a tape node. Cheap to copy; valid for the tape's lifetime.
template <typename S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr; }
  const MatX<S>& value() const;
  S scalar() const { return value()(0, 0); }
};

// Reverse-mode tape over dense Eigen values. Nodes are appended in forward
// order, so a single reverse sweep is a valid topological order. Gradients
// are allocated lazily; nodes never touched by the sweep keep zero gradient.
template <typename S>
class Tape {
 public:
  explicit Tape(Mode mode = Mode::eval, uint64_t dropout_seed = 0,
                bool record = true)
      : mode_(mode), record_(record), drop_rng_(dropout_seed) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Mode mode() const { return mode_; }
  bool recording() const { return record_; }
  Rng& dropout_rng() { return drop_rng_; }
  std::size_t node_count() const { return nodes_.size(); }

  Var<S> constant(MatX<S> v) { return make(std::move(v)); }

  Var<S> constant_vec(VecX<S> v) { return make(MatX<S>(std::move(v))); }

  Var<S> scalar_const(S v) {
    MatX<S> m(1, 1);
    m(0, 0) = v;
    return make(std::move(m));
  }

  // Parameter leaf, one node per name per tape. Repeated uses of a
  // parameter in one graph share the node, so gradients accumulate in place.
  Var<S> param(ParameterStore<S>& store, const std::string& name) {
    if (store_ == nullptr) store_ = &store;
    if (store_ != &store)
      fail(ErrorKind::contract, "tape bound to a different parameter store");
    auto it = param_ids_.find(name);
    if (it != param_ids_.end()) return Var<S>{this, it->second};
    Var<S> v = make(store.at(name).data);
    param_ids_.emplace(name, v.id);
    return v;
  }

  void backward(Var<S> loss) {
    if (!record_)
      fail(ErrorKind::contract, "backward called on a non-recording tape");
    if (loss.tape != this)
      fail(ErrorKind::contract, "backward: loss from a different tape");
    const auto& lv = nodes_[loss.id].value;
    if (lv.rows() != 1 || lv.cols() != 1)
      fail(ErrorKind::contract, "backward: loss is not a scalar");
    nodes_[loss.id].grad = MatX<S>::Ones(1, 1);
    for (int t = loss.id; t >= 0; --t) {
      Node& n = nodes_[t];
      if (n.back && n.grad.size() != 0) n.back(*this);
    }
  }

  // Gradient of every trainable parameter in the bound store; zero tensors
  // for parameters the loss never reached.
  GradMap<S> gradients() const {
    if (store_ == nullptr)
      fail(ErrorKind::contract, "tape has no bound parameter store");
    GradMap<S> out;
    for (const auto& [name, entry] : *store_) {
      if (!entry.trainable) continue;
      Tensor<S> g;
      g.shape = entry.value.shape;
      auto it = param_ids_.find(name);
      if (it != param_ids_.end() && nodes_[it->second].grad.size() != 0)
        g.data = nodes_[it->second].grad;
      else
        g.data =
            MatX<S>::Zero(entry.value.data.rows(), entry.value.data.cols());
      out.emplace(name, std::move(g));
    }
    return out;
  }

  const MatX<S>& value(int id) const { return nodes_[id].value; }
  const MatX<S>& grad(int id) const { return nodes_[id].grad; }

  template <typename Expr>
  void accum_grad(int id, const Expr& e) {
    MatX<S>& g = nodes_[id].grad;
    if (g.size() == 0)
      g = e;
    else
      g += e;
  }

  Var<S> make(MatX<S> value, std::function<void(Tape&)> back = nullptr) {
    Node n;
    n.value = std::move(value);
    if (record_) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
  }

 private:
  struct Node {
    MatX<S> value;
    MatX<S> grad;  // empty until first accumulation
    std::function<void(Tape&)> back;
  };

  Mode mode_;
  bool record_;
  Rng drop_rng_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> param_ids_;
  ParameterStore<S>* store_ = nullptr;
};

template <typename S>
const MatX<S>& Var<S>::value() const {
  return tape->value(id);
}

namespace detail {
template <typename S>
Tape<S>& same_tape(Var<S> a, Var<S> b) {
  if (a.tape == nullptr || a.tape != b.tape)
    fail(ErrorKind::contract, "operands from different tapes");
  return *a.tape;
}
}  // namespace detail

// ---- primitive ops ------------------------------------------------------

template <typename S>
Var<S> matvec(Var<S> w, Var<S> x) {
  Tape<S>& t = detail::same_tape(w, x);
  if (w.value().cols() != x.value().rows() || x.value().cols() != 1)
    fail(ErrorKind::shape, "matvec: inner dimensions do not match");
  const int out = static_cast<int>(t.node_count());
  return t.make(w.value() * x.value(),
                [w = w.id, x = x.id, out](Tape<S>& tp) {
                  const MatX<S>& dy = tp.grad(out);
                  tp.accum_grad(w, dy * tp.value(x).transpose());
                  tp.accum_grad(x, tp.value(w).transpose() * dy);
                });
}

// w*x + b in one node
template <typename S>
Var<S> affine(Var<S> w, Var<S> x, Var<S> b) {
  Tape<S>& t = detail::same_tape(w, x);
  detail::same_tape(x, b);
  if (w.value().cols() != x.value().rows() || x.value().cols() != 1 ||
      b.value().rows() != w.value().rows())
    fail(ErrorKind::shape, "affine: dimensions do not match");
  const int out = static_cast<int>(t.node_count());
  return t.make(w.value() * x.value() + b.value(),
                [w = w.id, x = x.id, b = b.id, out](Tape<S>& tp) {
                  const MatX<S>& dy = tp.grad(out);
                  tp.accum_grad(w, dy * tp.value(x).transpose());
                  tp.accum_grad(x, tp.value(w).transpose() * dy);
                  tp.accum_grad(b, dy);
                });
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  Tape<S>& t = detail::same_tape(a, b);
  if (a.value().rows() != b.value().rows() ||
      a.value().cols() != b.value().cols())
    fail(ErrorKind::shape, "add: shapes do not match");
  const int out = static_cast<int>(t.node_count());
  return t.make(a.value() + b.value(), [a = a.id, b = b.id, out](Tape<S>& tp) {
    const MatX<S>& dy = tp.grad(out);
    tp.accum_grad(a, dy);
    tp.accum_grad(b, dy);
  });
}

// elementwise product
template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  Tape<S>& t = detail::same_tape(a, b);
  if (a.value().rows() != b.value().rows() ||
      a.value().cols() != b.value().cols())
    fail(ErrorKind::shape, "mul: shapes do not match");
  const int out = static_cast<int>(t.node_count());
  return t.make(a.value().cwiseProduct(b.value()),
                [a = a.id, b = b.id, out](Tape<S>& tp) {
                  const MatX<S>& dy = tp.grad(out);
                  tp.accum_grad(a, dy.cwiseProduct(tp.value(b)));
                  tp.accum_grad(b, dy.cwiseProduct(tp.value(a)));
                });
}

// x scaled by a 1x1 node
template <typename S>
Var<S> scale(Var<S> x, Var<S> s) {
  Tape<S>& t = detail::same_tape(x, s);
  if (s.value().size() != 1) fail(ErrorKind::shape, "scale: s is not scalar");
  const int out = static_cast<int>(t.node_count());
  return t.make(x.value() * s.value()(0, 0),
                [x = x.id, s = s.id, out](Tape<S>& tp) {
                  const MatX<S>& dy = tp.grad(out);
                  tp.accum_grad(x, dy * tp.value(s)(0, 0));
                  MatX<S> ds(1, 1);
                  ds(0, 0) = dy.cwiseProduct(tp.value(x)).sum();
                  tp.accum_grad(s, ds);
                });
}

// multiply by a compile-time constant (no gradient into the constant)
template <typename S>
Var<S> cmul(Var<S> x, S c) {
  Tape<S>& t = *x.tape;
  const int out = static_cast<int>(t.node_count());
  return t.make(x.value() * c, [x = x.id, c, out](Tape<S>& tp) {
    tp.accum_grad(x, tp.grad(out) * c);
  });
}

template <typename S>
Var<S> sigmoid(Var<S> x) {
  Tape<S>& t = *x.tape;
  MatX<S> y = x.value().unaryExpr(
      [](S v) { return S(1) / (S(1) + std::exp(-v)); });
  const int out = static_cast<int>(t.node_count());
  return t.make(std::move(y), [x = x.id, out](Tape<S>& tp) {
    const MatX<S>& yv = tp.value(out);
    tp.accum_grad(x, tp.grad(out).cwiseProduct(
                         yv.cwiseProduct((S(1) - yv.array()).matrix())));
  });
}

template <typename S>
Var<S> tanh(Var<S> x) {
  Tape<S>& t = *x.tape;
  MatX<S> y = x.value().unaryExpr([](S v) { return std::tanh(v); });
  const int out = static_cast<int>(t.node_count());
  return t.make(std::move(y), [x = x.id, out](Tape<S>& tp) {
    const MatX<S>& yv = tp.value(out);
    tp.accum_grad(
        x, tp.grad(out).cwiseProduct(
               (S(1) - yv.array().square()).matrix()));
  });
}

template <typename S>
Var<S> relu(Var<S> x) {
  Tape<S>& t = *x.tape;
  const int out = static_cast<int>(t.node_count());
  return t.make(x.value().cwiseMax(S(0)), [x = x.id, out](Tape<S>& tp) {
    const MatX<S>& xv = tp.value(x);
    MatX<S> m =
        (xv.array() > S(0)).template cast<S>().matrix();
    tp.accum_grad(x, tp.grad(out).cwiseProduct(m));
  });
}

template <typename S>
Var<S> concat(const std::vector<Var<S>>& parts) {
  if (parts.empty()) fail(ErrorKind::shape, "concat: no inputs");
  Tape<S>& t = *parts.front().tape;
  long total = 0;
  for (const auto& p : parts) {
    detail::same_tape(parts.front(), p);
    if (p.value().cols() != 1)
      fail(ErrorKind::shape, "concat: inputs must be column vectors");
    total += p.value().rows();
  }
  MatX<S> y(total, 1);
  long off = 0;
  std::vector<int> ids;
  std::vector<long> sizes;
  for (const auto& p : parts) {
    const long n = p.value().rows();
    y.block(off, 0, n, 1) = p.value();
    ids.push_back(p.id);
    sizes.push_back(n);
    off += n;
  }
  const int out = static_cast<int>(t.node_count());
  return t.make(std::move(y),
                [ids = std::move(ids), sizes = std::move(sizes), out](
                    Tape<S>& tp) {
                  const MatX<S>& dy = tp.grad(out);
                  long off2 = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    tp.accum_grad(ids[k], dy.block(off2, 0, sizes[k], 1));
                    off2 += sizes[k];
                  }
                });
}

// rows [off, off+len) of a column vector
template <typename S>
Var<S> slice(Var<S> x, long off, long len) {
  Tape<S>& t = *x.tape;
  if (x.value().cols() != 1 || off < 0 || off + len > x.value().rows())
    fail(ErrorKind::shape, "slice: range out of bounds");
  const int out = static_cast<int>(t.node_count());
  return t.make(x.value().block(off, 0, len, 1),
                [x = x.id, off, len, out](Tape<S>& tp) {
                  const MatX<S>& xv = tp.value(x);
                  MatX<S> dx = MatX<S>::Zero(xv.rows(), 1);
                  dx.block(off, 0, len, 1) = tp.grad(out);
                  tp.accum_grad(x, dx);
                });
}

// column j of a matrix node (embedding lookup)
template <typename S>
Var<S> col(Var<S> m, long j) {
  Tape<S>& t = *m.tape;
  if (j < 0 || j >= m.value().cols())
    fail(ErrorKind::shape, "col: index out of bounds");
  const int out = static_cast<int>(t.node_count());
  return t.make(m.value().col(j), [m = m.id, j, out](Tape<S>& tp) {
    const MatX<S>& mv = tp.value(m);
    MatX<S> dm = MatX<S>::Zero(mv.rows(), mv.cols());
    dm.col(j) = tp.grad(out);
    tp.accum_grad(m, dm);
  });
}

// numerically stable softmax over a column vector
template <typename S>
Var<S> softmax(Var<S> x) {
  Tape<S>& t = *x.tape;
  if (x.value().cols() != 1)
    fail(ErrorKind::shape, "softmax: input must be a column vector");
  VecX<S> v = x.value().col(0);
  const S m = v.maxCoeff();
  VecX<S> e = (v.array() - m).exp();
  e /= e.sum();
  const int out = static_cast<int>(t.node_count());
  return t.make(MatX<S>(std::move(e)), [x = x.id, out](Tape<S>& tp) {
    const MatX<S>& y = tp.value(out);
    const MatX<S>& dy = tp.grad(out);
    const S dot = y.cwiseProduct(dy).sum();
    tp.accum_grad(x, y.cwiseProduct((dy.array() - dot).matrix()));
  });
}

template <typename S>
Var<S> elem_log(Var<S> x) {
  Tape<S>& t = *x.tape;
  const int out = static_cast<int>(t.node_count());
  return t.make(x.value().unaryExpr([](S v) { return std::log(v); }),
                [x = x.id, out](Tape<S>& tp) {
                  tp.accum_grad(
                      x, tp.grad(out).cwiseQuotient(tp.value(x)));
                });
}

// single element as a 1x1 node
template <typename S>
Var<S> pick(Var<S> x, long i) {
  Tape<S>& t = *x.tape;
  if (x.value().cols() != 1 || i < 0 || i >= x.value().rows())
    fail(ErrorKind::shape, "pick: index out of bounds");
  MatX<S> y(1, 1);
  y(0, 0) = x.value()(i, 0);
  const int out = static_cast<int>(t.node_count());
  return t.make(std::move(y), [x = x.id, i, out](Tape<S>& tp) {
    const MatX<S>& xv = tp.value(x);
    MatX<S> dx = MatX<S>::Zero(xv.rows(), 1);
    dx(i, 0) = tp.grad(out)(0, 0);
    tp.accum_grad(x, dx);
  });
}

template <typename S>
Var<S> sum(Var<S> x) {
  Tape<S>& t = *x.tape;
  MatX<S> y(1, 1);
  y(0, 0) = x.value().sum();
  const int out = static_cast<int>(t.node_count());
  return t.make(std::move(y), [x = x.id, out](Tape<S>& tp) {
    const MatX<S>& xv = tp.value(x);
    tp.accum_grad(x, MatX<S>::Constant(xv.rows(), xv.cols(),
                                       tp.grad(out)(0, 0)));
  });
}

// Inverted dropout; identity in eval mode. Masks come from the tape's
// dropout stream so a fixed seed reproduces the exact graph.
template <typename S>
Var<S> dropout(Var<S> x, double p) {
  Tape<S>& t = *x.tape;
  if (t.mode() == Mode::eval || p <= 0.0) return x;
  if (p >= 1.0) fail(ErrorKind::config, "dropout: p must be < 1");
  MatX<S> mask(x.value().rows(), x.value().cols());
  const S keep_scale = S(1.0 / (1.0 - p));
  Rng& rng = t.dropout_rng();
  for (long j = 0; j < mask.cols(); ++j)
    for (long i = 0; i < mask.rows(); ++i)
      mask(i, j) = rng.uniform() < p ? S(0) : keep_scale;
  const int out = static_cast<int>(t.node_count());
  MatX<S> y = x.value().cwiseProduct(mask);
  return t.make(std::move(y),
                [x = x.id, mask = std::move(mask), out](Tape<S>& tp) {
                  tp.accum_grad(x, tp.grad(out).cwiseProduct(mask));
                });
}

// concat(a_0 * s_0, ..., a_{k-1} * s_{k-1}) in one node; the attention
// scaling of Eq-style per-stream weights.
template <typename S>
Var<S> scale_concat(const std::vector<Var<S>>& streams, Var<S> a) {
  if (streams.empty()) fail(ErrorKind::shape, "scale_concat: no streams");
  Tape<S>& t = detail::same_tape(streams.front(), a);
  const long k = static_cast<long>(streams.size());
  if (a.value().rows() != k || a.value().cols() != 1)
    fail(ErrorKind::shape, "scale_concat: weight count != stream count");
  const long d = streams.front().value().rows();
  std::vector<int> ids;
  for (const auto& s : streams) {
    detail::same_tape(streams.front(), s);
    if (s.value().rows() != d || s.value().cols() != 1)
      fail(ErrorKind::shape, "scale_concat: stream dimensions differ");
    ids.push_back(s.id);
  }
  MatX<S> y(k * d, 1);
  for (long i = 0; i < k; ++i)
    y.block(i * d, 0, d, 1) = streams[i].value() * a.value()(i, 0);
  const int out = static_cast<int>(t.node_count());
  return t.make(std::move(y),
                [ids = std::move(ids), a = a.id, d, out](Tape<S>& tp) {
                  const MatX<S>& dy = tp.grad(out);
                  const MatX<S>& av = tp.value(a);
                  MatX<S> da = MatX<S>::Zero(av.rows(), 1);
                  for (std::size_t i = 0; i < ids.size(); ++i) {
                    const auto dyi = dy.block(long(i) * d, 0, d, 1);
                    tp.accum_grad(ids[i], dyi * av(long(i), 0));
                    da(long(i), 0) =
                        dyi.cwiseProduct(tp.value(ids[i])).sum();
                  }
                  tp.accum_grad(a, da);
                });
}

}  // namespace viref
