#pragma once

#include <string>
#include <utility>
#include <vector>

#include "viref/tape.hpp"

namespace viref {

// Multi-layer LSTM. Gate packing in the 4H preactivation is [i, f, g, o]:
//   i = sigmoid, f = sigmoid, g = tanh (candidate), o = sigmoid
//   c' = f.c + i.g ; h' = o.tanh(c')
// Layer l > 0 consumes the previous layer's hidden state; dropout is applied
// to every layer output except the last, train mode only.
struct LstmStack {
  int num_layers = 1;
  int input_dim = 0;
  int hidden_dim = 0;
  std::string prefix;          // parameter names: {prefix}.l{i}.{Wx,Wh,b}
  double dropout_p = 0.0;
  bool trainable_init = false; // {prefix}.h0.l{i}, {prefix}.c0.l{i}

  std::string wx(int layer) const {
    return prefix + ".l" + std::to_string(layer) + ".Wx";
  }
  std::string wh(int layer) const {
    return prefix + ".l" + std::to_string(layer) + ".Wh";
  }
  std::string bias(int layer) const {
    return prefix + ".l" + std::to_string(layer) + ".b";
  }
  std::string h0(int layer) const {
    return prefix + ".h0.l" + std::to_string(layer);
  }
  std::string c0(int layer) const {
    return prefix + ".c0.l" + std::to_string(layer);
  }
};

template <typename S>
struct LstmStateVars {
  std::vector<Var<S>> h;
  std::vector<Var<S>> c;
  int layers() const { return static_cast<int>(h.size()); }
};

template <typename S>
void add_lstm_params(ParameterStore<S>& store, const LstmStack& stack,
                     uint64_t seed) {
  for (int l = 0; l < stack.num_layers; ++l) {
    const int in = l == 0 ? stack.input_dim : stack.hidden_dim;
    store.add(stack.wx(l), init_weight<S>(4 * stack.hidden_dim, in, seed,
                                          stack.wx(l)));
    store.add(stack.wh(l), init_weight<S>(4 * stack.hidden_dim,
                                          stack.hidden_dim, seed,
                                          stack.wh(l)));
    store.add(stack.bias(l), init_zeros_vec<S>(4 * stack.hidden_dim));
    if (stack.trainable_init) {
      store.add(stack.h0(l), init_zeros_vec<S>(stack.hidden_dim));
      store.add(stack.c0(l), init_zeros_vec<S>(stack.hidden_dim));
    }
  }
}

// Initial state: the trainable vectors when the stack has them, zeros
// otherwise.
template <typename S>
LstmStateVars<S> lstm_initial_state(Tape<S>& tape, ParameterStore<S>& store,
                                    const LstmStack& stack) {
  LstmStateVars<S> st;
  for (int l = 0; l < stack.num_layers; ++l) {
    if (stack.trainable_init) {
      st.h.push_back(tape.param(store, stack.h0(l)));
      st.c.push_back(tape.param(store, stack.c0(l)));
    } else {
      st.h.push_back(tape.constant(MatX<S>::Zero(stack.hidden_dim, 1)));
      st.c.push_back(tape.constant(MatX<S>::Zero(stack.hidden_dim, 1)));
    }
  }
  return st;
}

// One time step through all layers. Returns the new state; the top entry of
// state.h is the step output.
template <typename S>
LstmStateVars<S> lstm_step(Tape<S>& tape, ParameterStore<S>& store,
                           const LstmStack& stack, Var<S> input,
                           const LstmStateVars<S>& state) {
  if (state.layers() != stack.num_layers)
    fail(ErrorKind::shape, "lstm: state has " +
                               std::to_string(state.layers()) +
                               " layers, stack has " +
                               std::to_string(stack.num_layers));
  const int H = stack.hidden_dim;
  LstmStateVars<S> next;
  Var<S> x = input;
  for (int l = 0; l < stack.num_layers; ++l) {
    const int expect = l == 0 ? stack.input_dim : stack.hidden_dim;
    if (x.value().rows() != expect)
      fail(ErrorKind::shape,
           "lstm layer " + std::to_string(l) + ": input dim " +
               std::to_string(x.value().rows()) + ", expected " +
               std::to_string(expect));
    Var<S> wx = tape.param(store, stack.wx(l));
    Var<S> wh = tape.param(store, stack.wh(l));
    Var<S> b = tape.param(store, stack.bias(l));
    Var<S> pre = add(affine(wx, x, b), matvec(wh, state.h[l]));
    Var<S> gi = sigmoid(slice(pre, 0, H));
    Var<S> gf = sigmoid(slice(pre, H, H));
    Var<S> gg = tanh(slice(pre, 2 * H, H));
    Var<S> go = sigmoid(slice(pre, 3 * H, H));
    Var<S> c_new = add(mul(gf, state.c[l]), mul(gi, gg));
    Var<S> h_new = mul(go, tanh(c_new));
    next.c.push_back(c_new);
    next.h.push_back(h_new);
    x = h_new;
    if (l + 1 < stack.num_layers) x = dropout(x, stack.dropout_p);
  }
  return next;
}

// Full sequence; outputs are the top-layer hidden states per step.
template <typename S>
std::pair<std::vector<Var<S>>, LstmStateVars<S>> lstm_forward(
    Tape<S>& tape, ParameterStore<S>& store, const LstmStack& stack,
    const std::vector<Var<S>>& inputs, LstmStateVars<S> init_state) {
  std::vector<Var<S>> outputs;
  outputs.reserve(inputs.size());
  LstmStateVars<S> state = std::move(init_state);
  for (const auto& x : inputs) {
    state = lstm_step(tape, store, stack, x, state);
    outputs.push_back(state.h.back());
  }
  return {std::move(outputs), std::move(state)};
}

// Three fully connected layers, rectifiers between 1-2 and 2-3, linear
// output. Dropout sits after each rectifier, train mode only.
struct AffineStack {
  std::string prefix;  // parameter names: {prefix}.l{i}.{W,b}
  int input_dim = 0;
  std::vector<int> widths;  // exactly 3 output dims
  double dropout_p = 0.0;

  std::string w(int layer) const {
    return prefix + ".l" + std::to_string(layer) + ".W";
  }
  std::string bias(int layer) const {
    return prefix + ".l" + std::to_string(layer) + ".b";
  }

  void validate() const {
    if (widths.size() != 3)
      fail(ErrorKind::config, prefix + ": affine stack needs exactly 3 "
                                       "layer widths, got " +
                                  std::to_string(widths.size()));
    for (int w : widths)
      if (w <= 0) fail(ErrorKind::config, prefix + ": widths must be > 0");
  }
};

template <typename S>
void add_affine_params(ParameterStore<S>& store, const AffineStack& stack,
                       uint64_t seed) {
  stack.validate();
  int in = stack.input_dim;
  for (int l = 0; l < 3; ++l) {
    store.add(stack.w(l), init_weight<S>(stack.widths[l], in, seed,
                                         stack.w(l)));
    store.add(stack.bias(l), init_zeros_vec<S>(stack.widths[l]));
    in = stack.widths[l];
  }
}

template <typename S>
Var<S> affine_stack_forward(Tape<S>& tape, ParameterStore<S>& store,
                            const AffineStack& stack, Var<S> input) {
  stack.validate();
  if (input.value().rows() != stack.input_dim)
    fail(ErrorKind::shape, stack.prefix + ": input dim " +
                               std::to_string(input.value().rows()) +
                               ", expected " +
                               std::to_string(stack.input_dim));
  Var<S> x = input;
  for (int l = 0; l < 3; ++l) {
    x = affine(tape.param(store, stack.w(l)), x,
               tape.param(store, stack.bias(l)));
    if (l < 2) {
      x = relu(x);
      x = dropout(x, stack.dropout_p);
    }
  }
  return x;
}

// Mean of -log p(target) over mask-true steps. Mask-false steps contribute
// nothing to the value or the gradient.
template <typename S>
Var<S> cross_entropy(Tape<S>& tape, const std::vector<Var<S>>& distributions,
                     const std::vector<int>& targets,
                     const std::vector<bool>& mask) {
  if (distributions.size() != targets.size() ||
      distributions.size() != mask.size())
    fail(ErrorKind::shape, "cross_entropy: steps, targets, mask differ");
  long count = 0;
  Var<S> total;
  for (std::size_t j = 0; j < distributions.size(); ++j) {
    if (!mask[j]) continue;
    Var<S> lp = elem_log(pick(distributions[j], targets[j]));
    total = total.valid() ? add(total, lp) : lp;
    ++count;
  }
  if (count == 0)
    fail(ErrorKind::degenerate, "cross_entropy: mask has no true steps");
  return cmul(total, S(-1.0 / static_cast<double>(count)));
}

}  // namespace viref
