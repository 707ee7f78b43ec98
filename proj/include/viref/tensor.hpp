#pragma once

#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "viref/rng.hpp"
#include "viref/types.hpp"

namespace viref {

// Dense value with an explicit shape (rank 1 or 2). Rank-1 tensors are
// stored as column vectors; rank-2 as rows x cols.
template <typename S>
struct Tensor {
  std::vector<int> shape;
  MatX<S> data;

  Tensor() = default;

  static Tensor vector(VecX<S> v) {
    Tensor t;
    t.shape = {static_cast<int>(v.size())};
    t.data = std::move(v);
    return t;
  }

  static Tensor matrix(MatX<S> m) {
    Tensor t;
    t.shape = {static_cast<int>(m.rows()), static_cast<int>(m.cols())};
    t.data = std::move(m);
    return t;
  }

  int rank() const { return static_cast<int>(shape.size()); }

  long element_count() const {
    return std::accumulate(shape.begin(), shape.end(), 1L,
                           [](long a, int b) { return a * b; });
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const { return data.allFinite(); }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> t;
    t.shape = shape;
    t.data = data.template cast<T>();
    return t;
  }
};

// Named trainable tensors for one model variant.
template <typename S>
class ParameterStore {
 public:
  struct Entry {
    Tensor<S> value;
    bool trainable = true;
  };

  bool contains(const std::string& name) const {
    return entries_.count(name) != 0;
  }

  void add(const std::string& name, Tensor<S> value, bool trainable = true) {
    if (contains(name))
      fail(ErrorKind::contract, "duplicate parameter name: " + name);
    entries_[name] = Entry{std::move(value), trainable};
  }

  Tensor<S>& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
      fail(ErrorKind::contract, "unknown parameter: " + name);
    return it->second.value;
  }

  const Tensor<S>& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      fail(ErrorKind::contract, "unknown parameter: " + name);
    return it->second.value;
  }

  bool trainable(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      fail(ErrorKind::contract, "unknown parameter: " + name);
    return it->second.trainable;
  }

  std::size_t size() const { return entries_.size(); }

  long element_count() const {
    long n = 0;
    for (const auto& [k, e] : entries_) n += e.value.element_count();
    return n;
  }

  // sorted by name (std::map), which fixes checkpoint byte layout
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  template <typename T>
  ParameterStore<T> cast() const {
    ParameterStore<T> out;
    for (const auto& [k, e] : entries_)
      out.add(k, e.value.template cast<T>(), e.trainable);
    return out;
  }

 private:
  std::map<std::string, Entry> entries_;
};

template <typename S>
using GradMap = std::map<std::string, Tensor<S>>;

// uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], seeded per parameter name
template <typename S>
Tensor<S> init_weight(int rows, int cols, uint64_t seed,
                      const std::string& name) {
  Rng rng(derive_seed(seed, name));
  double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  MatX<S> w(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i)
      w(i, j) = static_cast<S>(rng.uniform(-bound, bound));
  return Tensor<S>::matrix(std::move(w));
}

template <typename S>
Tensor<S> init_zeros_vec(int n) {
  return Tensor<S>::vector(VecX<S>::Zero(n));
}

}  // namespace viref
