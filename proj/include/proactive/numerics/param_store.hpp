#ifndef PROACTIVE_NUMERICS_PARAM_STORE_HPP
#define PROACTIVE_NUMERICS_PARAM_STORE_HPP

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "proactive/error.hpp"
#include "proactive/numerics/tensor.hpp"

namespace proactive::numerics {

class ParamStore;

/// Gradient buffers aligned index-for-index with a ParamStore.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParamStore& store);

  std::size_t size() const noexcept { return grads_.size(); }
  Tensor& operator[](std::size_t i) { return grads_[i]; }
  const Tensor& operator[](std::size_t i) const { return grads_[i]; }

  void zero() {
    for (auto& g : grads_) g.fill(0.0);
  }

  Gradients& operator+=(const Gradients& other) {
    if (other.size() != size()) {
      throw Error(ErrorCode::kDimension, "gradients +=: store size mismatch");
    }
    for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
    return *this;
  }

  void scale(double factor) {
    for (auto& g : grads_) {
      for (double& v : g.values()) v *= factor;
    }
  }

 private:
  std::vector<Tensor> grads_;
};

/// Named trainable tensors, iterated in name order. Indices are stable once
/// the store is fully populated; the tape refers to parameters by index.
class ParamStore {
 public:
  static constexpr int kFormatVersion = 1;

  std::size_t add(const std::string& name, Tensor value) {
    if (index_.count(name)) {
      throw Error(ErrorCode::kContract, "param store: duplicate parameter '" + name + "'");
    }
    auto pos = std::lower_bound(names_.begin(), names_.end(), name);
    const auto at = static_cast<std::size_t>(pos - names_.begin());
    names_.insert(pos, name);
    grads_.insert(grads_.begin() + static_cast<std::ptrdiff_t>(at), Tensor::zeros_like(value));
    values_.insert(values_.begin() + static_cast<std::ptrdiff_t>(at), std::move(value));
    index_.clear();
    for (std::size_t i = 0; i < names_.size(); ++i) index_[names_[i]] = i;
    return at;
  }

  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  bool contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

  std::size_t index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) {
      throw Error(ErrorCode::kContract, "param store: unknown parameter '" + std::string(name) + "'");
    }
    return it->second;
  }

  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }
  Tensor& value(std::string_view name) { return values_[index_of(name)]; }
  const Tensor& value(std::string_view name) const { return values_[index_of(name)]; }

  Tensor& grad(std::size_t i) { return grads_[i]; }
  const Tensor& grad(std::size_t i) const { return grads_[i]; }
  const Tensor& grad(std::string_view name) const { return grads_[index_of(name)]; }

  void zero_grad() {
    for (auto& g : grads_) g.fill(0.0);
  }

  void accumulate(const Gradients& grads) {
    if (grads.size() != size()) {
      throw Error(ErrorCode::kDimension, "param store: gradient buffer size mismatch");
    }
    for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += grads[i];
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  double squared_norm() const {
    double total = 0.0;
    for (const auto& v : values_) {
      for (double x : v.values()) total += x * x;
    }
    return total;
  }

  /// Values only; gradients are transient and never serialized.
  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

  nlohmann::json to_json() const {
    nlohmann::json params = nlohmann::json::array();
    for (std::size_t i = 0; i < names_.size(); ++i) {
      params.push_back({{"name", names_[i]},
                        {"shape", values_[i].shape()},
                        {"values", values_[i].data()}});
    }
    return {{"format", "proactive.param_store"}, {"version", kFormatVersion}, {"params", params}};
  }

  static ParamStore from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", "") != "proactive.param_store") {
      throw Error(ErrorCode::kParse, "param store: not a proactive.param_store document");
    }
    if (j.value("version", 0) != kFormatVersion) {
      throw Error(ErrorCode::kParse, "param store: unsupported version " +
                                         std::to_string(j.value("version", 0)));
    }
    ParamStore store;
    for (const auto& p : j.at("params")) {
      store.add(p.at("name").get<std::string>(),
                Tensor(p.at("shape").get<Shape>(), p.at("values").get<std::vector<double>>()));
    }
    return store;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::map<std::string, std::size_t> index_;
};

inline Gradients::Gradients(const ParamStore& store) {
  grads_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) grads_.push_back(Tensor::zeros_like(store.value(i)));
}

}  // namespace proactive::numerics

#endif  // PROACTIVE_NUMERICS_PARAM_STORE_HPP
