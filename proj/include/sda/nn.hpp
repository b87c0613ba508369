#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sda/autodiff.hpp"

namespace sda::nn {

using Mat = Eigen::MatrixXd;

struct Tensor {
  std::string name;
  Mat value;
  // Adam state
  Mat m;
  Mat v;
};

// Ordered, named parameter tensors belonging to one module.
class ParamStore {
 public:
  Tensor& add(const std::string& name, long rows, long cols);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  size_t parameter_count() const;

  // Named-array container: "SDAT0001", u32 count, then per tensor
  // (u32 name_len, name, u64 rows, u64 cols, f64 row-major data).
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  std::vector<Tensor> tensors_;
  std::map<std::string, size_t> index_;
};

// Uniform Xavier-style init: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
void xavier_init(Mat& m, std::mt19937_64& rng);
void xavier_init(ParamStore& store, std::mt19937_64& rng);  // matrices only; vectors zeroed

// Leaf bindings of a ParamStore on a tape for one forward/backward pass.
class Bound {
 public:
  Bound() = default;
  Bound(ad::Tape& tape, ParamStore& store);

  ad::Var operator[](const std::string& name) const;
  const std::vector<std::pair<Tensor*, ad::Var>>& items() const { return items_; }

 private:
  std::vector<std::pair<Tensor*, ad::Var>> items_;
  std::map<std::string, size_t> index_;
};

// First-order adaptive-moment optimizer over one family of ParamStores.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double weight_decay = 0.0,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies grads harvested from the bound leaves. Tensors with no grad
  // contribution are stepped with zero gradient (moments still decay).
  void step(const std::vector<const Bound*>& bound_stores);

  long t() const { return t_; }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  long t_ = 0;
};

struct GruCell {
  std::string prefix;
  void init(ParamStore& store, long hidden, long input) const;
  ad::GruParams bind(const Bound& b) const;
};

}  // namespace sda::nn
