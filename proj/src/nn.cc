#include "sda/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "sda/util.hpp"

namespace sda::nn {

Tensor& ParamStore::add(const std::string& name, long rows, long cols) {
  if (index_.count(name)) throw std::logic_error("duplicate tensor: " + name);
  Tensor t;
  t.name = name;
  t.value = Mat::Zero(rows, cols);
  t.m = Mat::Zero(rows, cols);
  t.v = Mat::Zero(rows, cols);
  index_[name] = tensors_.size();
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::logic_error("unknown tensor: " + name);
  return tensors_[it->second];
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::logic_error("unknown tensor: " + name);
  return tensors_[it->second];
}

size_t ParamStore::parameter_count() const {
  size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<size_t>(t.value.size());
  return n;
}

namespace {
constexpr char kMagic[8] = {'S', 'D', 'A', 'T', '0', '0', '0', '1'};

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
}  // namespace

void ParamStore::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, static_cast<uint32_t>(tensors_.size()));
  for (const auto& t : tensors_) {
    write_u32(out, static_cast<uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u64(out, static_cast<uint64_t>(t.value.rows()));
    write_u64(out, static_cast<uint64_t>(t.value.cols()));
    // row-major for readability by external tools
    for (long i = 0; i < t.value.rows(); ++i) {
      for (long j = 0; j < t.value.cols(); ++j) {
        double d = t.value(i, j);
        out.write(reinterpret_cast<const char*>(&d), sizeof(d));
      }
    }
  }
}

void ParamStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("bad checkpoint magic: " + path.string());
  }
  uint32_t count = read_u32(in);
  for (uint32_t k = 0; k < count; ++k) {
    uint32_t nlen = read_u32(in);
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    uint64_t rows = read_u64(in);
    uint64_t cols = read_u64(in);
    if (!in) throw DataError("truncated checkpoint: " + path.string());
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw DataError("checkpoint tensor unknown to this module: " + name);
    }
    Tensor& t = tensors_[it->second];
    if (t.value.rows() != static_cast<long>(rows) ||
        t.value.cols() != static_cast<long>(cols)) {
      throw DataError("checkpoint shape mismatch for " + name);
    }
    for (long i = 0; i < t.value.rows(); ++i) {
      for (long j = 0; j < t.value.cols(); ++j) {
        double d;
        in.read(reinterpret_cast<char*>(&d), sizeof(d));
        t.value(i, j) = d;
      }
    }
    if (!in) throw DataError("truncated checkpoint: " + path.string());
  }
}

void xavier_init(Mat& m, std::mt19937_64& rng) {
  double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-a, a);
  for (long j = 0; j < m.cols(); ++j) {
    for (long i = 0; i < m.rows(); ++i) {
      m(i, j) = dist(rng);
    }
  }
}

void xavier_init(ParamStore& store, std::mt19937_64& rng) {
  for (auto& t : store.tensors()) {
    if (t.value.cols() == 1) {
      t.value.setZero();  // bias
    } else {
      xavier_init(t.value, rng);
    }
  }
}

Bound::Bound(ad::Tape& tape, ParamStore& store) {
  items_.reserve(store.tensors().size());
  for (auto& t : store.tensors()) {
    index_[t.name] = items_.size();
    items_.emplace_back(&t, tape.leaf(t.value));
  }
}

ad::Var Bound::operator[](const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::logic_error("unbound tensor: " + name);
  return items_[it->second].second;
}

void Adam::step(const std::vector<const Bound*>& bound_stores) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const Bound* b : bound_stores) {
    for (const auto& [tensor, var] : b->items()) {
      if (var.tape->has_grad(var.idx)) {
        const Mat& g = var.grad();
        tensor->m = beta1_ * tensor->m + (1.0 - beta1_) * g;
        tensor->v = beta2_ * tensor->v + (1.0 - beta2_) * g.cwiseProduct(g);
      } else {
        tensor->m *= beta1_;
        tensor->v *= beta2_;
      }
      Mat mhat = tensor->m / bc1;
      Mat vhat = tensor->v / bc2;
      tensor->value.array() -=
          lr_ * (mhat.array() / (vhat.array().sqrt() + eps_) +
                 wd_ * tensor->value.array());
    }
  }
}

void GruCell::init(ParamStore& store, long hidden, long input) const {
  store.add(prefix + ".wz", hidden, input);
  store.add(prefix + ".uz", hidden, hidden);
  store.add(prefix + ".bz", hidden, 1);
  store.add(prefix + ".wr", hidden, input);
  store.add(prefix + ".ur", hidden, hidden);
  store.add(prefix + ".br", hidden, 1);
  store.add(prefix + ".wn", hidden, input);
  store.add(prefix + ".un", hidden, hidden);
  store.add(prefix + ".bn", hidden, 1);
}

ad::GruParams GruCell::bind(const Bound& b) const {
  return ad::GruParams{b[prefix + ".wz"], b[prefix + ".uz"], b[prefix + ".bz"],
                       b[prefix + ".wr"], b[prefix + ".ur"], b[prefix + ".br"],
                       b[prefix + ".wn"], b[prefix + ".un"], b[prefix + ".bn"]};
}

}  // namespace sda::nn
