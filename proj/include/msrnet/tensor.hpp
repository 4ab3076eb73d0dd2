#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace msrnet {

/// Throws std::invalid_argument when a contract precondition fails.
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

/// Dense row-major tensor of doubles. Feature maps use NCHW order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(numel_of(shape_), 0.0);
  }
  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == numel_of(shape_), "tensor: data size does not match shape");
  }

  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static std::size_t numel_of(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      require(d >= 0, "tensor: negative dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // NCHW accessors.
  double& at4(int b, int c, int y, int x) {
    return data_[idx4(b, c, y, x)];
  }
  double at4(int b, int c, int y, int x) const {
    return data_[idx4(b, c, y, x)];
  }
  std::size_t idx4(int b, int c, int y, int x) const {
    return ((static_cast<std::size_t>(b) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }

  double& at2(int y, int x) { return data_[static_cast<std::size_t>(y) * shape_[1] + x]; }
  double at2(int y, int x) const { return data_[static_cast<std::size_t>(y) * shape_[1] + x]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor reshaped(std::vector<int> new_shape) const {
    require(numel_of(new_shape) == numel(), "reshape: element count mismatch");
    return Tensor(std::move(new_shape), data_);
  }

  bool all_finite() const;
  double min() const;
  double max() const;
  double sum() const;
  double mean() const { return empty() ? 0.0 : sum() / static_cast<double>(numel()); }

  static std::string shape_str(const std::vector<int>& s);
  std::string shape_str() const { return shape_str(shape_); }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace msrnet
