#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <string>
#include <vector>

namespace flowseg {

using Shape = std::vector<Eigen::Index>;

Eigen::Index shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of doubles. One flat Eigen array carries the
// storage so elementwise work stays inside Eigen expressions; shape is
// plain metadata on top.
struct Tensor {
  Shape shape;
  Eigen::ArrayXd data;

  Tensor() = default;
  Tensor(Shape s, Eigen::ArrayXd d);

  static Tensor zeros(const Shape& s);
  static Tensor full(const Shape& s, double value);
  static Tensor scalar(double value);
  static Tensor from_values(const Shape& s, std::initializer_list<double> values);

  Eigen::Index numel() const { return data.size(); }
  Eigen::Index dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  double& operator()(Eigen::Index i) { return data[i]; }
  double operator()(Eigen::Index i) const { return data[i]; }
  double& operator()(Eigen::Index i, Eigen::Index j);
  double operator()(Eigen::Index i, Eigen::Index j) const;
  double& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k);
  double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const;
  double& operator()(Eigen::Index b, Eigen::Index c, Eigen::Index y, Eigen::Index x);
  double operator()(Eigen::Index b, Eigen::Index c, Eigen::Index y, Eigen::Index x) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const { return data.isFinite().all(); }
  bool is_binary() const;

  Tensor reshaped(Shape new_shape) const;
};

}  // namespace flowseg
