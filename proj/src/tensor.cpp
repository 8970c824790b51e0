#include "flowseg/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace flowseg {

Eigen::Index shape_numel(const Shape& shape) {
  Eigen::Index n = 1;
  for (Eigen::Index e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape s, Eigen::ArrayXd d) : shape(std::move(s)), data(std::move(d)) {
  for (Eigen::Index e : shape) {
    if (e <= 0) throw std::invalid_argument("Tensor: non-positive extent in shape " + shape_str(shape));
  }
  if (data.size() != shape_numel(shape)) {
    throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
}

Tensor Tensor::zeros(const Shape& s) {
  return Tensor(s, Eigen::ArrayXd::Zero(shape_numel(s)));
}

Tensor Tensor::full(const Shape& s, double value) {
  return Tensor(s, Eigen::ArrayXd::Constant(shape_numel(s), value));
}

Tensor Tensor::scalar(double value) {
  return Tensor(Shape{}, Eigen::ArrayXd::Constant(1, value));
}

Tensor Tensor::from_values(const Shape& s, std::initializer_list<double> values) {
  if (static_cast<Eigen::Index>(values.size()) != shape_numel(s)) {
    throw std::invalid_argument("Tensor::from_values: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(s));
  }
  Eigen::ArrayXd d(values.size());
  Eigen::Index i = 0;
  for (double v : values) d[i++] = v;
  return Tensor(s, std::move(d));
}

double& Tensor::operator()(Eigen::Index i, Eigen::Index j) {
  return data[i * shape[1] + j];
}
double Tensor::operator()(Eigen::Index i, Eigen::Index j) const {
  return data[i * shape[1] + j];
}
double& Tensor::operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
  return data[(i * shape[1] + j) * shape[2] + k];
}
double Tensor::operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
  return data[(i * shape[1] + j) * shape[2] + k];
}
double& Tensor::operator()(Eigen::Index b, Eigen::Index c, Eigen::Index y, Eigen::Index x) {
  return data[((b * shape[1] + c) * shape[2] + y) * shape[3] + x];
}
double Tensor::operator()(Eigen::Index b, Eigen::Index c, Eigen::Index y, Eigen::Index x) const {
  return data[((b * shape[1] + c) * shape[2] + y) * shape[3] + x];
}

bool Tensor::is_binary() const {
  return ((data == 0.0) || (data == 1.0)).all();
}

Tensor Tensor::reshaped(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(shape) + " as " +
                                shape_str(new_shape));
  }
  return Tensor(std::move(new_shape), data);
}

}  // namespace flowseg
