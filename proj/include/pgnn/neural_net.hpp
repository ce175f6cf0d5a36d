#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pgnn/error.hpp"

namespace pgnn {

/// Single-output feedforward network with tanh hidden layers and a linear
/// output layer:  f(x) = W_{L+1} tanh(... tanh(W_1 x + B_1) ...) + B_{L+1}.
///
/// A default-constructed network has no layers and evaluates to zero. The flat
/// parameter vector stacks col(W_l) followed by B_l for l = 1..L+1, with
/// col() stacking columns.
template <typename Scalar>
class NeuralNet {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using Index = Eigen::Index;

  struct Layer {
    Matrix weight;
    Vector bias;
  };

  NeuralNet() = default;

  explicit NeuralNet(std::vector<Layer> layers) : layers_(std::move(layers)) { check(); }

  /// Network with the given hidden widths and every parameter zero.
  static NeuralNet zeros(Index inputs, const std::vector<Index>& hidden) {
    std::vector<Layer> layers;
    Index prev = inputs;
    for (Index width : hidden) {
      layers.push_back({Matrix::Zero(width, prev), Vector::Zero(width)});
      prev = width;
    }
    layers.push_back({Matrix::Zero(1, prev), Vector::Zero(1)});
    return NeuralNet(std::move(layers));
  }

  bool empty() const { return layers_.empty(); }
  Index input_size() const { return empty() ? 0 : layers_.front().weight.cols(); }
  Index hidden_layers() const { return empty() ? 0 : static_cast<Index>(layers_.size()) - 1; }
  /// Width of the vector fed to the output layer.
  Index last_hidden_size() const { return empty() ? 0 : layers_.back().weight.cols(); }

  const std::vector<Layer>& layers() const { return layers_; }
  Layer& layer(std::size_t i) { return layers_.at(i); }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  Layer& output_layer() { return layers_.back(); }
  const Layer& output_layer() const { return layers_.back(); }

  Index param_count() const {
    Index n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Offset of the output layer inside the flat vector.
  Index output_layer_offset() const {
    return empty() ? 0 : param_count() - layers_.back().weight.size() - 1;
  }

  Vector flatten() const {
    Vector theta(param_count());
    Index pos = 0;
    for (const auto& l : layers_) {
      theta.segment(pos, l.weight.size()) = l.weight.reshaped();
      pos += l.weight.size();
      theta.segment(pos, l.bias.size()) = l.bias;
      pos += l.bias.size();
    }
    return theta;
  }

  void unflatten(const Eigen::Ref<const Vector>& theta) {
    if (theta.size() != param_count()) {
      throw InvalidArgument("NeuralNet::unflatten: expected " + std::to_string(param_count()) +
                            " parameters, got " + std::to_string(theta.size()));
    }
    Index pos = 0;
    for (auto& l : layers_) {
      l.weight.reshaped() = theta.segment(pos, l.weight.size());
      pos += l.weight.size();
      l.bias = theta.segment(pos, l.bias.size());
      pos += l.bias.size();
    }
  }

  Scalar eval(const Eigen::Ref<const Vector>& x) const {
    if (empty()) return Scalar(0);
    check_input(x.size());
    Vector a = x;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      a = (layers_[l].weight * a + layers_[l].bias).array().tanh().matrix();
    }
    return (layers_.back().weight * a)(0) + layers_.back().bias(0);
  }

  /// Evaluates one sample per column of `x`.
  RowVector eval_batch(const Eigen::Ref<const Matrix>& x) const {
    if (empty()) return RowVector::Zero(x.cols());
    check_input(x.rows());
    Matrix a = x;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      a = ((layers_[l].weight * a).colwise() + layers_[l].bias).array().tanh().matrix();
    }
    return (layers_.back().weight * a).array() + layers_.back().bias(0);
  }

  /// Input of the output layer for each column of `x` (x itself when L = 0).
  Matrix last_hidden_batch(const Eigen::Ref<const Matrix>& x) const {
    if (empty()) return Matrix(0, x.cols());
    check_input(x.rows());
    Matrix a = x;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      a = ((layers_[l].weight * a).colwise() + layers_[l].bias).array().tanh().matrix();
    }
    return a;
  }

  Vector jacobian_params(const Eigen::Ref<const Vector>& x) const {
    return jacobian_params_batch(x).transpose();
  }

  /// Derivative of each sample's output w.r.t. the flat parameters, one row per sample.
  Matrix jacobian_params_batch(const Eigen::Ref<const Matrix>& x) const {
    const Index n = x.cols();
    Matrix jac(n, param_count());
    if (empty()) return jac;
    check_input(x.rows());

    std::vector<Matrix> acts;  // acts[l] is the input of layer l
    acts.reserve(layers_.size());
    acts.push_back(x);
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      acts.push_back(
          ((layers_[l].weight * acts.back()).colwise() + layers_[l].bias).array().tanh().matrix());
    }

    std::vector<Index> offsets(layers_.size());
    Index pos = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      offsets[l] = pos;
      pos += layers_[l].weight.size() + layers_[l].bias.size();
    }

    Matrix delta = Matrix::Ones(1, n);  // d output / d pre-activation of the current layer
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const Layer& layer = layers_[li];
      const Matrix& input = acts[li];
      const Index rows = layer.weight.rows();
      for (Index j = 0; j < layer.weight.cols(); ++j) {
        jac.middleCols(offsets[li] + j * rows, rows) =
            (delta.array().rowwise() * input.row(j).array()).transpose();
      }
      jac.middleCols(offsets[li] + layer.weight.size(), rows) = delta.transpose();
      if (li > 0) {
        delta = (layer.weight.transpose() * delta).array() * (Scalar(1) - input.array().square());
      }
    }
    return jac;
  }

  /// Row vector df/dx at x.
  RowVector jacobian_input(const Eigen::Ref<const Vector>& x) const {
    if (empty()) return RowVector::Zero(x.size());
    check_input(x.size());
    std::vector<Vector> acts;
    acts.push_back(x);
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      acts.push_back((layers_[l].weight * acts.back() + layers_[l].bias).array().tanh().matrix());
    }
    RowVector grad = layers_.back().weight;
    for (std::size_t li = layers_.size() - 1; li-- > 0;) {
      const Vector& out = acts[li + 1];
      grad = (grad.array() * (Scalar(1) - out.array().square()).transpose()).matrix() *
             layers_[li].weight;
    }
    return grad;
  }

  /// Elementwise bound Pi |W_l| on |df/dx| (valid because |tanh'| <= 1).
  RowVector lipschitz_bound() const {
    if (empty()) return RowVector();
    Matrix k = layers_.back().weight.cwiseAbs();
    for (std::size_t li = layers_.size() - 1; li-- > 0;) k = k * layers_[li].weight.cwiseAbs();
    return k;
  }

  template <typename Other>
  NeuralNet<Other> cast() const {
    std::vector<typename NeuralNet<Other>::Layer> out;
    for (const auto& l : layers_) {
      out.push_back({l.weight.template cast<Other>(), l.bias.template cast<Other>()});
    }
    return NeuralNet<Other>(std::move(out));
  }

 private:
  void check() const {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      if (layer.bias.size() != layer.weight.rows()) {
        throw InvalidArgument("NeuralNet: layer " + std::to_string(l + 1) + " bias length " +
                              std::to_string(layer.bias.size()) + " does not match " +
                              std::to_string(layer.weight.rows()) + " rows");
      }
      if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
        throw InvalidArgument("NeuralNet: layer " + std::to_string(l + 1) +
                              " input width does not match the previous layer");
      }
    }
    if (!layers_.empty() && layers_.back().weight.rows() != 1) {
      throw InvalidArgument("NeuralNet: output layer must have a single row");
    }
  }

  void check_input(Index width) const {
    if (width != input_size()) {
      throw InvalidArgument("NeuralNet: input width " + std::to_string(width) + ", expected " +
                            std::to_string(input_size()));
    }
  }

  std::vector<Layer> layers_;
};

}  // namespace pgnn
