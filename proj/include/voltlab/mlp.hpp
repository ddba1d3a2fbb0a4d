#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "voltlab/rng.hpp"

namespace voltlab {

// Per-layer gradient tensors, same shapes as the network's parameters.
struct MlpGrad {
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;

  MlpGrad& operator+=(const MlpGrad& other);
  MlpGrad& operator*=(double s);
  Eigen::VectorXd flatten() const;
};

// Activations kept by a batched forward pass for the backward pass.
struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> hidden;  // tanh outputs of hidden layers
};

// Fully connected network: tanh on hidden layers, affine output layer.
// Batched calls take one sample per column.
class Mlp {
 public:
  Mlp() = default;
  // Zero weights and biases.
  explicit Mlp(std::vector<int> dims);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static Mlp random(std::vector<int> dims, Rng& rng);

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  size_t layer_count() const { return weights_.size(); }
  size_t parameter_count() const;

  Eigen::MatrixXd& weight(size_t layer) { return weights_[layer]; }
  const Eigen::MatrixXd& weight(size_t layer) const { return weights_[layer]; }
  Eigen::VectorXd& bias(size_t layer) { return biases_[layer]; }
  const Eigen::VectorXd& bias(size_t layer) const { return biases_[layer]; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, MlpCache* cache = nullptr) const;

  // Reverse-mode pass: given dLoss/dOutput for the cached batch, returns
  // dLoss/dParameters and, when requested, dLoss/dInput.
  MlpGrad backward(const MlpCache& cache, const Eigen::MatrixXd& d_out,
                   Eigen::MatrixXd* d_input = nullptr) const;

  // Layer-major flattening: W0 (column-major), b0, W1, b1, ...
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  // this <- tau * online + (1 - tau) * this
  void soft_update_from(const Mlp& online, double tau);

  MlpGrad zero_grad() const;

 private:
  void check_input(Eigen::Index rows) const;

  std::vector<int> dims_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

// Adam over a flat parameter vector.
struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  void reset(Eigen::Index n) {
    step_count = 0;
    m = Eigen::VectorXd::Zero(n);
    v = Eigen::VectorXd::Zero(n);
  }
  // Gradient descent step on `params` in place.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  void step(Mlp& net, const MlpGrad& grad);
};

}  // namespace voltlab
