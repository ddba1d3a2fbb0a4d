#include "voltlab/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace voltlab {

MlpGrad& MlpGrad::operator+=(const MlpGrad& other) {
  for (size_t l = 0; l < d_weights.size(); ++l) {
    d_weights[l] += other.d_weights[l];
    d_biases[l] += other.d_biases[l];
  }
  return *this;
}

MlpGrad& MlpGrad::operator*=(double s) {
  for (size_t l = 0; l < d_weights.size(); ++l) {
    d_weights[l] *= s;
    d_biases[l] *= s;
  }
  return *this;
}

Eigen::VectorXd MlpGrad::flatten() const {
  Eigen::Index n = 0;
  for (size_t l = 0; l < d_weights.size(); ++l) n += d_weights[l].size() + d_biases[l].size();
  Eigen::VectorXd out(n);
  Eigen::Index at = 0;
  for (size_t l = 0; l < d_weights.size(); ++l) {
    out.segment(at, d_weights[l].size()) = d_weights[l].reshaped();
    at += d_weights[l].size();
    out.segment(at, d_biases[l].size()) = d_biases[l];
    at += d_biases[l].size();
  }
  return out;
}

Mlp::Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output dims");
  for (int d : dims_)
    if (d <= 0) throw std::invalid_argument("Mlp layer dims must be positive");
  for (size_t l = 0; l + 1 < dims_.size(); ++l) {
    weights_.push_back(Eigen::MatrixXd::Zero(dims_[l + 1], dims_[l]));
    biases_.push_back(Eigen::VectorXd::Zero(dims_[l + 1]));
  }
}

Mlp Mlp::random(std::vector<int> dims, Rng& rng) {
  Mlp net(std::move(dims));
  for (auto& w : net.weights_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
  }
  return net;
}

size_t Mlp::parameter_count() const {
  size_t n = 0;
  for (size_t l = 0; l + 1 < dims_.size(); ++l)
    n += static_cast<size_t>(dims_[l] + 1) * static_cast<size_t>(dims_[l + 1]);
  return n;
}

void Mlp::check_input(Eigen::Index rows) const {
  if (dims_.empty() || rows != dims_.front())
    throw std::invalid_argument("Mlp::forward: input has " + std::to_string(rows) +
                                " rows, network expects " +
                                std::to_string(dims_.empty() ? 0 : dims_.front()));
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  check_input(x.size());
  Eigen::VectorXd a = x;
  for (size_t l = 0; l < weights_.size(); ++l) {
    Eigen::VectorXd z = weights_[l] * a + biases_[l];
    a = (l + 1 < weights_.size()) ? Eigen::VectorXd(z.array().tanh()) : z;
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, MlpCache* cache) const {
  check_input(x.rows());
  if (cache) {
    cache->inputs.clear();
    cache->hidden.clear();
  }
  Eigen::MatrixXd a = x;
  for (size_t l = 0; l < weights_.size(); ++l) {
    if (cache) cache->inputs.push_back(a);
    Eigen::MatrixXd z = weights_[l] * a;
    z.colwise() += biases_[l];
    if (l + 1 < weights_.size()) {
      a = z.array().tanh();
      if (cache) cache->hidden.push_back(a);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

MlpGrad Mlp::backward(const MlpCache& cache, const Eigen::MatrixXd& d_out,
                      Eigen::MatrixXd* d_input) const {
  MlpGrad g;
  g.d_weights.resize(weights_.size());
  g.d_biases.resize(weights_.size());
  Eigen::MatrixXd delta = d_out;  // dLoss / d(pre-activation) of current layer
  for (size_t l = weights_.size(); l-- > 0;) {
    g.d_weights[l] = delta * cache.inputs[l].transpose();
    g.d_biases[l] = delta.rowwise().sum();
    if (l == 0 && d_input == nullptr) break;
    Eigen::MatrixXd d_a = weights_[l].transpose() * delta;
    if (l == 0) {
      *d_input = std::move(d_a);
      break;
    }
    const Eigen::MatrixXd& h = cache.hidden[l - 1];
    delta = d_a.array() * (1.0 - h.array().square());
  }
  return g;
}

Eigen::VectorXd Mlp::parameters() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (size_t l = 0; l < weights_.size(); ++l) {
    out.segment(at, weights_[l].size()) = weights_[l].reshaped();
    at += weights_[l].size();
    out.segment(at, biases_[l].size()) = biases_[l];
    at += biases_[l].size();
  }
  return out;
}

void Mlp::set_parameters(const Eigen::VectorXd& flat) {
  if (static_cast<size_t>(flat.size()) != parameter_count())
    throw std::invalid_argument("Mlp::set_parameters: size mismatch");
  Eigen::Index at = 0;
  for (size_t l = 0; l < weights_.size(); ++l) {
    weights_[l].reshaped() = flat.segment(at, weights_[l].size());
    at += weights_[l].size();
    biases_[l] = flat.segment(at, biases_[l].size());
    at += biases_[l].size();
  }
}

void Mlp::soft_update_from(const Mlp& online, double tau) {
  if (online.dims_ != dims_) throw std::invalid_argument("soft_update: shape mismatch");
  for (size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] = tau * online.weights_[l] + (1.0 - tau) * weights_[l];
    biases_[l] = tau * online.biases_[l] + (1.0 - tau) * biases_[l];
  }
}

MlpGrad Mlp::zero_grad() const {
  MlpGrad g;
  for (size_t l = 0; l < weights_.size(); ++l) {
    g.d_weights.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
    g.d_biases.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
  }
  return g;
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (m.size() != params.size()) reset(params.size());
  ++step_count;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

void Adam::step(Mlp& net, const MlpGrad& grad) {
  Eigen::VectorXd p = net.parameters();
  step(p, grad.flatten());
  net.set_parameters(p);
}

}  // namespace voltlab
