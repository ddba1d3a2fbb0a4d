#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "voltlab/mlp.hpp"
#include "voltlab/rng.hpp"

namespace voltlab {

// Column-per-sample minibatch.
struct Batch {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd act;
  Eigen::VectorXd reward;
  Eigen::MatrixXd next_obs;
  Eigen::VectorXd done;

  Eigen::Index size() const { return reward.size(); }
};

// Fixed-capacity ring buffer of transitions. Once full, each push
// overwrites the oldest entry.
class ReplayBuffer {
 public:
  ReplayBuffer(size_t capacity, int obs_dim, int act_dim);

  void push(std::span<const double> obs, std::span<const double> act, double reward,
            std::span<const double> next_obs, bool done);

  // Uniform with replacement over stored entries. Throws
  // std::invalid_argument when fewer than batch_size entries are stored.
  Batch sample(size_t batch_size, Rng& rng) const;

  size_t size() const { return size_; }
  size_t capacity() const { return capacity_; }
  size_t cursor() const { return cursor_; }

 private:
  size_t capacity_;
  size_t size_ = 0;
  size_t cursor_ = 0;
  Eigen::MatrixXd obs_, act_, next_obs_;
  Eigen::VectorXd reward_, done_;
};

struct SacConfig {
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<int> hidden{64, 64};
  double lr = 3e-4;
  double gamma = 0.99;
  double tau = 0.005;
  int batch_size = 256;
  size_t buffer_capacity = 100000;
  double init_log_alpha = 0.0;
  bool auto_alpha = true;
  // Defaults to -act_dim when left NaN.
  double target_entropy = std::numeric_limits<double>::quiet_NaN();

  double resolved_target_entropy() const {
    return std::isnan(target_entropy) ? -static_cast<double>(act_dim) : target_entropy;
  }
};

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;

struct SacState {
  SacConfig config;
  Mlp policy;  // outputs [mean; log_std] per action dimension
  Mlp q1, q2;  // input [obs; act], scalar output
  Mlp q1_target, q2_target;
  double log_alpha = 0.0;
  Adam policy_opt, q1_opt, q2_opt, alpha_opt;
  Rng rng;

  static SacState create(const SacConfig& config, std::uint64_t seed);
  double alpha() const { return std::exp(log_alpha); }
};

// Reparameterized squashed-Gaussian draw a = tanh(mean + std * noise).
struct PolicySample {
  Eigen::MatrixXd action;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd log_std;
  Eigen::MatrixXd raw_log_std;
  Eigen::VectorXd log_prob;
  MlpCache cache;
};
PolicySample sample_policy(const Mlp& policy, const Eigen::MatrixXd& obs,
                           const Eigen::MatrixXd& noise);

struct LossAndGrad {
  double loss = 0.0;
  MlpGrad grad;
};

// mean_b (Q(s_b, a_b) - target_b)^2
LossAndGrad critic_loss(const Mlp& q, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act,
                        const Eigen::VectorXd& target);

// mean_b (alpha log pi(a_b|s_b) - min(Q1, Q2)(s_b, a_b)) with a_b drawn from
// the given noise. Gradient is with respect to the policy parameters only.
struct PolicyLoss {
  double loss = 0.0;
  MlpGrad grad;
  Eigen::VectorXd log_prob;
};
PolicyLoss policy_loss(const Mlp& policy, const Mlp& q1, const Mlp& q2, double alpha,
                       const Eigen::MatrixXd& obs, const Eigen::MatrixXd& noise);

// -log_alpha * mean(log_prob + target_entropy) and its derivative.
struct AlphaLoss {
  double loss = 0.0;
  double grad = 0.0;
};
AlphaLoss alpha_loss(double log_alpha, const Eigen::VectorXd& log_prob, double target_entropy);

// Soft Bellman targets r + gamma (1 - done) (min target Q - alpha log pi).
Eigen::VectorXd critic_targets(const SacState& state, const Batch& batch,
                               const Eigen::MatrixXd& next_noise);

enum class ActionMode { kStochastic, kDeterministic };

std::vector<double> select_action(SacState& state, std::span<const double> features,
                                  ActionMode mode);

struct SacLosses {
  double critic_loss = 0.0;
  double policy_loss = 0.0;
  double alpha_loss = 0.0;
};

// One gradient step each for both critics, the policy and the temperature,
// followed by the soft target update.
SacLosses sac_update(SacState& state, const Batch& batch);
SacLosses sac_update(SacState& state, const ReplayBuffer& buffer);

void soft_update(SacState& state, double tau);

// Versioned little-endian binary dump: config, all weights, optimizer
// moments, temperature and RNG state. Replay contents are not stored.
std::string serialize_checkpoint(const SacState& state);
SacState deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const SacState& state, const std::filesystem::path& path);
SacState load_checkpoint(const std::filesystem::path& path);

}  // namespace voltlab
