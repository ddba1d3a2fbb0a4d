#include "voltlab/sac.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "voltlab/errors.hpp"

namespace voltlab {

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(size_t capacity, int obs_dim, int act_dim)
    : capacity_(capacity),
      obs_(obs_dim, static_cast<Eigen::Index>(capacity)),
      act_(act_dim, static_cast<Eigen::Index>(capacity)),
      next_obs_(obs_dim, static_cast<Eigen::Index>(capacity)),
      reward_(static_cast<Eigen::Index>(capacity)),
      done_(static_cast<Eigen::Index>(capacity)) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(std::span<const double> obs, std::span<const double> act, double reward,
                        std::span<const double> next_obs, bool done) {
  if (static_cast<Eigen::Index>(obs.size()) != obs_.rows() ||
      static_cast<Eigen::Index>(next_obs.size()) != obs_.rows() ||
      static_cast<Eigen::Index>(act.size()) != act_.rows())
    throw std::invalid_argument("ReplayBuffer::push: dimension mismatch");
  const auto c = static_cast<Eigen::Index>(cursor_);
  obs_.col(c) = Eigen::Map<const Eigen::VectorXd>(obs.data(), obs_.rows());
  act_.col(c) = Eigen::Map<const Eigen::VectorXd>(act.data(), act_.rows());
  next_obs_.col(c) = Eigen::Map<const Eigen::VectorXd>(next_obs.data(), obs_.rows());
  reward_(c) = reward;
  done_(c) = done ? 1.0 : 0.0;
  cursor_ = (cursor_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

Batch ReplayBuffer::sample(size_t batch_size, Rng& rng) const {
  if (batch_size == 0 || size_ < batch_size)
    throw std::invalid_argument("ReplayBuffer::sample: buffer holds " + std::to_string(size_) +
                                " entries, batch needs " + std::to_string(batch_size));
  const auto b = static_cast<Eigen::Index>(batch_size);
  Batch out{Eigen::MatrixXd(obs_.rows(), b), Eigen::MatrixXd(act_.rows(), b),
            Eigen::VectorXd(b), Eigen::MatrixXd(obs_.rows(), b), Eigen::VectorXd(b)};
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto i = static_cast<Eigen::Index>(rng.index(size_));
    out.obs.col(j) = obs_.col(i);
    out.act.col(j) = act_.col(i);
    out.next_obs.col(j) = next_obs_.col(i);
    out.reward(j) = reward_(i);
    out.done(j) = done_(i);
  }
  return out;
}

// ---------------------------------------------------------------- networks

SacState SacState::create(const SacConfig& config, std::uint64_t seed) {
  if (config.obs_dim <= 0 || config.act_dim <= 0)
    throw std::invalid_argument("SacConfig: obs_dim and act_dim must be positive");
  SacState s;
  s.config = config;
  s.rng = Rng(seed);

  std::vector<int> pdims{config.obs_dim};
  pdims.insert(pdims.end(), config.hidden.begin(), config.hidden.end());
  pdims.push_back(2 * config.act_dim);
  std::vector<int> qdims{config.obs_dim + config.act_dim};
  qdims.insert(qdims.end(), config.hidden.begin(), config.hidden.end());
  qdims.push_back(1);

  s.policy = Mlp::random(pdims, s.rng);
  s.q1 = Mlp::random(qdims, s.rng);
  s.q2 = Mlp::random(qdims, s.rng);
  s.q1_target = s.q1;
  s.q2_target = s.q2;
  s.log_alpha = config.init_log_alpha;
  for (Adam* opt : {&s.policy_opt, &s.q1_opt, &s.q2_opt, &s.alpha_opt}) opt->lr = config.lr;
  s.policy_opt.reset(static_cast<Eigen::Index>(s.policy.parameter_count()));
  s.q1_opt.reset(static_cast<Eigen::Index>(s.q1.parameter_count()));
  s.q2_opt.reset(static_cast<Eigen::Index>(s.q2.parameter_count()));
  s.alpha_opt.reset(1);
  return s;
}

namespace {

// log(1 - tanh(u)^2), stable for large |u|.
double log_one_minus_tanh_sq(double u) {
  const double x = -2.0 * u;
  const double softplus = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return 2.0 * (std::numbers::ln2 - u - softplus);
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

Eigen::MatrixXd standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

}  // namespace

PolicySample sample_policy(const Mlp& policy, const Eigen::MatrixXd& obs,
                           const Eigen::MatrixXd& noise) {
  const Eigen::Index act_dim = policy.output_dim() / 2;
  PolicySample s;
  const Eigen::MatrixXd out = policy.forward(obs, &s.cache);
  s.mean = out.topRows(act_dim);
  s.raw_log_std = out.bottomRows(act_dim);
  s.log_std = s.raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  const Eigen::MatrixXd pre = s.mean.array() + s.log_std.array().exp() * noise.array();
  s.action = pre.array().tanh();
  s.log_prob.resize(obs.cols());
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (Eigen::Index j = 0; j < obs.cols(); ++j) {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < act_dim; ++i) {
      const double e = noise(i, j);
      lp += -0.5 * e * e - s.log_std(i, j) - half_log_2pi - log_one_minus_tanh_sq(pre(i, j));
    }
    s.log_prob(j) = lp;
  }
  return s;
}

LossAndGrad critic_loss(const Mlp& q, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act,
                        const Eigen::VectorXd& target) {
  MlpCache cache;
  const Eigen::RowVectorXd pred = q.forward(stack(obs, act), &cache).row(0);
  const Eigen::RowVectorXd err = pred - target.transpose();
  const double n = static_cast<double>(target.size());
  LossAndGrad out;
  out.loss = err.squaredNorm() / n;
  out.grad = q.backward(cache, (2.0 / n) * err);
  return out;
}

PolicyLoss policy_loss(const Mlp& policy, const Mlp& q1, const Mlp& q2, double alpha,
                       const Eigen::MatrixXd& obs, const Eigen::MatrixXd& noise) {
  const Eigen::Index act_dim = policy.output_dim() / 2;
  const Eigen::Index b = obs.cols();
  const double n = static_cast<double>(b);
  PolicySample s = sample_policy(policy, obs, noise);

  const Eigen::MatrixXd sa = stack(obs, s.action);
  MlpCache c1, c2;
  const Eigen::RowVectorXd v1 = q1.forward(sa, &c1).row(0);
  const Eigen::RowVectorXd v2 = q2.forward(sa, &c2).row(0);

  // dLoss/dQ_k per sample routes through whichever critic is smaller.
  Eigen::RowVectorXd w1 = Eigen::RowVectorXd::Zero(b), w2 = Eigen::RowVectorXd::Zero(b);
  PolicyLoss out;
  out.loss = 0.0;
  for (Eigen::Index j = 0; j < b; ++j) {
    const bool first = v1(j) <= v2(j);
    out.loss += alpha * s.log_prob(j) - (first ? v1(j) : v2(j));
    (first ? w1 : w2)(j) = -1.0 / n;
  }
  out.loss /= n;

  Eigen::MatrixXd din1, din2;
  q1.backward(c1, w1, &din1);
  q2.backward(c2, w2, &din2);
  // dLoss/dAction through the critic term only.
  const Eigen::MatrixXd d_act = din1.bottomRows(act_dim) + din2.bottomRows(act_dim);

  Eigen::MatrixXd d_out(2 * act_dim, b);
  for (Eigen::Index j = 0; j < b; ++j) {
    for (Eigen::Index i = 0; i < act_dim; ++i) {
      const double a = s.action(i, j);
      const double sd = std::exp(s.log_std(i, j));
      const double e = noise(i, j);
      const double d_pre = d_act(i, j) * (1.0 - a * a) + alpha * 2.0 * a / n;
      d_out(i, j) = d_pre;
      const double raw = s.raw_log_std(i, j);
      const bool inside = raw > kLogStdMin && raw < kLogStdMax;
      d_out(act_dim + i, j) = inside ? d_pre * sd * e - alpha / n : 0.0;
    }
  }
  out.grad = policy.backward(s.cache, d_out);
  out.log_prob = std::move(s.log_prob);
  return out;
}

AlphaLoss alpha_loss(double log_alpha, const Eigen::VectorXd& log_prob, double target_entropy) {
  const double m = (log_prob.array() + target_entropy).mean();
  return {-log_alpha * m, -m};
}

Eigen::VectorXd critic_targets(const SacState& state, const Batch& batch,
                               const Eigen::MatrixXd& next_noise) {
  const PolicySample next = sample_policy(state.policy, batch.next_obs, next_noise);
  const Eigen::MatrixXd sa = stack(batch.next_obs, next.action);
  const Eigen::RowVectorXd t1 = state.q1_target.forward(sa).row(0);
  const Eigen::RowVectorXd t2 = state.q2_target.forward(sa).row(0);
  const double alpha = state.alpha();
  Eigen::VectorXd y(batch.size());
  for (Eigen::Index j = 0; j < batch.size(); ++j) {
    const double soft_v = std::min(t1(j), t2(j)) - alpha * next.log_prob(j);
    y(j) = batch.reward(j) + state.config.gamma * (1.0 - batch.done(j)) * soft_v;
  }
  return y;
}

std::vector<double> select_action(SacState& state, std::span<const double> features,
                                  ActionMode mode) {
  const Eigen::Index act_dim = state.config.act_dim;
  const Eigen::VectorXd x =
      Eigen::Map<const Eigen::VectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
  const Eigen::VectorXd out = state.policy.forward(x);
  std::vector<double> a(static_cast<size_t>(act_dim));
  for (Eigen::Index i = 0; i < act_dim; ++i) {
    double u = out(i);
    if (mode == ActionMode::kStochastic) {
      const double ls = std::clamp(out(act_dim + i), kLogStdMin, kLogStdMax);
      u += std::exp(ls) * state.rng.normal();
    }
    a[static_cast<size_t>(i)] = std::tanh(u);
  }
  return a;
}

void soft_update(SacState& state, double tau) {
  state.q1_target.soft_update_from(state.q1, tau);
  state.q2_target.soft_update_from(state.q2, tau);
}

SacLosses sac_update(SacState& state, const Batch& batch) {
  if (batch.size() < 1) throw std::invalid_argument("sac_update: empty batch");
  const Eigen::Index act_dim = state.config.act_dim;
  SacLosses losses;

  const Eigen::MatrixXd next_noise = standard_normal(state.rng, act_dim, batch.size());
  const Eigen::VectorXd y = critic_targets(state, batch, next_noise);
  const LossAndGrad l1 = critic_loss(state.q1, batch.obs, batch.act, y);
  const LossAndGrad l2 = critic_loss(state.q2, batch.obs, batch.act, y);
  state.q1_opt.step(state.q1, l1.grad);
  state.q2_opt.step(state.q2, l2.grad);
  losses.critic_loss = l1.loss + l2.loss;

  const Eigen::MatrixXd noise = standard_normal(state.rng, act_dim, batch.size());
  const PolicyLoss pl = policy_loss(state.policy, state.q1, state.q2, state.alpha(), batch.obs, noise);
  state.policy_opt.step(state.policy, pl.grad);
  losses.policy_loss = pl.loss;

  const AlphaLoss al = alpha_loss(state.log_alpha, pl.log_prob, state.config.resolved_target_entropy());
  losses.alpha_loss = al.loss;
  if (state.config.auto_alpha) {
    Eigen::VectorXd la(1);
    la(0) = state.log_alpha;
    Eigen::VectorXd g(1);
    g(0) = al.grad;
    state.alpha_opt.step(la, g);
    state.log_alpha = la(0);
  }

  soft_update(state, state.config.tau);
  return losses;
}

SacLosses sac_update(SacState& state, const ReplayBuffer& buffer) {
  return sac_update(state, buffer.sample(static_cast<size_t>(state.config.batch_size), state.rng));
}

// ---------------------------------------------------------------- checkpoint

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kMagic[8] = {'V', 'L', 'S', 'A', 'C', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    out_.append(p, sizeof(T));
  }
  void u64(std::uint64_t v) { pod(v); }
  void f64(double v) { pod(v); }
  void str(const std::string& s) {
    u64(s.size());
    out_ += s;
  }
  void vec(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    out_.append(reinterpret_cast<const char*>(v.data()), sizeof(double) * static_cast<size_t>(v.size()));
  }
  void net(const Mlp& m) {
    u64(m.dims().size());
    for (int d : m.dims()) u64(static_cast<std::uint64_t>(d));
    vec(m.parameters());
  }
  void adam(const Adam& a) {
    f64(a.lr);
    f64(a.beta1);
    f64(a.beta2);
    f64(a.eps);
    pod<std::int64_t>(a.step_count);
    vec(a.m);
    vec(a.v);
  }
  std::string take() { return std::move(out_); }
  void raw(const char* p, size_t n) { out_.append(p, n); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + at_, sizeof(T));
    at_ += sizeof(T);
    return v;
  }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  double f64() { return pod<double>(); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s = in_.substr(at_, n);
    at_ += n;
    return s;
  }
  Eigen::VectorXd vec() {
    const auto n = u64();
    need(n * sizeof(double));
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    std::memcpy(v.data(), in_.data() + at_, n * sizeof(double));
    at_ += n * sizeof(double);
    return v;
  }
  Mlp net() {
    const auto layers = u64();
    if (layers < 2 || layers > 64) throw ParseError("checkpoint: bad layer count");
    std::vector<int> dims;
    for (std::uint64_t i = 0; i < layers; ++i) dims.push_back(static_cast<int>(u64()));
    Mlp m(dims);
    m.set_parameters(vec());
    return m;
  }
  Adam adam() {
    Adam a;
    a.lr = f64();
    a.beta1 = f64();
    a.beta2 = f64();
    a.eps = f64();
    a.step_count = pod<std::int64_t>();
    a.m = vec();
    a.v = vec();
    return a;
  }
  void expect(const char* p, size_t n) {
    need(n);
    if (std::memcmp(in_.data() + at_, p, n) != 0) throw ParseError("checkpoint: bad magic");
    at_ += n;
  }
  bool done() const { return at_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - at_) throw ParseError("checkpoint: truncated file");
  }
  const std::string& in_;
  size_t at_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const SacState& s) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.pod(kVersion);
  const SacConfig& c = s.config;
  w.u64(static_cast<std::uint64_t>(c.obs_dim));
  w.u64(static_cast<std::uint64_t>(c.act_dim));
  w.u64(c.hidden.size());
  for (int h : c.hidden) w.u64(static_cast<std::uint64_t>(h));
  w.f64(c.lr);
  w.f64(c.gamma);
  w.f64(c.tau);
  w.u64(static_cast<std::uint64_t>(c.batch_size));
  w.u64(c.buffer_capacity);
  w.f64(c.init_log_alpha);
  w.pod<std::uint8_t>(c.auto_alpha ? 1 : 0);
  w.f64(c.target_entropy);
  for (const Mlp* m : {&s.policy, &s.q1, &s.q2, &s.q1_target, &s.q2_target}) w.net(*m);
  w.f64(s.log_alpha);
  for (const Adam* a : {&s.policy_opt, &s.q1_opt, &s.q2_opt, &s.alpha_opt}) w.adam(*a);
  w.str(s.rng.state());
  return w.take();
}

SacState deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.expect(kMagic, sizeof kMagic);
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  SacState s;
  SacConfig& c = s.config;
  c.obs_dim = static_cast<int>(r.u64());
  c.act_dim = static_cast<int>(r.u64());
  const auto nh = r.u64();
  if (nh > 64) throw ParseError("checkpoint: bad hidden layer count");
  c.hidden.clear();
  for (std::uint64_t i = 0; i < nh; ++i) c.hidden.push_back(static_cast<int>(r.u64()));
  c.lr = r.f64();
  c.gamma = r.f64();
  c.tau = r.f64();
  c.batch_size = static_cast<int>(r.u64());
  c.buffer_capacity = r.u64();
  c.init_log_alpha = r.f64();
  c.auto_alpha = r.pod<std::uint8_t>() != 0;
  c.target_entropy = r.f64();
  s.policy = r.net();
  s.q1 = r.net();
  s.q2 = r.net();
  s.q1_target = r.net();
  s.q2_target = r.net();
  s.log_alpha = r.f64();
  s.policy_opt = r.adam();
  s.q1_opt = r.adam();
  s.q2_opt = r.adam();
  s.alpha_opt = r.adam();
  s.rng.set_state(r.str());
  if (!r.done()) throw ParseError("checkpoint: trailing bytes");
  if (s.policy.input_dim() != c.obs_dim || s.policy.output_dim() != 2 * c.act_dim ||
      s.q1.input_dim() != c.obs_dim + c.act_dim)
    throw ParseError("checkpoint: network shapes disagree with the stored config");
  return s;
}

void save_checkpoint(const SacState& state, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(state);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

SacState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace voltlab
