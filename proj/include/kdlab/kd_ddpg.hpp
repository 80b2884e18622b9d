#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "kdlab/backtest_env.hpp"
#include "kdlab/error.hpp"
#include "kdlab/markowitz.hpp"
#include "kdlab/nn.hpp"

// Knowledge-distilled DDPG: supervised pretraining of the actor on Markowitz
// allocations, then off-policy actor-critic learning with a replay buffer,
// slowly tracking target networks and exploration noise.
namespace kdlab {

enum class NoiseKind { OrnsteinUhlenbeck, Gaussian };
enum class DistillLoss { Mse, Kd };

struct NoiseConfig {
  NoiseKind kind = NoiseKind::OrnsteinUhlenbeck;
  double theta = 0.15;
  double sigma = 0.2;
  double dt = 1.0;
};

struct DistillConfig {
  bool enabled = true;
  DistillLoss loss = DistillLoss::Mse;
  double temperature = 2.0;
  double lambda = 0.5;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double lr = 1e-3;
};

struct TrainConfig {
  double gamma = 0.99;
  double tau = 0.005;
  std::size_t batch_size = 64;
  std::size_t episodes = 50;
  std::size_t buffer_capacity = 100000;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  std::vector<std::size_t> hidden = {64, 64};
  NoiseConfig noise;
  DistillConfig distill;
  std::uint64_t seed = 42;

  void validate() const {
    require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::Validation, "gamma must lie in [0, 1]");
    require(tau > 0.0 && tau <= 1.0, ErrorKind::Validation, "tau must lie in (0, 1]");
    require(batch_size >= 1, ErrorKind::Validation, "batch_size must be >= 1");
    require(buffer_capacity >= batch_size, ErrorKind::Validation, "buffer_capacity must be >= batch_size");
    require(actor_lr >= 0.0 && critic_lr >= 0.0 && distill.lr >= 0.0, ErrorKind::Validation,
            "learning rates must be >= 0");
    require(noise.sigma >= 0.0 && noise.theta >= 0.0 && noise.dt > 0.0, ErrorKind::Validation,
            "invalid noise parameters");
    require(distill.temperature > 0.0 && distill.lambda >= 0.0 && distill.batch_size >= 1, ErrorKind::Validation,
            "invalid distillation parameters");
    for (auto h : hidden) require(h >= 1, ErrorKind::Validation, "hidden sizes must be >= 1");
  }
};

/// Independent deterministic seeds for the separate random streams of a run.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace seed_stream {
inline constexpr std::uint64_t kActor = 0;
inline constexpr std::uint64_t kCritic = 1;
inline constexpr std::uint64_t kDistill = 2;
inline constexpr std::uint64_t kReinforce = 3;
}  // namespace seed_stream

// ---- replay buffer ----

struct Transition {
  std::vector<double> state;
  WeightVector action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    require(capacity >= 1, ErrorKind::Validation, "replay capacity must be >= 1");
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }

  void push(Transition t) {
    if (!storage_.empty()) {
      const Transition& ref = storage_.front();
      require(t.state.size() == ref.state.size() && t.next_state.size() == ref.next_state.size() &&
                  t.action.size() == ref.action.size(),
              ErrorKind::Shape, "transition dimensions differ from the buffer's");
    }
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  /// Oldest first.
  std::vector<Transition> contents() const {
    if (storage_.size() < capacity_) return storage_;
    std::vector<Transition> out(storage_.begin() + static_cast<std::ptrdiff_t>(cursor_), storage_.end());
    out.insert(out.end(), storage_.begin(), storage_.begin() + static_cast<std::ptrdiff_t>(cursor_));
    return out;
  }

  /// N uniform draws with replacement.
  std::vector<Transition> sample(std::size_t n, std::mt19937_64& rng) const {
    require(storage_.size() >= n && n >= 1, ErrorKind::Underfull,
            "buffer holds " + std::to_string(storage_.size()) + " transitions, need " + std::to_string(n));
    std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
    std::vector<Transition> batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < n; ++i) batch.push_back(storage_[pick(rng)]);
    return batch;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> storage_;
};

// ---- batch helpers ----

namespace detail {

inline nn::Matrix columns(const std::vector<Transition>& batch, bool next) {
  const auto& first = next ? batch.front().next_state : batch.front().state;
  nn::Matrix m(static_cast<Eigen::Index>(first.size()), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t c = 0; c < batch.size(); ++c) {
    const auto& v = next ? batch[c].next_state : batch[c].state;
    m.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const nn::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return m;
}

inline nn::Matrix actions(const std::vector<Transition>& batch) {
  nn::Matrix m(static_cast<Eigen::Index>(batch.front().action.size()), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t c = 0; c < batch.size(); ++c)
    m.col(static_cast<Eigen::Index>(c)) =
        Eigen::Map<const nn::Vector>(batch[c].action.data(), static_cast<Eigen::Index>(batch[c].action.size()));
  return m;
}

inline nn::Matrix stack(const nn::Matrix& states, const nn::Matrix& acts) {
  nn::Matrix m(states.rows() + acts.rows(), states.cols());
  m << states, acts;
  return m;
}

inline void require_agent_shapes(const nn::Mlp& actor, const nn::Mlp& critic, Eigen::Index state_dim) {
  require(static_cast<Eigen::Index>(actor.input_dim()) == state_dim, ErrorKind::Shape,
          "actor input does not match state dimension");
  require(critic.input_dim() == actor.input_dim() + actor.output_dim() && critic.output_dim() == 1, ErrorKind::Shape,
          "critic must take [state; action] and return a scalar");
}

}  // namespace detail

/// y_i = r_i + gamma Q'(s_{i+1}, pi'(s_{i+1})), with the bootstrap dropped on terminal transitions.
inline nn::Vector critic_targets(const std::vector<Transition>& batch, const nn::Mlp& target_actor,
                                 const nn::Mlp& target_critic, double gamma) {
  require(!batch.empty(), ErrorKind::Underfull, "empty batch");
  nn::Matrix next = detail::columns(batch, true);
  detail::require_agent_shapes(target_actor, target_critic, next.rows());
  nn::Matrix next_actions = nn::forward(target_actor, next).output;
  nn::Matrix q = nn::forward(target_critic, detail::stack(next, next_actions)).output;
  nn::Vector y(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    y[c] = batch[i].reward + (batch[i].done ? 0.0 : gamma * q(0, c));
  }
  return y;
}

struct LossGradient {
  double value = 0.0;
  nn::GradientSet grads;
};

/// L = mean_i (y_i - Q(s_i, a_i))^2 and its parameter gradient.
inline LossGradient critic_loss(const nn::Mlp& critic, const std::vector<Transition>& batch, const nn::Vector& y) {
  require(static_cast<std::size_t>(y.size()) == batch.size() && !batch.empty(), ErrorKind::Shape,
          "targets must match the batch");
  nn::Matrix input = detail::stack(detail::columns(batch, false), detail::actions(batch));
  require(static_cast<std::size_t>(input.rows()) == critic.input_dim(), ErrorKind::Shape,
          "critic input does not match [state; action]");
  auto cache = nn::forward(critic, input);
  const double n = static_cast<double>(batch.size());
  nn::Matrix diff = cache.output - y.transpose();
  LossGradient out;
  out.value = diff.squaredNorm() / n;
  out.grads = nn::backward(critic, cache, 2.0 * diff / n);
  return out;
}

/// One Adam step on the critic loss; returns the pre-step loss.
inline double update_critic(nn::Mlp& critic, const std::vector<Transition>& batch, const nn::Vector& y,
                            nn::AdamState& opt) {
  auto lg = critic_loss(critic, batch, y);
  require(std::isfinite(lg.value), ErrorKind::Numeric, "non-finite critic loss");
  nn::adam_step(critic, lg.grads, opt);
  return lg.value;
}

/// Mean Q(s, pi(s)) over the states and its gradient with respect to the
/// actor's parameters: d Q / d a from the critic's input gradient, chained
/// through the actor's backward pass.
inline LossGradient actor_objective(const nn::Mlp& actor, const nn::Mlp& critic, const nn::Matrix& states) {
  detail::require_agent_shapes(actor, critic, states.rows());
  auto actor_cache = nn::forward(actor, states);
  auto critic_cache = nn::forward(critic, detail::stack(states, actor_cache.output));
  const double n = static_cast<double>(states.cols());
  LossGradient out;
  out.value = critic_cache.output.sum() / n;
  nn::Matrix upstream = nn::Matrix::Constant(1, states.cols(), 1.0 / n);
  auto critic_grads = nn::backward(critic, critic_cache, upstream);
  nn::Matrix d_action = critic_grads.input.bottomRows(static_cast<Eigen::Index>(actor.output_dim()));
  out.grads = nn::backward(actor, actor_cache, d_action);
  return out;
}

/// Gradient ascent step on mean Q; the critic is read-only. Returns the pre-step objective.
inline double update_actor(nn::Mlp& actor, const nn::Mlp& critic, const nn::Matrix& states, nn::AdamState& opt) {
  auto og = actor_objective(actor, critic, states);
  require(std::isfinite(og.value), ErrorKind::Numeric, "non-finite actor objective");
  for (auto& w : og.grads.weights) w = -w;
  for (auto& b : og.grads.biases) b = -b;
  nn::adam_step(actor, og.grads, opt);
  return og.value;
}

/// theta' <- tau theta + (1 - tau) theta'
inline void soft_update(nn::Mlp& target, const nn::Mlp& online, double tau) {
  require(target.same_shape(online), ErrorKind::Shape, "target and online networks differ in shape");
  require(tau > 0.0 && tau <= 1.0, ErrorKind::Domain, "tau must lie in (0, 1]");
  for (std::size_t l = 0; l < target.num_layers(); ++l) {
    target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
    target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
  }
}

/// Ornstein-Uhlenbeck (stateful) or i.i.d. Gaussian exploration noise.
class ExplorationNoise {
 public:
  ExplorationNoise(NoiseConfig config, std::size_t dims) : config_(config), state_(dims, 0.0) {
    require(config.sigma >= 0.0 && config.theta >= 0.0 && config.dt > 0.0, ErrorKind::Validation,
            "invalid noise parameters");
    require(dims >= 1, ErrorKind::Validation, "noise needs at least one dimension");
  }

  void reset() { std::fill(state_.begin(), state_.end(), 0.0); }

  const std::vector<double>& sample(std::mt19937_64& rng) {
    for (double& n : state_) {
      const double eps = normal_(rng);
      if (config_.kind == NoiseKind::OrnsteinUhlenbeck)
        n += config_.theta * (0.0 - n) * config_.dt + config_.sigma * std::sqrt(config_.dt) * eps;
      else
        n = config_.sigma * eps;
    }
    return state_;
  }

 private:
  NoiseConfig config_;
  std::vector<double> state_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Policy output; noise is added to the logits before the softmax head so the
/// action stays a valid allocation.
inline WeightVector act(const nn::Mlp& actor, std::span<const double> state,
                        std::optional<std::span<const double>> noise = std::nullopt) {
  require(state.size() == actor.input_dim(), ErrorKind::Shape, "state does not match the actor input");
  if (!noise) return nn::forward(actor, state);
  require(actor.head == nn::OutputHead::SimplexSoftmax, ErrorKind::Validation, "noisy actions need a softmax head");
  require(noise->size() == actor.output_dim(), ErrorKind::Shape, "noise does not match the action dimension");
  Eigen::Map<const nn::Vector> s(state.data(), static_cast<Eigen::Index>(state.size()));
  nn::Matrix logits = nn::forward(actor, nn::Matrix(s)).logits();
  for (std::size_t i = 0; i < noise->size(); ++i) logits(static_cast<Eigen::Index>(i), 0) += (*noise)[i];
  nn::Matrix y = nn::softmax_columns(logits);
  return {y.data(), y.data() + y.size()};
}

// ---- distillation ----

inline double teacher_mse(const nn::Mlp& actor, const std::vector<TeacherRecord>& records) {
  require(!records.empty(), ErrorKind::Length, "no records");
  double total = 0.0;
  for (const auto& r : records) total += nn::mse_loss(nn::forward(actor, r.features), r.target).loss;
  return total / static_cast<double>(records.size());
}

/// Minibatch Adam on the configured distillation loss. Returns the mean loss of each epoch.
inline std::vector<double> distill_pretrain(nn::Mlp& actor, const std::vector<TeacherRecord>& records,
                                            const DistillConfig& config, std::uint64_t seed) {
  if (config.epochs == 0) return {};
  require(!records.empty(), ErrorKind::Length, "distillation needs a non-empty teacher dataset");
  for (const auto& r : records)
    require(r.features.size() == actor.input_dim() && r.target.size() == actor.output_dim(), ErrorKind::Shape,
            "teacher record dimensions do not match the actor");
  require(config.loss == DistillLoss::Mse || actor.head == nn::OutputHead::SimplexSoftmax, ErrorKind::Validation,
          "temperature distillation needs a softmax head");

  std::mt19937_64 rng(derive_seed(seed, seed_stream::kDistill));
  nn::AdamState opt = nn::AdamState::for_net(actor, config.lr);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto in = static_cast<Eigen::Index>(actor.input_dim());
  const auto out = static_cast<Eigen::Index>(actor.output_dim());

  std::vector<double> curve;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const auto b = static_cast<Eigen::Index>(end - begin);
      nn::Matrix x(in, b);
      nn::Matrix target(out, b);
      for (Eigen::Index c = 0; c < b; ++c) {
        const auto& rec = records[order[begin + static_cast<std::size_t>(c)]];
        x.col(c) = Eigen::Map<const nn::Vector>(rec.features.data(), in);
        target.col(c) = Eigen::Map<const nn::Vector>(rec.target.data(), out);
      }
      auto cache = nn::forward(actor, x);
      nn::GradientSet grads;
      double batch_loss = 0.0;
      if (config.loss == DistillLoss::Mse) {
        nn::Matrix diff = cache.output - target;
        batch_loss = diff.squaredNorm() / static_cast<double>(out);
        grads = nn::backward(actor, cache, 2.0 * diff / static_cast<double>(out * b));
      } else {
        nn::Matrix upstream(out, b);
        for (Eigen::Index c = 0; c < b; ++c) {
          std::vector<double> student(cache.logits().col(c).data(), cache.logits().col(c).data() + out);
          std::vector<double> hard(target.col(c).data(), target.col(c).data() + out);
          std::vector<double> teacher_logits(hard.size());
          for (std::size_t i = 0; i < hard.size(); ++i) teacher_logits[i] = std::log(std::max(hard[i], 1e-12));
          auto lg = nn::kd_loss(student, teacher_logits, hard, config.temperature, config.lambda);
          batch_loss += lg.loss;
          for (Eigen::Index i = 0; i < out; ++i) upstream(i, c) = lg.gradient[static_cast<std::size_t>(i)] / b;
        }
        grads = nn::backward(actor, cache, upstream, nn::GradientAt::Logits);
      }
      require(std::isfinite(batch_loss), ErrorKind::Numeric, "non-finite distillation loss");
      epoch_loss += batch_loss;
      nn::adam_step(actor, grads, opt);
    }
    curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return curve;
}

// ---- agent ----

struct AgentCheckpoint {
  nn::Mlp actor;
  nn::Mlp critic;
  nn::Mlp target_actor;
  nn::Mlp target_critic;
  TrainConfig config;
  EnvConfig env;
  std::vector<std::string> assets;
  std::size_t episodes = 0;
  std::uint64_t seed = 0;
};

struct EpisodeLog {
  std::size_t episode = 0;
  double cumulative_reward = 0.0;
  double critic_loss_mean = 0.0;
  double actor_objective_mean = 0.0;
};

/// Fresh actor and critic with targets copied from them.
inline AgentCheckpoint init_agent(const FeatureSpec& features, const EnvConfig& env, const TrainConfig& config) {
  config.validate();
  const std::size_t n = features.assets.size();
  std::vector<std::size_t> actor_sizes{features.dim()};
  actor_sizes.insert(actor_sizes.end(), config.hidden.begin(), config.hidden.end());
  actor_sizes.push_back(n);
  std::vector<std::size_t> critic_sizes{features.dim() + n};
  critic_sizes.insert(critic_sizes.end(), config.hidden.begin(), config.hidden.end());
  critic_sizes.push_back(1);

  AgentCheckpoint agent;
  agent.actor = nn::mlp_init(actor_sizes, nn::Activation::Relu, nn::OutputHead::SimplexSoftmax,
                             derive_seed(config.seed, seed_stream::kActor));
  agent.critic = nn::mlp_init(critic_sizes, nn::Activation::Relu, nn::OutputHead::Linear,
                              derive_seed(config.seed, seed_stream::kCritic));
  agent.target_actor = agent.actor;
  agent.target_critic = agent.critic;
  agent.config = config;
  agent.env = env;
  agent.assets = features.assets;
  agent.seed = config.seed;
  return agent;
}

/// Reinforcement stage: `config.episodes` episodes over the environment, one
/// gradient update per step once the buffer holds a full batch.
inline std::vector<EpisodeLog> reinforce(AgentCheckpoint& agent, const Environment& env, const TrainConfig& config) {
  config.validate();
  detail::require_agent_shapes(agent.actor, agent.critic, static_cast<Eigen::Index>(env.state_dim()));
  require(env.num_dates() >= env.config().lookback + 2, ErrorKind::InsufficientHistory,
          "training panel leaves no usable window after lookback");
  std::mt19937_64 rng(derive_seed(config.seed, seed_stream::kReinforce));
  ReplayBuffer buffer(config.buffer_capacity);
  nn::AdamState actor_opt = nn::AdamState::for_net(agent.actor, config.actor_lr);
  nn::AdamState critic_opt = nn::AdamState::for_net(agent.critic, config.critic_lr);
  ExplorationNoise noise(config.noise, env.num_assets());

  std::vector<EpisodeLog> log;
  for (std::size_t episode = 1; episode <= config.episodes; ++episode) {
    noise.reset();
    EpisodeLog entry;
    entry.episode = agent.episodes + 1;
    std::size_t updates = 0;
    EnvState state = env.reset();
    while (true) {
      WeightVector action = act(agent.actor, state.features, std::span<const double>(noise.sample(rng)));
      StepResult step = env.step(state, action);
      entry.cumulative_reward += step.reward;
      buffer.push({state.features, action, step.reward, step.next.features, step.done});
      if (buffer.size() >= config.batch_size) {
        auto batch = buffer.sample(config.batch_size, rng);
        nn::Vector y = critic_targets(batch, agent.target_actor, agent.target_critic, config.gamma);
        entry.critic_loss_mean += update_critic(agent.critic, batch, y, critic_opt);
        entry.actor_objective_mean += update_actor(agent.actor, agent.critic, detail::columns(batch, false), actor_opt);
        soft_update(agent.target_actor, agent.actor, config.tau);
        soft_update(agent.target_critic, agent.critic, config.tau);
        ++updates;
      }
      state = std::move(step.next);
      if (step.done) break;
    }
    if (updates > 0) {
      entry.critic_loss_mean /= static_cast<double>(updates);
      entry.actor_objective_mean /= static_cast<double>(updates);
    }
    require(std::isfinite(entry.cumulative_reward) && std::isfinite(entry.critic_loss_mean), ErrorKind::Numeric,
            "episode " + std::to_string(entry.episode) + " produced a non-finite loss or reward");
    ++agent.episodes;
    log.push_back(entry);
  }
  agent.config = config;
  return log;
}

struct TrainResult {
  AgentCheckpoint agent;
  std::vector<double> distill_curve;
  std::vector<EpisodeLog> episodes;
};

/// The full knowledge-distilled DDPG run: initialize networks and targets,
/// pretrain the actor on the teacher (unless disabled), then reinforce.
inline TrainResult train(const Environment& env, const TrainConfig& config, const TeacherDataset* teacher) {
  TrainResult result;
  result.agent = init_agent(env.features(), env.config(), config);
  if (config.distill.enabled && config.distill.epochs > 0) {
    require(teacher != nullptr, ErrorKind::Validation, "distillation enabled but no teacher dataset given");
    result.distill_curve = distill_pretrain(result.agent.actor, teacher->records, config.distill, config.seed);
  }
  result.episodes = reinforce(result.agent, env, config);
  return result;
}

// ---- kdagent-1 checkpoint format ----

inline constexpr const char* kAgentFormat = "kdagent-1";

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"tau", c.tau},
          {"batch_size", c.batch_size},
          {"episodes", c.episodes},
          {"buffer_capacity", c.buffer_capacity},
          {"actor_lr", c.actor_lr},
          {"critic_lr", c.critic_lr},
          {"hidden", c.hidden},
          {"noise",
           {{"kind", c.noise.kind == NoiseKind::OrnsteinUhlenbeck ? "ou" : "gaussian"},
            {"theta", c.noise.theta},
            {"sigma", c.noise.sigma},
            {"dt", c.noise.dt}}},
          {"distill",
           {{"enabled", c.distill.enabled},
            {"loss", c.distill.loss == DistillLoss::Mse ? "mse" : "kd"},
            {"temperature", c.distill.temperature},
            {"lambda", c.distill.lambda},
            {"epochs", c.distill.epochs},
            {"batch_size", c.distill.batch_size},
            {"lr", c.distill.lr}}},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.gamma = j.at("gamma").get<double>();
  c.tau = j.at("tau").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.episodes = j.at("episodes").get<std::size_t>();
  c.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
  c.actor_lr = j.at("actor_lr").get<double>();
  c.critic_lr = j.at("critic_lr").get<double>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  const auto& noise = j.at("noise");
  c.noise.kind = noise.at("kind").get<std::string>() == "ou" ? NoiseKind::OrnsteinUhlenbeck : NoiseKind::Gaussian;
  c.noise.theta = noise.at("theta").get<double>();
  c.noise.sigma = noise.at("sigma").get<double>();
  c.noise.dt = noise.at("dt").get<double>();
  const auto& d = j.at("distill");
  c.distill.enabled = d.at("enabled").get<bool>();
  c.distill.loss = d.at("loss").get<std::string>() == "mse" ? DistillLoss::Mse : DistillLoss::Kd;
  c.distill.temperature = d.at("temperature").get<double>();
  c.distill.lambda = d.at("lambda").get<double>();
  c.distill.epochs = d.at("epochs").get<std::size_t>();
  c.distill.batch_size = d.at("batch_size").get<std::size_t>();
  c.distill.lr = d.at("lr").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline nlohmann::json to_json(const EnvConfig& e) {
  return {{"lookback", e.lookback},
          {"cost_rate", e.cost_rate},
          {"reward", e.reward == RewardKind::LogReturn ? "log-return" : "value-change"},
          {"initial_value", e.initial_value},
          {"features", e.features == FeatureSet::Relatives ? "relatives" : "relatives+indicators"}};
}

inline EnvConfig env_config_from_json(const nlohmann::json& j) {
  EnvConfig e;
  e.lookback = j.at("lookback").get<std::size_t>();
  e.cost_rate = j.at("cost_rate").get<double>();
  e.reward = j.at("reward").get<std::string>() == "log-return" ? RewardKind::LogReturn : RewardKind::ValueChange;
  e.initial_value = j.at("initial_value").get<double>();
  e.features = j.at("features").get<std::string>() == "relatives" ? FeatureSet::Relatives
                                                                  : FeatureSet::RelativesWithIndicators;
  return e;
}

inline nlohmann::json to_json(const AgentCheckpoint& a) {
  return {{"format", kAgentFormat},
          {"seed", a.seed},
          {"episodes", a.episodes},
          {"assets", a.assets},
          {"config", to_json(a.config)},
          {"env", to_json(a.env)},
          {"actor", nn::to_json(a.actor)},
          {"critic", nn::to_json(a.critic)},
          {"target_actor", nn::to_json(a.target_actor)},
          {"target_critic", nn::to_json(a.target_critic)}};
}

inline AgentCheckpoint agent_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format").get<std::string>() == kAgentFormat, ErrorKind::Validation, "not a kdagent-1 document");
    AgentCheckpoint a;
    a.seed = j.at("seed").get<std::uint64_t>();
    a.episodes = j.at("episodes").get<std::size_t>();
    a.assets = j.at("assets").get<std::vector<std::string>>();
    a.config = train_config_from_json(j.at("config"));
    a.env = env_config_from_json(j.at("env"));
    a.actor = nn::mlp_from_json(j.at("actor"));
    a.critic = nn::mlp_from_json(j.at("critic"));
    a.target_actor = nn::mlp_from_json(j.at("target_actor"));
    a.target_critic = nn::mlp_from_json(j.at("target_critic"));
    require(a.actor.same_shape(a.target_actor) && a.critic.same_shape(a.target_critic), ErrorKind::Validation,
            "kdagent-1: target shapes differ from online shapes");
    return a;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("kdagent-1: ") + e.what());
  }
}

}  // namespace kdlab
