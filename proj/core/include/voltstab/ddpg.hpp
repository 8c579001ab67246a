#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voltstab/dynamics.hpp"
#include "voltstab/mlp.hpp"
#include "voltstab/replay_buffer.hpp"
#include "voltstab/scenario.hpp"
#include "voltstab/stacked_relu.hpp"

namespace voltstab {

enum class AgentScope { PerBus, Joint };
enum class ActorKind { StackedRelu, Mlp };
enum class OptimizerKind { Adam, Sgd };

std::string to_string(AgentScope scope);
std::string to_string(ActorKind kind);
std::string to_string(OptimizerKind kind);

struct TrainConfig {
  double gamma = 0.99;
  double actor_lr = 1e-4;
  double critic_lr = 2e-4;
  double noise_std = 0.05;
  double noise_clip = 3.0;  ///< in units of noise_std
  std::size_t batch = 256;
  double tau = 1e-2;
  std::size_t episodes = 200;
  std::size_t episode_length = 30;
  std::size_t updates_per_episode = 30;
  std::uint64_t seed = 0;
  AgentScope scope = AgentScope::PerBus;
  ActorKind actor = ActorKind::StackedRelu;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::size_t capacity = 1000000;
  std::size_t hidden = 100;  ///< width of both hidden layers in critics and MLP actors
  ConstraintConfig constraint{};
  double init_slope = 1.0;  ///< initial prefix slope of the stacked-ReLU actor
  double dt = 0.1;
  CostParams cost{};
  InputScaling v_scaling{1.0, 0.05};
  double u_scale = 0.05;  ///< critic sees u / u_scale
  ScenarioConfig ranges{};
  bool record_wall_time = false;  ///< wall_ms stays 0 otherwise, keeping logs reproducible

  /// Desk-scale comparison setup: one control update per unit time (dt = 1),
  /// a centralized critic over (v, u) with decentralized actors, and a 10x
  /// actor step so 200 short episodes can move the policy. The slope floor is
  /// set high enough that every policy in the class recovers within 100 steps.
  static TrainConfig benchmark_preset();

  void validate() const;
  /// `key = value` lines covering every field, with defaults filled in.
  std::string to_kv() const;
  /// Starts from the defaults; unknown keys and malformed values throw ParseError.
  static TrainConfig from_kv(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
  /// Canonical JSON used for hashing.
  std::string canonical_json() const;
};

struct EpisodeLog {
  std::size_t episode = 0;
  double ret = 0.0;  ///< undiscounted sum of rewards (-cost)
  double td_loss_mean = 0.0;
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
  bool diverged = false;
  double wall_ms = 0.0;
};

std::string training_log_csv(const std::vector<EpisodeLog>& log);

/// Mini-batch in column-per-sample form.
struct Batch {
  Eigen::MatrixXd v;
  Eigen::MatrixXd u;
  Eigen::MatrixXd reward;
  Eigen::MatrixXd v_next;
  Eigen::VectorXd done;  ///< 1 for terminal transitions

  static Batch gather(const std::vector<const Transition*>& items);
};

/// One gradient step on the mean squared error between critic(x) and the
/// fixed targets y. Returns the loss before the step; throws
/// DivergenceError if it is not finite.
double regression_step(FeedForwardNet& critic, Optimizer& opt, const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y,
                       double* grad_norm = nullptr);

/// (1/B) sum_b sum_i dQ/du_i(b) * d g_i(v_i(b)) / d theta through the
/// constraint map.
Eigen::VectorXd stable_actor_gradient(const RawPolicyParams& raw, const VoltageBand& band,
                                      const ConstraintConfig& cfg, const Eigen::MatrixXd& v,
                                      const Eigen::MatrixXd& dq_du);

/// (1/B) sum_b dQ/du(b) * d net((v(b) - center) / scale) / d params.
Eigen::VectorXd mlp_actor_gradient(const FeedForwardNet& net, const InputScaling& scaling,
                                   const Eigen::RowVectorXd& v, const Eigen::RowVectorXd& dq_du);

/// Decentralized actor(s) plus critics and target copies, trained by DDPG.
class DdpgTrainer {
 public:
  DdpgTrainer(Eigen::MatrixXd X, VoltageBand band, TrainConfig cfg);

  /// Runs one episode with exploration noise, stores its transitions, then
  /// performs the configured number of critic/actor/target updates.
  EpisodeLog run_episode();

  /// Critic TD step on a batch; targets use the target actor and critics.
  /// Returns the mean pre-step loss over agents.
  double critic_update(const Batch& batch, double* grad_norm = nullptr);
  /// Actor ascent step along the critic's action gradient. Returns the
  /// applied gradient norm.
  double actor_update(const Batch& batch);
  void update_targets();

  /// Current actor as a policy snapshot.
  std::shared_ptr<const Policy> policy() const;
  std::shared_ptr<const Policy> target_policy() const;

  const RawPolicyParams& raw() const { return raw_; }
  const std::vector<FeedForwardNet>& actor_nets() const { return actor_nets_; }
  const TrainConfig& config() const { return cfg_; }
  ReplayBuffer& buffer() { return buffer_; }
  std::size_t episodes_run() const { return episode_; }

  /// Batched actions of the current or target actor, n x B.
  Eigen::MatrixXd actions(const Eigen::MatrixXd& v, bool target) const;

 private:
  struct Critic {
    FeedForwardNet net;
    FeedForwardNet target;
    std::unique_ptr<Optimizer> opt;
  };

  std::unique_ptr<Optimizer> make_optimizer(std::size_t size, double lr) const;
  Eigen::MatrixXd critic_input(std::size_t agent, const Eigen::MatrixXd& v, const Eigen::MatrixXd& u) const;

  Eigen::MatrixXd X_;
  VoltageBand band_;
  TrainConfig cfg_;
  std::size_t n_;
  std::mt19937_64 rng_;
  ReplayBuffer buffer_;
  std::vector<Critic> critics_;
  RawPolicyParams raw_;
  RawPolicyParams target_raw_;
  std::unique_ptr<Optimizer> raw_opt_;
  std::vector<FeedForwardNet> actor_nets_;
  std::vector<FeedForwardNet> target_nets_;
  std::vector<std::unique_ptr<Optimizer>> net_opts_;
  std::size_t episode_ = 0;
};

struct TrainResult {
  std::shared_ptr<const Policy> policy;
  RawPolicyParams raw;                    ///< stacked-ReLU actors
  std::vector<FeedForwardNet> actor_nets;  ///< MLP actors
  std::vector<EpisodeLog> log;
};

using EpisodeCallback = std::function<void(std::size_t episode, const Policy& actor)>;

/// Full training run; `on_episode` sees every post-update actor iterate.
TrainResult train(const Eigen::MatrixXd& X, const VoltageBand& band, const TrainConfig& cfg,
                  const EpisodeCallback& on_episode = {});

}  // namespace voltstab
