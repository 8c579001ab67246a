#include "voltstab/ddpg.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "voltstab/error.hpp"
#include "voltstab/text_format.hpp"

namespace voltstab {

std::string to_string(AgentScope scope) { return scope == AgentScope::PerBus ? "per_bus" : "joint"; }
std::string to_string(ActorKind kind) { return kind == ActorKind::StackedRelu ? "stacked_relu" : "mlp"; }
std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "sgd"; }

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma", "must lie in [0, 1]");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ValidationError("learning rate", "must be positive");
  if (!(noise_std >= 0.0) || !(noise_clip >= 0.0)) throw ValidationError("noise", "must be nonnegative");
  if (batch == 0) throw ValidationError("batch", "must be positive");
  if (batch > capacity) throw ValidationError("batch", "exceeds replay capacity");
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("tau", "must lie in (0, 1]");
  if (episode_length == 0) throw ValidationError("episode_length", "must be positive");
  if (hidden == 0) throw ValidationError("hidden", "must be positive");
  if (!(dt > 0.0)) throw ValidationError("dt", "must be positive");
  if (!(u_scale > 0.0) || !(v_scaling.scale > 0.0)) throw ValidationError("scaling", "must be positive");
  if (!(init_slope > constraint.eps)) throw ValidationError("init_slope", "must exceed eps");
  constraint.validate();
  cost.validate();
  ranges.validate();
}

TrainConfig TrainConfig::benchmark_preset() {
  TrainConfig cfg;
  cfg.dt = 1.0;
  cfg.scope = AgentScope::Joint;
  cfg.actor_lr = 1e-3;
  // ln(sqrt(n) * 0.05 / 1e-3) / (lambda_min(X) * dt * 100) on the 5-bus feeder:
  // any slope above this reaches the band within 100 steps
  cfg.constraint.eps = 1.9;
  cfg.init_slope = 2.2;
  return cfg;
}

namespace {

using Setter = std::function<void(TrainConfig&, const std::string&)>;

double to_double(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double x = std::stod(s, &used);
    if (used == s.size()) return x;
  } catch (const std::logic_error&) {
  }
  throw ParseError("config key '" + key + "': expected a number, got '" + s + "'");
}

std::uint64_t to_count(const std::string& key, const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError("config key '" + key + "': expected a nonnegative integer, got '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::logic_error&) {
    throw ParseError("config key '" + key + "': integer out of range");
  }
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ParseError("config key '" + key + "': expected true or false, got '" + s + "'");
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"gamma", [](TrainConfig& c, const std::string& s) { c.gamma = to_double("gamma", s); }},
      {"actor_lr", [](TrainConfig& c, const std::string& s) { c.actor_lr = to_double("actor_lr", s); }},
      {"critic_lr", [](TrainConfig& c, const std::string& s) { c.critic_lr = to_double("critic_lr", s); }},
      {"noise_std", [](TrainConfig& c, const std::string& s) { c.noise_std = to_double("noise_std", s); }},
      {"noise_clip", [](TrainConfig& c, const std::string& s) { c.noise_clip = to_double("noise_clip", s); }},
      {"batch", [](TrainConfig& c, const std::string& s) { c.batch = to_count("batch", s); }},
      {"tau", [](TrainConfig& c, const std::string& s) { c.tau = to_double("tau", s); }},
      {"episodes", [](TrainConfig& c, const std::string& s) { c.episodes = to_count("episodes", s); }},
      {"episode_length",
       [](TrainConfig& c, const std::string& s) { c.episode_length = to_count("episode_length", s); }},
      {"updates_per_episode",
       [](TrainConfig& c, const std::string& s) { c.updates_per_episode = to_count("updates_per_episode", s); }},
      {"seed", [](TrainConfig& c, const std::string& s) { c.seed = to_count("seed", s); }},
      {"agent_scope",
       [](TrainConfig& c, const std::string& s) {
         if (s == "per_bus") c.scope = AgentScope::PerBus;
         else if (s == "joint") c.scope = AgentScope::Joint;
         else throw ParseError("config key 'agent_scope': expected per_bus or joint");
       }},
      {"actor",
       [](TrainConfig& c, const std::string& s) {
         if (s == "stacked_relu") c.actor = ActorKind::StackedRelu;
         else if (s == "mlp") c.actor = ActorKind::Mlp;
         else throw ParseError("config key 'actor': expected stacked_relu or mlp");
       }},
      {"optimizer",
       [](TrainConfig& c, const std::string& s) {
         if (s == "adam") c.optimizer = OptimizerKind::Adam;
         else if (s == "sgd") c.optimizer = OptimizerKind::Sgd;
         else throw ParseError("config key 'optimizer': expected adam or sgd");
       }},
      {"capacity", [](TrainConfig& c, const std::string& s) { c.capacity = to_count("capacity", s); }},
      {"hidden", [](TrainConfig& c, const std::string& s) { c.hidden = to_count("hidden", s); }},
      {"width", [](TrainConfig& c, const std::string& s) { c.constraint.width = to_count("width", s); }},
      {"eps", [](TrainConfig& c, const std::string& s) { c.constraint.eps = to_double("eps", s); }},
      {"slope_scale",
       [](TrainConfig& c, const std::string& s) { c.constraint.slope_scale = to_double("slope_scale", s); }},
      {"gap_scale", [](TrainConfig& c, const std::string& s) { c.constraint.gap_scale = to_double("gap_scale", s); }},
      {"init_slope", [](TrainConfig& c, const std::string& s) { c.init_slope = to_double("init_slope", s); }},
      {"dt", [](TrainConfig& c, const std::string& s) { c.dt = to_double("dt", s); }},
      {"eta1", [](TrainConfig& c, const std::string& s) { c.cost.eta1 = to_double("eta1", s); }},
      {"eta2", [](TrainConfig& c, const std::string& s) { c.cost.eta2 = to_double("eta2", s); }},
      {"v_center", [](TrainConfig& c, const std::string& s) { c.v_scaling.center = to_double("v_center", s); }},
      {"v_scale", [](TrainConfig& c, const std::string& s) { c.v_scaling.scale = to_double("v_scale", s); }},
      {"u_scale", [](TrainConfig& c, const std::string& s) { c.u_scale = to_double("u_scale", s); }},
      {"high_lo", [](TrainConfig& c, const std::string& s) { c.ranges.high.lo = to_double("high_lo", s); }},
      {"high_hi", [](TrainConfig& c, const std::string& s) { c.ranges.high.hi = to_double("high_hi", s); }},
      {"low_lo", [](TrainConfig& c, const std::string& s) { c.ranges.low.lo = to_double("low_lo", s); }},
      {"low_hi", [](TrainConfig& c, const std::string& s) { c.ranges.low.hi = to_double("low_hi", s); }},
      {"nominal_lo", [](TrainConfig& c, const std::string& s) { c.ranges.nominal.lo = to_double("nominal_lo", s); }},
      {"nominal_hi", [](TrainConfig& c, const std::string& s) { c.ranges.nominal.hi = to_double("nominal_hi", s); }},
      {"violation_probability",
       [](TrainConfig& c, const std::string& s) {
         c.ranges.violation_probability = to_double("violation_probability", s);
       }},
      {"record_wall_time",
       [](TrainConfig& c, const std::string& s) { c.record_wall_time = to_bool("record_wall_time", s); }},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string TrainConfig::to_kv() const {
  std::ostringstream out;
  auto kv = [&out](const char* key, const std::string& value) { out << key << " = " << value << "\n"; };
  auto num = [](double x) { return format_real(x); };
  kv("gamma", num(gamma));
  kv("actor_lr", num(actor_lr));
  kv("critic_lr", num(critic_lr));
  kv("noise_std", num(noise_std));
  kv("noise_clip", num(noise_clip));
  kv("batch", std::to_string(batch));
  kv("tau", num(tau));
  kv("episodes", std::to_string(episodes));
  kv("episode_length", std::to_string(episode_length));
  kv("updates_per_episode", std::to_string(updates_per_episode));
  kv("seed", std::to_string(seed));
  kv("agent_scope", to_string(scope));
  kv("actor", to_string(actor));
  kv("optimizer", to_string(optimizer));
  kv("capacity", std::to_string(capacity));
  kv("hidden", std::to_string(hidden));
  kv("width", std::to_string(constraint.width));
  kv("eps", num(constraint.eps));
  kv("slope_scale", num(constraint.slope_scale));
  kv("gap_scale", num(constraint.gap_scale));
  kv("init_slope", num(init_slope));
  kv("dt", num(dt));
  kv("eta1", num(cost.eta1));
  kv("eta2", num(cost.eta2));
  kv("v_center", num(v_scaling.center));
  kv("v_scale", num(v_scaling.scale));
  kv("u_scale", num(u_scale));
  kv("high_lo", num(ranges.high.lo));
  kv("high_hi", num(ranges.high.hi));
  kv("low_lo", num(ranges.low.lo));
  kv("low_hi", num(ranges.low.hi));
  kv("nominal_lo", num(ranges.nominal.lo));
  kv("nominal_hi", num(ranges.nominal.hi));
  kv("violation_probability", num(ranges.violation_probability));
  kv("record_wall_time", record_wall_time ? "true" : "false");
  return out.str();
}

TrainConfig TrainConfig::from_kv(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second(cfg, value);
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) { return from_kv(read_text_file(path)); }

std::string TrainConfig::canonical_json() const {
  nlohmann::json j = nlohmann::json::object();
  std::istringstream in(to_kv());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j.dump();
}

std::string training_log_csv(const std::vector<EpisodeLog>& log) {
  std::ostringstream out;
  out << "episode,return,td_loss_mean,actor_grad_norm,critic_grad_norm,diverged,wall_ms\n";
  for (const EpisodeLog& e : log) {
    out << e.episode << "," << format_real(e.ret) << "," << format_real(e.td_loss_mean) << ","
        << format_real(e.actor_grad_norm) << "," << format_real(e.critic_grad_norm) << "," << (e.diverged ? 1 : 0)
        << "," << format_real(e.wall_ms) << "\n";
  }
  return out.str();
}

Batch Batch::gather(const std::vector<const Transition*>& items) {
  if (items.empty()) throw ValidationError("batch", "empty");
  const Eigen::Index n = items.front()->v.size();
  const auto b = static_cast<Eigen::Index>(items.size());
  Batch out{Eigen::MatrixXd(n, b), Eigen::MatrixXd(n, b), Eigen::MatrixXd(n, b), Eigen::MatrixXd(n, b),
            Eigen::VectorXd(b)};
  for (Eigen::Index k = 0; k < b; ++k) {
    const Transition& t = *items[static_cast<std::size_t>(k)];
    out.v.col(k) = t.v;
    out.u.col(k) = t.u;
    out.reward.col(k) = t.reward;
    out.v_next.col(k) = t.v_next;
    out.done(k) = t.terminal ? 1.0 : 0.0;
  }
  return out;
}

double regression_step(FeedForwardNet& critic, Optimizer& opt, const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y,
                       double* grad_norm) {
  if (critic.output_size() != 1 || y.size() != x.cols()) throw DimensionError("regression_step: shape mismatch");
  FeedForwardNet::Tape tape;
  const Eigen::MatrixXd q = critic.forward(x, tape);
  const Eigen::RowVectorXd err = q.row(0) - y;
  const double b = static_cast<double>(x.cols());
  const double loss = err.squaredNorm() / b;
  if (!std::isfinite(loss)) throw DivergenceError("training halted: non-finite TD loss");
  const Eigen::VectorXd grad = critic.backward(tape, (2.0 / b) * err).flat();
  if (grad_norm != nullptr) *grad_norm = grad.norm();
  Eigen::VectorXd params = critic.parameters();
  opt.step(params, grad);
  critic.set_parameters(params);
  return loss;
}

Eigen::VectorXd stable_actor_gradient(const RawPolicyParams& raw, const VoltageBand& band,
                                      const ConstraintConfig& cfg, const Eigen::MatrixXd& v,
                                      const Eigen::MatrixXd& dq_du) {
  if (v.rows() != static_cast<Eigen::Index>(raw.buses) || dq_du.rows() != v.rows() || dq_du.cols() != v.cols()) {
    throw DimensionError("stable_actor_gradient: shape mismatch");
  }
  const std::vector<StackedReluParams> params = constrain(raw, band, cfg);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(raw.theta.size());
  const double inv_b = 1.0 / static_cast<double>(v.cols());
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    for (std::size_t i = 0; i < raw.buses; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      accumulate_param_grad(raw, params[i], i, v(r, k), cfg, dq_du(r, k) * inv_b, grad);
    }
  }
  return grad;
}

Eigen::VectorXd mlp_actor_gradient(const FeedForwardNet& net, const InputScaling& scaling,
                                   const Eigen::RowVectorXd& v, const Eigen::RowVectorXd& dq_du) {
  if (v.size() != dq_du.size()) throw DimensionError("mlp_actor_gradient: shape mismatch");
  FeedForwardNet::Tape tape;
  net.forward((v.array() - scaling.center).matrix() / scaling.scale, tape);
  return net.backward(tape, dq_du / static_cast<double>(v.size())).flat();
}

DdpgTrainer::DdpgTrainer(Eigen::MatrixXd X, VoltageBand band, TrainConfig cfg)
    : X_(std::move(X)), band_(std::move(band)), cfg_(std::move(cfg)), n_(band_.size()), rng_(cfg_.seed),
      buffer_(cfg_.capacity, cfg_.seed ^ 0x9e3779b97f4a7c15ULL) {
  cfg_.validate();
  if (n_ == 0 || static_cast<std::size_t>(X_.rows()) != n_ || X_.cols() != X_.rows()) {
    throw DimensionError("trainer: X and band sizes disagree");
  }
  const std::size_t agents = cfg_.scope == AgentScope::PerBus ? n_ : 1;
  const std::size_t in = cfg_.scope == AgentScope::PerBus ? 2 : 2 * n_;
  for (std::size_t a = 0; a < agents; ++a) {
    Critic c;
    c.net = FeedForwardNet::random({in, cfg_.hidden, cfg_.hidden, 1}, rng_);
    c.target = c.net;
    c.opt = make_optimizer(c.net.parameter_count(), cfg_.critic_lr);
    critics_.push_back(std::move(c));
  }
  if (cfg_.actor == ActorKind::StackedRelu) {
    raw_ = RawPolicyParams(n_, cfg_.constraint.width);
    const double a0 = raw_for_slope(cfg_.init_slope, cfg_.constraint);
    for (std::size_t i = 0; i < n_; ++i) {
      raw_.slopes_plus(i).setConstant(a0);
      raw_.slopes_minus(i).setConstant(a0);
    }
    target_raw_ = raw_;
    raw_opt_ = make_optimizer(static_cast<std::size_t>(raw_.theta.size()), cfg_.actor_lr);
  } else {
    for (std::size_t i = 0; i < n_; ++i) {
      actor_nets_.push_back(FeedForwardNet::random({1, cfg_.hidden, cfg_.hidden, 1}, rng_));
      net_opts_.push_back(make_optimizer(actor_nets_.back().parameter_count(), cfg_.actor_lr));
    }
    target_nets_ = actor_nets_;
  }
}

std::unique_ptr<Optimizer> DdpgTrainer::make_optimizer(std::size_t size, double lr) const {
  if (cfg_.optimizer == OptimizerKind::Adam) return std::make_unique<Adam>(size, lr);
  return std::make_unique<Sgd>(lr);
}

std::shared_ptr<const Policy> DdpgTrainer::policy() const {
  if (cfg_.actor == ActorKind::StackedRelu) {
    return std::make_shared<StackedReluPolicy>(constrain(raw_, band_, cfg_.constraint));
  }
  return std::make_shared<MlpPolicy>(actor_nets_, cfg_.v_scaling);
}

std::shared_ptr<const Policy> DdpgTrainer::target_policy() const {
  if (cfg_.actor == ActorKind::StackedRelu) {
    return std::make_shared<StackedReluPolicy>(constrain(target_raw_, band_, cfg_.constraint));
  }
  return std::make_shared<MlpPolicy>(target_nets_, cfg_.v_scaling);
}

Eigen::MatrixXd DdpgTrainer::actions(const Eigen::MatrixXd& v, bool target) const {
  Eigen::MatrixXd u(v.rows(), v.cols());
  if (cfg_.actor == ActorKind::StackedRelu) {
    const std::vector<StackedReluParams> p = constrain(target ? target_raw_ : raw_, band_, cfg_.constraint);
    for (Eigen::Index k = 0; k < v.cols(); ++k) {
      for (Eigen::Index i = 0; i < v.rows(); ++i) u(i, k) = policy_eval(p[static_cast<std::size_t>(i)], v(i, k));
    }
    return u;
  }
  const auto& nets = target ? target_nets_ : actor_nets_;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const Eigen::MatrixXd x = (v.row(i).array() - cfg_.v_scaling.center).matrix() / cfg_.v_scaling.scale;
    u.row(i) = nets[static_cast<std::size_t>(i)].forward(x);
  }
  return u;
}

Eigen::MatrixXd DdpgTrainer::critic_input(std::size_t agent, const Eigen::MatrixXd& v, const Eigen::MatrixXd& u) const {
  const double c = cfg_.v_scaling.center;
  const double s = cfg_.v_scaling.scale;
  if (cfg_.scope == AgentScope::PerBus) {
    const auto i = static_cast<Eigen::Index>(agent);
    Eigen::MatrixXd x(2, v.cols());
    x.row(0) = (v.row(i).array() - c).matrix() / s;
    x.row(1) = u.row(i) / cfg_.u_scale;
    return x;
  }
  Eigen::MatrixXd x(2 * v.rows(), v.cols());
  x.topRows(v.rows()) = (v.array() - c).matrix() / s;
  x.bottomRows(v.rows()) = u / cfg_.u_scale;
  return x;
}

double DdpgTrainer::critic_update(const Batch& batch, double* grad_norm) {
  const Eigen::MatrixXd u_next = actions(batch.v_next, true);
  const Eigen::RowVectorXd live = (1.0 - batch.done.array()).matrix().transpose();
  double loss = 0.0;
  double norm_sq = 0.0;
  for (std::size_t a = 0; a < critics_.size(); ++a) {
    Critic& c = critics_[a];
    // Every agent learns the shared network-wide reward.
    const Eigen::RowVectorXd r = batch.reward.colwise().sum();
    const Eigen::RowVectorXd q_next = c.target.forward(critic_input(a, batch.v_next, u_next)).row(0);
    const Eigen::RowVectorXd y = r + cfg_.gamma * live.cwiseProduct(q_next);
    double g = 0.0;
    loss += regression_step(c.net, *c.opt, critic_input(a, batch.v, batch.u), y, &g);
    norm_sq += g * g;
  }
  if (grad_norm != nullptr) *grad_norm = std::sqrt(norm_sq);
  return loss / static_cast<double>(critics_.size());
}

double DdpgTrainer::actor_update(const Batch& batch) {
  const Eigen::MatrixXd u = actions(batch.v, false);
  Eigen::MatrixXd dq_du(u.rows(), u.cols());
  for (std::size_t a = 0; a < critics_.size(); ++a) {
    FeedForwardNet::Tape tape;
    const FeedForwardNet& net = critics_[a].net;
    net.forward(critic_input(a, batch.v, u), tape);
    const Eigen::MatrixXd d_in = net.backward(tape, Eigen::MatrixXd::Ones(1, u.cols())).d_input;
    if (cfg_.scope == AgentScope::PerBus) {
      dq_du.row(static_cast<Eigen::Index>(a)) = d_in.row(1) / cfg_.u_scale;
    } else {
      dq_du = d_in.bottomRows(u.rows()) / cfg_.u_scale;
    }
  }
  if (cfg_.actor == ActorKind::StackedRelu) {
    const Eigen::VectorXd grad = stable_actor_gradient(raw_, band_, cfg_.constraint, batch.v, dq_du);
    raw_opt_->step(raw_.theta, grad, true);
    return grad.norm();
  }
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd grad = mlp_actor_gradient(actor_nets_[i], cfg_.v_scaling, batch.v.row(r), dq_du.row(r));
    Eigen::VectorXd params = actor_nets_[i].parameters();
    net_opts_[i]->step(params, grad, true);
    actor_nets_[i].set_parameters(params);
    norm_sq += grad.squaredNorm();
  }
  return std::sqrt(norm_sq);
}

void DdpgTrainer::update_targets() {
  for (Critic& c : critics_) soft_update(c.target, c.net, cfg_.tau);
  if (cfg_.actor == ActorKind::StackedRelu) {
    soft_update(target_raw_.theta, raw_.theta, cfg_.tau);
  } else {
    for (std::size_t i = 0; i < n_; ++i) soft_update(target_nets_[i], actor_nets_[i], cfg_.tau);
  }
}

EpisodeLog DdpgTrainer::run_episode() {
  const auto start = std::chrono::steady_clock::now();
  EpisodeLog log;
  log.episode = episode_;
  constexpr ScenarioKind kKinds[] = {ScenarioKind::HighVoltage, ScenarioKind::LowVoltage, ScenarioKind::Mixed};
  ScenarioConfig sc = cfg_.ranges;
  sc.kind = kKinds[episode_ % 3];
  const Scenario scenario = sample_scenario(sc, n_, rng_);

  const std::shared_ptr<const Policy> actor = policy();
  std::normal_distribution<double> noise(0.0, cfg_.noise_std);
  const double clip = cfg_.noise_clip * cfg_.noise_std;
  constexpr double kBlowup = 10.0;
  GridState state(X_, scenario.q0, scenario.v_env);
  for (std::size_t t = 0; t < cfg_.episode_length; ++t) {
    Eigen::VectorXd u = (*actor)(state.v());
    for (auto& x : u) x += cfg_.noise_std > 0.0 ? std::clamp(noise(rng_), -clip, clip) : 0.0;
    const Eigen::VectorXd cost = stage_cost_per_bus(state.v(), u, band_, cfg_.cost);
    GridState next = step(state, u, cfg_.dt, X_);
    const bool blown = !next.v().allFinite() || next.v().cwiseAbs().maxCoeff() > kBlowup;
    log.ret -= cost.sum();
    if (!u.allFinite() || !cost.allFinite()) {
      log.diverged = true;
      break;
    }
    buffer_.push({state.v(), u, -cost, blown ? state.v() : next.v(), blown});
    if (blown) {
      log.diverged = true;
      break;
    }
    state = std::move(next);
  }

  double td_sum = 0.0;
  double actor_norm = 0.0;
  double critic_norm = 0.0;
  std::size_t updates = 0;
  if (buffer_.size() >= cfg_.batch) {
    for (std::size_t k = 0; k < cfg_.updates_per_episode; ++k) {
      const Batch batch = Batch::gather(buffer_.sample(cfg_.batch));
      double g = 0.0;
      td_sum += critic_update(batch, &g);
      critic_norm += g;
      actor_norm += actor_update(batch);
      update_targets();
      ++updates;
    }
  }
  if (updates > 0) {
    const double m = static_cast<double>(updates);
    log.td_loss_mean = td_sum / m;
    log.actor_grad_norm = actor_norm / m;
    log.critic_grad_norm = critic_norm / m;
  }
  if (cfg_.record_wall_time) {
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  ++episode_;
  return log;
}

TrainResult train(const Eigen::MatrixXd& X, const VoltageBand& band, const TrainConfig& cfg,
                  const EpisodeCallback& on_episode) {
  DdpgTrainer trainer(X, band, cfg);
  TrainResult result;
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    result.log.push_back(trainer.run_episode());
    if (on_episode) on_episode(e, *trainer.policy());
  }
  result.policy = trainer.policy();
  result.raw = trainer.raw();
  result.actor_nets = trainer.actor_nets();
  return result;
}

}  // namespace voltstab
