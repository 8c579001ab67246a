#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace voltstab {

/// One closed-loop step. `reward` holds the per-bus rewards -c_i; the joint
/// reward is their sum. `terminal` marks a step that ended in divergence.
struct Transition {
  Eigen::VectorXd v;
  Eigen::VectorXd u;
  Eigen::VectorXd reward;
  Eigen::VectorXd v_next;
  bool terminal = false;
};

/// Fixed-capacity FIFO ring with seeded uniform sampling (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, std::uint64_t seed = 0);

  /// Throws ValidationError for non-finite entries.
  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// Oldest-first view index: at(0) is the oldest retained transition.
  const Transition& at(std::size_t k) const;

  /// Throws if fewer than `batch` transitions are stored.
  std::vector<const Transition*> sample(std::size_t batch);

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  ///< slot overwritten next once full
  std::vector<Transition> items_;
  std::mt19937_64 rng_;
};

}  // namespace voltstab
