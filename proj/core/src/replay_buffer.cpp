#include "voltstab/replay_buffer.hpp"

#include "voltstab/error.hpp"

namespace voltstab {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  if (capacity == 0) throw ValidationError("capacity", "must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (!t.v.allFinite() || !t.u.allFinite() || !t.reward.allFinite() || !t.v_next.allFinite()) {
    throw ValidationError("transition", "non-finite entry");
  }
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t k) const {
  if (k >= items_.size()) throw DimensionError("replay index out of range");
  return items_[(head_ + k) % items_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch) {
  if (batch == 0) throw ValidationError("batch", "must be positive");
  if (items_.size() < batch) {
    throw ValidationError("batch", "buffer holds " + std::to_string(items_.size()) + " transitions, need " +
                                       std::to_string(batch));
  }
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Transition*> out(batch);
  for (auto& p : out) p = &items_[pick(rng_)];
  return out;
}

}  // namespace voltstab
