#pragma once

#include <cstddef>
#include <vector>

#include "msrl/error.hpp"
#include "msrl/rlenv.hpp"
#include "msrl/rng.hpp"

namespace msrl {

struct Transition {
  StateVector state;
  std::size_t action = 0;
  double reward = 0.0;
  StateVector next_state;
  bool terminal = false;
};

/// Fixed-capacity FIFO ring of transitions; pushing into a full buffer
/// overwrites the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw Error(ErrorCode::InvalidSpec, "replay capacity must be positive");
    storage_.reserve(capacity_);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return storage_.size(); }
  bool empty() const { return storage_.empty(); }

  void push(Transition t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  /// i-th oldest stored transition.
  const Transition& operator[](std::size_t i) const {
    if (i >= storage_.size()) throw Error(ErrorCode::IndexOutOfRange, "replay index out of range");
    const std::size_t start = storage_.size() < capacity_ ? 0 : cursor_;
    return storage_[(start + i) % capacity_];
  }

  /// Uniform sample with replacement; returns pointers into the buffer.
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const {
    if (storage_.empty()) throw Error(ErrorCode::EmptySample, "replay buffer is empty");
    std::vector<const Transition*> out(batch);
    for (auto& p : out) p = &storage_[rng.below(storage_.size())];
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t cursor_ = 0;
};

}  // namespace msrl
