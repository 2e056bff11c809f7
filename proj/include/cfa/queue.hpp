#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <utility>

namespace cfa {

// Bounded single-producer/single-consumer FIFO. Push blocks while full, pop
// blocks while empty; close() lets the consumer drain the remainder and then
// observe end-of-stream. The mutex/condvar handoff provides the required
// happens-before edge between a push and the matching pop.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

  // Returns false if the queue was closed before the item could be enqueued.
  bool push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    if (items_.size() > max_occupancy_) max_occupancy_ = items_.size();
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t max_occupancy() const {
    std::lock_guard lock(mutex_);
    return max_occupancy_;
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  std::size_t max_occupancy_ = 0;
  bool closed_ = false;
};

// Single-slot verifier-to-prover back channel. post() blocks while the slot
// is occupied, so duplicated feedback is delivered one message at a time.
template <class T>
class SingleSlot {
 public:
  bool post(T item) {
    std::unique_lock lock(mutex_);
    empty_.wait(lock, [&] { return !item_.has_value() || closed_; });
    if (closed_) return false;
    item_ = std::move(item);
    filled_.notify_one();
    return true;
  }

  // nullopt on timeout or close.
  std::optional<T> take_for(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    if (!filled_.wait_for(lock, timeout, [&] { return item_.has_value() || closed_; }))
      return std::nullopt;
    if (!item_.has_value()) return std::nullopt;
    std::optional<T> out = std::move(item_);
    item_.reset();
    empty_.notify_one();
    return out;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    filled_.notify_all();
    empty_.notify_all();
  }

 private:
  std::mutex mutex_;
  std::condition_variable filled_, empty_;
  std::optional<T> item_;
  bool closed_ = false;
};

}  // namespace cfa
