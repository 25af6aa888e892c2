#ifndef RWCRE_PARALLEL_HPP
#define RWCRE_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace rwcre {

/// Worker count: explicit request, else RWCRE_WORKERS, else hardware threads.
inline unsigned resolve_workers(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RWCRE_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `count` independent replicas. `make_state()` builds per-worker
/// scratch; `body(state, index)` returns replica `index`'s result. Results
/// come back indexed by replica, so nothing downstream depends on which
/// worker ran what.
template <class R, class MakeState, class Body>
std::vector<R> run_replicas(std::uint64_t count, unsigned workers, MakeState&& make_state,
                            Body&& body) {
  std::vector<R> out(count);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(
                                                         std::max<std::uint64_t>(1, count))));
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    try {
      auto state = make_state();
      for (;;) {
        const std::uint64_t i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= count) break;
        out[i] = body(state, i);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(count);
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Like run_replicas, but also hands back every worker's final state so that
/// exact (integer) accumulators kept there can be merged by the caller.
template <class R, class State, class MakeState, class Body>
std::pair<std::vector<R>, std::vector<State>> run_replicas_stateful(std::uint64_t count,
                                                                     unsigned workers,
                                                                     MakeState&& make_state,
                                                                     Body&& body) {
  std::deque<State> states;  // stable addresses while workers start
  std::mutex states_mutex;
  struct Handle {
    State* state;
  };
  auto results = run_replicas<R>(
      count, workers,
      [&]() {
        std::lock_guard<std::mutex> lock(states_mutex);
        states.push_back(make_state());
        return Handle{&states.back()};
      },
      [&](Handle& h, std::uint64_t i) { return body(*h.state, i); });
  std::vector<State> merged;
  merged.reserve(states.size());
  for (auto& st : states) merged.push_back(std::move(st));
  return {std::move(results), std::move(merged)};
}

/// Pairwise summation over a fixed binary tree keyed by position.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  if (xs.size() <= 8) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace rwcre

#endif  // RWCRE_PARALLEL_HPP
