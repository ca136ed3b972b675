#pragma once

#include <atomic>
#include <cstdint>

// Call counters for the soft-link code paths. The uniform-only baseline must
// leave all of them at zero.
namespace mixdec::instrumentation {

struct Counters {
  std::atomic<std::uint64_t> decay_builds{0};
  std::atomic<std::uint64_t> random_walks{0};
  std::atomic<std::uint64_t> mix_plans{0};
  std::atomic<std::uint64_t> mix_vectors{0};
  std::atomic<std::uint64_t> decay_draws{0};
  std::atomic<std::uint64_t> loss_m_calls{0};
  std::atomic<std::uint64_t> loss_d_calls{0};
  std::atomic<std::uint64_t> decay_fallbacks{0};  // MixDec plans with an empty decay set

  std::uint64_t total() const {
    return decay_builds + random_walks + mix_plans + mix_vectors + decay_draws + loss_m_calls +
           loss_d_calls + decay_fallbacks;
  }
  void reset() {
    decay_builds = random_walks = mix_plans = mix_vectors = decay_draws = loss_m_calls = loss_d_calls =
        decay_fallbacks = 0;
  }
};

inline Counters& counters() {
  static Counters c;
  return c;
}

}  // namespace mixdec::instrumentation
