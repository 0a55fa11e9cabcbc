#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace treebridge {

// xoshiro256++ with splitmix64 seeding. We avoid <random> distributions so
// that sampled values are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in (0,1], safe as a log() argument
  double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; the spare is cached stream-locally
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u = uniform_pos();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stream tags keep independently derived RNG streams from colliding: every
// sampling site hashes (root seed, tag, indices...) into a fresh stream, so
// results do not depend on thread scheduling or call interleaving.
enum class StreamTag : uint64_t {
  data_train = 0x11,
  data_eval = 0x12,
  init_coupling = 0x21,
  net_init = 0x31,
  train_edge = 0x32,
  pool_sim = 0x41,
  eval_sim = 0x42,
  oracle = 0x51,
  generic = 0x61,
};

inline uint64_t mix_tag(uint64_t h, uint64_t tag) {
  h ^= tag + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  uint64_t x = h;
  return Rng::splitmix64(x);
}

inline Rng derive_stream(uint64_t root_seed, StreamTag tag,
                         std::initializer_list<uint64_t> indices = {}) {
  uint64_t h = mix_tag(root_seed, static_cast<uint64_t>(tag));
  for (uint64_t ix : indices) h = mix_tag(h, ix + 1);
  return Rng(h);
}

}  // namespace treebridge
