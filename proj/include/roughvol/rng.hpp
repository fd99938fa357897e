#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace roughvol {

// splitmix64, used only to derive well-separated seeds from a master seed
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// deterministic sub-stream seed: master -> stream `id`
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t id) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s = a ^ (id * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull);
  return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t id1,
                                 std::uint64_t id2) {
  return derive_seed(derive_seed(master, id1), id2);
}

// mt19937_64 stream with explicit uniform/normal mappings so that output is
// identical across standard library implementations
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform on (0,1]
  double uniform() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  // standard normal via Box-Muller, one spare cached
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace roughvol
