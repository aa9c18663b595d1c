#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace csbp {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key);

enum class StreamRole : std::uint32_t { jumps = 0, marks = 1, gaussian = 2, aux = 3 };

// Counter-based stream. The counter is (block, substream, replication, role)
// and the key is the 64-bit master seed, so a replication's draws do not
// depend on which worker runs it or in which order.
class PhiloxStream {
 public:
  using result_type = std::uint32_t;

  PhiloxStream(std::uint64_t seed, std::uint32_t replication, StreamRole role,
               std::uint32_t substream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  double uniform();  // open interval (0,1), 53 bits
  double exponential();
  double normal();

  std::uint64_t draws() const { return draws_; }

 private:
  void refill();

  PhiloxKey key_;
  PhiloxCounter ctr_;
  PhiloxCounter buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
  std::uint64_t draws_ = 0;
};

}  // namespace csbp
