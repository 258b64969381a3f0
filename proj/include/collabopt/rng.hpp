#pragma once

#include <array>
#include <cstdint>

namespace collabopt {

using Philox4x32Ctr = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

// Counter-based generator, 10 rounds.
Philox4x32Ctr philox4x32_10(Philox4x32Ctr ctr, Philox4x32Key key);

// 64 random bits -> double in (0, 1).
double uniform_open01(std::uint64_t bits);

enum class StreamDomain : std::uint32_t {
    Gradient = 0,
    Oracle = 1,
    WarmStart = 2,
};

// Identifies one independent substream. Every (seed, agent, step, domain)
// tuple maps to its own sequence, so draws never depend on evaluation order.
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint32_t agent = 0;
    std::uint64_t step = 0;
    StreamDomain domain = StreamDomain::Gradient;
};

// Sequence of standard normal draws (Box-Muller over Philox blocks).
class NormalStream {
public:
    explicit NormalStream(const StreamKey& key, bool antithetic = false);

    double next();

private:
    void refill();

    Philox4x32Ctr ctr_{};
    Philox4x32Key key_{};
    double buf_[2] = {0.0, 0.0};
    int avail_ = 0;
    double sign_ = 1.0;
};

}  // namespace collabopt
