#include <collabopt/rng.hpp>

#include <cmath>
#include <numbers>

namespace collabopt {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32Ctr philox4x32_10(Philox4x32Ctr ctr, Philox4x32Key key) {
    for (int r = 0; r < 10; ++r) {
        if (r > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

double uniform_open01(std::uint64_t bits) {
    // 52 high bits plus half an ulp: largest value is 1 - 2^-53, still exact
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

NormalStream::NormalStream(const StreamKey& key, bool antithetic) {
    key_ = {static_cast<std::uint32_t>(key.seed), static_cast<std::uint32_t>(key.seed >> 32)};
    // word 0 counts blocks within the stream
    ctr_[0] = 0;
    ctr_[1] = key.agent;
    ctr_[2] = static_cast<std::uint32_t>(key.step);
    ctr_[3] = (static_cast<std::uint32_t>(key.step >> 32) & 0xFFFFu) |
              (static_cast<std::uint32_t>(key.domain) << 16);
    sign_ = antithetic ? -1.0 : 1.0;
}

void NormalStream::refill() {
    auto w = philox4x32_10(ctr_, key_);
    ++ctr_[0];
    std::uint64_t b0 = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
    std::uint64_t b1 = (static_cast<std::uint64_t>(w[2]) << 32) | w[3];
    double u1 = uniform_open01(b0);
    double u2 = uniform_open01(b1);
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 2.0 * std::numbers::pi * u2;
    buf_[0] = r * std::cos(th);
    buf_[1] = r * std::sin(th);
    avail_ = 2;
}

double NormalStream::next() {
    if (avail_ == 0) refill();
    double z = buf_[2 - avail_];
    --avail_;
    return sign_ * z;
}

}  // namespace collabopt
