#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>

namespace bbm {

// Identity of a random stream. Streams form a tree: every particle, trial,
// or purpose tag derives its own child stream, so pruning or reordering one
// particle never perturbs the randomness seen by any other.
struct RngStreamKey {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    friend bool operator==(const RngStreamKey&, const RngStreamKey&) = default;
};

namespace detail {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Stateless block function: 64 random bits for (key, counter).
inline std::uint64_t block(const RngStreamKey& k, std::uint64_t ctr) {
    std::uint64_t a = mix64(k.lo ^ mix64(ctr));
    std::uint64_t b = mix64(k.hi + 0xD1B54A32D192ED03ULL * ctr);
    return mix64(a ^ (b << 1) ^ (b >> 7)) + b;
}

} // namespace detail

inline RngStreamKey make_root_key(std::uint64_t trial_seed) {
    return {detail::mix64(trial_seed ^ 0x42424D3153494D00ULL), // "BBM1SIM"
            detail::mix64(trial_seed + 0x5851F42D4C957F2DULL)};
}

// Deterministic child derivation; distinct indices give distinct keys.
inline RngStreamKey derive_stream(const RngStreamKey& parent, std::uint64_t child_index) {
    std::uint64_t a = detail::mix64(parent.lo ^ detail::mix64(child_index + 1));
    std::uint64_t b = detail::mix64(parent.hi + 0x9E3779B97F4A7C15ULL * (child_index + 2));
    return {detail::mix64(a + (b ^ 0xA0761D6478BD642FULL)), detail::mix64(b ^ (a >> 3))};
}

// Reserved derivation indices so distinct purposes never collide with
// child-particle indices (particles use 0 and 1).
namespace stream_tag {
inline constexpr std::uint64_t kChild0 = 0;
inline constexpr std::uint64_t kChild1 = 1;
inline constexpr std::uint64_t kEdgeInterior = 0xED6E0001ULL;
inline constexpr std::uint64_t kTrialBase = 0x7214AA00ULL;
inline constexpr std::uint64_t kInnerResample = 0x1BBE5000ULL;
inline constexpr std::uint64_t kSensitivity = 0x5E5E5E00ULL;
} // namespace stream_tag

// Inverse standard normal CDF (Wichura's AS241, double precision).
double normal_icdf(double p);

// Counter-based stream: value-like, copyable, no shared state.
class RngStream {
public:
    RngStream() = default;
    explicit RngStream(RngStreamKey key) : key_(key) {}

    const RngStreamKey& key() const { return key_; }
    std::uint64_t counter() const { return ctr_; }
    void set_counter(std::uint64_t c) { ctr_ = c; }

    std::uint64_t next_u64() { return detail::block(key_, ctr_++); }

    // uniform on (0,1), never exactly 0 or 1
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_gaussian() { return normal_icdf(next_uniform()); }

    double next_exponential() { return -std::log(next_uniform()); }

private:
    RngStreamKey key_;
    std::uint64_t ctr_ = 0;
};

inline double sample_gaussian(RngStream& stream, double mean, double variance) {
    if (!(variance >= 0.0))
        throw std::invalid_argument("sample_gaussian: variance must be >= 0");
    if (variance == 0.0) return mean;
    return mean + std::sqrt(variance) * stream.next_gaussian();
}

// One interior point of a Brownian bridge from (0, a) to (gamma, y):
// mean a + (r/gamma)(y-a), variance r(gamma-r)/gamma.
inline double sample_bridge_interior(RngStream& stream, double a, double y,
                                     double gamma, double r) {
    if (!(r > 0.0 && r < gamma))
        throw std::invalid_argument("sample_bridge_interior: need 0 < r < gamma");
    double mean = a + (r / gamma) * (y - a);
    double var = r * (gamma - r) / gamma;
    return sample_gaussian(stream, mean, var);
}

} // namespace bbm
