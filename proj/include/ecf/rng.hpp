#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ecf {

/// Deterministic random source.
///
/// The mt19937_64 engine is bit-exact across standard libraries, but the
/// standard distributions are not, so the uniform/gaussian transforms are
/// done by hand here. Two runs with the same seed produce the same stream
/// on any conforming platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Standard normal via Box-Muller; pairs are cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform01(); // (0, 1], keeps log finite
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t next_below(std::uint64_t bound) { return engine_() % bound; }

private:
    static constexpr double pi = 3.14159265358979323846;

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// In-place Fisher-Yates shuffle driven by Rng (std::shuffle is
/// implementation-defined, this is not).
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace ecf
