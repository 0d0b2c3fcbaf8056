#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace appusage {

// Deterministic PRNG (splitmix64 core). Standard-library distributions are
// implementation-defined, which would break byte-identical reruns across
// toolchains, so all randomness in the project goes through this.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

    // Box-Muller, one value per call (the pair's second half is discarded to
    // keep the stream position independent of call pattern)
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double rate = 1.0) {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return -std::log(u) / rate;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // independent substream for (seed, index) pairs; used for per-student
    // generation so parallelism cannot change output
    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        Rng mix(seed ^ (0xA0761D6478BD642FULL * (index + 1)));
        mix.next_u64();
        return mix;
    }

private:
    std::uint64_t state_;
};

}  // namespace appusage
