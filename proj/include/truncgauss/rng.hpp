#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace truncgauss {

// splitmix64 finalizer; used to turn (seed, stream indices) into well-mixed
// engine seeds so substreams derived from one master seed are independent.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic random stream. All randomness in the library flows through
// this wrapper: a mt19937_64 engine plus a Box-Muller normal generator, so
// identical seeds give bit-identical sequences on any conforming platform
// (std::normal_distribution is implementation-defined; this is not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    // Substream `stream` of stage `stage` under `master`. Counter-based:
    // no substream ever shares engine state with another.
    static Rng substream(std::uint64_t master, std::uint64_t stage, std::uint64_t stream = 0) {
        return Rng(mix64(master ^ mix64(stage + 0x51ed2701a9b6cc3bULL)) ^ mix64(stream));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; generates pairs and caches the spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // 1 - uniform() lies in (0, 1]; avoids log(0).
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace truncgauss
