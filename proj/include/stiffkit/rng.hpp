#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace stiffkit {

// Seeded RNG with hand-rolled distributions. The standard distributions are
// implementation-defined, which would break the bitwise reproducibility
// contract across standard libraries; these are pinned.
struct Rng {
    std::mt19937_64 engine;

    explicit Rng(std::uint64_t seed) : engine(seed) {}

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite
        double u1 = static_cast<double>((engine() >> 11) + 1) * 0x1.0p-53;
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // uniform integer in [0, n)
    std::uint64_t integer(std::uint64_t n) {
        // modulo bias is irrelevant at the sizes used here, but rejection is cheap
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = engine();
        while (v >= limit) v = engine();
        return v % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(integer(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace stiffkit
