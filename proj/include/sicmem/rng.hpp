#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Seeded RNG with hand-rolled distributions. std::*_distribution output is
// implementation-defined, which would break the byte-identical artifact
// contract across standard libraries, so all sampling goes through the
// helpers below.

namespace sicmem {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Derive an independent stream, e.g. one per ensemble member.
    static std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
        // splitmix64 on seed ^ golden-ratio-scrambled index
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t raw() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // standard normal via polar Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    // Poisson by inversion (small mean) or normal approximation rounding
    // for large mean; deterministic given the uniform stream.
    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 64.0) {
            const double limit = std::exp(-mean);
            double prod = uniform();
            int k = 0;
            while (prod > limit) {
                prod *= uniform();
                ++k;
            }
            return k;
        }
        const double x = mean + std::sqrt(mean) * normal();
        return x < 0.0 ? 0 : static_cast<int>(std::llround(x));
    }

    // uniform point inside a sphere of given radius, centered at the origin
    void in_sphere(double radius, double out[3]) {
        // direction from a normal 3-vector, radius from u^(1/3)
        double n0, n1, n2, norm2;
        do {
            n0 = normal();
            n1 = normal();
            n2 = normal();
            norm2 = n0 * n0 + n1 * n1 + n2 * n2;
        } while (norm2 == 0.0);
        const double r = radius * std::cbrt(uniform()) / std::sqrt(norm2);
        out[0] = r * n0;
        out[1] = r * n1;
        out[2] = r * n2;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace sicmem
