#ifndef REGIONSOLVE_SAMPLING_HPP
#define REGIONSOLVE_SAMPLING_HPP

#include <cstdint>
#include <vector>

namespace regionsolve {

/// Radical-inverse (Halton) low-discrepancy sequence. Deterministic; a seed
/// only shifts the start index, so sample sets with the same seed are nested
/// as the count grows (larger runs never lose earlier points).
class HaltonSampler {
public:
    explicit HaltonSampler(int dims, std::uint64_t seed = 0)
        : dims_(dims), index_(1 + seed * 7919) {}

    /// Next point in [0,1)^dims.
    std::vector<double> next() {
        static const int bases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
        std::vector<double> p(static_cast<std::size_t>(dims_));
        for (int d = 0; d < dims_; ++d)
            p[static_cast<std::size_t>(d)] = radical_inverse(index_, bases[d % 10]);
        ++index_;
        return p;
    }

private:
    static double radical_inverse(std::uint64_t i, int base) {
        double inv = 1.0 / base, f = inv, x = 0.0;
        while (i > 0) {
            x += f * static_cast<double>(i % static_cast<std::uint64_t>(base));
            i /= static_cast<std::uint64_t>(base);
            f *= inv;
        }
        return x;
    }

    int dims_;
    std::uint64_t index_;
};

}  // namespace regionsolve

#endif
