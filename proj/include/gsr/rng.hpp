#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gsr {

// Portable seeded generator used for every split, shuffle and synthetic draw.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard distributions are implementation-defined, so the
// conversions below are spelled out here:
//   uniform01()   : (u >> 11) * 2^-53, a double in [0, 1)
//   below(n)      : rejection sampling on the top bits, unbiased in [0, n)
//   normal()      : Marsaglia polar method, the second variate is cached
//   shuffle(span) : Fisher-Yates from the back, swapping i with below(i + 1)
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    double uniform01();
    std::uint64_t below(std::uint64_t n);
    double normal();

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    // Identity permutation of [0, n) shuffled.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 engine_;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace gsr
