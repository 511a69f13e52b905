#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace forge {

// Seeded generator with distribution helpers whose output does not depend
// on the standard library implementation, so stores are reproducible
// across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform over the inclusive range [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Uniform index in [0, n).
    std::size_t index(std::size_t n);

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform01();

    template <class T>
    const T& pick(std::span<const T> items) {
        return items[index(items.size())];
    }

private:
    std::mt19937_64 engine_;
};

// Derives an independent stream seed from a global seed and a label path,
// e.g. derive_seed(seed, "perturb", "req-3/s2").
std::uint64_t derive_seed(std::uint64_t global, std::string_view stage,
                          std::string_view key = {});

}  // namespace forge
