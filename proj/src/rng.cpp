#include "enskog/rng.hpp"

#include <algorithm>
#include <cstdlib>
#include <numbers>
#include <string>

namespace enskog {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed ^ (stream * 0xD1B54A32D192ED03ULL);
    splitmix64(state);
    return splitmix64(state);
}

Vec3 Rng::unit_vector() {
    double z = uniform(-1.0, 1.0);
    double phi = uniform(0.0, 2.0 * std::numbers::pi);
    double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(phi), s * std::sin(phi), z};
}

Vec3 Rng::in_ball(double radius) {
    return radius * std::cbrt(uniform()) * unit_vector();
}

int thread_count() {
    int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("ENSKOG_THREADS")) {
        try {
            int cap = std::stoi(env);
            if (cap > 0) hw = std::min(hw, cap);
        } catch (...) {
        }
    }
    return hw;
}

}  // namespace enskog
