#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <random>
#include <thread>
#include <vector>

#include "enskog/vec3.hpp"

namespace enskog {

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    // 53-bit uniform on [0,1), platform independent
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    Vec3 unit_vector();
    Vec3 in_ball(double radius);

private:
    std::mt19937_64 engine_;
};

// Number of worker threads: hardware concurrency capped by ENSKOG_THREADS.
int thread_count();

// Accumulates samples of a scalar estimator.
struct MeanAccumulator {
    double sum = 0, sum_sq = 0;
    long count = 0;
    void add(double x) { sum += x; sum_sq += x * x; ++count; }
    void merge(const MeanAccumulator& o) { sum += o.sum; sum_sq += o.sum_sq; count += o.count; }
    double mean() const { return count ? sum / count : 0.0; }
    double std_error() const {
        if (count < 2) return 0.0;
        double m = mean();
        double var = (sum_sq / count - m * m) * count / (count - 1.0);
        return var > 0 ? std::sqrt(var / count) : 0.0;
    }
};

constexpr int kDefaultStreams = 64;

// Runs fn(stream, rng) for every stream; results are independent of the thread count.
template <class T, class Fn>
std::vector<T> run_streams(int streams, std::uint64_t seed, Fn fn) {
    std::vector<T> out(streams);
    int workers = std::min(thread_count(), streams);
    auto work = [&](int first) {
        for (int s = first; s < streams; s += workers) {
            Rng rng(stream_seed(seed, static_cast<std::uint64_t>(s)));
            out[s] = fn(s, rng);
        }
    };
    if (workers <= 1) {
        work(0);
        return out;
    }
    // exceptions are rethrown on the calling thread, first worker first
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                work(w);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

// Mean of a per-sample estimator over total samples split into streams.
template <class Fn>
MeanAccumulator mc_mean(long samples, std::uint64_t seed, Fn sample, int streams = kDefaultStreams) {
    auto parts = run_streams<MeanAccumulator>(streams, seed, [&](int s, Rng& rng) {
        MeanAccumulator acc;
        long n = samples / streams + (s < samples % streams ? 1 : 0);
        for (long i = 0; i < n; ++i) acc.add(sample(rng));
        return acc;
    });
    MeanAccumulator total;
    for (auto& p : parts) total.merge(p);
    return total;
}

}  // namespace enskog
