#include "mqe/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace mqe {
namespace {
std::atomic<std::size_t> g_max_threads{1};
}

void set_max_threads(std::size_t threads) { g_max_threads.store(std::max<std::size_t>(threads, 1)); }

std::size_t max_threads() noexcept { return g_max_threads.load(); }

void parallel_for(std::size_t begin, std::size_t end, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& body) {
    if (end <= begin) return;
    const std::size_t n = end - begin;
    const std::size_t by_grain = std::max<std::size_t>(1, n / std::max<std::size_t>(min_chunk, 1));
    const std::size_t workers = std::min({max_threads(), by_grain, n});
    if (workers <= 1) {
        body(begin, end);
        return;
    }

    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::jthread> threads;
    threads.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    auto run = [&](std::size_t w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) return;
        try {
            body(lo, hi);
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(run, w);
    run(0);
    threads.clear();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace mqe
