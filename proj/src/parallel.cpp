#include "runet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace runet {
namespace {

std::atomic<std::size_t> g_override{0};

std::size_t default_workers() {
    static const std::size_t workers = [] {
        if (const char* env = std::getenv("RUNET_THREADS")) {
            try {
                long v = std::stol(env);
                if (v > 0) return static_cast<std::size_t>(v);
            } catch (const std::exception&) {
            }
        }
        return std::max<std::size_t>(1, std::thread::hardware_concurrency());
    }();
    return workers;
}

}  // namespace

std::size_t worker_count() {
    std::size_t o = g_override.load();
    return o ? o : default_workers();
}

void set_worker_count(std::size_t workers) { g_override.store(workers); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run_range = [&](std::size_t begin, std::size_t end) {
        try {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
        std::size_t begin = w * chunk;
        std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back(run_range, begin, end);
    }
    run_range(0, std::min(n, chunk));
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace runet
