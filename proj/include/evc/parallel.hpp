#pragma once

#include <cstddef>
#include <future>
#include <thread>
#include <vector>

namespace evc {

/// Runs fn(i) for i in [0, n_items). Work is split into contiguous
/// chunks across std::async tasks; each index must write only its own
/// output slot, which makes results independent of the worker count.
/// n_threads == 0 picks the hardware concurrency, 1 runs inline.
template <typename Fn>
void parallel_for(std::size_t n_items, std::size_t n_threads, Fn&& fn) {
    if (n_threads == 0) {
        unsigned hw = std::thread::hardware_concurrency();
        n_threads = hw == 0 ? 1 : hw;
    }
    if (n_threads > n_items) n_threads = n_items == 0 ? 1 : n_items;
    if (n_threads <= 1 || n_items < 2) {
        for (std::size_t i = 0; i < n_items; ++i) fn(i);
        return;
    }
    std::vector<std::future<void>> tasks;
    tasks.reserve(n_threads);
    std::size_t chunk = (n_items + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
        std::size_t begin = t * chunk;
        std::size_t end = begin + chunk < n_items ? begin + chunk : n_items;
        if (begin >= end) break;
        tasks.push_back(std::async(std::launch::async, [begin, end, &fn] {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        }));
    }
    for (auto& task : tasks) task.get();
}

} // namespace evc
