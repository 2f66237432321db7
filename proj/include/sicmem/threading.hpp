#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

// Work units write into preassigned slots and are reduced pairwise after the
// pool joins, so every result is bitwise independent of the worker count and
// of scheduling order.

namespace sicmem {

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    workers = resolve_workers(workers);
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int count = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(workers)));
    pool.reserve(count);
    for (int t = 0; t < count; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
}

// Pairwise reduction: stable against accumulation-order drift.
template <typename T, typename Op>
T pairwise_reduce(std::vector<T> items, T identity, Op op) {
    if (items.empty()) return identity;
    while (items.size() > 1) {
        std::size_t half = (items.size() + 1) / 2;
        for (std::size_t i = 0; i + half < items.size(); ++i)
            items[i] = op(items[i], items[i + half]);
        items.resize(half);
    }
    return items[0];
}

}  // namespace sicmem
