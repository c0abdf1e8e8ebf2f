#include "imstab/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace imstab {

namespace {
int g_threads = 1;
}

void set_threads(int n) { g_threads = n < 1 ? 1 : n; }
int threads() { return g_threads; }

void parallel_for(long n, const std::function<void(long)>& fn) {
    int nw = g_threads;
    if (nw <= 1 || n < 2) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long> next(0);
    auto worker = [&]() {
        for (;;) {
            long i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace imstab
