#include "stdn/common.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace stdn {

namespace {
std::atomic<int> g_max_threads{1};
}

void set_max_threads(int n) { g_max_threads.store(n < 1 ? 1 : n); }
int max_threads() { return g_max_threads.load(); }

void parallel_for(int count, const std::function<void(int)>& fn) {
    int workers = std::min(max_threads(), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
    // 53 high bits -> [0,1); stable across platforms.
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

int Rng::index(int n) {
    if (n <= 1) return 0;
    int i = static_cast<int>(uniform() * static_cast<double>(n));
    return i >= n ? n - 1 : i;
}

} // namespace stdn
