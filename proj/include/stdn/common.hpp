#ifndef STDN_COMMON_HPP
#define STDN_COMMON_HPP

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace stdn {

/// Numerical failure (solver breakdown, divergence). CLI maps these to exit 1.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Iterative solver did not reach the requested tolerance.
struct solver_error : numeric_error {
    solver_error(const std::string& msg, double residual, int iterations)
        : numeric_error(msg), final_residual(residual), iterations_used(iterations) {}
    double final_residual;
    int iterations_used;
};

/// File/format trouble. CLI maps these to exit 2.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Global cap on worker threads used by parallel_for. 1 disables spawning.
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [0, count). Tasks must write disjoint state; results are
// identical for any thread count.
void parallel_for(int count, const std::function<void(int)>& fn);

/// Deterministic RNG with stable output across platforms (distributions are
/// hand-rolled on top of mt19937_64 so byte-identical reruns hold anywhere).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64();
    double uniform();                     // [0,1)
    double uniform(double lo, double hi); // [lo,hi)
    double normal();                      // standard normal, Box-Muller
    int index(int n);                     // [0,n)

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[i], v[static_cast<std::size_t>(index(i + 1))]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace stdn

#endif
