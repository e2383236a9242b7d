// Compares the serial reference kernels against the OpenMP variants and
// times a full training step of the toy model.

#include <chrono>
#include <cstdio>
#include <vector>

#include "mrcot/toylab/kernels.hpp"
#include "mrcot/toylab/lab.hpp"
#include "mrcot/util.hpp"

using namespace mrcot;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::vector<double> random_matrix(std::size_t n, util::Rng& rng) {
    std::vector<double> m(n);
    for (auto& v : m) v = rng.normal(1.0);
    return m;
}

void bench_matmul(std::size_t size, int reps) {
    util::Rng rng(7);
    auto a = random_matrix(size * size, rng);
    auto b = random_matrix(size * size, rng);
    std::vector<double> c(size * size);

    toylab::kernels::set_parallel(false);
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r)
        toylab::kernels::matmul(a.data(), b.data(), c.data(), size, size, size);
    double serial_ms = ms_since(t0) / reps;

    toylab::kernels::set_parallel(true);
    t0 = Clock::now();
    for (int r = 0; r < reps; ++r)
        toylab::kernels::matmul(a.data(), b.data(), c.data(), size, size, size);
    double parallel_ms = ms_since(t0) / reps;

    std::printf("matmul %4zux%-4zu  serial %8.3f ms  parallel %8.3f ms  speedup %.2fx\n", size,
                size, serial_ms, parallel_ms, serial_ms / parallel_ms);
}

void bench_train_step() {
    toylab::ToyRunConfig cfg;
    cfg.n_train = 32;
    cfg.n_test = 8;
    cfg.steps = 20;
    cfg.log_every = 20;
    cfg.attention_tasks = 1;
    cfg.fidelity_tasks = 1;

    for (bool parallel : {false, true}) {
        toylab::kernels::set_parallel(parallel);
        auto t0 = Clock::now();
        auto result = toylab::train_toy(cfg);
        double total = ms_since(t0);
        std::printf("train 20 steps   %s %8.1f ms  (final loss %.4f)\n",
                    parallel ? "parallel" : "serial  ", total, result.final_loss);
    }
}

} // namespace

int main() {
    for (std::size_t size : {64, 128, 256}) bench_matmul(size, size <= 128 ? 20 : 5);
    bench_train_step();
    toylab::kernels::set_parallel(true);
    return 0;
}
