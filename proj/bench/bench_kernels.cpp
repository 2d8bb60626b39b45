// Serial vs OpenMP timings for the data-parallel kernels.
//
//   bench_kernels [problems] [neurons]
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include <omp.h>

#include "actsc/calibration.hpp"
#include "actsc/dsn.hpp"
#include "actsc/harness.hpp"
#include "actsc/synthetic.hpp"

using namespace actsc;

namespace {

double time_ms(const std::function<void()>& f, int reps) {
    f();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, double serial, double parallel) {
    std::printf("%-24s %10.2f %10.2f %8.2fx\n", name, serial, parallel, serial / parallel);
}

} // namespace

int main(int argc, char** argv) {
    SyntheticConfig cfg;
    cfg.problems = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
    cfg.neurons = argc > 2 ? static_cast<std::uint32_t>(std::strtoul(argv[2], nullptr, 10)) : 4096;
    const auto problems = make_synthetic(cfg);
    const auto& records = problems.dataset.records;

    std::printf("%zu problems x %u neurons, %d threads\n", records.size(), cfg.neurons, omp_get_max_threads());
    std::printf("%-24s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

    row("gap_all",
        time_ms([&] { gap_all(records, 1, Boundary::le_gt, Exec::serial); }, 5),
        time_ms([&] { gap_all(records, 1, Boundary::le_gt, Exec::parallel); }, 5));

    const auto dsn = identify_dsn(records, {1, 5, 0.5, SelectionMode::sign, 1});
    auto model = ProbeModel::zero(dsn.union_set);
    row("predict_all",
        time_ms([&] { predict_all(model, records, Exec::serial); }, 5),
        time_ms([&] { predict_all(model, records, Exec::parallel); }, 5));

    SimSource source(problems.sims, 1);
    BenchmarkInputs in;
    in.records = records;
    in.probe = &model;
    in.policies = {{Policy::sc, {}}, {Policy::esc, {}}, {Policy::actsc, {}}};
    auto run = [&](Exec e) {
        in.exec = e;
        run_benchmark(in, source);
    };
    row("run_benchmark", time_ms([&] { run(Exec::serial); }, 2), time_ms([&] { run(Exec::parallel); }, 2));
    return 0;
}
