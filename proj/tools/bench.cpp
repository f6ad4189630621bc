// Compares the serial reference path against the OpenMP path on the hot
// kernels and checks that both produce identical reports.
#include <chrono>
#include <cstdio>

#include "ccv/json_io.hpp"
#include "ccv/parallel.hpp"

using namespace ccv;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Dmc bsc(double p) {
    RawChannelSpec raw;
    raw.input_symbols = {"0", "1"};
    raw.output_symbols = {"0", "1"};
    raw.transition = {{1 - p, p}, {p, 1 - p}};
    raw.cost = {0.0, 1.0};
    return validate_channel(raw);
}

}  // namespace

int main() {
    Dmc dmc = bsc(0.3);
    CapacityCostSolution sol = solve_capacity_cost(dmc, 0.2);
    DispersionInfo disp = dispersion(sol, dmc);

    const int64_t n = 2000, trials = 20000;
    const double v = 0.05, theta = std::pow(double(n), -0.75);
    SocrResult rs = socr(sol, disp, v, 0.1);
    SchemeSpec scheme = build_nofeedback_scheme(dmc, sol, disp, v, rs.r_star, n, theta);

    RunOptions serial;
    serial.threads = 1;
    RunOptions parallel;
    parallel.threads = max_threads();

    auto t0 = std::chrono::steady_clock::now();
    SimReport a = run_nofeedback_trials(scheme, dmc, trials, 42, serial);
    double ts = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    SimReport b = run_nofeedback_trials(scheme, dmc, trials, 42, parallel);
    double tp = seconds_since(t0);

    bool identical = to_json_string(simreport_to_json(a)) == to_json_string(simreport_to_json(b));
    std::printf("nofeedback trials   serial %.3fs   omp(%d) %.3fs   speedup %.2fx   identical %s\n", ts,
                max_threads(), tp, ts / tp, identical ? "yes" : "NO");

    KOptions k1;
    k1.threads = 1;
    KOptions kp;
    kp.threads = max_threads();
    t0 = std::chrono::steady_clock::now();
    KResult r1 = k_value(-1.0, 1.0, k1);
    double ks = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    KResult r2 = k_value(-1.0, 1.0, kp);
    double kpt = seconds_since(t0);
    std::printf("k_value multistart  serial %.3fs   omp(%d) %.3fs   speedup %.2fx   identical %s\n", ks,
                max_threads(), kpt, ks / kpt, r1.value == r2.value ? "yes" : "NO");

    return identical && r1.value == r2.value ? 0 : 1;
}
