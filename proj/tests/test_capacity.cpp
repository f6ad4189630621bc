#include "doctest.h"

#include <cmath>

#include "bsc_oracle.hpp"
#include "ccv/capacity.hpp"
#include "ccv/math.hpp"
#include "ccv/rng.hpp"

using namespace ccv;

namespace {

Dmc bsc(double p) {
    RawChannelSpec raw;
    raw.input_symbols = {"0", "1"};
    raw.output_symbols = {"0", "1"};
    raw.transition = {{1 - p, p}, {p, 1 - p}};
    raw.cost = {0.0, 1.0};
    return validate_channel(raw);
}

Dmc random_3x3(RngStream& rng) {
    RawChannelSpec raw;
    raw.input_symbols = {"a", "b", "c"};
    raw.output_symbols = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
        std::vector<double> row(3);
        double z = 0;
        for (auto& w : row) {
            w = 0.05 + rng.next_double();
            z += w;
        }
        for (auto& w : row) w /= z;
        raw.transition.push_back(row);
        raw.cost.push_back(rng.next_double());
    }
    raw.cost[0] = 0.0;
    raw.cost[2] = 1.0;
    return validate_channel(raw);
}

}  // namespace

TEST_CASE("BSC capacity-cost against the analytic oracle") {
    Dmc d = bsc(0.3);
    auto ref = bsc_oracle::ref(0.3, 0.2);
    CapacityCostSolution sol = solve_capacity_cost(d, 0.2);
    CHECK(sol.capacity == doctest::Approx(ref.capacity).epsilon(1e-6));
    CHECK(sol.capacity == doctest::Approx(0.05320).epsilon(2e-4));
    CHECK(sol.c_prime == doctest::Approx(ref.c_prime).epsilon(1e-5));
    CHECK(sol.c_prime == doctest::Approx(0.19582).epsilon(1e-4));
    CHECK(sol.p_star[0] == doctest::Approx(0.8).epsilon(1e-7));
    CHECK(sol.p_star[1] == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(sol.q_star[0] == doctest::Approx(ref.q == 0.38 ? 0.62 : 1 - ref.q).epsilon(1e-7));
    CHECK(sol.kkt_residual <= 1e-6);
    CHECK(sol.uniqueness_flag);
    CHECK(!sol.saturated);
    // cost constraint binds
    double c = d.cost_of(sol.p_star);
    CHECK(c == doctest::Approx(0.2).epsilon(1e-8));
}

TEST_CASE("saturated and noiseless cases") {
    Dmc d = bsc(0.3);
    CapacityCostSolution s5 = solve_capacity_cost(d, 0.5);
    CHECK(s5.saturated);
    CHECK(s5.c_prime == 0.0);
    CHECK(s5.capacity == doctest::Approx(std::log(2) - bsc_oracle::hb(0.3)).epsilon(1e-8));
    CHECK(s5.capacity == doctest::Approx(0.08228).epsilon(1e-4));
    CHECK(s5.p_star[0] == doctest::Approx(0.5).epsilon(1e-6));

    RawChannelSpec raw;
    raw.input_symbols = {"0", "1"};
    raw.output_symbols = {"0", "1"};
    raw.transition = {{1, 0}, {0, 1}};
    raw.cost = {0.0, 1.0};
    Dmc id = validate_channel(raw);
    CapacityCostSolution si = solve_capacity_cost(id, 0.5);
    CHECK(si.capacity == doctest::Approx(std::log(2)).epsilon(1e-9));

    CHECK_THROWS_AS(solve_capacity_cost(d, 0.0), InputError);
}

TEST_CASE("KKT certification on the BSC") {
    Dmc d = bsc(0.3);
    auto ref = bsc_oracle::ref(0.3, 0.2);
    CapacityCostSolution sol = solve_capacity_cost(d, 0.2);
    // supported-symbol identities, both sides from the analytic oracle
    CHECK(ref.d0 == doctest::Approx(ref.capacity - ref.c_prime * 0.2).epsilon(1e-10));
    CHECK(ref.d0 == doctest::Approx(0.014036).epsilon(1e-4));
    CHECK(ref.d1 == doctest::Approx(ref.capacity + ref.c_prime * 0.8).epsilon(1e-10));
    CHECK(ref.d1 == doctest::Approx(0.209859).epsilon(1e-4));
    KktReport rep = verify_kkt(sol, d);
    CHECK(rep.residual <= 1e-6);

    // saturated case reduces to the unconstrained condition with C' = 0
    CapacityCostSolution s5 = solve_capacity_cost(d, 0.5);
    KktReport rep5 = verify_kkt(s5, d);
    CHECK(rep5.residual <= 1e-6);
}

TEST_CASE("KKT residuals on random 3x3 channels") {
    RngStream rng(421, 0, 0);
    SolveOptions fast;
    fast.probe_uniqueness = false;
    for (int c = 0; c < 5; ++c) {
        Dmc d = random_3x3(rng);
        double gs = gamma_star(d, fast);
        if (gs - d.gamma0 < 0.05) continue;
        for (double f : {0.25, 0.5, 0.8}) {
            double gamma = d.gamma0 + f * (gs - d.gamma0);
            CapacityCostSolution sol = solve_capacity_cost(d, gamma, fast);
            CHECK(verify_kkt(sol, d).residual <= 1e-6);
        }
    }
}

TEST_CASE("capacity derivative agrees with finite differences") {
    Dmc d = bsc(0.3);
    auto ref = bsc_oracle::ref(0.3, 0.2);
    double cp = capacity_derivative(d, 0.2);
    CHECK(cp == doctest::Approx(ref.c_prime).epsilon(1e-4));

    // C' decreasing toward gamma*, large near gamma0
    double prev = 1e18;
    for (double g : {0.05, 0.15, 0.25, 0.35, 0.45}) {
        double v = capacity_derivative(d, g);
        CHECK(v < prev);
        CHECK(v > 0.0);
        prev = v;
    }
    CHECK(std::fabs(gamma_star(d) - 0.5) < 1e-4);

    // multiplier/finite-difference agreement on a random 3x3, grid of levels
    RngStream rng(515, 0, 0);
    Dmc d3 = random_3x3(rng);
    SolveOptions fast;
    fast.probe_uniqueness = false;
    double gs = gamma_star(d3, fast);
    for (double f : {0.3, 0.5, 0.7}) {
        CHECK_NOTHROW(capacity_derivative(d3, d3.gamma0 + f * (gs - d3.gamma0), fast));
    }
}

TEST_CASE("KKT residual on a random 4x4 channel") {
    RngStream rng(616, 0, 0);
    RawChannelSpec raw;
    raw.input_symbols = {"a", "b", "c", "d"};
    raw.output_symbols = {"w", "x", "y", "z"};
    for (int a = 0; a < 4; ++a) {
        std::vector<double> row(4);
        double z = 0;
        for (auto& w : row) {
            w = 0.05 + rng.next_double();
            z += w;
        }
        for (auto& w : row) w /= z;
        raw.transition.push_back(row);
        raw.cost.push_back(0.25 * a);
    }
    Dmc d = validate_channel(raw);
    SolveOptions fast;
    fast.probe_uniqueness = false;
    double gs = gamma_star(d, fast);
    for (double f : {0.3, 0.6}) {
        CapacityCostSolution sol = solve_capacity_cost(d, d.gamma0 + f * (gs - d.gamma0), fast);
        CHECK(verify_kkt(sol, d).residual <= 1e-6);
    }
}

TEST_CASE("capacity is nondecreasing and concave in gamma") {
    Dmc d = bsc(0.3);
    SolveOptions fast;
    fast.probe_uniqueness = false;
    std::vector<double> gs = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4};
    std::vector<double> cs;
    for (double g : gs) cs.push_back(solve_capacity_cost(d, g, fast).capacity);
    for (size_t i = 1; i < cs.size(); ++i) CHECK(cs[i] >= cs[i - 1] - 1e-10);
    for (size_t i = 1; i + 1 < cs.size(); ++i) {
        double chord = ((gs[i + 1] - gs[i]) * cs[i - 1] + (gs[i] - gs[i - 1]) * cs[i + 1]) / (gs[i + 1] - gs[i - 1]);
        CHECK(cs[i] >= chord - 1e-9);
    }
}

TEST_CASE("optimal input distribution moves continuously in gamma") {
    Dmc d = bsc(0.3);
    SolveOptions fast;
    fast.probe_uniqueness = false;
    CapacityCostSolution base = solve_capacity_cost(d, 0.2, fast);
    double prev = 1e18;
    for (double h : {1e-2, 1e-3, 1e-4}) {
        CapacityCostSolution moved = solve_capacity_cost(d, 0.2 + h, fast);
        double dist = l1_distance(moved.p_star, base.p_star);
        CHECK(dist < prev);
        prev = dist;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("dispersion values on the BSC") {
    Dmc d = bsc(0.3);
    auto ref = bsc_oracle::ref(0.3, 0.2);
    CapacityCostSolution sol = solve_capacity_cost(d, 0.2);
    DispersionInfo disp = dispersion(sol, d);
    CHECK(disp.nu[0] == doctest::Approx(ref.nu0).epsilon(1e-5));
    CHECK(disp.nu[0] == doctest::Approx(0.026877).epsilon(1e-4));
    CHECK(disp.nu[1] == doctest::Approx(ref.nu1).epsilon(1e-5));
    CHECK(disp.nu[1] == doctest::Approx(0.375306).epsilon(1e-4));
    CHECK(disp.v_gamma == doctest::Approx(ref.v_gamma).epsilon(1e-5));
    CHECK(disp.v_gamma == doctest::Approx(0.096563).epsilon(1e-4));
    CHECK(disp.i_max == doctest::Approx(ref.i_max).epsilon(1e-6));
    CHECK(disp.i_max == doctest::Approx(0.725937).epsilon(1e-4));
    CHECK(disp.nu_min <= disp.v_gamma);
    CHECK(disp.v_gamma <= disp.nu_max);

    // noiseless channel has zero dispersion
    RawChannelSpec raw;
    raw.input_symbols = {"0", "1"};
    raw.output_symbols = {"0", "1"};
    raw.transition = {{1, 0}, {0, 1}};
    raw.cost = {0.0, 1.0};
    Dmc id = validate_channel(raw);
    CapacityCostSolution si = solve_capacity_cost(id, 0.5);
    DispersionInfo di = dispersion(si, id);
    CHECK(di.v_gamma == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("quantized finite-n quantities and the Lemma-6 windows") {
    Dmc d = bsc(0.3);
    auto ref = bsc_oracle::ref(0.3, 0.2);
    CapacityCostSolution sol = solve_capacity_cost(d, 0.2);
    DispersionInfo disp = dispersion(sol, d);

    QuantizedQuantities q10 = quantized_quantities(sol, disp, d, 10);
    CHECK(q10.type_n.counts == std::vector<int64_t>{8, 2});
    CHECK(q10.c_n == doctest::Approx(sol.capacity).epsilon(1e-9));
    CHECK(q10.v_n == doctest::Approx(disp.v_gamma).epsilon(1e-9));
    CHECK(q10.support_match);
    CHECK(q10.lemma6_part1_ok);
    CHECK(q10.lemma6_part2_ok);

    QuantizedQuantities q7 = quantized_quantities(sol, disp, d, 7);
    CHECK(q7.type_n.counts == std::vector<int64_t>{6, 1});
    double expect_c7 = (6.0 / 7.0) * ref.d0 + (1.0 / 7.0) * ref.d1;
    CHECK(q7.c_n == doctest::Approx(expect_c7).epsilon(1e-5));
    CHECK(q7.c_n == doctest::Approx(0.042010).epsilon(1e-3));
    CHECK(q7.c_n <= sol.capacity);
    CHECK(std::fabs(q7.v_n - disp.v_gamma) <= 2.0 * 2.0 * disp.nu_max / 7.0);
    CHECK(q7.lemma6_part1_ok);
    CHECK(q7.lemma6_part2_ok);
}

TEST_CASE("exact constant-composition output probabilities") {
    Dmc d = bsc(0.3);
    NType t11{2, {1, 1}};
    std::vector<int> y00 = {0, 0};
    CHECK(cc_output_prob(t11, d, y00) == doctest::Approx(0.21).epsilon(1e-12));

    // singleton type class reduces to the product law
    NType t30{3, {3, 0}};
    std::vector<int> y010 = {0, 1, 0};
    CHECK(cc_output_prob(t30, d, y010) == doctest::Approx(0.7 * 0.3 * 0.7).epsilon(1e-12));

    // normalization over all outputs
    NType t22{4, {2, 2}};
    double total = 0.0;
    for (int m = 0; m < 16; ++m) {
        std::vector<int> y(4);
        for (int i = 0; i < 4; ++i) y[size_t(i)] = (m >> i) & 1;
        total += cc_output_prob(t22, d, y);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(cc_output_prob(NType{2000, {1000, 1000}}, d, std::vector<int>(2000, 0), 1000), InputError);
}

TEST_CASE("binary fast path matches the dynamic program") {
    RngStream rng(99, 0, 0);
    for (int trial = 0; trial < 10; ++trial) {
        double w0 = 0.1 + 0.8 * rng.next_double();
        double w1 = 0.1 + 0.8 * rng.next_double();
        RawChannelSpec raw;
        raw.input_symbols = {"0", "1"};
        raw.output_symbols = {"0", "1"};
        raw.transition = {{w0, 1 - w0}, {1 - w1, w1}};
        raw.cost = {0.0, 1.0};
        Dmc d = validate_channel(raw);
        int64_t n = 4 + int64_t(rng.next_below(7));
        int64_t n1 = int64_t(rng.next_below(uint64_t(n + 1)));
        NType t{n, {n - n1, n1}};
        for (int64_t k = 0; k <= n; ++k) {
            std::vector<int> y;
            for (int64_t i = 0; i < n; ++i) y.push_back(i < k ? 1 : 0);
            double dp = cc_output_prob(t, d, y);
            double fast = std::exp(cc_log_output_prob_binary(t, d, k));
            CHECK(fast == doctest::Approx(dp).epsilon(1e-10));
        }
    }
}

TEST_CASE("output-law ratio bound, exhaustive small blocklengths") {
    Dmc d = bsc(0.3);
    CapacityCostSolution sol = solve_capacity_cost(d, 0.2);
    DispersionInfo disp = dispersion(sol, d);

    double worst_const = 1e300;
    for (int64_t n : {8, 12, 16}) {
        QuantizedQuantities q = quantized_quantities(sol, disp, d, n);
        QRatioReport rep = check_q_ratio_bound(q.type_n, sol, d, n, 2.0);
        CHECK(rep.shape_holds);  // kappa at most 2
        CHECK(rep.min_log_ratio >= -rep.threshold_term - 2.0);
        worst_const = std::min(worst_const, rep.min_log_ratio + rep.threshold_term);
    }
    // min log-ratio + ((s-1)/2) log n stays bounded below along the sequence
    CHECK(worst_const >= -2.0);
}
