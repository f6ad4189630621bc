#include "doctest.h"

#include <cmath>

#include "ccv/json_io.hpp"
#include "ccv/simulate.hpp"

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

struct Instance {
    Dmc dmc;
    CapacityCostSolution sol;
    DispersionInfo disp;
};

Instance bsc_instance() {
    Instance in;
    in.dmc = bsc(0.3);
    in.sol = solve_capacity_cost(in.dmc, 0.2);
    in.disp = dispersion(in.sol, in.dmc);
    return in;
}

}  // namespace

TEST_CASE("scheme construction basics") {
    Instance in = bsc_instance();
    const int64_t n = 2000;
    const double theta = std::pow(double(n), -0.75);

    // v = 0 collapses to a single constant-composition branch at [P*]_n
    SchemeSpec deg = build_nofeedback_scheme(in.dmc, in.sol, in.disp, 0.0, -0.2, n, theta);
    REQUIRE(deg.branches.size() == 1);
    CHECK(deg.branches[0].type.counts == std::vector<int64_t>{1600, 400});
    CHECK(deg.analytic_cost_var == doctest::Approx(0.0).epsilon(1e-12));

    SocrResult rs = socr(in.sol, in.disp, 0.05, 0.1);
    SchemeSpec sch = build_nofeedback_scheme(in.dmc, in.sol, in.disp, 0.05, rs.r_star, n, theta);
    CHECK(sch.analytic_cost_mean <= 0.2 + 1e-12);
    CHECK(sch.analytic_cost_var <= double(n) * 0.05 + 1e-9);
    double sv = std::sqrt(in.disp.v_gamma);
    double max_pi = 0.0;
    for (auto& br : sch.branches) {
        max_pi = std::max(max_pi, std::fabs(br.pi));
        CHECK(br.gamma_j > in.dmc.gamma0);
        CHECK(br.gamma_j < 0.5);
        CHECK(br.type.cost_of(in.dmc) <= br.gamma_j + 1e-12);
    }
    double spacing = (sv * max_pi + std::fabs(rs.r_star)) / (in.sol.c_prime * std::sqrt(double(n)));
    for (auto& br : sch.branches) CHECK(std::fabs(br.gamma_j - 0.2) <= spacing + 1e-12);

    // at tiny n the feasibility window pins the minimizer near the degenerate
    // point and the cost levels stay admissible
    SchemeSpec tiny = build_nofeedback_scheme(in.dmc, in.sol, in.disp, 0.05, -8.0, 40, theta);
    for (auto& br : tiny.branches) {
        CHECK(br.gamma_j > in.dmc.gamma0);
        CHECK(br.gamma_j < 0.5);
    }
    CHECK_THROWS_AS(build_nofeedback_scheme(in.dmc, in.sol, in.disp, 0.05, -0.2, 2, theta), InputError);
}

TEST_CASE("trial runs are reproducible at any thread count") {
    Instance in = bsc_instance();
    SocrResult rs = socr(in.sol, in.disp, 0.05, 0.1);
    SchemeSpec sch = build_nofeedback_scheme(in.dmc, in.sol, in.disp, 0.05, rs.r_star, 500,
                                             std::pow(500.0, -0.75));
    RunOptions serial;
    serial.threads = 1;
    RunOptions two;
    two.threads = 2;
    RunOptions four;
    four.threads = 4;
    four.block = 4096;
    SimReport a = run_nofeedback_trials(sch, in.dmc, 6000, 99, serial);
    SimReport b = run_nofeedback_trials(sch, in.dmc, 6000, 99, two);
    SimReport c = run_nofeedback_trials(sch, in.dmc, 6000, 99, four);
    CHECK(to_json_string(simreport_to_json(a)) == to_json_string(simreport_to_json(b)));
    CHECK(to_json_string(simreport_to_json(a)) == to_json_string(simreport_to_json(c)));
}

TEST_CASE("single-type scheme has deterministic per-trial cost") {
    Instance in = bsc_instance();
    SchemeSpec deg = build_nofeedback_scheme(in.dmc, in.sol, in.disp, 0.0, -0.2, 400, std::pow(400.0, -0.75));
    SimReport rep = run_nofeedback_trials(deg, in.dmc, 2000, 5);
    CHECK(rep.cost_var == 0.0);
    CHECK(rep.cost_mean == doctest::Approx(deg.branches[0].type.cost_of(in.dmc)).epsilon(1e-12));
}

TEST_CASE("threshold probability is monotone in r under common randomness") {
    Instance in = bsc_instance();
    const int64_t n = 500;
    double prev = -1.0;
    for (double r : {-0.6, -0.2, 0.2}) {
        SchemeSpec sch = build_nofeedback_scheme(in.dmc, in.sol, in.disp, 0.0, r, n, std::pow(double(n), -0.75));
        SimReport rep = run_nofeedback_trials(sch, in.dmc, 4000, 1234);
        CHECK(rep.threshold_prob >= prev);
        prev = rep.threshold_prob;
    }
}

TEST_CASE("degenerate scheme matches the CLT prediction of the recorded event") {
    Instance in = bsc_instance();
    const int64_t n = 2000;
    const double theta = std::pow(double(n), -0.75);
    SocrResult rs = socr(in.sol, in.disp, 0.0, 0.1);
    SchemeSpec sch = build_nofeedback_scheme(in.dmc, in.sol, in.disp, 0.0, rs.r_star, n, theta);
    SimReport rep = run_nofeedback_trials(sch, in.dmc, 40000, 31);

    // the recorded event compares a centered sum against the quantized mean,
    // so the CLT prediction includes the n*theta shift
    QuantizedQuantities q = quantized_quantities(in.sol, dispersion(in.sol, in.dmc), in.dmc, n);
    double num = double(n) * (in.sol.capacity - q.c_n) + std::sqrt(double(n)) * rs.r_star + double(n) * theta;
    double pred = norm_cdf(num / std::sqrt(double(n) * q.v_n));
    CHECK(std::fabs(rep.threshold_prob - pred) <= 3.0 * rep.std_err + 0.05);
}

TEST_CASE("surrogate statistic over-counts the exact mixture event") {
    Instance in = bsc_instance();
    SocrResult rs = socr(in.sol, in.disp, 0.05, 0.1);
    for (int64_t n : {12, 2000}) {
        SchemeSpec sch = build_nofeedback_scheme(in.dmc, in.sol, in.disp, 0.05, rs.r_star * 0.2, n,
                                                 std::pow(double(n), -0.75));
        SimReport exact = run_nofeedback_trials(sch, in.dmc, 4000, 17);
        RunOptions sur;
        sur.force_surrogate = true;
        SimReport approx = run_nofeedback_trials(sch, in.dmc, 4000, 17, sur);
        CHECK(exact.exact_reference);
        CHECK(!approx.exact_reference);
        // pointwise domination of the events, same seeds
        CHECK(approx.threshold_prob >= exact.threshold_prob);
    }
}

TEST_CASE("feedback scheme calibration meets the cost constraint") {
    Instance in = bsc_instance();
    const int64_t n = 1000;
    const double theta = std::pow(double(n), -0.75);
    SocrResult rs = socr(in.sol, in.disp, 0.05, 0.1);
    double sv = std::sqrt(in.disp.v_gamma);
    FeedbackSchemeSpec fs =
        build_feedback_scheme(in.dmc, in.sol, in.disp, 0.05, rs.r_star, n, theta, 2.0 * sv, 5000, 11);
    CHECK(fs.delta1 >= 0.0);
    CHECK(fs.calib_residual <= 1e-9);
    for (size_t j = 0; j < fs.base.branches.size(); ++j) {
        if (fs.base.branches[j].gamma_j > 0.2) CHECK(fs.beta_j[j] == doctest::Approx(fs.beta));
        else CHECK(fs.beta_j[j] >= fs.beta - 1e-12);
    }
    CHECK(fs.timid_type.cost_of(in.dmc) <= 0.2 + 1e-12);

    SimReport rep = run_feedback_trials(fs, in.dmc, 20000, 12);
    CHECK(rep.cost_mean <= 0.2 + 3.0 * rep.cost_mean_se + 1e-12);
    CHECK(rep.cost_var <= double(n) * 0.05 + 4.0 * rep.cost_var_se + 1e-9);
    CHECK_THROWS_AS(build_feedback_scheme(in.dmc, in.sol, in.disp, 0.05, rs.r_star, 999, theta, 1.0, 100, 1),
                    InputError);
}

TEST_CASE("large beta feedback scheme behaves like no feedback") {
    Instance in = bsc_instance();
    const int64_t n = 1000;
    const double theta = std::pow(double(n), -0.75);
    SocrResult rs = socr(in.sol, in.disp, 0.05, 0.1);
    double sv = std::sqrt(in.disp.v_gamma);
    FeedbackSchemeSpec fs =
        build_feedback_scheme(in.dmc, in.sol, in.disp, 0.05, rs.r_star, n, theta, 50.0 * sv, 5000, 11);
    for (double u : fs.switch_prob) CHECK(u == 0.0);

    SimReport fb = run_feedback_trials(fs, in.dmc, 30000, 77);
    SchemeSpec nf = build_nofeedback_scheme(in.dmc, in.sol, in.disp, 0.05, rs.r_star, n, theta);
    SimReport base = run_nofeedback_trials(nf, in.dmc, 30000, 77);
    // two-sample z, should not separate
    double se = std::sqrt(fb.std_err * fb.std_err + base.std_err * base.std_err);
    CHECK(std::fabs(fb.threshold_prob - base.threshold_prob) <= 3.0 * se + 0.02);
}

TEST_CASE("exact random code oracle") {
    Instance in = bsc_instance();
    const int64_t n = 12;
    const double theta = std::pow(double(n), -0.75);
    SchemeSpec sch = build_nofeedback_scheme(in.dmc, in.sol, in.disp, 0.0, 0.0, n, theta);
    CHECK(sch.branches[0].type.counts == std::vector<int64_t>{10, 2});

    ExactCodeReport one = run_exact_random_code(in.dmc, sch, 1, 2000, 3);
    CHECK(one.error_rate == 0.0);

    for (uint64_t seed : {1ull, 2ull}) {
        ExactCodeReport rep = run_exact_random_code(in.dmc, sch, 16, 10000, seed);
        double se = std::sqrt(rep.error_se * rep.error_se + rep.bound_se * rep.bound_se);
        CHECK(rep.error_rate <= rep.lemma1_bound + 3.0 * se);
    }

    CHECK_THROWS_AS(run_exact_random_code(in.dmc, sch, 128, 100, 1), InputError);

    // noiseless channel: errors can only come from codebook collisions
    RawChannelSpec raw;
    raw.input_symbols = {"0", "1"};
    raw.output_symbols = {"0", "1"};
    raw.transition = {{1, 0}, {0, 1}};
    raw.cost = {0.0, 1.0};
    Dmc id = validate_channel(raw);
    SchemeSpec hand;
    hand.n = 4;
    hand.theta = std::pow(4.0, -0.75);
    hand.gamma = 0.5;
    hand.capacity = std::log(2.0);
    SchemeBranch br;
    br.p = 1.0;
    br.sol = solve_capacity_cost(id, 0.5);
    br.type = NType{4, {2, 2}};
    br.gamma_j = 0.5;
    hand.branches.push_back(br);
    hand.s_support = 2;
    ExactCodeReport noiseless = run_exact_random_code(id, hand, 2, 20000, 9);
    double collision = 1.0 / 6.0;  // |T| = 6 equiprobable codewords
    CHECK(noiseless.error_rate <= collision + 3.0 * noiseless.error_se);
}

TEST_CASE("hoeffding ratio bound") {
    std::vector<double> qp = {0.62, 0.38};
    std::vector<double> qq = {0.6, 0.4};

    // c_n = 0 collapses two of the three factors
    double d = 0.62 * std::log(0.62 / 0.6) + 0.38 * std::log(0.38 / 0.4);
    double g = 0.19;
    CHECK(hoeffding_ratio_bound(qp, qq, 100, 0.0, g) ==
          doctest::Approx(std::exp(-100.0 * d * g * g / 9.0)).epsilon(1e-12));

    // with c_n = sqrt(n log n) the plug-in bound is tiny at n = 1e4
    int64_t n = 10000;
    double cn = std::sqrt(double(n) * std::log(double(n)));
    CHECK(hoeffding_ratio_bound(qp, qq, n, cn, g) < 1e-3);

    // independent recomputation of the three-factor product
    double cn2 = std::sqrt(double(n) / std::log(double(n)));
    double expect = std::exp(-double(n) * d * g * g / 9.0) * std::exp(-2.0 * cn2 * g * g / 9.0) *
                    std::exp(-cn2 * cn2 * g * g / (9.0 * double(n) * d));
    CHECK(hoeffding_ratio_bound(qp, qq, n, cn2, g) == doctest::Approx(expect).epsilon(1e-12));

    CHECK_THROWS_AS(hoeffding_ratio_bound(qp, qp, n, cn, g), InputError);

    // Monte Carlo exceedance stays below the bound
    int64_t n2 = 200;
    double cn3 = std::sqrt(double(n2) / std::log(double(n2)));
    double bound = hoeffding_ratio_bound(qp, qq, n2, cn3, g);
    double emp = hoeffding_exceedance_mc(qp, qq, n2, cn3, 100000, 4);
    CHECK(emp <= bound);
}
