#include "ccv/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccv/math.hpp"
#include "ccv/parallel.hpp"
#include "ccv/rng.hpp"

namespace ccv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double xlogw(int64_t count, double logw) { return count > 0 ? double(count) * logw : 0.0; }

bool is_binary(const Dmc& dmc) { return dmc.J == 2 && dmc.B == 2; }

// log Q^cc(y) as a function of the output-ones count, for one type; O(n^2)
// table build, O(1) lookups afterwards.
struct BinaryCcTable {
    std::vector<double> log_prob;  // indexed by ones count

    BinaryCcTable() = default;
    BinaryCcTable(const NType& t, const Dmc& dmc) {
        const int64_t n = t.n;
        log_prob.resize(size_t(n) + 1);
        std::vector<double> lg(size_t(n) + 2, 0.0);
        for (int64_t i = 0; i <= n + 1; ++i) lg[size_t(i)] = std::lgamma(double(i) + 1.0);
        auto lbin = [&](int64_t nn, int64_t kk) {
            if (kk < 0 || kk > nn) return kNegInf;
            return lg[size_t(nn)] - lg[size_t(kk)] - lg[size_t(nn - kk)];
        };
        const int64_t n1 = t.counts[1], n0 = t.counts[0];
        double lw00 = std::log(dmc.w(0, 0)), lw01 = std::log(dmc.w(0, 1));
        double lw10 = std::log(dmc.w(1, 0)), lw11 = std::log(dmc.w(1, 1));
        double lbase = -lbin(n, n1);
        for (int64_t k = 0; k <= n; ++k) {
            double acc = kNegInf;
            int64_t lo = std::max<int64_t>(0, k - n0), hi = std::min(k, n1);
            for (int64_t a = lo; a <= hi; ++a) {
                // a: x=1,y=1; n1-a: x=1,y=0; k-a: x=0,y=1; rest: x=0,y=0
                double term = lbase + lbin(k, a) + lbin(n - k, n1 - a);
                term += xlogw(a, lw11) + xlogw(n1 - a, lw10) + xlogw(k - a, lw01) + xlogw(n0 - (k - a), lw00);
                acc = log_add_exp(acc, term);
            }
            log_prob[size_t(k)] = acc;
        }
    }
};

struct MomentAcc {
    uint64_t hits = 0;
    uint64_t count = 0;
    // cost-sum moments centered at n*gamma to keep the fourth power in range
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;

    void add(bool hit, double centered_cost) {
        hits += hit ? 1 : 0;
        count += 1;
        double c = centered_cost, c2 = c * c;
        s1 += c;
        s2 += c2;
        s3 += c2 * c;
        s4 += c2 * c2;
    }
    void merge(const MomentAcc& o) {
        hits += o.hits;
        count += o.count;
        s1 += o.s1;
        s2 += o.s2;
        s3 += o.s3;
        s4 += o.s4;
    }
};

SimReport finalize_report(const MomentAcc& acc, int64_t n, double gamma, double r, double theta, uint64_t seed,
                          bool exact_ref) {
    SimReport rep;
    rep.trials = int64_t(acc.count);
    rep.n = n;
    rep.r = r;
    rep.theta = theta;
    rep.seed = seed;
    rep.exact_reference = exact_ref;
    double t = double(acc.count);
    rep.threshold_prob = double(acc.hits) / t;
    rep.std_err = std::sqrt(std::max(0.0, rep.threshold_prob * (1.0 - rep.threshold_prob) / t));
    rep.lemma1_bound = rep.threshold_prob + std::exp(-double(n) * theta);
    double m1 = acc.s1 / t;
    double m2 = acc.s2 / t - m1 * m1;                       // Var of the cost sum
    double m4 = acc.s4 / t - 4 * m1 * (acc.s3 / t) + 6 * m1 * m1 * (acc.s2 / t) - 3 * m1 * m1 * m1 * m1;
    rep.cost_mean = (m1 + double(n) * gamma) / double(n);
    rep.cost_mean_se = std::sqrt(std::max(0.0, m2 / t)) / double(n);
    rep.cost_var = m2;
    rep.cost_var_se = std::sqrt(std::max(0.0, (m4 - m2 * m2) / t));
    return rep;
}

std::vector<int> channel_output(const Dmc& dmc, std::span<const int> x, RngStream& rng) {
    std::vector<int> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double u = rng.next_double();
        int a = x[i];
        double accum = 0.0;
        int pick = dmc.B - 1;
        for (int b = 0; b < dmc.B; ++b) {
            accum += dmc.w(a, b);
            if (u < accum) {
                pick = b;
                break;
            }
        }
        y[size_t(i)] = pick;
    }
    return y;
}

double log_w_given(const Dmc& dmc, std::span<const int> x, std::span<const int> y) {
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += std::log(dmc.w(x[i], y[i]));
    return s;
}

double log_product_from_logs(std::span<const double> logq, std::span<const int> y) {
    double s = 0.0;
    for (int b : y) s += logq[size_t(b)];
    return s;
}

int64_t count_ones(std::span<const int> y) {
    int64_t k = 0;
    for (int v : y) k += (v == 1);
    return k;
}

double fit_kappa_hat(const Dmc& dmc, const CapacityCostSolution& sol) {
    double kappa = 0.0;
    for (int64_t n : {8, 12, 16}) {
        NType t = quantize_to_type(sol.p_star, n, sol.gamma, dmc);
        QRatioReport rep = check_q_ratio_bound(t, sol, dmc, n, 1e9);
        kappa = std::max(kappa, rep.kappa_fit);
    }
    return kappa;
}

int support_size(std::span<const double> p) {
    int s = 0;
    for (double x : p) s += (x > 1e-9);
    return s;
}

}  // namespace

SchemeSpec build_nofeedback_scheme(const Dmc& dmc, const CapacityCostSolution& sol, const DispersionInfo& disp,
                                   double v, double r, int64_t n, double theta, const SchemeOptions& opts) {
    if (!(disp.v_gamma > 0.0)) throw InputError("scheme construction needs V(Gamma) > 0");
    if (n < 2 * dmc.J) throw InputError("blocklength too small for the input alphabet");
    SolveOptions fast = opts.solve;
    fast.probe_uniqueness = false;

    double gs = gamma_star(dmc, fast);
    double sv = std::sqrt(disp.v_gamma);
    double alpha = sv / (sol.c_prime * std::sqrt(double(n)));
    double dr = r / (sol.c_prime * std::sqrt(double(n)));
    double margin = opts.feasibility_margin * std::min(sol.gamma - dmc.gamma0, gs - sol.gamma);

    // pi feasibility window so that every Gamma_j stays inside (Gamma0, Gamma*).
    // The window always contains rho = r/sqrt(V), where the degenerate
    // construction sits at cost exactly Gamma, so a scheme always exists; at
    // small n the window just pins the minimizer near the degenerate point.
    double pi_hi = (sol.gamma + dr - dmc.gamma0 - margin) / alpha;
    double pi_lo = (sol.gamma + dr - gs + margin) / alpha;
    double rho = r / sv;

    KOptions kbox = opts.kopts;
    kbox.box_lo = pi_lo;
    kbox.box_hi = pi_hi;
    double vp = (v > 0) ? sol.c_prime * sol.c_prime * v / disp.v_gamma : 0.0;
    KResult kr = k_value(rho, vp, kbox);

    SchemeSpec sch;
    sch.n = n;
    sch.r = r;
    sch.theta = theta;
    sch.gamma = sol.gamma;
    sch.v = v;
    sch.capacity = sol.capacity;
    sch.s_support = support_size(sol.p_star);
    sch.kappa_hat = fit_kappa_hat(dmc, sol);

    for (int j = 0; j < kr.minimizer.k; ++j) {
        SchemeBranch br;
        br.p = kr.minimizer.p[j];
        br.pi = kr.minimizer.pi[j];
        br.gamma_j = sol.gamma - alpha * br.pi + dr;
        if (!(br.gamma_j > dmc.gamma0 && br.gamma_j < gs))
            throw InputError("blocklength too small: branch cost level left (gamma0, gamma*)");
        br.sol = solve_capacity_cost(dmc, br.gamma_j, fast);
        br.type = quantize_to_type(br.sol.p_star, n, br.gamma_j, dmc);
        sch.branches.push_back(std::move(br));
    }

    // analytic per-position mean cost and scheme variance, with shrink repair
    auto recompute = [&]() {
        double cbar = 0.0;
        for (auto& br : sch.branches) cbar += br.p * br.type.cost_of(dmc);
        double var = 0.0;
        for (auto& br : sch.branches) {
            double d = double(n) * (br.type.cost_of(dmc) - cbar);
            var += br.p * d * d;
        }
        sch.analytic_cost_mean = cbar;
        sch.analytic_cost_var = var;
    };
    recompute();
    int cheapest = 0;
    for (int a = 1; a < dmc.J; ++a)
        if (dmc.cost[size_t(a)] < dmc.cost[size_t(cheapest)]) cheapest = a;
    int guard = 0;
    while (v > 0 && sch.analytic_cost_var > double(n) * v + 1e-9 && guard++ < 64) {
        // most extreme branch: largest |c_j - cbar|
        double cbar = sch.analytic_cost_mean;
        int worst_branch = 0;
        double worst_dev = -1.0;
        for (size_t j = 0; j < sch.branches.size(); ++j) {
            double dev = std::fabs(sch.branches[j].type.cost_of(dmc) - cbar);
            if (dev > worst_dev) {
                worst_dev = dev;
                worst_branch = int(j);
            }
        }
        NType& t = sch.branches[size_t(worst_branch)].type;
        bool expensive_side = t.cost_of(dmc) > cbar;
        int pick = -1;
        for (int a = 0; a < dmc.J; ++a) {
            if (t.counts[size_t(a)] == 0 || a == (expensive_side ? cheapest : -1)) continue;
            if (pick < 0) pick = a;
            else if (expensive_side ? dmc.cost[size_t(a)] > dmc.cost[size_t(pick)]
                                    : dmc.cost[size_t(a)] < dmc.cost[size_t(pick)])
                pick = a;
        }
        if (pick < 0) break;
        int target = expensive_side ? cheapest : int(std::max_element(dmc.cost.begin(), dmc.cost.end()) - dmc.cost.begin());
        if (pick == target) break;
        t.counts[size_t(pick)] -= 1;
        t.counts[size_t(target)] += 1;
        recompute();
    }
    recompute();
    if (sch.analytic_cost_mean > sch.gamma + 1e-12)
        throw NumericError("scheme mean cost exceeds gamma after construction");
    return sch;
}

namespace {

struct NofeedbackEngine {
    const SchemeSpec& sch;
    const Dmc& dmc;
    bool exact;
    std::vector<BinaryCcTable> cc;       // per branch, exact path
    std::vector<double> log_pw;          // mixture table over ones count
    std::vector<std::vector<double>> log_qstar_row;  // per branch: log q*(b)
    double threshold;

    NofeedbackEngine(const SchemeSpec& s, const Dmc& d, bool force_surrogate) : sch(s), dmc(d) {
        exact = is_binary(d) && !force_surrogate;
        threshold = double(s.n) * s.capacity + std::sqrt(double(s.n)) * s.r + double(s.n) * s.theta;
        for (auto& br : s.branches) {
            std::vector<double> lq(size_t(d.B), 0.0);
            for (int b = 0; b < d.B; ++b) lq[size_t(b)] = std::log(br.sol.q_star[size_t(b)]);
            log_qstar_row.push_back(lq);
        }
        if (exact) {
            for (auto& br : s.branches) cc.emplace_back(br.type, d);
            log_pw.assign(size_t(s.n) + 1, kNegInf);
            for (int64_t k = 0; k <= s.n; ++k) {
                double acc = kNegInf;
                for (size_t j = 0; j < s.branches.size(); ++j)
                    acc = log_add_exp(acc, std::log(s.branches[j].p) + cc[j].log_prob[size_t(k)]);
                log_pw[size_t(k)] = acc;
            }
        }
    }

    // returns (statistic, cost sum)
    std::pair<double, double> trial(uint64_t seed, int64_t t) const {
        RngStream branch_rng(seed, uint64_t(t), 0);
        std::vector<double> w(sch.branches.size());
        for (size_t j = 0; j < w.size(); ++j) w[j] = sch.branches[j].p;
        int j = branch_rng.next_index(w);
        RngStream shuffle_rng(seed, uint64_t(t), 1);
        RngStream noise_rng(seed, uint64_t(t), 2);
        std::vector<int> x = sample_constant_composition(sch.branches[size_t(j)].type, shuffle_rng);
        std::vector<int> y = channel_output(dmc, x, noise_rng);
        double lw = log_w_given(dmc, x, y);
        double stat;
        if (exact) {
            stat = lw - log_pw[size_t(count_ones(y))];
        } else {
            double best = kNegInf;
            for (size_t jj = 0; jj < sch.branches.size(); ++jj)
                best = std::max(best, log_product_from_logs(log_qstar_row[jj], y));
            stat = lw - best - (0.5 * double(sch.s_support - 1) * std::log(double(sch.n)) + sch.kappa_hat);
        }
        double cost = double(sch.n) * sch.branches[size_t(j)].type.cost_of(dmc);
        return {stat, cost};
    }
};

}  // namespace

SimReport run_nofeedback_trials(const SchemeSpec& scheme, const Dmc& dmc, int64_t trials, uint64_t seed,
                                const RunOptions& run) {
    if (trials < 1) throw InputError("trials must be positive");
    NofeedbackEngine eng(scheme, dmc, run.force_surrogate);
    double center = double(scheme.n) * scheme.gamma;
    MomentAcc acc = block_reduce<MomentAcc>(trials, run.threads, run.block, [&](int64_t t, MomentAcc& a) {
        auto [stat, cost] = eng.trial(seed, t);
        a.add(stat <= eng.threshold, cost - center);
    });
    return finalize_report(acc, scheme.n, scheme.gamma, scheme.r, scheme.theta, seed, eng.exact);
}

FeedbackSchemeSpec build_feedback_scheme(const Dmc& dmc, const CapacityCostSolution& sol, const DispersionInfo& disp,
                                         double v, double r, int64_t n, double theta, double beta,
                                         int64_t calibration_trials, uint64_t seed, const SchemeOptions& opts) {
    if (n % 2 != 0) throw InputError("feedback scheme needs even n");
    if (!(disp.v_gamma > 0.0)) throw InputError("feedback scheme needs V(Gamma) > 0");
    if (beta < 0.0) throw InputError("beta must be nonnegative");
    const int64_t nh = n / 2;

    FeedbackSchemeSpec fs;
    // branch construction at half blocklength, cost levels from the full n
    {
        SchemeSpec probe = build_nofeedback_scheme(dmc, sol, disp, v, r, n, theta, opts);
        fs.base = probe;
        for (auto& br : fs.base.branches) br.type = quantize_to_type(br.sol.p_star, nh, br.gamma_j, dmc);
        fs.base.n = nh;
    }
    fs.beta = beta;
    fs.timid_type = quantize_to_type(sol.p_star, nh, sol.gamma, dmc);
    fs.timid_sol = sol;

    const size_t nb = fs.base.branches.size();
    // halfway statistics sampled per branch once; thresholds move with delta
    std::vector<std::vector<double>> stats(nb);
    for (size_t j = 0; j < nb; ++j) {
        stats[j].resize(size_t(calibration_trials));
        const SchemeBranch& br = fs.base.branches[j];
        std::vector<double> lq(size_t(dmc.B), 0.0);
        for (int b = 0; b < dmc.B; ++b) lq[size_t(b)] = std::log(br.sol.q_star[size_t(b)]);
        for (int64_t t = 0; t < calibration_trials; ++t) {
            RngStream shuffle_rng(seed, uint64_t(t), 7000 + uint64_t(j) * 2);
            RngStream noise_rng(seed, uint64_t(t), 7001 + uint64_t(j) * 2);
            std::vector<int> x = sample_constant_composition(br.type, shuffle_rng);
            std::vector<int> y = channel_output(dmc, x, noise_rng);
            stats[j][size_t(t)] = log_w_given(dmc, x, y) - log_product_from_logs(lq, y);
        }
        std::sort(stats[j].begin(), stats[j].end());
    }

    double c_timid = fs.timid_type.cost_of(dmc);
    auto second_half_mean = [&](double delta) {
        double mean = 0.0;
        for (size_t j = 0; j < nb; ++j) {
            const SchemeBranch& br = fs.base.branches[j];
            double bj = (br.gamma_j > sol.gamma) ? beta : beta + delta;
            double tau = double(nh) * br.sol.capacity + bj * std::sqrt(double(nh));
            auto it = std::upper_bound(stats[j].begin(), stats[j].end(), tau);
            double u = double(stats[j].end() - it) / double(stats[j].size());
            double cj = br.type.cost_of(dmc);
            mean += br.p * (u * c_timid + (1.0 - u) * cj);
        }
        return mean;
    };

    double delta = 0.0;
    if (second_half_mean(0.0) > sol.gamma) {
        double lo = 0.0, hi = 1.0;
        int guard = 0;
        while (second_half_mean(hi) > sol.gamma && guard++ < 60) hi *= 2.0;
        if (second_half_mean(hi) > sol.gamma)
            throw NumericError("feedback calibration cannot reach the cost balance; residual " +
                               std::to_string(second_half_mean(hi) - sol.gamma));
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            if (second_half_mean(mid) > sol.gamma) lo = mid; else hi = mid;
            if (hi - lo < 1e-6) break;
        }
        delta = hi;
    }
    fs.delta1 = delta;
    fs.calib_residual = second_half_mean(delta) - sol.gamma;

    // branch types were re-quantized to half length, refresh the analytics
    double var1 = 0.0;
    {
        double cbar = 0.0;
        for (auto& br : fs.base.branches) cbar += br.p * br.type.cost_of(dmc);
        for (auto& br : fs.base.branches) {
            double d = double(nh) * (br.type.cost_of(dmc) - cbar);
            var1 += br.p * d * d;
        }
        fs.base.analytic_cost_mean = cbar;
        fs.base.analytic_cost_var = var1;
    }
    double var2 = 0.0;
    {
        // second-half cost is c_timid or c_j depending on the switch
        double mean2 = 0.0;
        std::vector<double> u(nb);
        for (size_t j = 0; j < nb; ++j) {
            const SchemeBranch& br = fs.base.branches[j];
            double bj = (br.gamma_j > sol.gamma) ? beta : beta + delta;
            double tau = double(nh) * br.sol.capacity + bj * std::sqrt(double(nh));
            auto it = std::upper_bound(stats[j].begin(), stats[j].end(), tau);
            u[j] = double(stats[j].end() - it) / double(stats[j].size());
            fs.beta_j.push_back(bj);
            fs.tau_j.push_back(tau);
            fs.switch_prob.push_back(u[j]);
            mean2 += br.p * (u[j] * c_timid + (1.0 - u[j]) * br.type.cost_of(dmc));
        }
        for (size_t j = 0; j < nb; ++j) {
            const SchemeBranch& br = fs.base.branches[j];
            double dt = double(nh) * (c_timid - mean2), dj = double(nh) * (br.type.cost_of(dmc) - mean2);
            var2 += br.p * (u[j] * dt * dt + (1.0 - u[j]) * dj * dj);
        }
    }
    fs.analytic_var_bound = var1 + var2 + 2.0 * std::sqrt(var1 * var2);
    return fs;
}

namespace {

struct FeedbackEngine {
    const FeedbackSchemeSpec& fs;
    const Dmc& dmc;
    bool exact;
    int64_t nh;
    double threshold;
    std::vector<BinaryCcTable> cc;  // per branch at n/2
    BinaryCcTable cc_timid;
    std::vector<double> log_pw1;    // mixture over first-half ones count
    std::vector<std::vector<double>> log_qstar;  // per branch
    std::vector<double> log_qstar_timid;
    std::vector<double> lg;  // lgamma table

    FeedbackEngine(const FeedbackSchemeSpec& f, const Dmc& d, bool force_surrogate) : fs(f), dmc(d) {
        nh = f.base.n;
        exact = is_binary(d) && !force_surrogate;
        int64_t n = 2 * nh;
        threshold = double(n) * f.base.capacity + std::sqrt(double(n)) * f.base.r + double(n) * f.base.theta;
        for (auto& br : f.base.branches) {
            std::vector<double> lq(size_t(d.B), 0.0);
            for (int b = 0; b < d.B; ++b) lq[size_t(b)] = std::log(br.sol.q_star[size_t(b)]);
            log_qstar.push_back(lq);
        }
        log_qstar_timid.resize(size_t(d.B));
        for (int b = 0; b < d.B; ++b) log_qstar_timid[size_t(b)] = std::log(f.timid_sol.q_star[size_t(b)]);
        if (exact) {
            for (auto& br : f.base.branches) cc.emplace_back(br.type, d);
            cc_timid = BinaryCcTable(f.timid_type, d);
            log_pw1.assign(size_t(nh) + 1, kNegInf);
            for (int64_t k = 0; k <= nh; ++k) {
                double acc = kNegInf;
                for (size_t j = 0; j < f.base.branches.size(); ++j)
                    acc = log_add_exp(acc, std::log(f.base.branches[j].p) + cc[j].log_prob[size_t(k)]);
                log_pw1[size_t(k)] = acc;
            }
            lg.resize(size_t(nh) + 2);
            for (int64_t i = 0; i <= nh + 1; ++i) lg[size_t(i)] = std::lgamma(double(i) + 1.0);
        }
    }

    double lbin(int64_t nn, int64_t kk) const {
        if (kk < 0 || kk > nn) return kNegInf;
        return lg[size_t(nn)] - lg[size_t(kk)] - lg[size_t(nn - kk)];
    }

    // P(halfway statistic above tau_j | branch j, first-half output with k1 ones)
    double switch_prob_given_y(size_t j, int64_t k1) const {
        const SchemeBranch& br = fs.base.branches[j];
        const int64_t n1 = br.type.counts[1], n0 = br.type.counts[0];
        double lw00 = std::log(dmc.w(0, 0)), lw01 = std::log(dmc.w(0, 1));
        double lw10 = std::log(dmc.w(1, 0)), lw11 = std::log(dmc.w(1, 1));
        double lq = xlogw(k1, log_qstar[j][1]) + xlogw(nh - k1, log_qstar[j][0]);
        double num = kNegInf, den = kNegInf;
        int64_t lo = std::max<int64_t>(0, k1 - n0), hi = std::min(k1, n1);
        for (int64_t a = lo; a <= hi; ++a) {
            double lw = xlogw(a, lw11) + xlogw(n1 - a, lw10) + xlogw(k1 - a, lw01) + xlogw(n0 - (k1 - a), lw00);
            double mass = lbin(k1, a) + lbin(nh - k1, n1 - a) + lw;
            den = log_add_exp(den, mass);
            if (lw - lq > fs.tau_j[j]) num = log_add_exp(num, mass);
        }
        if (den == kNegInf) return 0.0;
        return std::exp(num - den);
    }

    std::pair<double, double> trial(uint64_t seed, int64_t t) const {
        RngStream branch_rng(seed, uint64_t(t), 0);
        std::vector<double> w(fs.base.branches.size());
        for (size_t j = 0; j < w.size(); ++j) w[j] = fs.base.branches[j].p;
        size_t j = size_t(branch_rng.next_index(w));
        RngStream shuffle1(seed, uint64_t(t), 1);
        RngStream noise1(seed, uint64_t(t), 2);
        const SchemeBranch& br = fs.base.branches[j];
        std::vector<int> x1 = sample_constant_composition(br.type, shuffle1);
        std::vector<int> y1 = channel_output(dmc, x1, noise1);
        double lw1 = log_w_given(dmc, x1, y1);
        double half_stat = lw1 - log_product_from_logs(log_qstar[j], y1);
        bool switched = half_stat > fs.tau_j[j];

        RngStream shuffle2(seed, uint64_t(t), 3);
        RngStream noise2(seed, uint64_t(t), 4);
        const NType& t2 = switched ? fs.timid_type : br.type;
        std::vector<int> x2 = sample_constant_composition(t2, shuffle2);
        std::vector<int> y2 = channel_output(dmc, x2, noise2);
        double lw2 = log_w_given(dmc, x2, y2);

        double stat;
        if (exact) {
            int64_t k1 = count_ones(y1), k2 = count_ones(y2);
            // FW(y2 | y1): posterior over branches, then switch/no-switch mixture
            double den = log_pw1[size_t(k1)];
            double fw = kNegInf;
            for (size_t jj = 0; jj < fs.base.branches.size(); ++jj) {
                double lwj = std::log(fs.base.branches[jj].p) + cc[jj].log_prob[size_t(k1)] - den;
                double u = switch_prob_given_y(jj, k1);
                if (u > 0.0) fw = log_add_exp(fw, lwj + std::log(u) + cc_timid.log_prob[size_t(k2)]);
                if (u < 1.0) fw = log_add_exp(fw, lwj + std::log1p(-u) + cc[jj].log_prob[size_t(k2)]);
            }
            stat = lw1 - den + lw2 - fw;
        } else {
            double best1 = kNegInf;
            for (size_t jj = 0; jj < fs.base.branches.size(); ++jj)
                best1 = std::max(best1, log_product_from_logs(log_qstar[jj], y1));
            double best2 = log_product_from_logs(log_qstar_timid, y2);
            for (size_t jj = 0; jj < fs.base.branches.size(); ++jj)
                best2 = std::max(best2, log_product_from_logs(log_qstar[jj], y2));
            double corr = 0.5 * double(fs.base.s_support - 1) * std::log(double(nh)) + fs.base.kappa_hat;
            stat = (lw1 - best1) + (lw2 - best2) - 2.0 * corr;
        }
        double cost = double(nh) * (br.type.cost_of(dmc) + t2.cost_of(dmc));
        return {stat, cost};
    }
};

}  // namespace

SimReport run_feedback_trials(const FeedbackSchemeSpec& scheme, const Dmc& dmc, int64_t trials, uint64_t seed,
                              const RunOptions& run) {
    if (trials < 1) throw InputError("trials must be positive");
    FeedbackEngine eng(scheme, dmc, run.force_surrogate);
    int64_t n = 2 * scheme.base.n;
    double center = double(n) * scheme.base.gamma;
    MomentAcc acc = block_reduce<MomentAcc>(trials, run.threads, run.block, [&](int64_t t, MomentAcc& a) {
        auto [stat, cost] = eng.trial(seed, t);
        a.add(stat <= eng.threshold, cost - center);
    });
    return finalize_report(acc, n, scheme.base.gamma, scheme.base.r, scheme.base.theta, seed, eng.exact);
}

ExactCodeReport run_exact_random_code(const Dmc& dmc, const SchemeSpec& scheme, int64_t num_messages, int64_t trials,
                                      uint64_t seed, const RunOptions& run) {
    if (scheme.n > 16 || num_messages > 64) throw InputError("exact-code instance too large");
    if (dmc.J > 4 || dmc.B > 4) throw InputError("exact-code oracle needs alphabet sizes at most 4");
    const int64_t n = scheme.n;
    const double log_m = std::log(double(num_messages));
    const double thr = log_m + double(n) * scheme.theta;

    struct Acc {
        uint64_t errs = 0, bound_hits = 0, count = 0;
        void merge(const Acc& o) {
            errs += o.errs;
            bound_hits += o.bound_hits;
            count += o.count;
        }
    };

    std::vector<double> w(scheme.branches.size());
    for (size_t j = 0; j < w.size(); ++j) w[j] = scheme.branches[j].p;

    Acc acc = block_reduce<Acc>(trials, run.threads, run.block, [&](int64_t t, Acc& a) {
        std::vector<std::vector<int>> codebook(size_t(num_messages), std::vector<int>{});
        for (int64_t m = 0; m < num_messages; ++m) {
            RngStream brng(seed, uint64_t(t), 100 + 2 * uint64_t(m));
            RngStream srng(seed, uint64_t(t), 101 + 2 * uint64_t(m));
            int j = brng.next_index(w);
            codebook[size_t(m)] = sample_constant_composition(scheme.branches[size_t(j)].type, srng);
        }
        RngStream mrng(seed, uint64_t(t), 5);
        int64_t m_star = int64_t(mrng.next_below(uint64_t(num_messages)));
        RngStream nrng(seed, uint64_t(t), 6);
        std::vector<int> y = channel_output(dmc, codebook[size_t(m_star)], nrng);

        // maximum likelihood with lowest-index tie break
        int64_t best_m = 0;
        double best_ll = -std::numeric_limits<double>::infinity();
        for (int64_t m = 0; m < num_messages; ++m) {
            double ll = log_w_given(dmc, codebook[size_t(m)], y);
            if (ll > best_ll + 1e-12) {
                best_ll = ll;
                best_m = m;
            }
        }
        a.errs += (best_m != m_star) ? 1 : 0;

        // threshold statistic of the achievability bound, exact mixture output law
        double pw = 0.0;
        for (size_t j = 0; j < scheme.branches.size(); ++j)
            pw += scheme.branches[j].p * cc_output_prob(scheme.branches[j].type, dmc, y);
        double stat = log_w_given(dmc, codebook[size_t(m_star)], y) - std::log(pw);
        a.bound_hits += (stat <= thr) ? 1 : 0;
        a.count += 1;
    });

    ExactCodeReport rep;
    rep.trials = int64_t(acc.count);
    rep.n = n;
    rep.messages = num_messages;
    rep.seed = seed;
    double tt = double(acc.count);
    rep.error_rate = double(acc.errs) / tt;
    rep.error_se = std::sqrt(std::max(0.0, rep.error_rate * (1.0 - rep.error_rate) / tt));
    double p = double(acc.bound_hits) / tt;
    rep.lemma1_bound = p + std::exp(-double(n) * scheme.theta);
    rep.bound_se = std::sqrt(std::max(0.0, p * (1.0 - p) / tt));
    return rep;
}

double hoeffding_ratio_bound(std::span<const double> q_prime, std::span<const double> q, int64_t n, double c_n,
                             double gamma_floor) {
    if (q_prime.size() != q.size()) throw InputError("distribution size mismatch");
    if (!(gamma_floor > 0.0)) throw InputError("gamma floor must be positive");
    double d = 0.0;
    bool differ = false;
    for (size_t b = 0; b < q.size(); ++b) {
        if (q_prime[b] < gamma_floor - 1e-15) throw InputError("q_prime entry below the gamma floor");
        if (std::fabs(q_prime[b] - q[b]) > 1e-15) differ = true;
        if (q_prime[b] > 0) d += q_prime[b] * std::log(q_prime[b] / q[b]);
    }
    if (!differ || d <= 0.0) throw InputError("degenerate divergence: q and q_prime must differ");
    double g2 = gamma_floor * gamma_floor;
    double e1 = double(n) * d * g2 / 9.0;
    double e2 = 2.0 * c_n * g2 / 9.0;
    double e3 = c_n * c_n * g2 / (9.0 * double(n) * d);
    return std::exp(-e1) * std::exp(-e2) * std::exp(-e3);
}

double hoeffding_exceedance_mc(std::span<const double> q_prime, std::span<const double> q, int64_t n, double c_n,
                               int64_t trials, uint64_t seed, const RunOptions& run) {
    std::vector<double> log_ratio(q.size());
    for (size_t b = 0; b < q.size(); ++b) log_ratio[b] = std::log(q[b] / q_prime[b]);
    std::vector<double> probs(q_prime.begin(), q_prime.end());
    struct Acc {
        uint64_t hits = 0;
        void merge(const Acc& o) { hits += o.hits; }
    };
    Acc acc = block_reduce<Acc>(trials, run.threads, run.block, [&](int64_t t, Acc& a) {
        RngStream rng(seed, uint64_t(t), 77);
        double s = 0.0;
        for (int64_t i = 0; i < n; ++i) s += log_ratio[size_t(rng.next_index(probs))];
        if (s >= c_n) a.hits += 1;
    });
    return double(acc.hits) / double(trials);
}

}  // namespace ccv
