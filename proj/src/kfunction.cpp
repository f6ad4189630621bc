#include "ccv/kfunction.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "ccv/math.hpp"
#include "ccv/parallel.hpp"
#include "ccv/rng.hpp"

namespace ccv {

double ThreePointDist::phi_mean() const {
    double s = 0;
    for (int j = 0; j < k; ++j) s += p[j] * norm_cdf(pi[j]);
    return s;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Two-point distribution with mean r and variance exactly a*b, masses at
// r-a and r+b with weights b/(a+b) and a/(a+b).
ThreePointDist two_point(double r, double a, double b) {
    ThreePointDist d;
    d.k = 2;
    d.pi[0] = r - a;
    d.pi[1] = r + b;
    d.p[0] = b / (a + b);
    d.p[1] = a / (a + b);
    return d;
}

ThreePointDist normalize_dist(ThreePointDist d) {
    // drop negligible atoms, keep exact mean by construction of callers
    ThreePointDist out;
    for (int j = 0; j < d.k; ++j) {
        if (d.p[j] > 1e-300) {
            out.p[out.k] = d.p[j];
            out.pi[out.k] = d.pi[j];
            ++out.k;
        }
    }
    if (out.k == 0) return ThreePointDist::point(0.0);
    double z = 0;
    for (int j = 0; j < out.k; ++j) z += out.p[j];
    for (int j = 0; j < out.k; ++j) out.p[j] /= z;
    return out;
}

// Pulls a candidate onto the feasible set: mean exactly r, variance at most v.
ThreePointDist project_feasible(ThreePointDist d, double r, double v) {
    d = normalize_dist(d);
    double m = d.mean();
    for (int j = 0; j < d.k; ++j) d.pi[j] += r - m;
    double var = d.variance();
    if (var > v) {
        double scale = (v > 0 && var > 0) ? std::sqrt(v / var) : 0.0;
        for (int j = 0; j < d.k; ++j) d.pi[j] = r + (d.pi[j] - r) * scale;
    }
    return d;
}

bool in_box(const ThreePointDist& d, double lo, double hi) {
    for (int j = 0; j < d.k; ++j)
        if (d.pi[j] < lo - 1e-12 || d.pi[j] > hi + 1e-12) return false;
    return true;
}

struct Candidate {
    double value = kInf;
    int64_t index = std::numeric_limits<int64_t>::max();
    ThreePointDist dist;

    void consider(double val, int64_t idx, const ThreePointDist& d) {
        if (val < value || (val == value && idx < index)) {
            value = val;
            index = idx;
            dist = d;
        }
    }
    void merge(const Candidate& o) { consider(o.value, o.index, o.dist); }
};

// Objective shared by the K problem (integral == nullptr) and the L2 problem.
using ExtraTerm = double (*)(const ThreePointDist&, const void*);

struct Objective {
    double r, v, lo, hi;
    ExtraTerm extra = nullptr;      // subtracted from E Phi
    const void* extra_ctx = nullptr;

    double eval_feasible(const ThreePointDist& d) const {
        double val = d.phi_mean();
        if (extra) val -= extra(d, extra_ctx);
        return val;
    }
    // penalized value for free-form NM iterates
    double eval_penalized(const ThreePointDist& d) const {
        double pen = 0.0;
        double var = d.variance();
        if (var > v) pen += 1e4 * (var - v);
        for (int j = 0; j < d.k; ++j) {
            if (d.pi[j] < lo) pen += 1e4 * (lo - d.pi[j]);
            if (d.pi[j] > hi) pen += 1e4 * (d.pi[j] - hi);
        }
        return eval_feasible(d) + pen;
    }
};

// Dense deterministic scan of the full-variance two-point family. b is the
// spread of the right atom; a = v/b is the left spread.
void scan_two_point(const Objective& obj, Candidate& best) {
    const double r = obj.r, v = obj.v;
    if (v <= 0) return;
    double phi_r = norm_pdf(r);
    double b_right = phi_r > 1e-300 ? 2.0 * (1.0 - norm_cdf(r)) / phi_r : 1.0;
    double b_left = phi_r > 1e-300 ? 2.0 * norm_cdf(r) / phi_r : 1.0;
    double scale = std::sqrt(v + 1.0);
    double bmax = std::max({200.0, 3.0 * b_right, 3.0 * (v / std::max(1e-12, std::min(b_left, obj.r - obj.lo)))});
    bmax = std::min(bmax, 1e6);
    // respect the box: pi2 = r+b <= hi, pi1 = r-v/b >= lo
    double b_hi = std::min(bmax, obj.hi - r);
    double b_lo = std::max(1e-7 * scale, (obj.lo < r) ? v / (r - obj.lo) : b_hi);
    if (!(b_hi > b_lo)) return;

    auto value_at = [&](double b) {
        ThreePointDist d = two_point(r, v / b, b);
        return obj.eval_feasible(d);
    };

    const int N = 1600;
    double lr = std::log(b_lo), step = (std::log(b_hi) - lr) / (N - 1);
    double prev2 = kInf, prev1 = kInf, prev_b = 0, prev2_b = 0;
    std::vector<double> valley_seeds;
    double best_scan = kInf, best_scan_b = b_lo;
    for (int i = 0; i < N; ++i) {
        double b = std::exp(lr + i * step);
        double f = value_at(b);
        if (f < best_scan) {
            best_scan = f;
            best_scan_b = b;
        }
        if (i >= 2 && prev1 <= prev2 && prev1 <= f) valley_seeds.push_back(prev_b);
        prev2 = prev1;
        prev2_b = prev_b;
        prev1 = f;
        prev_b = b;
    }
    (void)prev2_b;
    valley_seeds.push_back(best_scan_b);
    if (b_right > 0 && r + b_right <= obj.hi && b_right >= b_lo) valley_seeds.push_back(b_right);

    const double gr = 0.6180339887498949;
    for (size_t s = 0; s < valley_seeds.size(); ++s) {
        double c = valley_seeds[s];
        double a0 = std::max(b_lo, c * 0.5), b0 = std::min(b_hi, c * 2.0);
        double x1 = b0 - gr * (b0 - a0), x2 = a0 + gr * (b0 - a0);
        double f1 = value_at(x1), f2 = value_at(x2);
        for (int it = 0; it < 120 && b0 - a0 > 1e-13 * (1 + b0); ++it) {
            if (f1 < f2) {
                b0 = x2; x2 = x1; f2 = f1;
                x1 = b0 - gr * (b0 - a0);
                f1 = value_at(x1);
            } else {
                a0 = x1; x1 = x2; f1 = f2;
                x2 = a0 + gr * (b0 - a0);
                f2 = value_at(x2);
            }
        }
        double bb = 0.5 * (a0 + b0);
        ThreePointDist d = two_point(r, v / bb, bb);
        best.consider(obj.eval_feasible(d), 1000 + int64_t(s), d);
    }
}

ThreePointDist decode_params(const std::vector<double>& x, double r) {
    // (pi1, pi2, p1, p2), pi3 from the mean constraint
    ThreePointDist d;
    double p1 = std::clamp(x[2], 0.0, 1.0);
    double p2 = std::clamp(x[3], 0.0, 1.0 - p1);
    double p3 = 1.0 - p1 - p2;
    if (p3 < 1e-12) {
        double z = p1 + p2;
        if (z <= 0) return ThreePointDist::point(r);
        d.k = 2;
        d.p[0] = p1 / z;
        d.p[1] = p2 / z;
        d.pi[0] = x[0];
        d.pi[1] = x[1];
        // re-impose the mean by shifting
        double m = d.mean();
        d.pi[0] += r - m;
        d.pi[1] += r - m;
        return d;
    }
    d.k = 3;
    d.p[0] = p1;
    d.p[1] = p2;
    d.p[2] = p3;
    d.pi[0] = x[0];
    d.pi[1] = x[1];
    d.pi[2] = (r - p1 * x[0] - p2 * x[1]) / p3;
    return d;
}

Candidate optimize(const Objective& obj, const KOptions& opts) {
    const double r = obj.r, v = obj.v;
    Candidate best;
    ThreePointDist degen = ThreePointDist::point(std::clamp(r, obj.lo, obj.hi));
    if (std::fabs(degen.mean() - r) < 1e-12) best.consider(obj.eval_feasible(degen), 0, degen);

    if (v <= 0.0) return best;

    scan_two_point(obj, best);

    // structured starts
    std::vector<ThreePointDist> starts;
    double s = std::sqrt(v);
    starts.push_back(two_point(r, s, s));
    double phi_r = norm_pdf(r);
    if (phi_r > 1e-300) {
        double br = 2.0 * (1.0 - norm_cdf(r)) / phi_r;
        double bl = 2.0 * norm_cdf(r) / phi_r;
        starts.push_back(two_point(r, v / br, br));
        starts.push_back(two_point(r, bl, v / bl));
    }
    if (best.dist.k >= 2) starts.push_back(best.dist);

    RngStream rng(opts.seed, std::bit_cast<uint64_t>(r) ^ 0x5eedull, std::bit_cast<uint64_t>(v));
    for (int i = 0; i < opts.random_starts; ++i) {
        ThreePointDist d;
        d.k = 3;
        double w1 = rng.next_double(), w2 = rng.next_double(), w3 = rng.next_double();
        double z = w1 + w2 + w3;
        d.p[0] = w1 / z;
        d.p[1] = w2 / z;
        d.p[2] = w3 / z;
        double spread = (i % 4 == 3) ? 8.0 * std::sqrt(v + 1.0) : 2.0 * s;
        for (int j = 0; j < 3; ++j) d.pi[j] = r + spread * rng.next_normal();
        starts.push_back(d);
    }

    struct StartEval {
        Candidate c;
        void merge(const StartEval& o) { c.merge(o.c); }
    };
    StartEval agg = block_reduce<StartEval>(
        int64_t(starts.size()), opts.threads, 1, [&](int64_t i, StartEval& acc) {
            ThreePointDist d0 = project_feasible(starts[size_t(i)], r, v);
            std::vector<double> x0 = {d0.pi[0], d0.k > 1 ? d0.pi[1] : d0.pi[0] + 0.1,
                                      d0.k > 0 ? d0.p[0] : 1.0, d0.k > 1 ? d0.p[1] : 0.0};
            auto f = [&](const std::vector<double>& x) { return obj.eval_penalized(decode_params(x, r)); };
            std::vector<double> xb = nelder_mead(f, x0, 0.25 * std::sqrt(v) + 0.05, opts.nm_iters, 1e-15);
            ThreePointDist d = project_feasible(decode_params(xb, r), r, v);
            if (in_box(d, obj.lo, obj.hi) && std::fabs(d.mean() - r) < 1e-9)
                acc.c.consider(obj.eval_feasible(d), 2000 + i, d);
        });
    best.merge(agg.c);

    // final polish around the incumbent
    if (best.dist.k >= 1) {
        ThreePointDist d0 = best.dist;
        std::vector<double> x0 = {d0.pi[0], d0.k > 1 ? d0.pi[1] : d0.pi[0], d0.p[0], d0.k > 1 ? d0.p[1] : 0.0};
        auto f = [&](const std::vector<double>& x) { return obj.eval_penalized(decode_params(x, r)); };
        std::vector<double> xb = nelder_mead(f, x0, 1e-3, opts.nm_iters, 1e-16);
        ThreePointDist d = project_feasible(decode_params(xb, r), r, v);
        if (in_box(d, obj.lo, obj.hi) && std::fabs(d.mean() - r) < 1e-9)
            best.consider(obj.eval_feasible(d), 9000, d);
    }
    return best;
}

}  // namespace

KResult k_value(double r, double v, const KOptions& opts) {
    if (v < 0) throw InputError("k_value: v must be nonnegative");
    KResult res;
    res.r = r;
    res.v = v;
    if (v == 0.0) {
        res.value = norm_cdf(r);
        res.minimizer = ThreePointDist::point(r);
        return res;
    }
    Objective obj{r, v, opts.box_lo, opts.box_hi, nullptr, nullptr};
    Candidate best = optimize(obj, opts);
    res.value = best.value;
    res.minimizer = best.dist;
    return res;
}

double k_oracle_grid(double r, double v, const OracleGridSpec& spec) {
    if (v < 0) throw InputError("k_oracle_grid: v must be nonnegative");
    double lo = spec.lo, hi = spec.hi;
    if (lo == 0.0 && hi == 0.0) {
        double reach = 4.0 * std::sqrt(v + 1.0);
        double phi_r = norm_pdf(r);
        double br = phi_r > 1e-300 ? 2.0 * (1.0 - norm_cdf(r)) / phi_r : 0.0;
        double bl = phi_r > 1e-300 ? 2.0 * norm_cdf(r) / phi_r : 0.0;
        lo = r - std::max(reach, bl + 2.0);
        hi = r + std::max(reach, br + 2.0);
    }
    double step = spec.step > 0 ? spec.step : 0.01;

    // fine points near r, geometric thinning far out keeps the pair loop tractable
    std::vector<double> grid;
    double fine_lo = std::max(lo, r - 4.0 * std::sqrt(v + 1.0));
    double fine_hi = std::min(hi, r + 4.0 * std::sqrt(v + 1.0));
    for (double x = fine_lo; x <= fine_hi + 1e-12; x += step) grid.push_back(x);
    double span_l = fine_lo - lo, span_r = hi - fine_hi;
    const int coarse = 160;
    for (int i = 1; i <= coarse; ++i) {
        if (span_l > 0) grid.push_back(fine_lo - span_l * double(i) / coarse);
        if (span_r > 0) grid.push_back(fine_hi + span_r * double(i) / coarse);
    }
    std::sort(grid.begin(), grid.end());

    double best = norm_cdf(r);  // degenerate point is always feasible
    double bpi1 = r, bpi2 = r;
    for (size_t i = 0; i < grid.size(); ++i) {
        double pi1 = grid[i];
        if (pi1 > r) break;
        double a = r - pi1;
        for (size_t j = i + 1; j < grid.size(); ++j) {
            double pi2 = grid[j];
            if (pi2 < r) continue;
            double b = pi2 - r;
            if (a * b > v * (1.0 + 1e-12)) break;  // variance grows with pi2 at fixed pi1
            if (a + b <= 0) continue;
            double p1 = b / (a + b), p2 = a / (a + b);
            double val = p1 * norm_cdf(pi1) + p2 * norm_cdf(pi2);
            if (val < best) {
                best = val;
                bpi1 = pi1;
                bpi2 = pi2;
            }
        }
    }

    // three-point refinement around the best two-point candidate
    double a = r - bpi1, b = bpi2 - r;
    ThreePointDist seed = (a + b > 0) ? two_point(r, std::max(a, 1e-9), std::max(b, 1e-9))
                                      : ThreePointDist::point(r);
    Objective obj{r, v, lo, hi, nullptr, nullptr};
    std::vector<double> x0 = {seed.pi[0], seed.k > 1 ? seed.pi[1] : seed.pi[0] + 0.1, seed.p[0],
                              seed.k > 1 ? seed.p[1] : 0.0};
    auto f = [&](const std::vector<double>& x) { return obj.eval_penalized(decode_params(x, r)); };
    std::vector<double> xb = nelder_mead(f, x0, 0.1, 400, 1e-14);
    ThreePointDist d = project_feasible(decode_params(xb, r), r, v);
    if (in_box(d, lo, hi) && std::fabs(d.mean() - r) < 1e-9) best = std::min(best, d.phi_mean());
    return best;
}

double k_large_v_decay(double r, int64_t m) {
    if (m < 3) throw InputError("k_large_v_decay: m must be at least 3");
    double p = 1.0 - 1.0 / double(m);
    double pi1 = -std::sqrt(std::log(double(m)));
    double pi2 = (r - p * pi1) / (1.0 - p);
    return p * norm_cdf(pi1) + (1.0 - p) * norm_cdf(pi2);
}

SocrResult socr(const CapacityCostSolution& sol, const DispersionInfo& disp, double v, double eps,
                const KOptions& opts) {
    if (!(eps > 0.0 && eps < 1.0)) throw InputError("socr: eps must be in (0,1)");
    if (!(disp.v_gamma > 0.0)) throw InputError("socr: V(Gamma) must be positive");
    if (v < 0.0) throw InputError("socr: v must be nonnegative");
    double sv = std::sqrt(disp.v_gamma);
    SocrResult out;
    out.baseline_as = sv * inv_norm_cdf(eps);
    if (v == 0.0) {
        out.r_star = out.baseline_as;
        out.k_at_r_star = eps;
        out.minimizer = ThreePointDist::point(inv_norm_cdf(eps));
        return out;
    }
    double vp = sol.c_prime * sol.c_prime * v / disp.v_gamma;
    auto kv = [&](double rho) { return k_value(rho, vp, opts); };

    double rho_lo = inv_norm_cdf(eps / 2.0);
    double eps2 = 0.5 * (1.0 + eps);
    double rho_hi = inv_norm_cdf(eps2) + std::sqrt(2.0 * vp * eps2 / (eps2 - eps));
    KResult klo = kv(rho_lo), khi = kv(rho_hi);
    if (!(klo.value < eps) || !(khi.value > eps))
        throw NumericError("socr bracket inconsistent with monotonicity: K(lo)=" + std::to_string(klo.value) +
                           " K(hi)=" + std::to_string(khi.value) + " eps=" + std::to_string(eps));
    double tol_rho = 1e-6 / sv;
    KResult kmid = klo;
    double mid = rho_lo;
    while (rho_hi - rho_lo > tol_rho) {
        mid = 0.5 * (rho_lo + rho_hi);
        kmid = kv(mid);
        if (kmid.value <= eps) rho_lo = mid; else rho_hi = mid;
    }
    KResult kfin = kv(rho_lo);
    out.r_star = sv * rho_lo;
    out.k_at_r_star = kfin.value;
    out.minimizer = kfin.minimizer;
    return out;
}

double error_floor(double r, const CapacityCostSolution& sol, const DispersionInfo& disp, double v,
                   const KOptions& opts) {
    if (!(disp.v_gamma > 0.0)) throw InputError("error_floor: V(Gamma) must be positive");
    double rho = r / std::sqrt(disp.v_gamma);
    if (v == 0.0) return norm_cdf(rho);
    double vp = sol.c_prime * sol.c_prime * v / disp.v_gamma;
    return k_value(rho, vp, opts).value;
}

namespace {

struct L2Ctx {
    double x0 = 0.0;
    double trunc = 12.0;
    double abs_tol = 1e-10;
    double rho = 0.0;
};

double l2_integral(const ThreePointDist& d, const void* ctx_raw) {
    const L2Ctx& ctx = *static_cast<const L2Ctx*>(ctx_raw);
    auto integrand = [&](double x) {
        double first = 0.0, second = 0.0;
        for (int j = 0; j < d.k; ++j) {
            first += d.p[j] * norm_cdf(kSqrt2 * d.pi[j] - x);
            second += d.p[j] * norm_cdf(d.pi[j] / kSqrt2 + ctx.rho / kSqrt2 - x);
        }
        return norm_pdf(x) * (first - second);
    };
    return integrate_adaptive(integrand, ctx.x0, ctx.x0 + ctx.trunc, ctx.abs_tol);
}

}  // namespace

L2Result l2_bound(double r, double beta, const DispersionInfo& disp, double v, const CapacityCostSolution& sol,
                  const QuadSpec& quad, const KOptions& opts) {
    if (!(disp.v_gamma > 0.0)) throw InputError("l2_bound: V(Gamma) must be positive");
    if (beta < 0.0) throw InputError("l2_bound: beta must be nonnegative");
    double sv = std::sqrt(disp.v_gamma);
    double rho = r / sv;
    L2Result out;
    out.r = r;
    out.beta = beta;
    if (v == 0.0) {
        // degenerate point: the two integrand terms coincide, integral is zero
        out.value = norm_cdf(rho);
        out.minimizer = ThreePointDist::point(rho);
        out.quad_error = 0.0;
        return out;
    }
    double vp = sol.c_prime * sol.c_prime * v / disp.v_gamma;

    L2Ctx ctx;
    ctx.x0 = beta / sv;
    ctx.trunc = quad.truncation;
    ctx.abs_tol = quad.abs_tol;
    ctx.rho = rho;

    Objective obj{rho, vp, -1e300, 1e300, &l2_integral, &ctx};
    Candidate best = optimize(obj, opts);

    // warm start from the plain K minimizer
    KResult kr = k_value(rho, vp, opts);
    best.consider(obj.eval_feasible(kr.minimizer), 9500, kr.minimizer);

    out.value = best.value;
    out.minimizer = best.dist;
    out.quad_error = quad.abs_tol + (1.0 - norm_cdf(ctx.x0 + ctx.trunc));
    return out;
}

BetaScanResult find_beta(double r, const DispersionInfo& disp, double v, const CapacityCostSolution& sol,
                         const QuadSpec& quad, const KOptions& opts) {
    BetaScanResult out;
    KResult kr;
    double sv = std::sqrt(disp.v_gamma);
    double rho = r / sv;
    if (v == 0.0) {
        out.degenerate = true;
        out.k = norm_cdf(rho);
        return out;
    }
    double vp = sol.c_prime * sol.c_prime * v / disp.v_gamma;
    kr = k_value(rho, vp, opts);
    out.k = kr.value;
    if (kr.minimizer.variance() < 1e-12) out.degenerate = true;

    const double mults[] = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
    out.gap = -kInf;
    for (double m : mults) {
        double beta = m * sv;
        L2Result l2 = l2_bound(r, beta, disp, v, sol, quad, opts);
        out.betas.push_back(beta);
        out.gaps.push_back(out.k - l2.value);
        if (out.k - l2.value > out.gap) {
            out.gap = out.k - l2.value;
            out.beta = beta;
            out.l2 = l2.value;
            out.tolerance = l2.quad_error + quad.abs_tol + 1e-9;
        }
    }
    if (out.gap <= out.tolerance) out.degenerate = true;
    return out;
}

std::vector<double> essential_sup_limit_check(const ThreePointDist& dist, const std::vector<double>& x_values) {
    std::vector<double> seq;
    seq.reserve(x_values.size());
    for (double x : x_values) {
        if (!(x > 0.0) || x > 30.0 + 1e-12) throw InputError("essential_sup_limit_check: x must be in (0, 30]");
        double acc = -kInf;
        for (int j = 0; j < dist.k; ++j)
            acc = log_add_exp(acc, std::log(dist.p[j]) + log_norm_cdf(dist.pi[j] - x));
        seq.push_back(acc / x + 0.5 * x);
    }
    return seq;
}

}  // namespace ccv
