#include <fstream>
#include <iostream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ccv/bounds.hpp"
#include "ccv/json_io.hpp"
#include "ccv/parallel.hpp"

using namespace ccv;
using nlohmann::json;

namespace {

struct Emit {
    std::string out_path;

    void write(const std::string& text) const {
        if (out_path.empty()) {
            std::cout << text;
            return;
        }
        std::ofstream f(out_path);
        if (!f) throw InputError("cannot open output file: " + out_path);
        f << text;
    }
};

struct ChannelArgs {
    std::string path;
    double gamma = 0.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--channel", path, "channel spec JSON file")->required();
        cmd->add_option("--gamma", gamma, "cost level")->required();
    }
};

struct Loaded {
    Dmc dmc;
    CapacityCostSolution sol;
    DispersionInfo disp;
};

Loaded load_and_solve(const ChannelArgs& args) {
    Loaded l;
    l.dmc = load_channel_file(args.path);
    l.sol = solve_capacity_cost(l.dmc, args.gamma);
    l.disp = dispersion(l.sol, l.dmc);
    return l;
}

std::string fmt12(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

int run_check_lemmas(const ChannelArgs& ch, uint64_t seed, int threads, const Emit& emit) {
    Loaded l = load_and_solve(ch);
    std::ostringstream rep;
    bool all_ok = true;
    auto line = [&](const std::string& name, bool ok, const std::string& detail) {
        rep << (ok ? "PASS" : "FAIL") << "  " << name << "  " << detail << "\n";
        all_ok = all_ok && ok;
    };

    for (int64_t n : {8, 12, 16}) {
        QuantizedQuantities q = quantized_quantities(l.sol, l.disp, l.dmc, n);
        bool ok12 = !q.support_match || (q.lemma6_part1_ok && q.lemma6_part2_ok);
        line("lemma6 parts 1-2 n=" + std::to_string(n), ok12,
             "[C]_n=" + fmt12(q.c_n) + " [V]_n=" + fmt12(q.v_n) + (q.support_match ? "" : " (support mismatch)"));
        QRatioReport qr = check_q_ratio_bound(q.type_n, l.sol, l.dmc, n, 2.0);
        line("lemma6 part 3 n=" + std::to_string(n), qr.shape_holds,
             "min log ratio=" + fmt12(qr.min_log_ratio) + " kappa_fit=" + fmt12(qr.kappa_fit));
    }

    {
        RngStream rng(seed, 0x1e77a7ull, 0);
        bool ok_all = true;
        std::ostringstream det;
        for (int trial = 0; trial < 5; ++trial) {
            ThreePointDist d;
            d.k = 3;
            double w1 = rng.next_double(), w2 = rng.next_double(), w3 = rng.next_double();
            double z = w1 + w2 + w3;
            d.p[0] = w1 / z;
            d.p[1] = w2 / z;
            d.p[2] = w3 / z;
            for (int j = 0; j < 3; ++j) d.pi[j] = 4.0 * (rng.next_double() - 0.5);
            std::vector<double> xs = {10.0, 20.0, 30.0};
            std::vector<double> seq = essential_sup_limit_check(d, xs);
            double target = d.max_location();
            double dev10 = std::fabs(seq[0] - target), dev30 = std::fabs(seq[2] - target);
            bool ok = dev30 < dev10;
            ok_all = ok_all && ok;
            det << fmt12(dev10) << "->" << fmt12(dev30) << (trial + 1 < 5 ? " " : "");
        }
        line("lemma7 essential-sup approach", ok_all, det.str());
    }

    {
        std::vector<double> qp = l.sol.q_star;
        std::vector<double> qq = qp;
        qq[0] = std::min(0.98, qq[0] + 0.02);
        double z = 0.0;
        for (double x : qq) z += x;
        for (auto& x : qq) x /= z;
        double gamma_floor = 0.5 * *std::min_element(qp.begin(), qp.end());
        int64_t n = 200;
        double c_n = std::sqrt(double(n) / std::log(double(n)));
        double bound = hoeffding_ratio_bound(qp, qq, n, c_n, gamma_floor);
        RunOptions run;
        run.threads = threads;
        double emp = hoeffding_exceedance_mc(qp, qq, n, c_n, 100000, seed, run);
        line("lemma8 bound dominates", emp <= bound, "empirical=" + fmt12(emp) + " bound=" + fmt12(bound));
    }

    emit.write(rep.str());
    return all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"capacity-cost, dispersion and feedback bounds for cost-constrained DMCs"};
    app.require_subcommand(1);
    int threads = max_threads();
    app.add_option("--threads", threads, "worker thread cap")->capture_default_str();
    std::string out_path;
    app.add_option("--out", out_path, "write the report to a file instead of stdout");

    // capacity
    auto* cap = app.add_subcommand("capacity", "capacity-cost solution at a cost level");
    ChannelArgs cap_ch;
    cap_ch.attach(cap);
    std::string cap_grid;
    cap->add_option("--grid", cap_grid, "gamma grid G0:G1:STEP, emits CSV rows");
    double cap_tol = 1e-10;
    cap->add_option("--tol", cap_tol, "solver tolerance");

    // kfunc
    auto* kf = app.add_subcommand("kfunc", "evaluate K(r, V)");
    double kf_r = 0.0, kf_v = 0.0;
    kf->add_option("--r", kf_r, "mean bound")->required();
    kf->add_option("--v", kf_v, "variance bound")->required();
    bool kf_oracle = false;
    kf->add_flag("--oracle", kf_oracle, "also run the grid oracle and report the gap");

    // socr
    auto* so = app.add_subcommand("socr", "optimal second-order coding rate");
    ChannelArgs so_ch;
    so_ch.attach(so);
    double so_v = 0.0, so_eps = 0.1;
    so->add_option("--v", so_v, "cost variance budget")->required();
    so->add_option("--eps", so_eps, "target error probability")->required();

    // feedback-bound
    auto* fb = app.add_subcommand("feedback-bound", "L2(r, beta) and the gap to K");
    ChannelArgs fb_ch;
    fb_ch.attach(fb);
    double fb_v = 0.0, fb_r = 0.0, fb_beta = -1.0;
    bool fb_scan = false;
    fb->add_option("--v", fb_v, "cost variance budget")->required();
    fb->add_option("--r", fb_r, "second-order rate")->required();
    fb->add_option("--beta", fb_beta, "threshold parameter");
    fb->add_flag("--scan", fb_scan, "scan the beta grid and report the best gap");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Monte Carlo coding runs");
    sim->require_subcommand(1);
    auto* sim_nf = sim->add_subcommand("nofeedback", "three-type-class scheme");
    auto* sim_fb = sim->add_subcommand("feedback", "halfway timid/bold scheme");
    auto* sim_ex = sim->add_subcommand("exact", "tiny random codebook with ML decoding");
    struct SimArgs {
        ChannelArgs ch;
        double v = 0.0, eps = 0.1, theta_exp = 0.75;
        int64_t n = 2000, trials = 100000;
        uint64_t seed = 1;
        std::optional<double> r_override;
        bool csv = false;
        bool surrogate = false;
    };
    SimArgs nf_args, fb_args, ex_args;
    auto attach_sim = [](CLI::App* cmd, SimArgs& a, bool with_eps) {
        a.ch.attach(cmd);
        cmd->add_option("--v", a.v, "cost variance budget")->required();
        if (with_eps) cmd->add_option("--eps", a.eps, "target error, sets r = r*(eps)");
        double dummy;
        (void)dummy;
        cmd->add_option("--n", a.n, "blocklength")->capture_default_str();
        cmd->add_option("--trials", a.trials, "Monte Carlo trials")->capture_default_str();
        cmd->add_option("--seed", a.seed, "RNG seed")->capture_default_str();
        cmd->add_option("--theta-exp", a.theta_exp, "theta = n^{-exp}")->capture_default_str();
        cmd->add_option("--r", [&a](const std::vector<std::string>& vals) {
            a.r_override = std::stod(vals.at(0));
            return true;
        }, "explicit r instead of r*(eps)");
        cmd->add_flag("--csv", a.csv, "append a CSV row after the JSON report");
        cmd->add_flag("--surrogate", a.surrogate, "force the product-law surrogate statistic");
    };
    attach_sim(sim_nf, nf_args, true);
    attach_sim(sim_fb, fb_args, true);
    double fb_beta_arg = -1.0;
    bool fb_auto_beta = false;
    sim_fb->add_option("--beta", fb_beta_arg, "halfway threshold parameter");
    sim_fb->add_flag("--auto-beta", fb_auto_beta, "pick beta by scanning the analytic gap");
    int64_t fb_calib = 20000;
    sim_fb->add_option("--calibration-trials", fb_calib, "calibration sample size")->capture_default_str();
    attach_sim(sim_ex, ex_args, false);
    int64_t ex_messages = 16;
    sim_ex->add_option("--messages", ex_messages, "codebook size")->capture_default_str();

    // bounds curve
    auto* bo = app.add_subcommand("bounds", "analytic comparison curves");
    auto* bo_curve = bo->add_subcommand("curve", "floor / baseline / feedback curves over r");
    ChannelArgs bo_ch;
    bo_ch.attach(bo_curve);
    double bo_v = 0.0, bo_rmin = -0.5, bo_rmax = 0.5, bo_step = 0.05;
    bo_curve->add_option("--v", bo_v, "cost variance budget")->required();
    bo_curve->add_option("--r-min", bo_rmin, "")->required();
    bo_curve->add_option("--r-max", bo_rmax, "")->required();
    bo_curve->add_option("--step", bo_step, "")->required();

    // check lemmas
    auto* chk = app.add_subcommand("check", "verification batteries");
    auto* chk_lemmas = chk->add_subcommand("lemmas", "Lemma 6/7/8 numeric checks");
    ChannelArgs chk_ch;
    chk_ch.attach(chk_lemmas);
    uint64_t chk_seed = 7;
    chk_lemmas->add_option("--seed", chk_seed, "RNG seed")->capture_default_str();

    // parent options like --threads may appear after a subcommand
    std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* a) {
        a->fallthrough();
        for (auto* sub : a->get_subcommands({})) enable_fallthrough(sub);
    };
    enable_fallthrough(&app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    Emit emit{out_path};
    try {
        if (cap->parsed()) {
            Dmc dmc = load_channel_file(cap_ch.path);
            SolveOptions opts;
            opts.tol = cap_tol;
            if (!cap_grid.empty()) {
                double g0, g1, gs;
                char c1, c2;
                std::istringstream is(cap_grid);
                if (!(is >> g0 >> c1 >> g1 >> c2 >> gs) || c1 != ':' || c2 != ':')
                    throw InputError("bad --grid, expected G0:G1:STEP");
                std::ostringstream csv;
                csv << "gamma,capacity,c_prime,v_gamma,kkt_residual\n";
                for (double g = g0; g <= g1 + 1e-12; g += gs) {
                    CapacityCostSolution s = solve_capacity_cost(dmc, g, opts);
                    DispersionInfo d = dispersion(s, dmc);
                    csv << fmt12(g) << ',' << fmt12(s.capacity) << ',' << fmt12(s.c_prime) << ',' << fmt12(d.v_gamma)
                        << ',' << fmt12(s.kkt_residual) << '\n';
                }
                emit.write(csv.str());
            } else {
                CapacityCostSolution s = solve_capacity_cost(dmc, cap_ch.gamma, opts);
                DispersionInfo d = dispersion(s, dmc);
                emit.write(to_json_string(solution_to_json(s, d)));
            }
        } else if (kf->parsed()) {
            KOptions ko;
            ko.threads = threads;
            KResult k = k_value(kf_r, kf_v, ko);
            if (kf_oracle) {
                double oracle = k_oracle_grid(kf_r, kf_v);
                k.oracle_gap = std::fabs(k.value - oracle);
            }
            emit.write(to_json_string(kresult_to_json(k, kf_oracle)));
        } else if (so->parsed()) {
            Loaded l = load_and_solve(so_ch);
            KOptions ko;
            ko.threads = threads;
            SocrResult rs = socr(l.sol, l.disp, so_v, so_eps, ko);
            json j;
            j["r_star"] = json::parse(fmt12(rs.r_star));
            j["k_at_r_star"] = json::parse(fmt12(rs.k_at_r_star));
            j["baseline_as"] = json::parse(fmt12(rs.baseline_as));
            emit.write(to_json_string(j));
        } else if (fb->parsed()) {
            Loaded l = load_and_solve(fb_ch);
            KOptions ko;
            ko.threads = threads;
            json j;
            if (fb_scan || fb_beta < 0.0) {
                BetaScanResult bs = find_beta(fb_r, l.disp, fb_v, l.sol, {}, ko);
                if (bs.degenerate && !(bs.gap > bs.tolerance))
                    throw NumericError("no positive feedback gap: K minimizer is degenerate (v effectively 0)");
                j["beta"] = json::parse(fmt12(bs.beta));
                j["l2"] = json::parse(fmt12(bs.l2));
                j["k"] = json::parse(fmt12(bs.k));
                j["gap"] = json::parse(fmt12(bs.gap));
                j["tolerance"] = json::parse(fmt12(bs.tolerance));
            } else {
                double k = error_floor(fb_r, l.sol, l.disp, fb_v, ko);
                L2Result l2 = l2_bound(fb_r, fb_beta, l.disp, fb_v, l.sol, {}, ko);
                j["beta"] = json::parse(fmt12(fb_beta));
                j["l2"] = json::parse(fmt12(l2.value));
                j["k"] = json::parse(fmt12(k));
                j["gap"] = json::parse(fmt12(k - l2.value));
            }
            emit.write(to_json_string(j));
        } else if (sim->parsed()) {
            SimArgs& a = sim_nf->parsed() ? nf_args : (sim_fb->parsed() ? fb_args : ex_args);
            Loaded l = load_and_solve(a.ch);
            KOptions ko;
            ko.threads = threads;
            double theta = std::pow(double(a.n), -a.theta_exp);
            double r = 0.0;
            if (a.r_override) r = *a.r_override;
            else if (!sim_ex->parsed()) r = socr(l.sol, l.disp, a.v, a.eps, ko).r_star;
            RunOptions run;
            run.threads = threads;
            run.force_surrogate = a.surrogate;
            SchemeOptions sopts;
            sopts.kopts = ko;

            if (sim_nf->parsed()) {
                SchemeSpec scheme = build_nofeedback_scheme(l.dmc, l.sol, l.disp, a.v, r, a.n, theta, sopts);
                SimReport rep = run_nofeedback_trials(scheme, l.dmc, a.trials, a.seed, run);
                std::string text = to_json_string(simreport_to_json(rep));
                if (a.csv) text += simreport_to_csv_row(rep);
                emit.write(text);
                bool mean_ok = rep.cost_mean <= a.ch.gamma + 3.0 * rep.cost_mean_se + 1e-12;
                bool var_ok = rep.cost_var <= double(a.n) * a.v + 4.0 * rep.cost_var_se + 1e-9;
                if (!mean_ok || !var_ok) return 2;
            } else if (sim_fb->parsed()) {
                double beta = fb_beta_arg;
                if (fb_auto_beta || beta < 0.0) beta = find_beta(r, l.disp, a.v, l.sol, {}, ko).beta;
                FeedbackSchemeSpec scheme =
                    build_feedback_scheme(l.dmc, l.sol, l.disp, a.v, r, a.n, theta, beta, fb_calib, a.seed, sopts);
                SimReport rep = run_feedback_trials(scheme, l.dmc, a.trials, a.seed, run);
                std::string text = to_json_string(simreport_to_json(rep));
                if (a.csv) text += simreport_to_csv_row(rep);
                emit.write(text);
                bool mean_ok = rep.cost_mean <= a.ch.gamma + 3.0 * rep.cost_mean_se + 1e-12;
                bool var_ok = rep.cost_var <= double(a.n) * a.v + 4.0 * rep.cost_var_se + 1e-9;
                if (!mean_ok || !var_ok) return 2;
            } else {
                if (ex_args.r_override) r = *ex_args.r_override;
                SchemeSpec scheme = build_nofeedback_scheme(l.dmc, l.sol, l.disp, a.v, r, a.n, theta, sopts);
                ExactCodeReport rep = run_exact_random_code(l.dmc, scheme, ex_messages, a.trials, a.seed, run);
                emit.write(to_json_string(exactcode_to_json(rep)));
                if (rep.error_rate > rep.lemma1_bound + 3.0 * std::sqrt(rep.error_se * rep.error_se +
                                                                        rep.bound_se * rep.bound_se))
                    return 2;
            }
        } else if (bo->parsed()) {
            Loaded l = load_and_solve(bo_ch);
            KOptions ko;
            ko.threads = threads;
            auto pts = emit_curve(l.sol, l.disp, bo_v, bo_rmin, bo_rmax, bo_step, {}, ko);
            emit.write(curve_to_csv(pts));
        } else if (chk->parsed()) {
            return run_check_lemmas(chk_ch, chk_seed, threads, emit);
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
