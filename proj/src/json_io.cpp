#include "ccv/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ccv {

using nlohmann::json;

Dmc channel_from_json(const json& j) {
    RawChannelSpec raw;
    try {
        raw.input_symbols = j.at("input_symbols").get<std::vector<std::string>>();
        raw.output_symbols = j.at("output_symbols").get<std::vector<std::string>>();
        raw.transition = j.at("transition").get<std::vector<std::vector<double>>>();
        raw.cost = j.at("cost").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed channel file: ") + e.what());
    }
    return validate_channel(raw);
}

Dmc load_channel_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open channel file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError(std::string("channel file is not valid JSON: ") + e.what());
    }
    return channel_from_json(j);
}

namespace {

std::string fmt12(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

// round-trip through text so emitted numbers are exactly the 12-digit forms
json num(double x) { return json::parse(fmt12(x)); }

json vec(const std::vector<double>& xs) {
    json a = json::array();
    for (double x : xs) a.push_back(num(x));
    return a;
}

}  // namespace

std::string to_json_string(const json& j) { return j.dump(2) + "\n"; }

json solution_to_json(const CapacityCostSolution& sol, const DispersionInfo& disp) {
    json j;
    j["gamma"] = num(sol.gamma);
    j["capacity"] = num(sol.capacity);
    j["p_star"] = vec(sol.p_star);
    j["q_star"] = vec(sol.q_star);
    j["c_prime"] = num(sol.c_prime);
    j["kkt_residual"] = num(sol.kkt_residual);
    j["saturated"] = sol.saturated;
    j["unique"] = sol.uniqueness_flag;
    j["v_gamma"] = num(disp.v_gamma);
    j["nu"] = vec(disp.nu);
    j["nu_min"] = num(disp.nu_min);
    j["nu_max"] = num(disp.nu_max);
    j["i_max"] = num(disp.i_max);
    return j;
}

json kresult_to_json(const KResult& k, bool with_oracle) {
    json j;
    j["r"] = num(k.r);
    j["v"] = num(k.v);
    j["value"] = num(k.value);
    json masses = json::array();
    for (int i = 0; i < k.minimizer.k; ++i) {
        json m;
        m["p"] = num(k.minimizer.p[i]);
        m["pi"] = num(k.minimizer.pi[i]);
        masses.push_back(m);
    }
    j["minimizer"] = masses;
    if (with_oracle) j["oracle_gap"] = num(k.oracle_gap);
    return j;
}

json simreport_to_json(const SimReport& rep) {
    json j;
    j["trials"] = rep.trials;
    j["n"] = rep.n;
    j["r"] = num(rep.r);
    j["theta"] = num(rep.theta);
    j["threshold_prob"] = num(rep.threshold_prob);
    j["std_err"] = num(rep.std_err);
    j["lemma1_bound"] = num(rep.lemma1_bound);
    j["cost_mean"] = num(rep.cost_mean);
    j["cost_mean_se"] = num(rep.cost_mean_se);
    j["cost_var"] = num(rep.cost_var);
    j["cost_var_se"] = num(rep.cost_var_se);
    j["seed"] = rep.seed;
    j["exact_reference"] = rep.exact_reference;
    return j;
}

json exactcode_to_json(const ExactCodeReport& rep) {
    json j;
    j["trials"] = rep.trials;
    j["n"] = rep.n;
    j["messages"] = rep.messages;
    j["error_rate"] = num(rep.error_rate);
    j["error_se"] = num(rep.error_se);
    j["lemma1_bound"] = num(rep.lemma1_bound);
    j["bound_se"] = num(rep.bound_se);
    j["seed"] = rep.seed;
    return j;
}

std::string curve_to_csv(const std::vector<CurvePoint>& pts) {
    std::ostringstream out;
    out << "r,floor_gv,baseline_as,feedback_l2\n";
    for (const auto& p : pts)
        out << fmt12(p.r) << ',' << fmt12(p.floor_gv) << ',' << fmt12(p.baseline_as) << ',' << fmt12(p.feedback_l2)
            << '\n';
    return out.str();
}

std::string simreport_to_csv_row(const SimReport& rep) {
    std::ostringstream out;
    out << rep.n << ',' << rep.trials << ',' << fmt12(rep.r) << ',' << fmt12(rep.theta) << ','
        << fmt12(rep.threshold_prob) << ',' << fmt12(rep.std_err) << ',' << fmt12(rep.lemma1_bound) << ','
        << fmt12(rep.cost_mean) << ',' << fmt12(rep.cost_var) << ',' << rep.seed << '\n';
    return out.str();
}

}  // namespace ccv
