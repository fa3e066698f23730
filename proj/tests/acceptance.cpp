// Copyright 2026 The twosided authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include <twosided/experiments.hpp>

#include "oracles.hpp"

using namespace twosided;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char *name, const std::function<Outcome()> &fn) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception &e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
}

MarketSpec market(const char *name, double c12, double c21, CostKind k) {
    return with_cost_model(with_detour(preset(name), {{0.0, c12}, {c21, 0.0}}), k);
}

std::shared_ptr<const FluidSolution> fluid_of(const MarketSpec &s) { return std::make_shared<const FluidSolution>(solve_fluid(s)); }

ExperimentPlan law_plan() {
    ExperimentPlan p;
    p.market = market("n_network_a", 0, 0, CostKind::FB);
    p.horizon = 1000000;
    p.burn_in = 100000;
    p.replications = 10;
    return p;
}

std::string csv(const ExperimentResult &r) {
    std::ostringstream os;
    r.write_csv(os);
    return os.str();
}

Outcome table1() {
    auto t0 = std::chrono::steady_clock::now();
    ExperimentResult r = run_table1(0.05);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double worst = 0.0;
    for (const auto &row : r.rows) worst = std::max(worst, std::abs(std::stod(row[4]) - std::stod(row[5])));
    return {r.all_pass() && secs < 300.0, r.gates[0].detail + ", worst deviation " + fmt_num(worst, 3) + ", " + fmt_num(secs, 3) + " s < 300 s"};
}

Outcome anchors() {
    double a = solve_deterministic_fluid(market("n_network_a", 0, 0, CostKind::FB)).value;
    MarketSpec b = market("n_network_b", 0, 0, CostKind::FB);
    double bv = solve_deterministic_fluid(b).value;
    double oa = oracle::n_network_interior_optimum(market("n_network_a", 0, 0, CostKind::FB));
    double ob = oracle::single_edge_optimum(10, 0.5, 0, 1) + oracle::single_edge_optimum(15, 1, -3, 3);
    double ea = std::max(std::abs(a - 12375.0 / 324), std::abs(a - oa));
    double eb = std::max(std::abs(bv - 443.0 / 12), std::abs(bv - ob));
    return {ea <= 1e-9 && eb <= 1e-9, "n_network_a " + fmt_num(a, 12) + " (err " + fmt_num(ea, 2) + "), n_network_b " + fmt_num(bv, 12) +
                                          " (err " + fmt_num(eb, 2) + ")"};
}

Outcome duality() {
    auto t0 = std::chrono::steady_clock::now();
    ExperimentResult r = run_duality({{"n_network_a", market("n_network_a", 0, 0, CostKind::SD)},
                                      {"n_network_b", market("n_network_b", 0, 0, CostKind::SD)}},
                                     0.05, 0.1);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool tight = true;
    std::string d;
    for (const auto &row : r.rows) {
        tight = tight && std::abs(std::stod(row[3])) <= 0.1;
        d += row[0] + " gap " + fmt_num(std::stod(row[3]), 3) + " (grid error " + fmt_num(std::stod(row[4]), 3) + "); ";
    }
    return {r.all_pass() && tight && secs < 120.0, d + "|gap| <= 0.1, " + fmt_num(secs, 3) + " s < 120 s"};
}

Outcome matching() {
    std::mt19937_64 rng(2024);
    MaxWeightMatcher mw;
    int agree = 0;
    const int N = 1000;
    for (int t = 0; t < N; ++t) {
        MatchInstance in;
        int n = 1 + (int)(rng() % 3), m = 1 + (int)(rng() % 3);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                if (rng() % 2 || (i == 0 && j == 0)) in.edges.push_back({i, j});
        while (in.edges.size() > 6) in.edges.erase(in.edges.begin() + (long)(rng() % in.edges.size()));
        for (int i = 0; i < n; ++i) in.supplies.push_back((int)(rng() % 5));
        for (int j = 0; j < m; ++j) in.demands.push_back((int)(rng() % 5));
        for (std::size_t e = 0; e < in.edges.size(); ++e) in.weights.push_back((std::int64_t)(rng() % 9));
        MatchResult a = mw(in), b = brute_force_match(in);
        agree += a.objective == b.objective && a.volume == b.volume;
    }
    return {agree == N, std::to_string(agree) + "/" + std::to_string(N) + " instances agree in objective and volume"};
}

Outcome cost_oracle() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.05, 3.0), cu(0.0, 4.0);
    int within = 0, feas_agree = 0, chain_ok = 0, chain_checked = 0;
    double worst_ratio = 0.0;
    const int N = 200;
    for (int t = 0; t < N; ++t) {
        MarketSpec s = with_detour(preset(t % 2 ? "n_network_b" : "n_network_a"), {{0.0, cu(rng)}, {cu(rng), 0.0}});
        std::vector<double> mu{u(rng), u(rng)};
        CostEvaluation sd = cost_sd(s, mu), ic = cost_ic(s, mu), fb = cost_fb(s, mu), b = cost_beta_ic(s, mu, 0.5);
        oracle::GridCost g = oracle::price_grid_cost_n2(s, mu, 1e-3);
        bool agree = sd.feasible == std::isfinite(g.value);
        feas_agree += agree;
        if (agree && sd.feasible) {
            double dev = std::abs(sd.value - g.value);
            worst_ratio = std::max(worst_ratio, dev / g.bound);
            within += dev <= g.bound;
        } else if (agree) {
            ++within;
        }
        bool ok = true;
        auto le = [&](const CostEvaluation &x, const CostEvaluation &y) {
            if (x.feasible && y.feasible) {
                ++chain_checked;
                ok = ok && x.value <= y.value + 1e-8;
            }
        };
        le(sd, b);
        le(b, ic);
        le(fb, ic);
        chain_ok += ok;
    }
    return {within == N && feas_agree == N && chain_ok == N,
            std::to_string(within) + "/" + std::to_string(N) + " within grid bound (worst error/bound " + fmt_num(worst_ratio, 3) +
                "), feasibility agrees " + std::to_string(feas_agree) + "/" + std::to_string(N) + ", chain holds at " +
                std::to_string(chain_ok) + "/" + std::to_string(N) + " samples (" + std::to_string(chain_checked) + " finite comparisons)"};
}

Outcome upper_bound() {
    struct Case {
        std::string name;
        MarketSpec s;
    };
    std::vector<Case> cases{{"n_network_a_fb", market("n_network_a", 0, 0, CostKind::FB)},
                            {"n_network_b_sd_c25", market("n_network_b", 2, 5, CostKind::SD)},
                            {"generic_city_fb", with_cost_model(preset("generic_city"), CostKind::FB)},
                            {"n_network_b_ic", market("n_network_b", 0, 0, CostKind::IC)}};
    const std::vector<std::string> policies{R"({"pricing":"two_price","epsilon":0.1})",
                                            R"({"pricing":"two_price","epsilon":0.1,"matching":"improved_random"})",
                                            R"({"pricing":"phi_family","phi":"sign"})",
                                            R"({"pricing":"secondary_two_price","epsilon":0.05})", R"({"pricing":"static_fluid"})"};
    int runs = 0, ok = 0;
    long clamps = 0;
    double worst = -1e300;
    std::string worst_name;
    for (const auto &c : cases) {
        auto f = fluid_of(c.s);
        for (const auto &pol : policies) {
            SimConfig cfg;
            cfg.eta = 10;
            cfg.horizon = 100000;
            cfg.burn_in = 10000;
            cfg.replications = 5;
            SimReport r = run(c.s, policy_from_json(json::parse(pol), f), ArrivalModel::parse("binomial8"), cfg);
            ++runs;
            clamps += r.clamp_count;
            double excess = r.net_profit_rate.mean - (f->value + r.net_profit_rate.ci);
            ok += excess <= 0.0 && r.net_profit_rate.mean <= r.profit_rate.mean;
            if (excess > worst) worst = excess, worst_name = c.name + " " + json::parse(pol)["pricing"].get<std::string>();
        }
    }
    return {ok == runs && runs >= 20 && clamps == 0, std::to_string(ok) + "/" + std::to_string(runs) +
                                                         " runs with R^ <= R~* + CI, closest " + worst_name + " at " + fmt_num(worst, 3) +
                                                         ", clamps " + std::to_string(clamps)};
}

Outcome percent_loss() {
    ExperimentPlan p;
    p.market = market("n_network_a", 0, 0, CostKind::FB);
    p.etas = {10};
    p.distributions = {"binomial5", "binomial8", "perturbed_uniform"};
    ExperimentResult r = run_loss_vs_eta(p);
    std::string d;
    bool pass = true;
    for (const auto &row : r.rows) {
        pass = pass && std::stod(row[3]) < 5.0 && row[9] == "0";
        d += row[1] + " " + fmt_num(std::stod(row[3]), 3) + "% +- " + fmt_num(std::stod(row[4]), 2) + "; ";
    }
    return {pass && r.rows.size() == 3, d + "each < 5%"};
}

Outcome scaling_laws() {
    std::string d;
    bool pass = true;
    auto gate = [&](const ExperimentResult &r, const std::string &name) {
        for (const auto &g : r.gates)
            if (g.name == name) {
                pass = pass && g.pass;
                d += name + " " + g.detail + (g.pass ? "" : " (FAIL)") + "; ";
                return;
            }
        pass = false;
        d += name + " missing; ";
    };
    ExperimentPlan q = law_plan();
    q.epsilons = {0.02, 0.04, 0.08, 0.16};
    gate(run_tradeoff_sweep(q), "queue_slope_binomial5");
    ExperimentPlan l = law_plan();
    l.epsilons = {0.16, 0.32, 0.64, 1.28};
    gate(run_tradeoff_sweep(l), "loss_slope_binomial5");
    ExperimentPlan e = law_plan();
    e.etas = {5, 10, 20, 50, 100};
    gate(run_loss_vs_eta(e), "net_loss_slope_binomial5");
    ExperimentPlan w = law_plan();
    w.etas = {1, 2, 4, 8, 16};
    gate(run_waiting_time(w), "waiting_loss_slope");
    return {pass, d};
}

Outcome first_order() {
    std::string d;
    bool pass = true;
    for (const char *name : {"n_network_a", "n_network_b"}) {
        MarketSpec s = market(name, 0, 0, CostKind::FB);
        PolicySpec ps;
        ps.fluid = fluid_of(s);
        ps.epsilon = 0.1;
        SimConfig cfg;
        cfg.eta = 10;
        cfg.horizon = 1000000;
        cfg.burn_in = 100000;
        SimReport r = run(s, ps, ArrivalModel::parse("binomial5"), cfg);
        bool ok = std::abs(r.first_order.mean) <= 3.0 * r.first_order.ci;
        pass = pass && ok;
        d += std::string(name) + " " + fmt_num(r.first_order.mean, 3) + " vs 3 CI " + fmt_num(3.0 * r.first_order.ci, 3) + "; ";
    }
    return {pass, d};
}

Outcome secondary() {
    MarketSpec s = market("n_network_a", 0, 0, CostKind::FB);
    auto f = fluid_of(s);
    SimConfig cfg;
    cfg.eta = 10;
    cfg.horizon = 200000;
    cfg.burn_in = 20000;
    SimReport r = run(s, policy_from_json(json::parse(R"({"pricing":"secondary_two_price","epsilon":0.05})"), f),
                      ArrivalModel::parse("binomial8"), cfg);
    bool pass = true;
    std::string d;
    for (std::size_t e = 0; e < f->chi_star.size(); ++e) {
        bool ok = std::abs(r.matches[e].mean - f->chi_star[e]) <= r.matches[e].ci;
        pass = pass && ok;
        d += "y" + std::to_string(e + 1) + " " + fmt_num(r.matches[e].mean, 5) + " +- " + fmt_num(r.matches[e].ci, 2) + " vs " +
             fmt_num(f->chi_star[e], 5) + "; ";
    }
    return {pass, d};
}

Outcome instability() {
    MarketSpec s = oracle::single_edge_market(2, 2, 0, 2);
    auto f = fluid_of(s);
    auto mean_queue = [&](const std::string &pol, long T) {
        SimConfig cfg;
        cfg.horizon = T;
        cfg.burn_in = 0;
        cfg.replications = 50;
        return run(s, policy_from_json(json::parse(pol), f), ArrivalModel::parse("bernoulli"), cfg).mean_queue.mean;
    };
    const std::string st = R"({"pricing":"static_fluid"})", tp = R"({"pricing":"two_price","epsilon":0.1})";
    double s1 = mean_queue(st, 50000), s4 = mean_queue(st, 200000);
    double t1 = mean_queue(tp, 50000), t4 = mean_queue(tp, 200000);
    bool pass = s4 / s1 >= 1.5 && t4 / t1 < 1.2;
    return {pass, "static E[sum q] " + fmt_num(s1, 4) + " -> " + fmt_num(s4, 4) + " (x" + fmt_num(s4 / s1, 3) + " >= 1.5), two-price " +
                      fmt_num(t1, 4) + " -> " + fmt_num(t4, 4) + " (x" + fmt_num(t4 / t1, 3) + " < 1.2)"};
}

Outcome determinism() {
    ExperimentPlan p;
    p.market = market("n_network_b", 2, 5, CostKind::SD);
    p.h = 0.1;
    p.epsilons = {0.1, 0.2};
    p.distributions = {"binomial6", "binomial8"};
    p.horizon = 50000;
    p.burn_in = 5000;
    p.replications = 4;
    std::string a = csv(run_tradeoff_sweep(p)), b = csv(run_tradeoff_sweep(p));
    p.threads = 3;
    std::string c = csv(run_tradeoff_sweep(p));
    ExperimentPlan e;
    e.market = market("n_network_a", 0, 0, CostKind::FB);
    e.etas = {5, 10};
    e.horizon = 50000;
    e.burn_in = 5000;
    e.replications = 3;
    std::string x = csv(run_loss_vs_eta(e)), y = csv(run_loss_vs_eta(e));
    bool pass = a == b && a == c && x == y;
    return {pass, "trade-off CSV " + std::to_string(a.size()) + " bytes identical over 2 runs and 3 threads: " + (a == b && a == c ? "yes" : "no") +
                      "; loss-vs-eta CSV identical: " + (x == y ? "yes" : "no")};
}

} // namespace

int main() {
    criterion(1, "table1_reproduction", table1);
    criterion(2, "exact_anchors", anchors);
    criterion(3, "strong_duality", duality);
    criterion(4, "matching_oracle", matching);
    criterion(5, "cost_function_oracle", cost_oracle);
    criterion(6, "simulation_upper_bound", upper_bound);
    criterion(7, "percent_loss_eta10", percent_loss);
    criterion(8, "scaling_laws", scaling_laws);
    criterion(9, "first_order_condition", first_order);
    criterion(10, "secondary_queue_equilibrium", secondary);
    criterion(11, "instability", instability);
    criterion(12, "determinism", determinism);
    std::printf("%d of 12 criteria passed\n", 12 - failures);
    return failures ? 1 : 0;
}
