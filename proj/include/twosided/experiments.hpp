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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "equilibrium_cost.hpp"
#include "fluid.hpp"
#include "market.hpp"
#include "pricing.hpp"
#include "simulator.hpp"

namespace twosided {

/** @brief Fixed-format number for CSV and logs. */
inline std::string fmt_num(double v, int digits = 10) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

struct Gate {
    std::string name;
    bool pass = false;
    std::string detail;
};

/** @brief A CSV body plus the PASS/FAIL gates computed from it. */
struct ExperimentResult {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<Gate> gates;

    bool all_pass() const {
        for (const auto &g : gates)
            if (!g.pass) return false;
        return true;
    }
    int exit_code() const { return all_pass() ? 0 : 2; }

    void write_csv(std::ostream &os) const {
        for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
        os << '\n';
        for (const auto &r : rows) {
            for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << r[c];
            os << '\n';
        }
    }
    void write_gates(std::ostream &os) const {
        for (const auto &g : gates) os << (g.pass ? "PASS " : "FAIL ") << g.name << ": " << g.detail << '\n';
    }
};

/** @brief Ordinary least squares slope of log y on log x. */
inline double loglog_slope(const std::vector<double> &x, const std::vector<double> &y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

inline Gate slope_gate(const std::string &name, double slope, double target, double tol) {
    return {name, std::abs(slope - target) <= tol,
            "slope " + fmt_num(slope, 4) + ", target " + fmt_num(target, 4) + " +- " + fmt_num(tol, 3)};
}

/** @brief Exact solver for IC and FB, grid plus Frank-Wolfe otherwise. */
inline FluidSolution solve_fluid(const MarketSpec &s, double h = 0.05, double tol = 1e-3) {
    if (s.cost_model.kind == CostKind::IC || s.cost_model.kind == CostKind::FB) return solve_deterministic_fluid(s);
    return solve_probabilistic_fluid(s, h, -1.0, tol);
}

/** @brief Everything an experiment needs besides its kind. */
struct ExperimentPlan {
    MarketSpec market;
    nlohmann::json policy = nlohmann::json::object();
    double h = 0.05;
    double tol = 1e-3;
    std::vector<double> etas;
    std::vector<double> epsilons;
    std::vector<std::string> distributions{"binomial5"};
    long horizon = 200000;
    long burn_in = 20000;
    int replications = 10;
    std::uint64_t seed = 42;
    int threads = 1;
};

/**
 * @brief Reads a plan document, or a bare market document (one with an "n" key).
 */
inline ExperimentPlan plan_from_json(const nlohmann::json &j) {
    ExperimentPlan p;
    if (!j.is_object()) throw SchemaError("plan must be an object");
    if (j.contains("n")) {
        p.market = market_from_json(j);
        return p;
    }
    if (j.contains("market"))
        p.market = market_from_json(j["market"]);
    else if (j.contains("preset"))
        p.market = preset(j["preset"].get<std::string>(), j.value("detour_scale", 1.0));
    else
        throw SchemaError("plan needs \"market\" or \"preset\"");
    if (j.contains("cost_model")) {
        const auto &cm = j["cost_model"];
        std::string kind = cm.is_string() ? cm.get<std::string>() : cm.at("kind").get<std::string>();
        double beta = cm.is_object() ? cm.value("beta", 0.0) : 0.0;
        p.market = with_cost_model(p.market, cost_kind_from_name(kind), beta);
    }
    if (j.contains("detour")) p.market = with_detour(p.market, j["detour"].get<std::vector<std::vector<double>>>());
    if (j.contains("policy")) p.policy = j["policy"];
    if (j.contains("fluid")) {
        p.h = j["fluid"].value("h", p.h);
        p.tol = j["fluid"].value("tol", p.tol);
    }
    if (j.contains("eta")) p.etas = j["eta"].get<std::vector<double>>();
    if (j.contains("epsilon")) p.epsilons = j["epsilon"].get<std::vector<double>>();
    if (j.contains("arrivals")) {
        if (j["arrivals"].is_string())
            p.distributions = {j["arrivals"].get<std::string>()};
        else
            p.distributions = j["arrivals"].get<std::vector<std::string>>();
    }
    p.horizon = j.value("horizon", p.horizon);
    p.burn_in = j.value("burn_in", p.burn_in);
    p.replications = j.value("replications", p.replications);
    p.seed = j.value("seed", p.seed);
    p.threads = j.value("threads", p.threads);
    if (p.distributions.empty()) throw SchemaError("arrivals list must be nonempty");
    return p;
}

inline SimConfig sim_config(const ExperimentPlan &p, double eta) {
    SimConfig c;
    c.eta = eta;
    c.horizon = p.horizon;
    c.burn_in = p.burn_in;
    c.replications = p.replications;
    c.seed = p.seed;
    c.threads = p.threads;
    return c;
}

inline nlohmann::json estimate_json(const Estimate &e) { return {{"mean", e.mean}, {"ci", std::isfinite(e.ci) ? nlohmann::json(e.ci) : nlohmann::json()}}; }

inline nlohmann::json fluid_to_json(const FluidSolution &f) {
    nlohmann::json j;
    j["value"] = f.value;
    j["lambda_star"] = f.lambda_star;
    j["atoms"] = f.atoms;
    j["weights"] = f.weights;
    j["atom_costs"] = f.atom_costs;
    j["chi_star"] = f.chi_star;
    j["kappa"] = f.kappa;
    j["stats"] = {{"method", f.stats.method},       {"iterations", f.stats.iterations}, {"gap", f.stats.gap},
                  {"converged", f.stats.converged}, {"grid_step", f.stats.grid_step},   {"grid_error", f.stats.grid_error},
                  {"grid_atoms", f.stats.grid_atoms}};
    return j;
}

inline nlohmann::json report_to_json(const SimReport &r) {
    nlohmann::json j;
    j["eta"] = r.eta;
    j["epsilon"] = r.epsilon;
    j["horizon"] = r.horizon;
    j["burn_in"] = r.burn_in;
    j["replications"] = r.replications;
    j["seed"] = r.seed;
    j["arrivals"] = r.arrivals;
    j["fluid_value"] = r.fluid_value;
    j["net_profit_rate"] = estimate_json(r.net_profit_rate);
    j["profit_rate"] = estimate_json(r.profit_rate);
    j["revenue_rate"] = estimate_json(r.revenue_rate);
    j["cost_rate"] = r.cost_rate;
    j["mean_queue"] = estimate_json(r.mean_queue);
    j["profit_loss"] = estimate_json(r.profit_loss);
    j["net_loss"] = estimate_json(r.net_loss);
    j["percent_loss"] = estimate_json(r.percent_loss);
    j["first_order"] = estimate_json(r.first_order);
    j["clamp_count"] = r.clamp_count;
    auto vec = [](const std::vector<Estimate> &v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto &e : v) a.push_back(estimate_json(e));
        return a;
    };
    j["queue"] = vec(r.queue);
    j["empty_prob"] = vec(r.empty_prob);
    j["lambda"] = vec(r.lambda);
    j["matches"] = vec(r.matches);
    j["server_rates"] = r.server_rates;
    try {
        WaitingTimes w = waiting_times(r, r.eta);
        j["waiting_time"] = {{"server", w.server}, {"customer", w.customer}};
    } catch (const ZeroThroughput &) {
        j["waiting_time"] = nullptr;
    }
    return j;
}

/** @brief Published fluid values of the N-network comparison. */
inline double table1_reference(const std::string &supply, int detour, CostKind model) {
    if (supply == "n_network_a") return 38.19;
    static const double sd[3] = {39.75, 37.37, 36.91}, ic[3] = {36.86, 36.91, 36.91};
    if (model == CostKind::SD) return sd[detour];
    if (model == CostKind::IC) return ic[detour];
    return 36.91;
}

/** @brief Two supply configurations, three detour settings, three cost models. */
inline ExperimentResult run_table1(double h = 0.05, double tol = 1e-3) {
    ExperimentResult out;
    out.header = {"supply_config", "c12", "c21", "model", "value", "reference", "pass"};
    const double det[3][2] = {{0, 0}, {2, 5}, {20, 50}};
    int passed = 0, total = 0;
    for (const char *supply : {"n_network_a", "n_network_b"})
        for (int d = 0; d < 3; ++d)
            for (CostKind k : {CostKind::SD, CostKind::IC, CostKind::FB}) {
                MarketSpec s = with_detour(preset(supply), {{0.0, det[d][0]}, {det[d][1], 0.0}});
                s = with_cost_model(s, k);
                double v = solve_fluid(s, h, tol).value;
                double ref = table1_reference(supply, d, k);
                bool ok = std::abs(v - ref) <= 0.05;
                passed += ok;
                ++total;
                out.rows.push_back({supply, fmt_num(det[d][0]), fmt_num(det[d][1]), cost_kind_name(k), fmt_num(v, 8), fmt_num(ref, 4),
                                    ok ? "PASS" : "FAIL"});
            }
    out.gates.push_back({"table1", passed == total, std::to_string(passed) + "/" + std::to_string(total) + " cells within 0.05"});
    return out;
}

/** @brief %Loss against eta for each arrival distribution, with the net-loss slope. */
inline ExperimentResult run_loss_vs_eta(const ExperimentPlan &p) {
    if (p.etas.empty()) throw SchemaError("eta list must be nonempty");
    ExperimentResult out;
    out.header = {"eta", "distribution", "epsilon", "percent_loss", "percent_loss_ci", "net_loss", "net_loss_ci", "mean_queue",
                  "mean_queue_ci", "clamp_count", "loss_slope"};
    auto fluid = std::make_shared<const FluidSolution>(solve_fluid(p.market, p.h, p.tol));
    for (const auto &dist : p.distributions) {
        ArrivalModel am = ArrivalModel::parse(dist);
        std::vector<double> xs, ys;
        std::vector<std::vector<std::string>> rows;
        for (double eta : p.etas) {
            SimReport r = run(p.market, policy_from_json(p.policy, fluid), am, sim_config(p, eta));
            xs.push_back(eta);
            ys.push_back(r.net_loss.mean);
            rows.push_back({fmt_num(eta), dist, fmt_num(r.epsilon), fmt_num(r.percent_loss.mean), fmt_num(r.percent_loss.ci),
                            fmt_num(r.net_loss.mean), fmt_num(r.net_loss.ci), fmt_num(r.mean_queue.mean), fmt_num(r.mean_queue.ci),
                            std::to_string(r.clamp_count)});
            if (eta == 10.0)
                out.gates.push_back({"percent_loss_eta10_" + dist, r.percent_loss.mean < 5.0, fmt_num(r.percent_loss.mean, 4) + "% < 5%"});
        }
        double slope = loglog_slope(xs, ys);
        for (auto &row : rows) {
            row.push_back(fmt_num(slope, 6));
            out.rows.push_back(row);
        }
        if (xs.size() >= 2) out.gates.push_back(slope_gate("net_loss_slope_" + dist, slope, 1.0 / 3.0, 0.1));
    }
    return out;
}

/** @brief Queue length and profit loss against epsilon at eta = 1. */
inline ExperimentResult run_tradeoff_sweep(const ExperimentPlan &p) {
    if (p.epsilons.empty()) throw SchemaError("epsilon list must be nonempty");
    ExperimentResult out;
    out.header = {"epsilon",         "distribution", "mean_queue",  "mean_queue_ci",      "profit_loss",
                  "profit_loss_ci", "queue_slope",  "loss_slope", "loss_vs_queue_exponent"};
    auto fluid = std::make_shared<const FluidSolution>(solve_fluid(p.market, p.h, p.tol));
    std::vector<std::pair<double, std::vector<double>>> queue_by_dist;
    for (const auto &dist : p.distributions) {
        ArrivalModel am = ArrivalModel::parse(dist);
        std::vector<double> eps, q, loss;
        std::vector<std::vector<std::string>> rows;
        for (double e : p.epsilons) {
            PolicySpec ps = policy_from_json(p.policy, fluid);
            ps.epsilon = e;
            SimReport r = run(p.market, ps, am, sim_config(p, 1.0));
            eps.push_back(e);
            q.push_back(r.mean_queue.mean);
            loss.push_back(r.profit_loss.mean);
            rows.push_back({fmt_num(e), dist, fmt_num(r.mean_queue.mean), fmt_num(r.mean_queue.ci), fmt_num(r.profit_loss.mean),
                            fmt_num(r.profit_loss.ci)});
        }
        const double qs = loglog_slope(eps, q), ls = loglog_slope(eps, loss), ex = loglog_slope(q, loss);
        for (auto &row : rows) {
            row.push_back(fmt_num(qs, 6));
            row.push_back(fmt_num(ls, 6));
            row.push_back(fmt_num(ex, 6));
            out.rows.push_back(row);
        }
        if (eps.size() >= 2) {
            out.gates.push_back(slope_gate("queue_slope_" + dist, qs, -1.0, 0.15));
            out.gates.push_back(slope_gate("loss_slope_" + dist, ls, 2.0, 0.2));
            out.gates.push_back(slope_gate("loss_vs_queue_exponent_" + dist, ex, -2.0, 0.3));
        }
        double var = 0.0;
        for (double l : fluid->lambda_star) var += am.variance(l);
        queue_by_dist.push_back({var, q});
    }
    if (queue_by_dist.size() >= 2) {
        std::sort(queue_by_dist.begin(), queue_by_dist.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
        bool ordered = true;
        for (std::size_t d = 1; d < queue_by_dist.size(); ++d)
            for (std::size_t k = 0; k < queue_by_dist[d].second.size(); ++k)
                ordered = ordered && queue_by_dist[d].second[k] > queue_by_dist[d - 1].second[k];
        out.gates.push_back({"variance_ordering", ordered, "higher arrival variance gives longer queues at every epsilon"});
    }
    return out;
}

/**
 * @brief Loss with a waiting-time penalty against eta.
 *
 * Runs the plan's schedule (default eta^-2/3) and, for comparison, eta^-1/3.
 */
inline ExperimentResult run_waiting_time(const ExperimentPlan &p) {
    if (p.etas.empty()) throw SchemaError("eta list must be nonempty");
    ExperimentResult out;
    out.header = {"schedule", "eta", "epsilon", "profit_loss_part", "waiting_penalty", "loss", "loss_ci", "waiting_share", "loss_slope"};
    auto fluid = std::make_shared<const FluidSolution>(solve_fluid(p.market, p.h, p.tol));
    ArrivalModel am = ArrivalModel::parse(p.distributions.front());
    const int n = p.market.n(), m = p.market.m();
    std::string primary = p.policy.value("epsilon_rule", std::string("eta^-2/3"));
    std::vector<std::string> rules{primary};
    if (primary != "eta^-1/3") rules.push_back("eta^-1/3");
    for (const std::string &rule : rules) {
        std::vector<double> xs, ys;
        std::vector<std::vector<std::string>> rows;
        for (double eta : p.etas) {
            PolicySpec ps = policy_from_json(p.policy, fluid);
            ps.epsilon.reset();
            ps.epsilon_rule = EpsilonRule::parse(rule);
            SimReport r = run(p.market, ps, am, sim_config(p, eta));
            Estimate loss = waiting_model_loss(p.market, r);
            double wp = 0.0;
            for (const auto &a : r.per_replication) {
                for (int i = 0; i < n; ++i) wp += p.market.penalty[i] * waiting_time(a.queue[i], eta, r.server_rates[i]);
                for (int j = 0; j < m; ++j) wp += p.market.penalty[n + j] * waiting_time(a.queue[n + j], eta, a.lambda[j]);
            }
            wp /= (double)r.per_replication.size();
            double pl = eta * r.profit_loss.mean;
            xs.push_back(eta);
            ys.push_back(loss.mean);
            rows.push_back({rule, fmt_num(eta), fmt_num(r.epsilon), fmt_num(pl), fmt_num(wp), fmt_num(loss.mean), fmt_num(loss.ci),
                            fmt_num(wp / (pl + wp))});
        }
        double slope = loglog_slope(xs, ys);
        for (auto &row : rows) {
            row.push_back(fmt_num(slope, 6));
            out.rows.push_back(row);
        }
        if (rule == primary && xs.size() >= 2) out.gates.push_back(slope_gate("waiting_loss_slope", slope, -1.0 / 3.0, 0.15));
    }
    return out;
}

/** @brief Primal-dual certificates for a list of markets. */
inline ExperimentResult run_duality(const std::vector<std::pair<std::string, MarketSpec>> &markets, double h = 0.05, double tol = 0.1) {
    ExperimentResult out;
    out.header = {"market", "primal", "dual", "gap", "grid_error", "tol", "pass"};
    for (const auto &[name, s] : markets) {
        DualityReport d = certify_strong_duality(s, h, tol);
        out.rows.push_back({name, fmt_num(d.primal), fmt_num(d.dual), fmt_num(d.gap), fmt_num(d.grid_error), fmt_num(tol),
                            d.pass ? "PASS" : "FAIL"});
        out.gates.push_back({"duality_" + name, d.pass, "gap " + fmt_num(d.gap, 4) + " <= " + fmt_num(tol + d.grid_error, 4)});
    }
    return out;
}

/** @brief Cost of the market's model on a rectangular grid of server rates. */
inline ExperimentResult run_cost_landscape(const MarketSpec &s, double h, double box) {
    if (!(h > 0.0) || !(box > 0.0)) throw SchemaError("grid step and box must be positive");
    ExperimentResult out;
    const int n = s.n();
    for (int i = 0; i < n; ++i) out.header.push_back("mu_" + std::to_string(i + 1));
    out.header.push_back("feasible");
    out.header.push_back("cost");
    const int per = (int)std::floor(box / h + 1e-9) + 1;
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= per;
    if (total > 2000000) throw SchemaError("cost landscape grid too large");
    std::vector<double> mu(n);
    for (std::size_t g = 0; g < total; ++g) {
        std::size_t r = g;
        for (int i = 0; i < n; ++i) {
            mu[i] = (double)(r % per) * h;
            r /= per;
        }
        CostEvaluation c = cost(s, mu);
        std::vector<std::string> row;
        for (double v : mu) row.push_back(fmt_num(v));
        row.push_back(c.feasible ? "1" : "0");
        row.push_back(fmt_num(c.value));
        out.rows.push_back(std::move(row));
    }
    return out;
}

} // namespace twosided
