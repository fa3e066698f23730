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

// Command-line front end: cost, fluid, dual, simulate, table1, sweep-eta,
// sweep-eps, waiting, landscape.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include <twosided/experiments.hpp>

namespace ts = twosided;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::string preset;
    std::string model;
    double beta = 0.5;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App *app, Common &c) {
    app->add_option("--config", c.config, "market or plan JSON file");
    app->add_option("--preset", c.preset, "n_network_a, n_network_b or generic_city");
    app->add_option("--model", c.model, "cost model override: sd, ic, beta_ic, fb");
    app->add_option("--beta", c.beta, "truthful fraction for beta_ic");
    app->add_option("--seed", c.seed, "random seed");
    app->add_option("--out", c.out, "output file (default stdout)");
}

ts::ExperimentPlan load_plan(const Common &c) {
    ts::ExperimentPlan p;
    if (!c.config.empty()) {
        std::ifstream in(c.config);
        if (!in) throw ts::SchemaError("cannot open " + c.config);
        std::stringstream ss;
        ss << in.rdbuf();
        json j;
        try {
            j = json::parse(ss.str());
        } catch (const json::parse_error &e) {
            throw ts::SchemaError(std::string("malformed JSON: ") + e.what());
        }
        p = ts::plan_from_json(j);
    } else {
        p.market = ts::preset(c.preset.empty() ? "n_network_a" : c.preset);
    }
    if (c.seed) p.seed = *c.seed;
    if (!c.model.empty()) p.market = ts::with_cost_model(p.market, ts::cost_kind_from_name(c.model), c.beta);
    return p;
}

std::vector<double> parse_list(const std::string &s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) v.push_back(std::stod(tok));
    return v;
}

std::vector<std::string> parse_names(const std::string &s) {
    std::vector<std::string> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) v.push_back(tok);
    return v;
}

void emit(const Common &c, const std::string &text) {
    if (c.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(c.out);
    if (!f) throw std::runtime_error("cannot write " + c.out);
    f << text;
}

int emit_result(const Common &c, const ts::ExperimentResult &r) {
    std::ostringstream os;
    r.write_csv(os);
    emit(c, os.str());
    r.write_gates(std::cerr);
    return r.exit_code();
}

json witness_json(const ts::EquilibriumWitness &w) {
    return {{"p", w.p}, {"u", w.u}, {"phi", w.phi}, {"type_rates", w.type_rates}, {"argmax_pattern", w.argmax_pattern}};
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Two-sided queueing market toolkit"};
    app.require_subcommand(1);

    Common cc, cf, cd, cs, ct, ce, cp, cw, cl;
    std::string mu_text;
    auto *cost = app.add_subcommand("cost", "evaluate the server cost function at a rate vector");
    add_common(cost, cc);
    cost->add_option("--mu", mu_text, "comma-separated server rates")->required();

    double fh = 0.05, ftol = 1e-3;
    bool table1_flag = false;
    auto *fluid = app.add_subcommand("fluid", "solve the fluid problem");
    add_common(fluid, cf);
    fluid->add_option("--grid", fh, "grid step for SD and beta-IC");
    fluid->add_option("--tol", ftol, "Frank-Wolfe gap tolerance");
    fluid->add_flag("--table1", table1_flag, "emit the six-configuration comparison CSV");

    double dh = 0.05, dtol = 0.1;
    auto *dual = app.add_subcommand("dual", "certify strong duality");
    add_common(dual, cd);
    dual->add_option("--grid", dh, "grid step");
    dual->add_option("--tol", dtol, "gap tolerance added to the grid error");

    double eta = 10.0;
    int reps = -1, threads = 1;
    long horizon = -1, burnin = -1;
    std::string arrivals, trace;
    double epsilon = -1.0;
    auto *sim = app.add_subcommand("simulate", "simulate the queueing market");
    add_common(sim, cs);
    sim->add_option("--eta", eta, "market scale");
    sim->add_option("--reps", reps, "replications");
    sim->add_option("--horizon", horizon, "steps per replication");
    sim->add_option("--burnin", burnin, "discarded initial steps");
    sim->add_option("--arrivals", arrivals, "bernoulli, binomialN or perturbed_uniform");
    sim->add_option("--epsilon", epsilon, "fixed price perturbation");
    sim->add_option("--threads", threads, "worker threads");
    sim->add_option("--trace", trace, "per-step CSV of replication 0");

    double th = 0.05;
    auto *table1 = app.add_subcommand("table1", "fluid values of the N-network comparison");
    add_common(table1, ct);
    table1->add_option("--grid", th, "grid step");

    std::string list_eta, list_eps, list_dist;
    auto add_sweep = [&](CLI::App *s, Common &c) {
        add_common(s, c);
        s->add_option("--reps", reps, "replications");
        s->add_option("--horizon", horizon, "steps per replication");
        s->add_option("--burnin", burnin, "discarded initial steps");
        s->add_option("--arrivals", list_dist, "comma-separated distributions");
        s->add_option("--threads", threads, "worker threads");
    };
    auto *seta = app.add_subcommand("sweep-eta", "%Loss and net loss against eta");
    add_sweep(seta, ce);
    seta->add_option("--eta", list_eta, "comma-separated eta values");
    auto *seps = app.add_subcommand("sweep-eps", "queue length and profit loss against epsilon");
    add_sweep(seps, cp);
    seps->add_option("--eps", list_eps, "comma-separated epsilon values");
    auto *wait = app.add_subcommand("waiting", "waiting-time model loss against eta");
    add_sweep(wait, cw);
    wait->add_option("--eta", list_eta, "comma-separated eta values");

    double lh = 0.25, lbox = 6.0;
    auto *land = app.add_subcommand("landscape", "cost function on a grid of server rates");
    add_common(land, cl);
    land->add_option("--grid", lh, "grid step");
    land->add_option("--box", lbox, "upper rate on every axis");

    CLI11_PARSE(app, argc, argv);

    auto apply_sweep = [&](ts::ExperimentPlan &p) {
        if (reps > 0) p.replications = reps;
        if (horizon > 0) p.horizon = horizon;
        if (burnin >= 0) p.burn_in = burnin;
        if (!list_dist.empty()) p.distributions = parse_names(list_dist);
        p.threads = threads;
    };

    try {
        if (cost->parsed()) {
            ts::ExperimentPlan p = load_plan(cc);
            std::vector<double> mu = parse_list(mu_text);
            ts::CostEvaluation ev = ts::cost(p.market, mu);
            json j{{"model", ts::cost_kind_name(p.market.cost_model.kind)}, {"mu", mu}, {"feasible", ev.feasible}};
            j["value"] = ev.feasible ? json(ev.value) : json();
            if (ev.witness) j["witness"] = witness_json(*ev.witness);
            emit(cc, j.dump(2) + "\n");
            return 0;
        }
        if (fluid->parsed()) {
            if (table1_flag) return emit_result(cf, ts::run_table1(fh, ftol));
            ts::ExperimentPlan p = load_plan(cf);
            emit(cf, ts::fluid_to_json(ts::solve_fluid(p.market, fh, ftol)).dump(2) + "\n");
            return 0;
        }
        if (dual->parsed()) {
            ts::ExperimentPlan p = load_plan(cd);
            ts::DualityReport d = ts::certify_strong_duality(p.market, dh, dtol);
            json j{{"primal", d.primal}, {"dual", d.dual},   {"gap", d.gap},         {"grid_error", d.grid_error},
                   {"tol", d.tol},       {"pass", d.pass},   {"kappa", d.kappa}};
            emit(cd, j.dump(2) + "\n");
            return d.pass ? 0 : 2;
        }
        if (sim->parsed()) {
            ts::ExperimentPlan p = load_plan(cs);
            if (reps > 0) p.replications = reps;
            if (horizon > 0) p.horizon = horizon;
            if (burnin >= 0) p.burn_in = burnin;
            if (!arrivals.empty()) p.distributions = {arrivals};
            auto f = std::make_shared<const ts::FluidSolution>(ts::solve_fluid(p.market, p.h, p.tol));
            ts::PolicySpec ps = ts::policy_from_json(p.policy, f);
            if (epsilon >= 0.0) ps.epsilon = epsilon;
            ts::SimConfig cfg = ts::sim_config(p, eta);
            cfg.threads = threads;
            std::ofstream tf;
            if (!trace.empty()) {
                tf.open(trace);
                if (!tf) throw std::runtime_error("cannot write " + trace);
                cfg.trace = &tf;
            }
            ts::SimReport r = ts::run(p.market, ps, ts::ArrivalModel::parse(p.distributions.front()), cfg);
            emit(cs, ts::report_to_json(r).dump(2) + "\n");
            return 0;
        }
        if (table1->parsed()) return emit_result(ct, ts::run_table1(th));
        if (seta->parsed()) {
            ts::ExperimentPlan p = load_plan(ce);
            apply_sweep(p);
            if (!list_eta.empty()) p.etas = parse_list(list_eta);
            if (p.etas.empty()) p.etas = {5, 10, 20, 50, 100};
            return emit_result(ce, ts::run_loss_vs_eta(p));
        }
        if (seps->parsed()) {
            ts::ExperimentPlan p = load_plan(cp);
            apply_sweep(p);
            if (!list_eps.empty()) p.epsilons = parse_list(list_eps);
            if (p.epsilons.empty()) p.epsilons = {0.02, 0.04, 0.08, 0.16};
            return emit_result(cp, ts::run_tradeoff_sweep(p));
        }
        if (wait->parsed()) {
            ts::ExperimentPlan p = load_plan(cw);
            apply_sweep(p);
            if (!list_eta.empty()) p.etas = parse_list(list_eta);
            if (p.etas.empty()) p.etas = {1, 2, 4, 8, 16};
            return emit_result(cw, ts::run_waiting_time(p));
        }
        if (land->parsed()) {
            ts::ExperimentPlan p = load_plan(cl);
            return emit_result(cl, ts::run_cost_landscape(p.market, lh, lbox));
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
