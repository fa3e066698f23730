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
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "equilibrium_cost.hpp"
#include "market.hpp"
#include "qp.hpp"

namespace twosided {

class NonConvexCost : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class SingularSystem : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class EmptyOmegaGrid : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConstraintViolated : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SolverStats {
    std::string method;
    int iterations = 0;
    double gap = 0.0;
    bool converged = true;
    double grid_step = 0.0;
    double grid_error = 0.0;
    std::size_t grid_atoms = 0;
};

struct FluidSolution {
    std::vector<double> lambda_star;
    std::vector<std::vector<double>> atoms;
    std::vector<double> weights;
    /** c(mu^g) for each atom. */
    std::vector<double> atom_costs;
    /** One entry per edge of the spec's graph. */
    std::vector<double> chi_star;
    double value = 0.0;
    /** Dual prices: n server entries then m customer entries. */
    std::vector<double> kappa;
    SolverStats stats;

    std::vector<double> mean_server_rates() const {
        std::vector<double> out(atoms.empty() ? 0 : atoms[0].size(), 0.0);
        for (std::size_t g = 0; g < atoms.size(); ++g)
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[g] * atoms[g][i];
        return out;
    }
    double mean_cost() const {
        double c = 0.0;
        for (std::size_t g = 0; g < atoms.size(); ++g) c += weights[g] * atom_costs[g];
        return c;
    }
};

inline double fluid_revenue(const MarketSpec &s, const std::vector<double> &lambda) {
    double r = 0.0;
    for (int j = 0; j < s.m(); ++j) r += s.demand[j].revenue(lambda[j]);
    return r;
}

namespace detail {

inline bool edges_form_forest(const MarketSpec &s, const std::vector<int> &edges) {
    std::vector<int> parent(s.n() + s.m());
    for (std::size_t v = 0; v < parent.size(); ++v) parent[v] = (int)v;
    auto root = [&](int v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    for (int e : edges) {
        int a = root(s.graph.edges[e].server), b = root(s.n() + s.graph.edges[e].customer);
        if (a == b) return false;
        parent[a] = b;
    }
    return true;
}

// Concave quadratic objective of the deterministic problem in the edge flows chi.
inline ConcaveQp fluid_qp(const MarketSpec &s, bool incentive_rows) {
    const int E = (int)s.graph.edges.size();
    const int n = s.n();
    ConcaveQp qp;
    qp.g.resize(E);
    qp.H = Eigen::MatrixXd::Zero(E, E);
    for (int a = 0; a < E; ++a) {
        const Edge &ea = s.graph.edges[a];
        qp.g[a] = s.demand[ea.customer].intercept - s.supply[ea.server].intercept;
        for (int b = 0; b < E; ++b) {
            const Edge &eb = s.graph.edges[b];
            if (ea.customer == eb.customer) qp.H(a, b) += 2.0 * s.demand[ea.customer].slope;
            if (ea.server == eb.server) qp.H(a, b) += 2.0 * s.supply[ea.server].slope;
        }
    }
    std::vector<std::pair<int, int>> pairs;
    if (incentive_rows)
        for (int i = 0; i < n; ++i)
            for (int l = 0; l < n; ++l)
                if (i != l) pairs.push_back({i, l});
    qp.A = Eigen::MatrixXd::Zero((int)pairs.size(), E);
    qp.b.resize((int)pairs.size());
    // G_i(mu_i) - G_l(mu_l) + c_il >= 0
    for (int r = 0; r < (int)pairs.size(); ++r) {
        auto [i, l] = pairs[r];
        for (int e = 0; e < E; ++e) {
            if (s.graph.edges[e].server == i) qp.A(r, e) += s.supply[i].slope;
            if (s.graph.edges[e].server == l) qp.A(r, e) -= s.supply[l].slope;
        }
        qp.b[r] = s.supply[l].intercept - s.supply[i].intercept - s.detour[i][l];
    }
    return qp;
}

inline std::vector<double> server_totals(const MarketSpec &s, const std::vector<double> &chi) {
    std::vector<double> mu(s.n(), 0.0);
    for (std::size_t e = 0; e < chi.size(); ++e) mu[s.graph.edges[e].server] += chi[e];
    return mu;
}

inline std::vector<double> customer_totals(const MarketSpec &s, const std::vector<double> &chi) {
    std::vector<double> lam(s.m(), 0.0);
    for (std::size_t e = 0; e < chi.size(); ++e) lam[s.graph.edges[e].customer] += chi[e];
    return lam;
}

} // namespace detail

/**
 * @brief Exact optimum for convex cost models (FB, or IC with affine supply).
 *
 * Small instances use active-set enumeration restricted to forest supports;
 * larger ones fall back to Lemke's method on the same KKT system.
 */
inline FluidSolution solve_deterministic_fluid(const MarketSpec &s) {
    const CostKind kind = s.cost_model.kind;
    if (kind != CostKind::FB && kind != CostKind::IC)
        throw NonConvexCost(std::string("deterministic reduction needs a convex cost model, got ") + cost_kind_name(kind));
    const bool ic = kind == CostKind::IC;
    ConcaveQp qp = detail::fluid_qp(s, ic);
    const int E = (int)qp.g.size();
    const int R = (int)qp.A.rows();
    QpSolution sol;
    std::string method;
    if (E <= 24 && R <= 24 && active_set_combinations(E, R) <= double(1 << 18)) {
        sol = solve_qp_active_set(qp, [&](const std::vector<int> &f) { return detail::edges_form_forest(s, f); });
        method = "active_set";
        if (!sol.ok) {
            std::size_t singular = sol.singular_systems, tried = sol.systems_tried;
            sol = solve_qp_lemke(qp);
            method = "lemke";
            if (!sol.ok)
                throw SingularSystem("no KKT point found: " + std::to_string(singular) + " of " + std::to_string(tried) +
                                     " stationarity systems were singular");
        }
    } else {
        sol = solve_qp_lemke(qp);
        method = "lemke";
        if (!sol.ok) throw SingularSystem("complementarity pivoting found no KKT point");
    }

    FluidSolution out;
    out.chi_star.assign(sol.x.data(), sol.x.data() + E);
    out.lambda_star = detail::customer_totals(s, out.chi_star);
    std::vector<double> mu = detail::server_totals(s, out.chi_star);
    CostEvaluation ce = cost(s, mu);
    out.atoms = {mu};
    out.weights = {1.0};
    out.atom_costs = {ce.feasible ? ce.value : cost_fb(s, mu).value};
    out.value = fluid_revenue(s, out.lambda_star) - out.atom_costs[0];
    out.kappa.assign(s.n() + s.m(), 0.0);
    for (int i = 0; i < s.n(); ++i) out.kappa[i] = s.supply[i].intercept + 2.0 * s.supply[i].slope * mu[i];
    if (ic) {
        int r = 0;
        for (int i = 0; i < s.n(); ++i)
            for (int l = 0; l < s.n(); ++l) {
                if (i == l) continue;
                double nu = sol.nu.size() ? sol.nu[r] : 0.0;
                out.kappa[i] -= nu * s.supply[i].slope;
                out.kappa[l] += nu * s.supply[l].slope;
                ++r;
            }
    }
    for (int j = 0; j < s.m(); ++j) out.kappa[s.n() + j] = -s.demand[j].marginal_revenue(out.lambda_star[j]);
    out.stats.method = method;
    out.stats.iterations = (int)sol.systems_tried;
    out.stats.gap = 0.0;
    out.stats.converged = true;
    return out;
}

/** @brief Best revenue over customer rates reachable from fixed server rates mu. */
inline double max_revenue_given_servers(const MarketSpec &s, const std::vector<double> &mu, std::vector<double> *chi = nullptr) {
    const int E = (int)s.graph.edges.size();
    ConcaveQp qp;
    qp.g.resize(E);
    qp.H = Eigen::MatrixXd::Zero(E, E);
    for (int a = 0; a < E; ++a) {
        const Edge &ea = s.graph.edges[a];
        qp.g[a] = s.demand[ea.customer].intercept;
        for (int b = 0; b < E; ++b)
            if (ea.customer == s.graph.edges[b].customer) qp.H(a, b) = 2.0 * s.demand[ea.customer].slope;
    }
    qp.A = Eigen::MatrixXd::Zero(2 * s.n(), E);
    qp.b.resize(2 * s.n());
    for (int i = 0; i < s.n(); ++i) {
        for (int e = 0; e < E; ++e)
            if (s.graph.edges[e].server == i) {
                qp.A(2 * i, e) = 1.0;
                qp.A(2 * i + 1, e) = -1.0;
            }
        qp.b[2 * i] = mu[i];
        qp.b[2 * i + 1] = -mu[i];
    }
    QpSolution sol = solve_qp_lemke(qp);
    if (!sol.ok) throw SingularSystem("server-constrained revenue problem has no KKT point");
    if (chi) chi->assign(sol.x.data(), sol.x.data() + E);
    return sol.value;
}

/** @brief Cost c(mu) tabulated on the grid {k h} within [0, box]^n; only feasible atoms are kept. */
struct CostGrid {
    int n = 0;
    double h = 0.0;
    double box = 0.0;
    int per_dim = 0;
    CostModel model;
    std::vector<double> mu; // size() * n
    std::vector<double> cost;
    double lipschitz = 0.0;

    std::size_t size() const { return cost.size(); }
    const double *atom(std::size_t g) const { return mu.data() + g * n; }
    double grid_error() const { return lipschitz * h * std::sqrt((double)n); }
};

inline double default_box(const MarketSpec &s) {
    double b = 0.0;
    for (const auto &d : s.demand) b += d.lambda_max();
    return b;
}

inline CostGrid tabulate_cost_grid(const MarketSpec &s, double h, double box = -1.0) {
    if (!(h > 0.0)) throw ValidationError("h", "grid step must be positive");
    if (box <= 0.0) box = default_box(s);
    CostGrid grid;
    grid.n = s.n();
    grid.h = h;
    grid.box = box;
    grid.model = s.cost_model;
    grid.per_dim = (int)std::floor(box / h + 1e-9) + 1;
    double total = std::pow((double)grid.per_dim, grid.n);
    if (total > 5e7) throw ValidationError("h", "grid has too many atoms; increase h or shrink the box");
    const std::size_t N = (std::size_t)total;
    std::vector<double> full(N, std::numeric_limits<double>::quiet_NaN());
    std::vector<int> idx(grid.n, 0);
    std::vector<double> mu(grid.n);
    for (std::size_t lin = 0; lin < N; ++lin) {
        for (int i = 0; i < grid.n; ++i) mu[i] = idx[i] * h;
        CostEvaluation ev = cost(s, mu);
        if (ev.feasible) {
            full[lin] = ev.value;
            grid.mu.insert(grid.mu.end(), mu.begin(), mu.end());
            grid.cost.push_back(ev.value);
        }
        for (int i = 0; i < grid.n; ++i) {
            if (++idx[i] < grid.per_dim) break;
            idx[i] = 0;
        }
    }
    if (grid.cost.empty()) throw EmptyOmegaGrid("no grid atom lies in the feasible set; check the box and the cost model");
    std::size_t stride = 1;
    for (int i = 0; i < grid.n; ++i) {
        for (std::size_t lin = 0; lin < N; ++lin) {
            if ((lin / stride) % grid.per_dim == (std::size_t)grid.per_dim - 1) continue;
            double a = full[lin], b = full[lin + stride];
            if (std::isnan(a) || std::isnan(b)) continue;
            grid.lipschitz = std::max(grid.lipschitz, std::abs(a - b) / h);
        }
        stride *= grid.per_dim;
    }
    return grid;
}

namespace detail {

struct FwVertex {
    std::size_t atom;
    std::vector<int> choice; // edge per server, -1 when the atom rate is zero
    std::vector<double> lambda;
    double cost;
};

inline FwVertex make_vertex(const MarketSpec &s, const CostGrid &grid, std::size_t g, const std::vector<int> &best_edge) {
    FwVertex v{g, std::vector<int>(s.n(), -1), std::vector<double>(s.m(), 0.0), grid.cost[g]};
    const double *mu = grid.atom(g);
    for (int i = 0; i < s.n(); ++i) {
        if (mu[i] <= 0.0) continue;
        v.choice[i] = best_edge[i];
        v.lambda[s.graph.edges[best_edge[i]].customer] += mu[i];
    }
    return v;
}

// Reduces a mixture to at most n+1 atoms without moving its mean or raising its cost.
inline void caratheodory_reduce(std::vector<std::vector<double>> &atoms, std::vector<double> &w, std::vector<double> &c) {
    const int n = atoms.empty() ? 0 : (int)atoms[0].size();
    while ((int)atoms.size() > n + 1) {
        const int k = n + 2;
        Eigen::MatrixXd M(n + 1, k);
        for (int a = 0; a < k; ++a) {
            for (int i = 0; i < n; ++i) M(i, a) = atoms[a][i];
            M(n, a) = 1.0;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        Eigen::VectorXd d = lu.kernel().col(0);
        double dc = 0.0;
        for (int a = 0; a < k; ++a) dc += d[a] * c[a];
        if (dc > 0.0) d = -d;
        double t = std::numeric_limits<double>::infinity();
        int drop = -1;
        for (int a = 0; a < k; ++a)
            if (d[a] < -1e-14 && w[a] / -d[a] < t) {
                t = w[a] / -d[a];
                drop = a;
            }
        if (drop < 0) {
            d = -d;
            for (int a = 0; a < k; ++a)
                if (d[a] < -1e-14 && w[a] / -d[a] < t) {
                    t = w[a] / -d[a];
                    drop = a;
                }
        }
        for (int a = 0; a < k; ++a) w[a] = std::max(0.0, w[a] + t * d[a]);
        w[drop] = 0.0;
        for (int a = (int)atoms.size() - 1; a >= 0; --a)
            if (w[a] <= 1e-15) {
                atoms.erase(atoms.begin() + a);
                w.erase(w.begin() + a);
                c.erase(c.begin() + a);
            }
    }
    double tot = 0.0;
    for (double x : w) tot += x;
    for (double &x : w) x /= tot;
}

} // namespace detail

struct ProbabilisticOptions {
    double tol = 1e-3;
    int max_outer = 5000;
    int max_inner = 400;
};

/**
 * @brief Mixture fluid optimum over a tabulated grid by Frank-Wolfe with pairwise inner steps.
 *
 * The returned value is a lower bound on the true optimum; stats.gap bounds the
 * optimization error on the grid and stats.grid_error the discretization error.
 */
inline FluidSolution solve_probabilistic_fluid(const MarketSpec &s, const CostGrid &grid, ProbabilisticOptions opt = {}) {
    const int n = s.n(), m = s.m();
    const std::size_t G = grid.size();
    if (G == 0) throw EmptyOmegaGrid("empty cost grid");
    std::vector<double> lam(m, 0.0), mr(m), w(n);
    std::vector<int> best_edge(n);
    auto gradients = [&]() {
        for (int j = 0; j < m; ++j) mr[j] = s.demand[j].marginal_revenue(lam[j]);
        for (int i = 0; i < n; ++i) {
            w[i] = -std::numeric_limits<double>::infinity();
            for (int e : s.graph.edges_of_server(i)) {
                double v = mr[s.graph.edges[e].customer];
                if (v > w[i]) {
                    w[i] = v;
                    best_edge[i] = e;
                }
            }
        }
    };
    auto lmo = [&]() {
        std::size_t best = 0;
        double bv = -std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < G; ++g) {
            const double *mu = grid.atom(g);
            double v = -grid.cost[g];
            for (int i = 0; i < n; ++i) v += mu[i] * w[i];
            if (v > bv) {
                bv = v;
                best = g;
            }
        }
        return best;
    };
    auto score = [&](const detail::FwVertex &v) {
        double sc = -v.cost;
        for (int j = 0; j < m; ++j) sc += mr[j] * v.lambda[j];
        return sc;
    };

    std::vector<detail::FwVertex> act;
    std::vector<double> alpha;
    gradients();
    act.push_back(detail::make_vertex(s, grid, lmo(), best_edge));
    alpha.push_back(1.0);
    lam = act[0].lambda;

    FluidSolution out;
    out.stats.method = "frank_wolfe";
    out.stats.converged = false;
    int outer = 0;
    double gap = std::numeric_limits<double>::infinity();
    for (; outer < opt.max_outer; ++outer) {
        gradients();
        detail::FwVertex sv = detail::make_vertex(s, grid, lmo(), best_edge);
        double sx = 0.0;
        for (std::size_t a = 0; a < act.size(); ++a) sx += alpha[a] * score(act[a]);
        gap = score(sv) - sx;
        if (gap <= opt.tol) {
            out.stats.converged = true;
            break;
        }
        bool known = false;
        for (const auto &v : act)
            if (v.atom == sv.atom && v.choice == sv.choice) known = true;
        if (!known) {
            act.push_back(std::move(sv));
            alpha.push_back(0.0);
        }
        for (int it = 0; it < opt.max_inner; ++it) {
            gradients();
            int top = -1, bot = -1;
            double ts = 0.0, bs = 0.0;
            for (int a = 0; a < (int)act.size(); ++a) {
                double sc = score(act[a]);
                if (top < 0 || sc > ts) {
                    top = a;
                    ts = sc;
                }
                if (alpha[a] > 0.0 && (bot < 0 || sc < bs)) {
                    bot = a;
                    bs = sc;
                }
            }
            double lin = ts - bs;
            if (top == bot || lin * alpha[bot] <= 0.01 * opt.tol) break;
            double quad = 0.0;
            for (int j = 0; j < m; ++j) {
                double d = act[top].lambda[j] - act[bot].lambda[j];
                quad += s.demand[j].slope * d * d;
            }
            double gamma = quad > 0.0 ? std::min(alpha[bot], lin / (2.0 * quad)) : alpha[bot];
            alpha[top] += gamma;
            alpha[bot] -= gamma;
            if (alpha[bot] < 1e-14) alpha[bot] = 0.0;
            for (int j = 0; j < m; ++j) lam[j] += gamma * (act[top].lambda[j] - act[bot].lambda[j]);
        }
        for (int a = (int)act.size() - 1; a >= 0; --a)
            if (alpha[a] == 0.0) {
                act.erase(act.begin() + a);
                alpha.erase(alpha.begin() + a);
            }
        lam.assign(m, 0.0);
        for (std::size_t a = 0; a < act.size(); ++a)
            for (int j = 0; j < m; ++j) lam[j] += alpha[a] * act[a].lambda[j];
    }
    out.stats.iterations = outer;
    out.stats.gap = gap;

    // aggregate onto atoms and edges
    const int E = (int)s.graph.edges.size();
    out.chi_star.assign(E, 0.0);
    std::map<std::size_t, double> beta;
    for (std::size_t a = 0; a < act.size(); ++a) {
        beta[act[a].atom] += alpha[a];
        const double *mu = grid.atom(act[a].atom);
        for (int i = 0; i < n; ++i)
            if (act[a].choice[i] >= 0) out.chi_star[act[a].choice[i]] += alpha[a] * mu[i];
    }
    for (auto [g, b] : beta) {
        out.atoms.emplace_back(grid.atom(g), grid.atom(g) + n);
        out.weights.push_back(b);
        out.atom_costs.push_back(grid.cost[g]);
    }
    detail::caratheodory_reduce(out.atoms, out.weights, out.atom_costs);

    std::vector<double> mean = out.mean_server_rates();
    if (out.atoms.size() > 1) {
        CostEvaluation cm = cost(s, mean);
        if (cm.feasible && cm.value <= out.mean_cost() + 1e-12) {
            out.atoms = {mean};
            out.weights = {1.0};
            out.atom_costs = {cm.value};
        }
    }
    out.lambda_star = detail::customer_totals(s, out.chi_star);
    out.value = fluid_revenue(s, out.lambda_star) - out.mean_cost();
    lam = out.lambda_star;
    gradients();
    out.kappa.assign(n + m, 0.0);
    for (int i = 0; i < n; ++i) out.kappa[i] = w[i];
    for (int j = 0; j < m; ++j) out.kappa[n + j] = -mr[j];
    out.stats.grid_step = grid.h;
    out.stats.grid_error = grid.grid_error();
    out.stats.grid_atoms = G;
    return out;
}

inline FluidSolution solve_probabilistic_fluid(const MarketSpec &s, double h, double box = -1.0, double tol = 1e-3) {
    CostGrid grid = tabulate_cost_grid(s, h, box);
    ProbabilisticOptions opt;
    opt.tol = tol;
    return solve_probabilistic_fluid(s, grid, opt);
}

inline double demand_conjugate(const DemandCurve &d, double k) {
    double t = std::max(0.0, d.intercept + k);
    return t * t / (4.0 * d.slope);
}

/** @brief Dual objective at kappa (n server entries, then m customer entries) over a tabulated grid. */
inline double dual_value(const MarketSpec &s, const CostGrid &grid, const std::vector<double> &kappa) {
    const int n = s.n(), m = s.m();
    if ((int)kappa.size() != n + m) throw ShapeError("dual point must have n+m entries");
    for (const Edge &e : s.graph.edges)
        if (kappa[e.server] + kappa[n + e.customer] < -1e-12)
            throw ConstraintViolated("dual edge constraint fails on edge (" + std::to_string(e.server + 1) + "," +
                                     std::to_string(e.customer + 1) + ")");
    double v = 0.0;
    for (int j = 0; j < m; ++j) v += demand_conjugate(s.demand[j], kappa[n + j]);
    double inner = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double *mu = grid.atom(g);
        double t = grid.cost[g];
        for (int i = 0; i < n; ++i) t -= kappa[i] * mu[i];
        inner = std::min(inner, t);
    }
    return v - inner;
}

inline double dual_value(const MarketSpec &s, const std::vector<double> &kappa, double h) {
    return dual_value(s, tabulate_cost_grid(s, h), kappa);
}

/** @brief Completes server prices with the smallest feasible customer prices. */
inline std::vector<double> complete_dual_point(const MarketSpec &s, const std::vector<double> &kappa1) {
    std::vector<double> k(kappa1);
    k.resize(s.n() + s.m(), -std::numeric_limits<double>::infinity());
    for (const Edge &e : s.graph.edges) k[s.n() + e.customer] = std::max(k[s.n() + e.customer], -kappa1[e.server]);
    return k;
}

namespace detail {

template <class F> std::vector<double> nelder_mead(F &&f, std::vector<double> x0, double scale, int max_eval, double *fbest) {
    const int d = (int)x0.size();
    std::vector<std::vector<double>> P(d + 1, x0);
    std::vector<double> fv(d + 1);
    for (int i = 0; i < d; ++i) P[i + 1][i] += scale;
    int evals = 0;
    for (int i = 0; i <= d; ++i) fv[i] = f(P[i]), ++evals;
    std::vector<int> ord(d + 1);
    while (evals < max_eval) {
        for (int i = 0; i <= d; ++i) ord[i] = i;
        std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        const int lo = ord[0], hi = ord[d], nh = ord[d - 1];
        double size = 0.0;
        for (int i = 0; i <= d; ++i)
            for (int k = 0; k < d; ++k) size = std::max(size, std::abs(P[i][k] - P[lo][k]));
        if (fv[hi] - fv[lo] < 1e-11 && size < 1e-9) break;
        std::vector<double> c(d, 0.0);
        for (int i = 0; i <= d; ++i)
            if (i != hi)
                for (int k = 0; k < d; ++k) c[k] += P[i][k] / d;
        auto along = [&](double t) {
            std::vector<double> x(d);
            for (int k = 0; k < d; ++k) x[k] = c[k] + t * (P[hi][k] - c[k]);
            return x;
        };
        std::vector<double> xr = along(-1.0);
        double fr = f(xr);
        ++evals;
        if (fr < fv[lo]) {
            std::vector<double> xe = along(-2.0);
            double fe = f(xe);
            ++evals;
            if (fe < fr) P[hi] = xe, fv[hi] = fe;
            else P[hi] = xr, fv[hi] = fr;
        } else if (fr < fv[nh]) {
            P[hi] = xr, fv[hi] = fr;
        } else {
            std::vector<double> xc = fr < fv[hi] ? along(-0.5) : along(0.5);
            double fc = f(xc);
            ++evals;
            if (fc < std::min(fr, fv[hi])) {
                P[hi] = xc, fv[hi] = fc;
            } else {
                for (int i = 0; i <= d; ++i) {
                    if (i == lo) continue;
                    for (int k = 0; k < d; ++k) P[i][k] = P[lo][k] + 0.5 * (P[i][k] - P[lo][k]);
                    fv[i] = f(P[i]);
                    ++evals;
                }
            }
        }
    }
    int lo = 0;
    for (int i = 1; i <= d; ++i)
        if (fv[i] < fv[lo]) lo = i;
    *fbest = fv[lo];
    return P[lo];
}

} // namespace detail

struct DualityReport {
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
    double grid_error = 0.0;
    double tol = 0.0;
    bool pass = false;
    std::vector<double> kappa;
    FluidSolution solution;
};

/**
 * @brief Minimizes the dual over kappa with Nelder-Mead restarts and compares with the primal.
 *
 * Customer prices are eliminated as kappa2_j = -min over neighbors of kappa1_i,
 * which is optimal for any fixed kappa1.
 */
inline DualityReport certify_strong_duality(const MarketSpec &s, const CostGrid &grid, double tol, int restarts = 16,
                                            std::uint64_t seed = 20240601) {
    DualityReport rep;
    rep.tol = tol;
    ProbabilisticOptions opt;
    opt.tol = std::min(1e-3, tol / 10.0);
    rep.solution = solve_probabilistic_fluid(s, grid, opt);
    rep.primal = rep.solution.value;
    rep.grid_error = grid.grid_error();
    auto f = [&](const std::vector<double> &k1) { return dual_value(s, grid, complete_dual_point(s, k1)); };
    std::vector<double> start(rep.solution.kappa.begin(), rep.solution.kappa.begin() + s.n());
    double best_f = std::numeric_limits<double>::infinity();
    std::vector<double> best_x;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int r = 0; r < restarts; ++r) {
        std::vector<double> x0 = r == 0 ? start : best_x;
        double scale = 0.5;
        if (r > 0)
            for (double &v : x0) v += 2.0 * nd(rng) / (1.0 + r / 4.0);
        if (r == 0) scale = 0.05;
        double fx;
        std::vector<double> x = detail::nelder_mead(f, x0, scale, 600, &fx);
        x = detail::nelder_mead(f, x, 0.01, 300, &fx);
        if (fx < best_f) {
            best_f = fx;
            best_x = x;
        }
    }
    rep.dual = best_f;
    rep.kappa = complete_dual_point(s, best_x);
    rep.gap = rep.dual - rep.primal;
    rep.pass = rep.gap <= tol + rep.grid_error;
    return rep;
}

inline DualityReport certify_strong_duality(const MarketSpec &s, double h, double tol) {
    return certify_strong_duality(s, tabulate_cost_grid(s, h), tol);
}

} // namespace twosided
