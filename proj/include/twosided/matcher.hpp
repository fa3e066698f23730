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
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fluid.hpp"
#include "market.hpp"

namespace twosided {

class InstanceTooLarge : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DegenerateFluid : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct MatchInstance {
    std::vector<Edge> edges;
    std::vector<int> supplies;
    std::vector<int> demands;
    /** One weight per edge, normally q_i + q_j before arrivals. */
    std::vector<std::int64_t> weights;
};

struct MatchResult {
    std::vector<int> y;
    std::vector<int> x_server;
    std::vector<int> x_customer;
    std::int64_t objective = 0;
    std::int64_t volume = 0;
};

namespace detail {

inline void finish_result(const MatchInstance &in, MatchResult &r) {
    r.x_server.assign(in.supplies.size(), 0);
    r.x_customer.assign(in.demands.size(), 0);
    r.objective = r.volume = 0;
    for (std::size_t e = 0; e < in.edges.size(); ++e) {
        r.x_server[in.edges[e].server] += r.y[e];
        r.x_customer[in.edges[e].customer] += r.y[e];
        r.objective += in.weights[e] * r.y[e];
        r.volume += r.y[e];
    }
}

} // namespace detail

/**
 * @brief Lexicographic max-weight, then max-volume, integral matching.
 *
 * Successive shortest paths on the residual network with combined edge gains
 * w (V + 1) + 1, stopping once no augmenting path has positive gain.
 */
class MaxWeightMatcher {
  public:
    MatchResult operator()(const MatchInstance &in) {
        MatchResult r;
        solve(in, r);
        return r;
    }

    void solve(const MatchInstance &in, MatchResult &r) {
        const int n = (int)in.supplies.size(), m = (int)in.demands.size();
        const int E = (int)in.edges.size();
        const int S = n + m, T = n + m + 1, N = n + m + 2;
        std::int64_t V = 0, Vd = 0;
        for (int v : in.supplies) V += v;
        for (int v : in.demands) Vd += v;
        V = std::min(V, Vd);
        r.y.assign(E, 0);
        if (V == 0) {
            detail::finish_result(in, r);
            return;
        }
        arcs_.clear();
        head_.assign(N, -1);
        auto add = [&](int u, int v, std::int64_t cap, std::int64_t cost) {
            arcs_.push_back({v, head_[u], cap, cost});
            head_[u] = (int)arcs_.size() - 1;
            arcs_.push_back({u, head_[v], 0, -cost});
            head_[v] = (int)arcs_.size() - 1;
        };
        for (int e = 0; e < E; ++e) {
            const Edge &ed = in.edges[e];
            std::int64_t cap = std::min(in.supplies[ed.server], in.demands[ed.customer]);
            add(ed.server, n + ed.customer, cap, -(in.weights[e] * (V + 1) + 1));
        }
        for (int i = 0; i < n; ++i) add(S, i, in.supplies[i], 0);
        for (int j = 0; j < m; ++j) add(n + j, T, in.demands[j], 0);

        const std::int64_t INF = std::numeric_limits<std::int64_t>::max() / 4;
        dist_.resize(N);
        prev_.resize(N);
        for (;;) {
            std::fill(dist_.begin(), dist_.end(), INF);
            std::fill(prev_.begin(), prev_.end(), -1);
            dist_[S] = 0;
            for (int round = 0; round < N; ++round) {
                bool changed = false;
                for (int u = 0; u < N; ++u) {
                    if (dist_[u] == INF) continue;
                    for (int a = head_[u]; a >= 0; a = arcs_[a].next) {
                        if (arcs_[a].cap <= 0) continue;
                        std::int64_t nd = dist_[u] + arcs_[a].cost;
                        if (nd < dist_[arcs_[a].to]) {
                            dist_[arcs_[a].to] = nd;
                            prev_[arcs_[a].to] = a;
                            changed = true;
                        }
                    }
                }
                if (!changed) break;
            }
            if (dist_[T] >= 0) break;
            std::int64_t push = INF;
            for (int v = T; v != S; v = arcs_[prev_[v] ^ 1].to) push = std::min(push, arcs_[prev_[v]].cap);
            for (int v = T; v != S; v = arcs_[prev_[v] ^ 1].to) {
                arcs_[prev_[v]].cap -= push;
                arcs_[prev_[v] ^ 1].cap += push;
            }
        }
        for (int e = 0; e < E; ++e) r.y[e] = (int)arcs_[2 * e + 1].cap;
        detail::finish_result(in, r);
    }

  private:
    struct Arc {
        int to;
        int next;
        std::int64_t cap;
        std::int64_t cost;
    };
    std::vector<Arc> arcs_;
    std::vector<int> head_;
    std::vector<std::int64_t> dist_;
    std::vector<int> prev_;
};

inline MatchResult max_weight_match(const MatchInstance &in) {
    MaxWeightMatcher mw;
    return mw(in);
}

/** @brief Exhaustive search with the same lexicographic objective. */
inline MatchResult brute_force_match(const MatchInstance &in) {
    const int E = (int)in.edges.size();
    std::vector<int> cap(E);
    double states = 1.0;
    for (int e = 0; e < E; ++e) {
        cap[e] = std::min(in.supplies[in.edges[e].server], in.demands[in.edges[e].customer]);
        states *= cap[e] + 1.0;
    }
    if (states > 1e7) throw InstanceTooLarge("brute-force matching instance exceeds 1e7 states");
    std::vector<int> y(E, 0);
    std::vector<int> su(in.supplies.size(), 0), du(in.demands.size(), 0);
    MatchResult best;
    best.y.assign(E, 0);
    std::int64_t bw = -1, bv = -1;
    for (;;) {
        bool ok = true;
        std::fill(su.begin(), su.end(), 0);
        std::fill(du.begin(), du.end(), 0);
        std::int64_t w = 0, vol = 0;
        for (int e = 0; e < E; ++e) {
            su[in.edges[e].server] += y[e];
            du[in.edges[e].customer] += y[e];
            w += in.weights[e] * y[e];
            vol += y[e];
        }
        for (std::size_t i = 0; i < su.size(); ++i) ok = ok && su[i] <= in.supplies[i];
        for (std::size_t j = 0; j < du.size(); ++j) ok = ok && du[j] <= in.demands[j];
        if (ok && (w > bw || (w == bw && vol > bv))) {
            bw = w;
            bv = vol;
            best.y = y;
        }
        int e = 0;
        while (e < E && y[e] == cap[e]) y[e++] = 0;
        if (e == E) break;
        ++y[e];
    }
    detail::finish_result(in, best);
    return best;
}

/** @brief Splitting probabilities of the secondary-queue construction, one per edge. */
struct SecondaryRouting {
    /** chi_e / lambda_j for the customer side of edge e. */
    std::vector<double> customer_prob;
    /** chi_e / mean mu_i for the server side of edge e. */
    std::vector<double> server_prob;
};

inline SecondaryRouting secondary_routing(const CompatibilityGraph &g, const FluidSolution &fluid) {
    std::vector<double> mu = fluid.mean_server_rates();
    SecondaryRouting r;
    r.customer_prob.assign(g.edges.size(), 0.0);
    r.server_prob.assign(g.edges.size(), 0.0);
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        double chi = fluid.chi_star[e];
        if (chi <= 0.0) continue;
        const Edge &ed = g.edges[e];
        if (fluid.lambda_star[ed.customer] <= 1e-12 || mu[ed.server] <= 1e-12)
            throw DegenerateFluid("zero fluid rate on a used edge");
        r.customer_prob[e] = chi / fluid.lambda_star[ed.customer];
        r.server_prob[e] = chi / mu[ed.server];
    }
    return r;
}

/**
 * @brief Splits type-level arrivals among the secondary queues of each type.
 *
 * probs holds one probability per edge; the probabilities of the edges of a
 * type need not sum to one and are normalized here. uniform() draws from [0,1).
 */
template <class Uniform>
inline void split_arrivals(const CompatibilityGraph &g, const std::vector<int> &arrivals, bool server_side,
                           const std::vector<double> &probs, Uniform &&uniform, std::vector<int> &out) {
    out.assign(g.edges.size(), 0);
    const int types = server_side ? g.n : g.m;
    for (int t = 0; t < types; ++t) {
        int a = arrivals[t];
        if (a == 0) continue;
        double tot = 0.0;
        int last = -1;
        for (std::size_t e = 0; e < g.edges.size(); ++e)
            if ((server_side ? g.edges[e].server : g.edges[e].customer) == t && probs[e] > 0.0) {
                tot += probs[e];
                last = (int)e;
            }
        if (last < 0) continue;
        for (int k = 0; k < a; ++k) {
            double u = uniform() * tot, acc = 0.0;
            int pick = last;
            for (std::size_t e = 0; e < g.edges.size(); ++e) {
                if ((server_side ? g.edges[e].server : g.edges[e].customer) != t || probs[e] <= 0.0) continue;
                acc += probs[e];
                if (u < acc) {
                    pick = (int)e;
                    break;
                }
            }
            ++out[pick];
        }
    }
}

/** @brief Secondary-queue split of one step's arrivals with the fluid's routing probabilities. */
template <class Uniform>
inline std::pair<std::vector<int>, std::vector<int>> route_secondary(const CompatibilityGraph &g, const FluidSolution &fluid,
                                                                     const std::vector<int> &server_arrivals,
                                                                     const std::vector<int> &customer_arrivals, Uniform &&uniform) {
    SecondaryRouting r = secondary_routing(g, fluid);
    std::pair<std::vector<int>, std::vector<int>> out;
    split_arrivals(g, server_arrivals, true, r.server_prob, uniform, out.first);
    split_arrivals(g, customer_arrivals, false, r.customer_prob, uniform, out.second);
    return out;
}

} // namespace twosided
