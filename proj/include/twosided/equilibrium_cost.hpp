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

#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lp.hpp"
#include "market.hpp"

namespace twosided {

class ShapeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using Matrix = std::vector<std::vector<double>>;

struct EquilibriumWitness {
    std::vector<double> p;
    /** u[l][i]: utility of a type-l server joining queue i. */
    Matrix u;
    /** phi[l][i]: rate of type-l servers joining queue i. */
    Matrix phi;
    std::vector<double> type_rates;
    std::vector<std::vector<int>> argmax_pattern;
};

struct CostEvaluation {
    bool feasible = false;
    double value = std::numeric_limits<double>::infinity();
    std::optional<EquilibriumWitness> witness;

    static CostEvaluation infeasible() { return {}; }
};

/** @brief True iff every row of nu puts mass only on maximizers of the matching row of u. */
inline bool check_equilibrium(const Matrix &u, const Matrix &nu) {
    if (u.size() != nu.size()) throw ShapeError("utility and routing matrices differ in row count");
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i].size() != nu[i].size()) throw ShapeError("utility and routing matrices differ in column count");
        double sum = 0.0, best = -std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < u[i].size(); ++l) {
            sum += nu[i][l];
            best = std::max(best, u[i][l]);
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ShapeError("routing rows must sum to one");
        for (std::size_t l = 0; l < u[i].size(); ++l)
            if (nu[i][l] > 0.0 && u[i][l] < best - 1e-9) return false;
    }
    return true;
}

/** @brief Row-normalized routing implied by a witness; empty types put unit mass on a maximizer. */
inline Matrix witness_routing(const EquilibriumWitness &w) {
    const std::size_t n = w.p.size();
    Matrix nu(n, std::vector<double>(n, 0.0));
    for (std::size_t l = 0; l < n; ++l) {
        double tot = 0.0;
        for (std::size_t i = 0; i < n; ++i) tot += w.phi[l][i];
        if (tot > 1e-12) {
            for (std::size_t i = 0; i < n; ++i) nu[l][i] = w.phi[l][i] / tot;
        } else {
            std::size_t best = 0;
            for (std::size_t i = 1; i < n; ++i)
                if (w.u[l][i] > w.u[l][best]) best = i;
            nu[l][best] = 1.0;
        }
    }
    return nu;
}

namespace detail {

inline EquilibriumWitness identity_witness(const MarketSpec &s, const std::vector<double> &mu) {
    const int n = s.n();
    EquilibriumWitness w;
    w.p.resize(n);
    for (int i = 0; i < n; ++i) w.p[i] = s.supply[i].utility(mu[i]);
    w.u.assign(n, std::vector<double>(n));
    w.phi.assign(n, std::vector<double>(n, 0.0));
    w.argmax_pattern.assign(n, {});
    for (int l = 0; l < n; ++l) {
        for (int i = 0; i < n; ++i) w.u[l][i] = w.p[i] - s.detour[l][i];
        w.phi[l][l] = mu[l];
        w.argmax_pattern[l] = {l};
    }
    w.type_rates = mu;
    return w;
}

inline void check_rates(const MarketSpec &s, const std::vector<double> &mu) {
    if ((int)mu.size() != s.n()) throw ShapeError("rate vector must have n entries");
    for (double v : mu)
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("rates must be finite and nonnegative");
}

// Pattern LP over (p, phi restricted to the pattern), shared by SD and beta-IC.
inline CostEvaluation cost_pattern_search(const MarketSpec &s, const std::vector<double> &mu, double beta) {
    check_rates(s, mu);
    const int n = s.n();
    const int full = (1 << n) - 1;
    std::vector<int> masks(n, 1);
    thread_local DenseSimplex simplex;
    CostEvaluation best;
    std::vector<int> offset(n);

    for (;;) {
        int cover = 0;
        for (int l = 0; l < n; ++l) cover |= masks[l];
        bool ok = true;
        for (int i = 0; i < n; ++i)
            if (mu[i] > 0.0 && !(cover >> i & 1)) ok = false;
        if (ok) {
            int nv = n;
            for (int l = 0; l < n; ++l) {
                offset[l] = nv;
                nv += __builtin_popcount(masks[l]);
            }
            LpProblem lp(nv);
            for (int i = 0; i < n; ++i) lp.objective[i] = mu[i];
            for (int l = 0; l < n; ++l) {
                const double g0 = s.supply[l].intercept, g1 = s.supply[l].slope;
                for (int i = 0; i < n; ++i) {
                    bool in = masks[l] >> i & 1;
                    double *row = lp.add_row(in ? RowSense::EQ : RowSense::LE, s.detour[l][i] + g0);
                    row[i] = 1.0;
                    for (int k = 0; k < __builtin_popcount(masks[l]); ++k) row[offset[l] + k] -= g1;
                }
            }
            for (int i = 0; i < n; ++i) {
                double *row = lp.add_row(RowSense::EQ, mu[i]);
                for (int l = 0; l < n; ++l) {
                    if (!(masks[l] >> i & 1)) continue;
                    row[offset[l] + __builtin_popcount(masks[l] & ((1 << i) - 1))] = 1.0;
                }
            }
            if (beta > 0.0) {
                for (int l = 0; l < n; ++l) {
                    double *row = lp.add_row(RowSense::LE, 0.0);
                    int cnt = __builtin_popcount(masks[l]);
                    for (int k = 0; k < cnt; ++k) row[offset[l] + k] = beta;
                    if (masks[l] >> l & 1) row[offset[l] + __builtin_popcount(masks[l] & ((1 << l) - 1))] -= 1.0;
                }
            }
            LpResult r = simplex.solve(lp);
            if (r.status == LpStatus::Optimal && (!best.feasible || r.value < best.value - 1e-12)) {
                EquilibriumWitness w;
                w.p.assign(r.x.begin(), r.x.begin() + n);
                w.u.assign(n, std::vector<double>(n));
                w.phi.assign(n, std::vector<double>(n, 0.0));
                w.type_rates.assign(n, 0.0);
                w.argmax_pattern.assign(n, {});
                for (int l = 0; l < n; ++l) {
                    for (int i = 0; i < n; ++i) w.u[l][i] = w.p[i] - s.detour[l][i];
                    int k = 0;
                    for (int i = 0; i < n; ++i) {
                        if (!(masks[l] >> i & 1)) continue;
                        w.phi[l][i] = r.x[offset[l] + k++];
                        w.type_rates[l] += w.phi[l][i];
                        w.argmax_pattern[l].push_back(i);
                    }
                }
                best.feasible = true;
                best.value = r.value;
                best.witness = std::move(w);
            }
        }
        int l = 0;
        while (l < n && masks[l] == full) masks[l++] = 1;
        if (l == n) break;
        ++masks[l];
    }
    return best;
}

} // namespace detail

/** @brief Servers join their own queue: cost sum_i G_i(mu_i) mu_i. */
inline CostEvaluation cost_fb(const MarketSpec &s, const std::vector<double> &mu) {
    detail::check_rates(s, mu);
    CostEvaluation ev;
    ev.feasible = true;
    ev.value = 0.0;
    for (int i = 0; i < s.n(); ++i) ev.value += s.supply[i].utility(mu[i]) * mu[i];
    ev.witness = detail::identity_witness(s, mu);
    return ev;
}

inline CostEvaluation cost_ic(const MarketSpec &s, const std::vector<double> &mu) {
    detail::check_rates(s, mu);
    const int n = s.n();
    for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l)
            if (s.supply[i].utility(mu[i]) < s.supply[l].utility(mu[l]) - s.detour[i][l] - 1e-9) return CostEvaluation::infeasible();
    return cost_fb(s, mu);
}

/** @brief Least payment over all equilibria producing mu, by support-pattern enumeration. */
inline CostEvaluation cost_sd(const MarketSpec &s, const std::vector<double> &mu) {
    return detail::cost_pattern_search(s, mu, 0.0);
}

inline CostEvaluation cost_beta_ic(const MarketSpec &s, const std::vector<double> &mu, double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("beta", "beta must lie strictly inside (0,1)");
    return detail::cost_pattern_search(s, mu, beta);
}

/** @brief Cost under the model selected in the spec. */
inline CostEvaluation cost(const MarketSpec &s, const std::vector<double> &mu) {
    switch (s.cost_model.kind) {
    case CostKind::SD:
        return cost_sd(s, mu);
    case CostKind::IC:
        return cost_ic(s, mu);
    case CostKind::BetaIC:
        return cost_beta_ic(s, mu, s.cost_model.beta);
    case CostKind::FB:
        return cost_fb(s, mu);
    }
    return CostEvaluation::infeasible();
}

inline bool omega_membership(const MarketSpec &s, const std::vector<double> &mu) { return cost(s, mu).feasible; }

} // namespace twosided
