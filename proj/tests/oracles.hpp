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

// Independent reference computations shared by the unit and acceptance tests.

#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include <twosided/market.hpp>

namespace oracle {

struct GridCost {
    double value = std::numeric_limits<double>::infinity();
    /** Worst-case deviation from the exact minimum caused by the grid. */
    double bound = 0.0;
};

/**
 * @brief Two-server cost by scanning a price grid and keeping prices whose
 * best-response supply can be routed onto mu.
 */
inline GridCost price_grid_cost_n2(const twosided::MarketSpec &s, const std::vector<double> &mu, double step) {
    const auto &G = s.supply;
    const auto &c = s.detour;
    const double total = mu[0] + mu[1];
    double pmax = 0.0;
    for (int l = 0; l < 2; ++l) pmax = std::max(pmax, G[l].intercept + G[l].slope * total + c[l][1 - l]);
    pmax += 2.0 * step;
    const double tau = 2.0 * step * (1.0 / G[0].slope + 1.0 / G[1].slope);
    // an accepted price is an exact equilibrium for rates within 2 tau of mu in l1;
    // the cost is Lipschitz in mu with constant at most pmax + total * max slope
    const double lip = pmax + total * std::max(G[0].slope, G[1].slope);
    GridCost out;
    out.bound = 2.0 * total * step + 2.0 * tau * (pmax + lip);
    const int K = (int)std::ceil(pmax / step);
    for (int a = 0; a <= K; ++a)
        for (int b = 0; b <= K; ++b) {
            const double p[2] = {a * step, b * step};
            double lo = 0.0, hi = 0.0, supply = 0.0;
            bool ok = true;
            for (int l = 0; l < 2 && ok; ++l) {
                const double u0 = p[0] - c[l][0], u1 = p[1] - c[l][1];
                const double u = std::max(u0, u1);
                const double rate = (u - G[l].intercept) / G[l].slope;
                if (rate < -tau) ok = false;
                const double r = std::max(rate, 0.0);
                supply += r;
                const bool to0 = u0 >= u - step, to1 = u1 >= u - step;
                if (to0 && !to1) lo += r;
                if (to0) hi += r;
            }
            if (!ok || std::abs(supply - total) > tau) continue;
            if (mu[0] < lo - tau || mu[0] > hi + tau) continue;
            out.value = std::min(out.value, mu[0] * p[0] + mu[1] * p[1]);
        }
    return out;
}

/** @brief Fluid optimum of the N-network when every edge carries flow, from the three stationarity equations. */
inline double n_network_interior_optimum(const twosided::MarketSpec &s, Eigen::Vector3d *chi_out = nullptr) {
    // chi = (x11, x21, x22); lambda1 = x11 + x21, lambda2 = x22, mu1 = x11, mu2 = x21 + x22
    const double a1 = s.demand[0].intercept, b1 = s.demand[0].slope;
    const double a2 = s.demand[1].intercept, b2 = s.demand[1].slope;
    const double g01 = s.supply[0].intercept, g11 = s.supply[0].slope;
    const double g02 = s.supply[1].intercept, g12 = s.supply[1].slope;
    Eigen::Matrix3d A;
    Eigen::Vector3d r;
    // d/dx11: a1 - 2 b1 lambda1 - (g01 + 2 g11 mu1) = 0
    A << 2 * b1 + 2 * g11, 2 * b1, 0, 2 * b1, 2 * b1 + 2 * g12, 2 * g12, 0, 2 * g12, 2 * b2 + 2 * g12;
    r << a1 - g01, a1 - g02, a2 - g02;
    Eigen::Vector3d x = A.lu().solve(r);
    if (chi_out) *chi_out = x;
    const double l1 = x[0] + x[1], l2 = x[2], m1 = x[0], m2 = x[1] + x[2];
    return (a1 - b1 * l1) * l1 + (a2 - b2 * l2) * l2 - (g01 + g11 * m1) * m1 - (g02 + g12 * m2) * m2;
}

/** @brief One server type, one customer type, F = a - b lambda, G = g0 + g1 mu. */
inline twosided::MarketSpec single_edge_market(double a, double b, double g0, double g1, int a_max = 5) {
    twosided::MarketSpec s;
    s.graph = {1, 1, {{0, 0}}};
    s.demand = {{a, b}};
    s.supply = {{g0, g1}};
    s.detour = {{0.0}};
    s.penalty = {1.0, 1.0};
    s.cost_model = {twosided::CostKind::FB, 0.0};
    s.a_max = a_max;
    twosided::validate(s);
    return s;
}

/** @brief Best one-server-one-customer revenue minus cost, (a - g0)^2 / (4 (b + g1)). */
inline double single_edge_optimum(double a, double b, double g0, double g1) { return (a - g0) * (a - g0) / (4.0 * (b + g1)); }

/**
 * @brief Stationary E|z| for one edge with Bernoulli arrivals under two prices.
 *
 * z = q_server - q_customer. Customers arrive at rate lam + eps when z >= 0
 * (no waiting customers) and lam - eps otherwise; servers at rate mu.
 * z moves up with probability mu (1 - lam(z)) and down with probability lam(z) (1 - mu).
 */
inline double single_edge_mean_abs_imbalance(double lam, double mu, double eps, int cutoff = 200000) {
    auto lam_at = [&](long z) { return z >= 0 ? lam + eps : lam - eps; };
    auto up = [&](long z) { return mu * (1.0 - lam_at(z)); };
    auto down = [&](long z) { return lam_at(z) * (1.0 - mu); };
    // pi(z+1)/pi(z) = up(z)/down(z+1)
    double mass = 1.0, first = 0.0;
    double w = 1.0;
    for (long z = 0; z < cutoff; ++z) {
        w *= up(z) / down(z + 1);
        mass += w;
        first += w * (z + 1);
        if (w < 1e-300) break;
    }
    w = 1.0;
    for (long z = 0; z > -cutoff; --z) {
        w *= down(z) / up(z - 1);
        mass += w;
        first += w * (-(z - 1));
        if (w < 1e-300) break;
    }
    return first / mass;
}

} // namespace oracle
