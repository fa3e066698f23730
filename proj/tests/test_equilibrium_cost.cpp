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

#include <random>

#include <gtest/gtest.h>

#include <twosided/equilibrium_cost.hpp>

#include "oracles.hpp"

using namespace twosided;

namespace {

MarketSpec a_with(double c12, double c21, CostKind k = CostKind::SD, double beta = 0.0) {
    return with_cost_model(with_detour(preset("n_network_a"), {{0.0, c12}, {c21, 0.0}}), k, beta);
}

void expect_valid_witness(const MarketSpec &s, const std::vector<double> &mu, const CostEvaluation &ev) {
    ASSERT_TRUE(ev.feasible);
    ASSERT_TRUE(ev.witness.has_value());
    const EquilibriumWitness &w = *ev.witness;
    const int n = s.n();
    double value = 0.0;
    for (int i = 0; i < n; ++i) value += mu[i] * w.p[i];
    EXPECT_NEAR(value, ev.value, 1e-8);
    for (int l = 0; l < n; ++l) {
        double best = -1e300, row = 0.0;
        for (int i = 0; i < n; ++i) {
            EXPECT_NEAR(w.u[l][i], w.p[i] - s.detour[l][i], 1e-8);
            best = std::max(best, w.u[l][i]);
            row += w.phi[l][i];
        }
        EXPECT_NEAR(row, w.type_rates[l], 1e-7);
        EXPECT_NEAR(s.supply[l].utility(w.type_rates[l]), best, 1e-7);
    }
    for (int i = 0; i < n; ++i) {
        double col = 0.0;
        for (int l = 0; l < n; ++l) col += w.phi[l][i];
        EXPECT_NEAR(col, mu[i], 1e-7);
    }
    EXPECT_TRUE(check_equilibrium(w.u, witness_routing(w)));
}

} // namespace

TEST(CheckEquilibrium, Examples) {
    Matrix u{{3, 1}, {1, 3}};
    EXPECT_TRUE(check_equilibrium(u, {{1, 0}, {0, 1}}));
    EXPECT_FALSE(check_equilibrium(u, {{0, 1}, {0, 1}}));
    EXPECT_TRUE(check_equilibrium({{2, 2}, {0, 5}}, {{0.4, 0.6}, {0, 1}}));
}

TEST(CheckEquilibrium, ShapeErrors) {
    EXPECT_THROW(check_equilibrium({{1, 2}}, {{1, 0}, {0, 1}}), ShapeError);
    EXPECT_THROW(check_equilibrium({{1, 2}, {3, 4}}, {{0.5, 0.4}, {0, 1}}), ShapeError);
}

TEST(CostFb, Examples) {
    MarketSpec a = preset("n_network_a");
    EXPECT_DOUBLE_EQ(cost_fb(a, {1, 2}).value, 6.0);
    EXPECT_DOUBLE_EQ(cost_fb(a, {0, 0}).value, 0.0);
    EXPECT_NEAR(cost_fb(a, {35.0 / 18, 35.0 / 9}).value, 7350.0 / 324, 1e-12);
    MarketSpec far = with_detour(a, {{0, 100}, {100, 0}});
    expect_valid_witness(far, {1, 2}, cost_fb(far, {1, 2}));
}

TEST(CostIc, Examples) {
    EXPECT_DOUBLE_EQ(cost_ic(a_with(0, 0), {1, 2}).value, 6.0);
    EXPECT_FALSE(cost_ic(a_with(0, 0), {1, 3}).feasible);
    EXPECT_DOUBLE_EQ(cost_ic(a_with(2, 5), {1, 3}).value, 11.0);
}

TEST(CostSd, Examples) {
    CostEvaluation ev = cost_sd(a_with(0, 0), {1, 2});
    EXPECT_NEAR(ev.value, 6.0, 1e-9);
    EXPECT_NEAR(ev.witness->p[0], 2.0, 1e-9);
    EXPECT_NEAR(ev.witness->p[1], 2.0, 1e-9);
    EXPECT_NEAR(cost_sd(a_with(0, 0), {2, 1}).value, 6.0, 1e-9);
    EXPECT_DOUBLE_EQ(cost_fb(a_with(0, 0), {2, 1}).value, 9.0);
    EXPECT_NEAR(cost_sd(a_with(0, 0), {0, 0}).value, 0.0, 1e-12);
}

TEST(CostBetaIc, Examples) {
    EXPECT_NEAR(cost_beta_ic(a_with(0, 0), {1, 2}, 0.5).value, 6.0, 1e-9);
    EXPECT_THROW(cost_beta_ic(a_with(0, 0), {1, 2}, 1.0), ValidationError);
}

TEST(CostBetaIc, SmallBetaApproachesSd) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 4.0);
    MarketSpec s = a_with(2, 5);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> mu{u(rng), u(rng)};
        CostEvaluation sd = cost_sd(s, mu), b = cost_beta_ic(s, mu, 1e-7);
        ASSERT_EQ(sd.feasible, b.feasible);
        if (sd.feasible) EXPECT_NEAR(sd.value, b.value, 1e-4);
    }
}

TEST(Omega, Membership) {
    EXPECT_TRUE(omega_membership(a_with(0, 0), {1.3, 0.4}));
    EXPECT_FALSE(omega_membership(a_with(0, 0, CostKind::IC), {1, 3}));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 8.0);
    for (int t = 0; t < 50; ++t) EXPECT_TRUE(omega_membership(a_with(3, 1, CostKind::FB), {u(rng), u(rng)}));
}

TEST(CostSd, RejectsNegativeRates) { EXPECT_THROW(cost_sd(a_with(0, 0), {-1, 2}), std::invalid_argument); }

TEST(CostProperties, DominationChainAndWitnesses) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 4.0), cu(0.0, 6.0);
    for (const char *name : {"n_network_a", "n_network_b"})
        for (int t = 0; t < 100; ++t) {
            MarketSpec s = with_detour(preset(name), {{0.0, cu(rng)}, {cu(rng), 0.0}});
            std::vector<double> mu{u(rng), u(rng)};
            CostEvaluation sd = cost_sd(s, mu), ic = cost_ic(s, mu), fb = cost_fb(s, mu);
            CostEvaluation b1 = cost_beta_ic(s, mu, 0.2), b2 = cost_beta_ic(s, mu, 0.8);
            if (sd.feasible) expect_valid_witness(s, mu, sd);
            if (b1.feasible) expect_valid_witness(s, mu, b1);
            // the chain is asserted where both sides are finite
            auto le = [](const CostEvaluation &x, const CostEvaluation &y) {
                if (x.feasible && y.feasible) EXPECT_LE(x.value, y.value + 1e-8);
            };
            le(sd, b1);
            le(b1, b2);
            le(b2, ic);
            le(sd, ic);
            le(fb, ic);
            if (b2.feasible) EXPECT_TRUE(b1.feasible);
            if (b1.feasible) EXPECT_TRUE(sd.feasible);
        }
}

TEST(CostProperties, WitnessOnThreeServers) {
    MarketSpec s;
    s.graph = {3, 2, {{0, 0}, {1, 0}, {1, 1}, {2, 1}}};
    s.demand = {{10, 0.5}, {12, 1}};
    s.supply = {{0, 1}, {-1, 2}, {0.5, 1.5}};
    s.detour = {{0, 1, 2}, {0.5, 0, 1}, {3, 0.2, 0}};
    s.cost_model = {CostKind::SD, 0.0};
    s.penalty.assign(5, 1.0);
    validate(s);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    int feasible = 0;
    for (int t = 0; t < 40; ++t) {
        std::vector<double> mu{u(rng), u(rng), u(rng)};
        CostEvaluation ev = cost_sd(s, mu);
        if (!ev.feasible) continue;
        ++feasible;
        expect_valid_witness(s, mu, ev);
        CostEvaluation ic = cost_ic(s, mu);
        if (ic.feasible) EXPECT_LE(ev.value, ic.value + 1e-8);
    }
    EXPECT_GT(feasible, 10);
}

TEST(CostProperties, PooledPriceSymmetryWithoutDetours) {
    // G1 and G2 differ, yet with c = 0 only the total rate matters.
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 4.0);
    for (const char *name : {"n_network_a", "n_network_b"}) {
        MarketSpec s = preset(name);
        for (int t = 0; t < 50; ++t) {
            std::vector<double> mu{u(rng), u(rng)};
            CostEvaluation x = cost_sd(s, mu), y = cost_sd(s, {mu[1], mu[0]});
            ASSERT_EQ(x.feasible, y.feasible);
            if (x.feasible) EXPECT_NEAR(x.value, y.value, 1e-7);
        }
    }
}

TEST(CostProperties, IcConvexOnItsDomain) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 4.0);
    int checked = 0;
    for (const char *name : {"n_network_a", "n_network_b"}) {
        MarketSpec s = with_cost_model(with_detour(preset(name), {{0, 2}, {5, 0}}), CostKind::IC);
        for (int t = 0; t < 400; ++t) {
            std::vector<double> a{u(rng), u(rng)}, b{u(rng), u(rng)}, mid{(a[0] + b[0]) / 2, (a[1] + b[1]) / 2};
            CostEvaluation ca = cost_ic(s, a), cb = cost_ic(s, b), cm = cost_ic(s, mid);
            if (!ca.feasible || !cb.feasible || !cm.feasible) continue;
            ++checked;
            EXPECT_LE(cm.value, (ca.value + cb.value) / 2 + 1e-8);
        }
    }
    EXPECT_GT(checked, 100);
}

TEST(CostOracle, PriceGridMatchesPatternLp) {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.05, 3.0), cu(0.0, 4.0);
    for (int t = 0; t < 25; ++t) {
        MarketSpec s = with_detour(preset(t % 2 ? "n_network_b" : "n_network_a"), {{0.0, cu(rng)}, {cu(rng), 0.0}});
        std::vector<double> mu{u(rng), u(rng)};
        CostEvaluation sd = cost_sd(s, mu);
        oracle::GridCost g = oracle::price_grid_cost_n2(s, mu, 0.01);
        ASSERT_EQ(sd.feasible, std::isfinite(g.value)) << mu[0] << "," << mu[1];
        if (sd.feasible) EXPECT_NEAR(sd.value, g.value, g.bound) << mu[0] << "," << mu[1];
    }
}
