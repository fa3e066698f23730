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

#include <twosided/market.hpp>

using namespace twosided;

namespace {

nlohmann::json n_network_text() { return market_to_json(preset("n_network_a")); }

std::string validation_message(const nlohmann::json &j) {
    try {
        market_from_json(j);
    } catch (const ValidationError &e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(Market, NNetworkParsesWithExpectedEdges) {
    MarketSpec s = parse_market(n_network_text().dump());
    EXPECT_EQ(s.n(), 2);
    EXPECT_EQ(s.m(), 2);
    std::vector<Edge> want{{0, 0}, {1, 0}, {1, 1}};
    EXPECT_EQ(s.graph.edges, want);
    EXPECT_EQ(n_network_text()["edges"], nlohmann::json::parse("[[1,1],[2,1],[2,2]]"));
}

TEST(Market, ZeroDemandSlopeRejected) {
    auto j = n_network_text();
    j["demand"][0]["slope"] = 0.0;
    EXPECT_EQ(validation_message(j), "demand slope must be positive");
}

TEST(Market, NonzeroDiagonalDetourRejected) {
    auto j = n_network_text();
    j["detour"][0][0] = 1.0;
    EXPECT_EQ(validation_message(j), "diagonal detour cost must be zero");
}

TEST(Market, ValidationErrorNamesField) {
    auto j = n_network_text();
    j["penalty"] = {1.0, -1.0, 1.0, 1.0};
    try {
        market_from_json(j);
        FAIL();
    } catch (const ValidationError &e) {
        EXPECT_EQ(e.field(), "penalty");
    }
}

TEST(Market, SchemaErrors) {
    auto j = n_network_text();
    j.erase("detour");
    EXPECT_THROW(market_from_json(j), SchemaError);
    auto k = n_network_text();
    k["demand"][1]["intercept"] = "ten";
    EXPECT_THROW(market_from_json(k), SchemaError);
    EXPECT_THROW(parse_market("{not json"), SchemaError);
}

TEST(Market, DisconnectedGraphRejected) {
    auto j = n_network_text();
    j["edges"] = nlohmann::json::parse("[[1,1],[2,2]]");
    EXPECT_THROW(market_from_json(j), ValidationError);
}

TEST(Market, DuplicateAndOutOfRangeEdgesRejected) {
    auto j = n_network_text();
    j["edges"] = nlohmann::json::parse("[[1,1],[1,1],[2,1],[2,2]]");
    EXPECT_THROW(market_from_json(j), ValidationError);
    j["edges"] = nlohmann::json::parse("[[1,1],[2,1],[2,3]]");
    EXPECT_THROW(market_from_json(j), ValidationError);
}

TEST(Market, BetaMustBeInsideUnitInterval) {
    EXPECT_THROW(with_cost_model(preset("n_network_a"), CostKind::BetaIC, 1.0), ValidationError);
    EXPECT_THROW(with_cost_model(preset("n_network_a"), CostKind::BetaIC, 0.0), ValidationError);
    EXPECT_NO_THROW(with_cost_model(preset("n_network_a"), CostKind::BetaIC, 0.4));
}

TEST(Market, PresetCurves) {
    MarketSpec a = preset("n_network_a");
    EXPECT_EQ(a.supply[0].slope, 2.0);
    EXPECT_EQ(a.supply[0].intercept, 0.0);
    EXPECT_EQ(a.supply[1].slope, 1.0);
    MarketSpec b = preset("n_network_b");
    EXPECT_EQ(b.supply[1].slope, 3.0);
    EXPECT_EQ(b.supply[1].intercept, -3.0);
    EXPECT_EQ(b.demand[0].intercept, 10.0);
    EXPECT_EQ(b.demand[0].slope, 0.5);
    EXPECT_EQ(b.demand[1].intercept, 15.0);
    EXPECT_EQ(b.demand[1].slope, 1.0);
    MarketSpec g = preset("generic_city");
    EXPECT_EQ(g.n(), 5);
    EXPECT_EQ(g.m(), 4);
    EXPECT_EQ(g.demand[0].intercept, 10.0);
    EXPECT_EQ(g.demand[0].slope, 0.5);
    EXPECT_THROW(preset("no_such_market"), UnknownPreset);
}

TEST(Market, GenericCityDetourScalesLinearly) {
    MarketSpec g1 = preset("generic_city"), g3 = preset("generic_city", 3.0);
    for (int i = 0; i < 5; ++i)
        for (int l = 0; l < 5; ++l) EXPECT_DOUBLE_EQ(g3.detour[i][l], 3.0 * g1.detour[i][l]);
}

TEST(Market, PresetsValidate) {
    for (const char *name : {"n_network_a", "n_network_b", "generic_city"}) EXPECT_NO_THROW(validate(preset(name))) << name;
}

TEST(Market, RoundTripPresetsAndModels) {
    for (const char *name : {"n_network_a", "n_network_b", "generic_city"})
        for (CostKind k : {CostKind::SD, CostKind::IC, CostKind::BetaIC, CostKind::FB}) {
            MarketSpec s = with_cost_model(preset(name), k, 0.3);
            EXPECT_EQ(parse_market(emit_market(s)), s) << name;
        }
}

TEST(Market, RoundTripRandomSpecs) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int t = 0; t < 200; ++t) {
        MarketSpec s;
        int n = 1 + (int)(rng() % 4), m = 1 + (int)(rng() % 4);
        s.graph.n = n;
        s.graph.m = m;
        // spanning path 0-0, then random extra edges
        for (int v = 0; v < std::max(n, m); ++v) s.graph.edges.push_back({std::min(v, n - 1), std::min(v, m - 1)});
        for (int v = 1; v < std::max(n, m); ++v) {
            Edge e{std::min(v, n - 1), std::min(v - 1, m - 1)};
            if (s.graph.find(e.server, e.customer) < 0) s.graph.edges.push_back(e);
        }
        std::vector<Edge> uniq;
        for (const Edge &e : s.graph.edges)
            if (std::find(uniq.begin(), uniq.end(), e) == uniq.end()) uniq.push_back(e);
        s.graph.edges = uniq;
        for (int j = 0; j < m; ++j) s.demand.push_back({u(rng) + 1.0, u(rng)});
        for (int i = 0; i < n; ++i) s.supply.push_back({u(rng) - 2.0, u(rng)});
        s.detour.assign(n, std::vector<double>(n, 0.0));
        for (int i = 0; i < n; ++i)
            for (int l = 0; l < n; ++l)
                if (i != l) s.detour[i][l] = u(rng);
        s.penalty.assign(n + m, 0.0);
        for (double &p : s.penalty) p = u(rng);
        s.cost_model = {CostKind::BetaIC, 0.25};
        s.a_max = 1 + (int)(rng() % 9);
        validate(s);
        EXPECT_EQ(parse_market(emit_market(s)), s);
    }
}

TEST(Market, CurveEvaluation) {
    DemandCurve d{10.0, 0.5};
    EXPECT_DOUBLE_EQ(d.price(4.0), 8.0);
    EXPECT_DOUBLE_EQ(d.revenue(4.0), 32.0);
    EXPECT_DOUBLE_EQ(d.marginal_revenue(4.0), 6.0);
    EXPECT_DOUBLE_EQ(d.lambda_max(), 20.0);
    SupplyCurve g{-3.0, 3.0};
    EXPECT_DOUBLE_EQ(g.utility(2.0), 3.0);
}
