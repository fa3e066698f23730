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

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace twosided {

class SchemaError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
  public:
    ValidationError(std::string field, const std::string &what)
        : std::runtime_error(what), field_(std::move(field)) {}
    const std::string &field() const { return field_; }

  private:
    std::string field_;
};

class UnknownPreset : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/** @brief Inverse demand F(l) = intercept - slope * l. */
struct DemandCurve {
    double intercept = 0.0;
    double slope = 1.0;

    double price(double lambda) const { return intercept - slope * lambda; }
    double revenue(double lambda) const { return price(lambda) * lambda; }
    double marginal_revenue(double lambda) const { return intercept - 2.0 * slope * lambda; }
    double lambda_max() const { return intercept / slope; }
    bool operator==(const DemandCurve &) const = default;
};

/** @brief Inverse supply G(mu) = intercept + slope * mu. */
struct SupplyCurve {
    double intercept = 0.0;
    double slope = 0.0;

    double utility(double mu) const { return intercept + slope * mu; }
    bool operator==(const SupplyCurve &) const = default;
};

enum class CostKind { SD, IC, BetaIC, FB };

struct CostModel {
    CostKind kind = CostKind::SD;
    double beta = 0.0;
    bool operator==(const CostModel &) const = default;
};

inline const char *cost_kind_name(CostKind k) {
    switch (k) {
    case CostKind::SD:
        return "sd";
    case CostKind::IC:
        return "ic";
    case CostKind::BetaIC:
        return "beta_ic";
    case CostKind::FB:
        return "fb";
    }
    return "?";
}

inline CostKind cost_kind_from_name(const std::string &s) {
    if (s == "sd") return CostKind::SD;
    if (s == "ic") return CostKind::IC;
    if (s == "beta_ic") return CostKind::BetaIC;
    if (s == "fb") return CostKind::FB;
    throw SchemaError("unknown cost model kind '" + s + "'");
}

/** @brief Server type i may serve customer type j. Indices are 0-based. */
struct Edge {
    int server = 0;
    int customer = 0;
    bool operator==(const Edge &) const = default;
};

struct CompatibilityGraph {
    int n = 0;
    int m = 0;
    std::vector<Edge> edges;

    std::vector<int> edges_of_server(int i) const {
        std::vector<int> out;
        for (int e = 0; e < (int)edges.size(); ++e)
            if (edges[e].server == i) out.push_back(e);
        return out;
    }
    std::vector<int> edges_of_customer(int j) const {
        std::vector<int> out;
        for (int e = 0; e < (int)edges.size(); ++e)
            if (edges[e].customer == j) out.push_back(e);
        return out;
    }
    int find(int i, int j) const {
        for (int e = 0; e < (int)edges.size(); ++e)
            if (edges[e].server == i && edges[e].customer == j) return e;
        return -1;
    }
    bool operator==(const CompatibilityGraph &) const = default;
};

struct MarketSpec {
    CompatibilityGraph graph;
    std::vector<DemandCurve> demand;
    std::vector<SupplyCurve> supply;
    std::vector<std::vector<double>> detour;
    CostModel cost_model;
    /** Server queues first, then customer queues. */
    std::vector<double> penalty;
    int a_max = 8;

    int n() const { return graph.n; }
    int m() const { return graph.m; }
    bool operator==(const MarketSpec &) const = default;
};

inline void validate(const MarketSpec &s) {
    const auto &g = s.graph;
    if (g.n < 1) throw ValidationError("n", "n must be at least 1");
    if (g.m < 1) throw ValidationError("m", "m must be at least 1");
    if (g.edges.empty()) throw ValidationError("edges", "graph has no edges");
    for (std::size_t a = 0; a < g.edges.size(); ++a) {
        const Edge &e = g.edges[a];
        if (e.server < 0 || e.server >= g.n || e.customer < 0 || e.customer >= g.m)
            throw ValidationError("edges", "edge index out of range");
        for (std::size_t b = 0; b < a; ++b)
            if (g.edges[b] == e) throw ValidationError("edges", "duplicate edge");
    }
    std::vector<int> parent(g.n + g.m);
    for (int v = 0; v < g.n + g.m; ++v) parent[v] = v;
    auto root = [&](int v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    std::vector<bool> touched(g.n + g.m, false);
    for (const Edge &e : g.edges) {
        touched[e.server] = touched[g.n + e.customer] = true;
        parent[root(e.server)] = root(g.n + e.customer);
    }
    for (int v = 0; v < g.n + g.m; ++v)
        if (!touched[v]) throw ValidationError("edges", "every server and customer type must touch an edge");
    for (int v = 1; v < g.n + g.m; ++v)
        if (root(v) != root(0)) throw ValidationError("edges", "compatibility graph must be connected");

    if ((int)s.demand.size() != g.m) throw ValidationError("demand", "demand must have m curves");
    for (const auto &d : s.demand) {
        if (!(d.slope > 0.0) || !std::isfinite(d.slope))
            throw ValidationError("demand", "demand slope must be positive");
        if (!(d.intercept > 0.0) || !std::isfinite(d.intercept))
            throw ValidationError("demand", "demand intercept must be positive");
    }
    if ((int)s.supply.size() != g.n) throw ValidationError("supply", "supply must have n curves");
    for (const auto &c : s.supply) {
        if (!(c.slope >= 0.0) || !std::isfinite(c.slope))
            throw ValidationError("supply", "supply slope must be nonnegative");
        if (!std::isfinite(c.intercept)) throw ValidationError("supply", "supply intercept must be finite");
    }
    if ((int)s.detour.size() != g.n) throw ValidationError("detour", "detour must be n x n");
    for (int i = 0; i < g.n; ++i) {
        if ((int)s.detour[i].size() != g.n) throw ValidationError("detour", "detour must be n x n");
        for (int l = 0; l < g.n; ++l) {
            double c = s.detour[i][l];
            if (!std::isfinite(c) || c < 0.0) throw ValidationError("detour", "detour costs must be finite and nonnegative");
        }
        if (s.detour[i][i] != 0.0) throw ValidationError("detour", "diagonal detour cost must be zero");
    }
    if (s.cost_model.kind == CostKind::BetaIC && !(s.cost_model.beta > 0.0 && s.cost_model.beta < 1.0))
        throw ValidationError("cost_model", "beta must lie strictly inside (0,1)");
    if ((int)s.penalty.size() != g.n + g.m) throw ValidationError("penalty", "penalty must have n+m entries");
    for (double v : s.penalty)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("penalty", "penalty must be nonnegative");
    if (s.a_max < 1) throw ValidationError("a_max", "a_max must be at least 1");
}

namespace detail {

template <class T> T get_field(const nlohmann::json &j, const char *key) {
    if (!j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception &) {
        throw SchemaError(std::string("field '") + key + "' has the wrong type");
    }
}

inline double get_number(const nlohmann::json &j, const char *key) {
    if (!j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
    if (!j.at(key).is_number()) throw SchemaError(std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

} // namespace detail

inline MarketSpec market_from_json(const nlohmann::json &j) {
    if (!j.is_object()) throw SchemaError("market config must be an object");
    MarketSpec s;
    s.graph.n = detail::get_field<int>(j, "n");
    s.graph.m = detail::get_field<int>(j, "m");
    auto edges = detail::get_field<std::vector<std::vector<int>>>(j, "edges");
    for (const auto &e : edges) {
        if (e.size() != 2) throw SchemaError("each edge must be a pair [i, j]");
        s.graph.edges.push_back({e[0] - 1, e[1] - 1});
    }
    if (!j.contains("demand") || !j["demand"].is_array()) throw SchemaError("missing field 'demand'");
    for (const auto &d : j["demand"]) s.demand.push_back({detail::get_number(d, "intercept"), detail::get_number(d, "slope")});
    if (!j.contains("supply") || !j["supply"].is_array()) throw SchemaError("missing field 'supply'");
    for (const auto &d : j["supply"]) s.supply.push_back({detail::get_number(d, "intercept"), detail::get_number(d, "slope")});
    s.detour = detail::get_field<std::vector<std::vector<double>>>(j, "detour");
    if (!j.contains("cost_model") || !j["cost_model"].is_object()) throw SchemaError("missing field 'cost_model'");
    const auto &cm = j["cost_model"];
    s.cost_model.kind = cost_kind_from_name(detail::get_field<std::string>(cm, "kind"));
    if (s.cost_model.kind == CostKind::BetaIC) s.cost_model.beta = detail::get_number(cm, "beta");
    s.penalty = detail::get_field<std::vector<double>>(j, "penalty");
    s.a_max = detail::get_field<int>(j, "a_max");
    validate(s);
    return s;
}

inline MarketSpec parse_market(const std::string &text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw SchemaError(std::string("malformed JSON: ") + e.what());
    }
    return market_from_json(j);
}

inline nlohmann::json market_to_json(const MarketSpec &s) {
    nlohmann::json j;
    j["n"] = s.graph.n;
    j["m"] = s.graph.m;
    j["edges"] = nlohmann::json::array();
    for (const Edge &e : s.graph.edges) j["edges"].push_back({e.server + 1, e.customer + 1});
    j["demand"] = nlohmann::json::array();
    for (const auto &d : s.demand) j["demand"].push_back({{"intercept", d.intercept}, {"slope", d.slope}});
    j["supply"] = nlohmann::json::array();
    for (const auto &c : s.supply) j["supply"].push_back({{"intercept", c.intercept}, {"slope", c.slope}});
    j["detour"] = s.detour;
    j["cost_model"] = {{"kind", cost_kind_name(s.cost_model.kind)}};
    if (s.cost_model.kind == CostKind::BetaIC) j["cost_model"]["beta"] = s.cost_model.beta;
    j["penalty"] = s.penalty;
    j["a_max"] = s.a_max;
    return j;
}

inline std::string emit_market(const MarketSpec &s) { return market_to_json(s).dump(2); }

inline MarketSpec with_cost_model(MarketSpec s, CostKind kind, double beta = 0.0) {
    s.cost_model = {kind, kind == CostKind::BetaIC ? beta : 0.0};
    validate(s);
    return s;
}

inline MarketSpec with_detour(MarketSpec s, std::vector<std::vector<double>> c) {
    s.detour = std::move(c);
    validate(s);
    return s;
}

/**
 * @brief Built-in instances: "n_network_a", "n_network_b", "generic_city".
 *
 * The N-network has server 1 serving customer 1 only and server 2 serving
 * both customers. detour_scale multiplies the generic-city detour matrix.
 */
inline MarketSpec preset(const std::string &name, double detour_scale = 1.0) {
    MarketSpec s;
    if (name == "n_network_a" || name == "n_network_b") {
        s.graph = {2, 2, {{0, 0}, {1, 0}, {1, 1}}};
        s.demand = {{10.0, 0.5}, {15.0, 1.0}};
        if (name == "n_network_a")
            s.supply = {{0.0, 2.0}, {0.0, 1.0}};
        else
            s.supply = {{0.0, 1.0}, {-3.0, 3.0}};
        s.detour = {{0.0, 0.0}, {0.0, 0.0}};
        s.penalty.assign(4, 1.0);
    } else if (name == "generic_city") {
        // customers: 0=N, 1=E, 2=W, 3=S
        s.graph = {5, 4, {{0, 0}, {0, 1}, {1, 0}, {1, 2}, {2, 3}, {2, 1}, {3, 3}, {3, 2}, {4, 0}, {4, 1}, {4, 2}, {4, 3}}};
        s.demand = {{10.0, 0.5}, {12.0, 0.5}, {12.0, 0.5}, {18.0, 1.0}};
        s.supply = {{-3.0, 3.0}, {0.0, 2.0}, {0.0, 1.0}, {0.0, 2.5}, {0.0, 1.0}};
        const double base[5][5] = {{0, 2, 2, 10, 5}, {2, 0, 10, 2, 5}, {2, 10, 0, 2, 5}, {10, 2, 2, 0, 5}, {0, 0, 0, 0, 0}};
        s.detour.assign(5, std::vector<double>(5, 0.0));
        for (int i = 0; i < 5; ++i)
            for (int l = 0; l < 5; ++l) s.detour[i][l] = detour_scale * base[i][l];
        s.penalty.assign(9, 1.0);
    } else {
        throw UnknownPreset("unknown preset '" + name + "'");
    }
    s.cost_model = {CostKind::SD, 0.0};
    s.a_max = 8;
    validate(s);
    return s;
}

} // namespace twosided
