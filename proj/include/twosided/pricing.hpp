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
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluid.hpp"
#include "market.hpp"

namespace twosided {

class InvalidEpsilon : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class PricingKind { TwoPrice, PhiFamily, StaticFluid, SecondaryTwoPrice };
enum class MatchingKind { MaxWeight, SecondaryRandom, ImprovedRandom };

/** @brief epsilon = coefficient * eta^exponent. */
struct EpsilonRule {
    double coefficient = 1.0;
    double exponent = -1.0 / 3.0;

    double operator()(double eta) const { return coefficient * std::pow(eta, exponent); }

    /** Accepts "eta^-1/3", "eta^-2/3", "0.5*eta^-1/3" or a plain number. */
    static EpsilonRule parse(const std::string &text) {
        EpsilonRule r;
        std::string t = text;
        auto star = t.find('*');
        if (star != std::string::npos) {
            r.coefficient = std::stod(t.substr(0, star));
            t = t.substr(star + 1);
        }
        if (t.rfind("eta^", 0) != 0) {
            r.coefficient *= std::stod(t);
            r.exponent = 0.0;
            return r;
        }
        std::string e = t.substr(4);
        auto slash = e.find('/');
        if (slash == std::string::npos)
            r.exponent = std::stod(e);
        else
            r.exponent = std::stod(e.substr(0, slash)) / std::stod(e.substr(slash + 1));
        return r;
    }
};

/** @brief Queue-dependent adjustment phi(x) for the scaled state x = q / eta^alpha (servers first). */
struct PhiDescriptor {
    std::string name;
    std::function<void(int n, int m, const std::vector<double> &x, std::vector<double> &out)> eval;

    /** phi_j = +1 when customer queue j is empty, -1 otherwise. */
    static PhiDescriptor sign() {
        return {"sign", [](int n, int m, const std::vector<double> &x, std::vector<double> &out) {
                    out.resize(m);
                    for (int j = 0; j < m; ++j) out[j] = x[n + j] == 0.0 ? 1.0 : -1.0;
                }};
    }
    static PhiDescriptor zero() {
        return {"zero", [](int, int m, const std::vector<double> &, std::vector<double> &out) { out.assign(m, 0.0); }};
    }
};

struct PolicySpec {
    PricingKind pricing = PricingKind::TwoPrice;
    MatchingKind matching = MatchingKind::MaxWeight;
    std::shared_ptr<const FluidSolution> fluid;
    EpsilonRule epsilon_rule;
    /** When set, overrides the schedule. */
    std::optional<double> epsilon;
    PhiDescriptor phi = PhiDescriptor::sign();
    double alpha_exp = 0.0;
    double beta_exp = -1.0 / 3.0;
};

struct PhiReport {
    bool pass = true;
    bool bounded = true;
    bool exponents = true;
    bool push_back = true;
    double bound = 0.0;
    double sigma = 0.0;
    std::string message;
    std::vector<double> witness;
};

/**
 * @brief A PolicySpec bound to a market and a scale eta.
 *
 * Matching runs on the support graph: edges with positive fluid flow.
 */
class Policy {
  public:
    Policy(const MarketSpec &spec, PolicySpec ps, double eta) : spec_(spec), ps_(std::move(ps)), eta_(eta) {
        if (!ps_.fluid) throw std::invalid_argument("policy needs a fluid solution");
        const FluidSolution &f = *ps_.fluid;
        epsilon_ = ps_.epsilon ? *ps_.epsilon : ps_.epsilon_rule(eta);
        double chi_max = 0.0;
        for (double c : f.chi_star) chi_max = std::max(chi_max, c);
        for (std::size_t e = 0; e < f.chi_star.size(); ++e)
            if (f.chi_star[e] > 1e-9 * std::max(1.0, chi_max)) support_.push_back((int)e);
        if (ps_.pricing == PricingKind::TwoPrice) {
            double lo = std::numeric_limits<double>::infinity();
            for (double l : f.lambda_star) lo = std::min(lo, l);
            if (!(epsilon_ > 0.0 && epsilon_ < lo)) {
                std::ostringstream os;
                os << "epsilon " << epsilon_ << " must lie in (0, " << lo << ")";
                throw InvalidEpsilon(os.str());
            }
        }
        if (ps_.pricing == PricingKind::SecondaryTwoPrice) {
            double lo = std::numeric_limits<double>::infinity();
            for (int e : support_) lo = std::min(lo, f.chi_star[e]);
            if (!(epsilon_ > 0.0 && epsilon_ < lo)) {
                std::ostringstream os;
                os << "epsilon " << epsilon_ << " must lie in (0, " << lo << ") for secondary queues";
                throw InvalidEpsilon(os.str());
            }
        }
        if (ps_.pricing == PricingKind::PhiFamily) phi_scale_ = std::pow(eta, ps_.beta_exp);
        rate_cap_.resize(spec.m());
        for (int j = 0; j < spec.m(); ++j) rate_cap_[j] = std::min(spec.demand[j].lambda_max(), (double)spec.a_max);
    }

    const MarketSpec &spec() const { return spec_; }
    const PolicySpec &policy_spec() const { return ps_; }
    const FluidSolution &fluid() const { return *ps_.fluid; }
    double eta() const { return eta_; }
    double epsilon() const { return epsilon_; }
    const std::vector<int> &support_edges() const { return support_; }
    bool secondary() const { return ps_.pricing == PricingKind::SecondaryTwoPrice; }

    /** Customer rates at state q (n server queues then m customer queues); returns the number of clamped rates. */
    int customer_rates(const std::vector<int> &q, std::vector<double> &out) const {
        const int n = spec_.n(), m = spec_.m();
        const FluidSolution &f = *ps_.fluid;
        out.resize(m);
        switch (ps_.pricing) {
        case PricingKind::TwoPrice:
            for (int j = 0; j < m; ++j) out[j] = f.lambda_star[j] + (q[n + j] == 0 ? epsilon_ : -epsilon_);
            break;
        case PricingKind::StaticFluid:
            for (int j = 0; j < m; ++j) out[j] = f.lambda_star[j];
            break;
        case PricingKind::PhiFamily: {
            scaled_.resize(n + m);
            double s = std::pow(eta_, -ps_.alpha_exp);
            for (int k = 0; k < n + m; ++k) scaled_[k] = q[k] * s;
            ps_.phi.eval(n, m, scaled_, phi_out_);
            for (int j = 0; j < m; ++j) out[j] = f.lambda_star[j] + phi_out_[j] * phi_scale_;
            break;
        }
        case PricingKind::SecondaryTwoPrice:
            // type-level totals are not used by the secondary engine; report fluid rates
            for (int j = 0; j < m; ++j) out[j] = f.lambda_star[j];
            break;
        }
        int clamps = 0;
        for (int j = 0; j < m; ++j) {
            if (out[j] < 0.0) out[j] = 0.0, ++clamps;
            if (out[j] > rate_cap_[j]) out[j] = rate_cap_[j], ++clamps;
        }
        return clamps;
    }

    std::vector<double> customer_rates(const std::vector<int> &q) const {
        std::vector<double> out;
        customer_rates(q, out);
        return out;
    }

    /** Per-edge customer rates chi_e +/- eps of the secondary construction, from secondary customer queue lengths. */
    int secondary_customer_rates(const std::vector<int> &q2_edge, std::vector<double> &out) const {
        const FluidSolution &f = *ps_.fluid;
        out.assign(f.chi_star.size(), 0.0);
        int clamps = 0;
        for (int e : support_) {
            out[e] = f.chi_star[e] + (q2_edge[e] == 0 ? epsilon_ : -epsilon_);
            if (out[e] < 0.0) out[e] = 0.0, ++clamps;
        }
        return clamps;
    }

    /** Server mixture: atoms and weights of the fluid solution, independent of the state. */
    const std::vector<std::vector<double>> &server_atoms() const { return ps_.fluid->atoms; }
    const std::vector<double> &server_weights() const { return ps_.fluid->weights; }

  private:
    MarketSpec spec_;
    PolicySpec ps_;
    double eta_;
    double epsilon_ = 0.0;
    double phi_scale_ = 1.0;
    std::vector<int> support_;
    std::vector<double> rate_cap_;
    mutable std::vector<double> scaled_, phi_out_;
};

/**
 * @brief Probes the bounded, exponent and push-back conditions of a phi-family policy.
 *
 * The probe grid has `levels` points per coordinate on [0, box]; push-back is
 * checked with K = box / 2.
 */
inline PhiReport validate_phi(const MarketSpec &spec, const PolicySpec &ps, double box = 8.0, int levels = 5) {
    PhiReport rep;
    const int n = spec.n(), m = spec.m(), d = n + m;
    rep.exponents = ps.alpha_exp + ps.beta_exp <= 0.0 && ps.beta_exp < 0.0;
    const double K = box / 2.0;
    std::vector<double> x(d, 0.0), out;
    std::vector<int> idx(d, 0);
    rep.sigma = std::numeric_limits<double>::infinity();
    std::vector<double> sigma_witness;
    for (;;) {
        for (int k = 0; k < d; ++k) x[k] = box * idx[k] / (levels - 1);
        ps.phi.eval(n, m, x, out);
        for (int j = 0; j < m; ++j) {
            double a = std::abs(out[j]);
            if (!std::isfinite(a) || a > 1e12) {
                if (rep.bounded) rep.witness = x;
                rep.bounded = false;
            } else {
                rep.bound = std::max(rep.bound, a);
            }
            bool large = x[n + j] > K;
            for (const Edge &e : spec.graph.edges)
                if (e.customer == j && x[e.server] > K) large = true;
            if (large && a < rep.sigma) {
                rep.sigma = a;
                sigma_witness = x;
            }
        }
        int k = 0;
        while (k < d && idx[k] == levels - 1) idx[k++] = 0;
        if (k == d) break;
        ++idx[k];
    }
    rep.push_back = rep.sigma > 1e-12;
    std::ostringstream os;
    if (!rep.bounded) os << "clause (a) violated: phi unbounded on the probe box; ";
    if (!rep.exponents) os << "clause (b) violated: need alpha + beta <= 0 and beta < 0; ";
    if (!rep.push_back) {
        os << "clause (c) violated: |phi| does not stay away from zero at large queues; ";
        if (rep.witness.empty()) rep.witness = sigma_witness;
    }
    rep.pass = rep.bounded && rep.exponents && rep.push_back;
    rep.message = rep.pass ? "PASS" : "FAIL: " + os.str();
    return rep;
}

inline const char *pricing_name(PricingKind k) {
    switch (k) {
    case PricingKind::TwoPrice:
        return "two_price";
    case PricingKind::PhiFamily:
        return "phi_family";
    case PricingKind::StaticFluid:
        return "static_fluid";
    case PricingKind::SecondaryTwoPrice:
        return "secondary_two_price";
    }
    return "?";
}

inline const char *matching_name(MatchingKind k) {
    switch (k) {
    case MatchingKind::MaxWeight:
        return "max_weight";
    case MatchingKind::SecondaryRandom:
        return "secondary_random";
    case MatchingKind::ImprovedRandom:
        return "improved_random";
    }
    return "?";
}

/** @brief Reads {"pricing": ..., "epsilon_rule": ..., "epsilon": ..., "matching": ...}. */
inline PolicySpec policy_from_json(const nlohmann::json &j, std::shared_ptr<const FluidSolution> fluid) {
    PolicySpec ps;
    ps.fluid = std::move(fluid);
    std::string pr = j.value("pricing", std::string("two_price"));
    if (pr == "two_price") ps.pricing = PricingKind::TwoPrice;
    else if (pr == "static_fluid") ps.pricing = PricingKind::StaticFluid;
    else if (pr == "phi_family") ps.pricing = PricingKind::PhiFamily;
    else if (pr == "secondary_two_price") ps.pricing = PricingKind::SecondaryTwoPrice;
    else throw SchemaError("unknown pricing '" + pr + "'");
    std::string mt = j.value("matching", std::string(ps.pricing == PricingKind::SecondaryTwoPrice ? "secondary_random" : "max_weight"));
    if (mt == "max_weight") ps.matching = MatchingKind::MaxWeight;
    else if (mt == "secondary_random") ps.matching = MatchingKind::SecondaryRandom;
    else if (mt == "improved_random") ps.matching = MatchingKind::ImprovedRandom;
    else throw SchemaError("unknown matching '" + mt + "'");
    if (j.contains("epsilon_rule")) ps.epsilon_rule = EpsilonRule::parse(j["epsilon_rule"].get<std::string>());
    if (j.contains("epsilon")) ps.epsilon = j["epsilon"].get<double>();
    if (j.contains("phi")) {
        std::string p = j["phi"].get<std::string>();
        if (p == "sign") ps.phi = PhiDescriptor::sign();
        else if (p == "zero") ps.phi = PhiDescriptor::zero();
        else throw SchemaError("unknown phi '" + p + "'");
    }
    ps.alpha_exp = j.value("alpha", ps.alpha_exp);
    ps.beta_exp = j.value("beta", ps.beta_exp);
    if ((ps.pricing == PricingKind::SecondaryTwoPrice) != (ps.matching == MatchingKind::SecondaryRandom))
        throw SchemaError("secondary pricing and secondary matching must be used together");
    return ps;
}

} // namespace twosided
