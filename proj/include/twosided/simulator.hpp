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
#include <cassert>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "fluid.hpp"
#include "market.hpp"
#include "matcher.hpp"
#include "pricing.hpp"

namespace twosided {

class ZeroThroughput : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class ArrivalKind { Bernoulli, Binomial, PerturbedUniform };

/** @brief Per-step arrival counts with a requested mean and bounded support. */
struct ArrivalModel {
    ArrivalKind kind = ArrivalKind::Binomial;
    int trials = 5;

    int support_max() const {
        switch (kind) {
        case ArrivalKind::Bernoulli:
            return 1;
        case ArrivalKind::Binomial:
            return trials;
        case ArrivalKind::PerturbedUniform:
            return 5;
        }
        return 0;
    }

    std::string name() const {
        switch (kind) {
        case ArrivalKind::Bernoulli:
            return "bernoulli";
        case ArrivalKind::Binomial:
            return "binomial" + std::to_string(trials);
        case ArrivalKind::PerturbedUniform:
            return "perturbed_uniform";
        }
        return "?";
    }

    static ArrivalModel parse(const std::string &s) {
        if (s == "bernoulli") return {ArrivalKind::Bernoulli, 1};
        if (s == "perturbed_uniform") return {ArrivalKind::PerturbedUniform, 5};
        if (s.rfind("binomial", 0) == 0) {
            int t = s.size() > 8 ? std::stoi(s.substr(8)) : 5;
            if (t < 1) throw ConfigError("binomial trials must be positive");
            return {ArrivalKind::Binomial, t};
        }
        throw ConfigError("unknown arrival distribution '" + s + "'");
    }

    /** Probability mass on 0..support_max() with the requested mean. */
    std::vector<double> pmf(double mean) const {
        const int K = support_max();
        if (mean < -1e-12 || mean > K + 1e-12) throw ConfigError("arrival mean outside the support of " + name());
        mean = std::clamp(mean, 0.0, (double)K);
        std::vector<double> p(K + 1, 0.0);
        switch (kind) {
        case ArrivalKind::Bernoulli:
            p[0] = 1.0 - mean;
            p[1] = mean;
            break;
        case ArrivalKind::Binomial: {
            double pr = mean / K;
            for (int k = 0; k <= K; ++k)
                p[k] = std::exp(std::lgamma(K + 1.0) - std::lgamma(k + 1.0) - std::lgamma(K - k + 1.0)) * std::pow(pr, k) *
                       std::pow(1.0 - pr, K - k);
            break;
        }
        case ArrivalKind::PerturbedUniform: {
            for (int k = 0; k <= 5; ++k) p[k] = 1.0 / 6.0;
            double delta = mean - 2.5;
            if (delta >= 0.0) {
                for (int k = 0; k < 5 && delta > 0.0; ++k) {
                    double t = std::min(p[k], delta / (5 - k));
                    p[k] -= t;
                    p[5] += t;
                    delta -= t * (5 - k);
                }
            } else {
                delta = -delta;
                for (int k = 5; k > 0 && delta > 0.0; --k) {
                    double t = std::min(p[k], delta / k);
                    p[k] -= t;
                    p[0] += t;
                    delta -= t * k;
                }
            }
            break;
        }
        }
        return p;
    }

    double variance(double mean) const {
        std::vector<double> p = pmf(mean);
        double m2 = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) m2 += p[k] * k * k;
        return m2 - mean * mean;
    }
};

/** @brief Inverse-CDF sampler caching tables for recently used means. */
class ArrivalSampler {
  public:
    explicit ArrivalSampler(ArrivalModel model) : model_(model) {}

    int sample(double mean, double u) {
        if (mean <= 0.0) return 0;
        const Table *t = nullptr;
        for (const auto &c : cache_)
            if (c.mean == mean) {
                t = &c;
                break;
            }
        if (!t) {
            Table nt{mean, model_.pmf(mean)};
            for (std::size_t k = 1; k < nt.cdf.size(); ++k) nt.cdf[k] += nt.cdf[k - 1];
            nt.cdf.back() = 1.0;
            if (cache_.size() < 64) {
                cache_.push_back(std::move(nt));
                t = &cache_.back();
            } else {
                cache_[next_] = std::move(nt);
                t = &cache_[next_];
                next_ = (next_ + 1) % cache_.size();
            }
        }
        int k = 0;
        while (u >= t->cdf[k]) ++k;
        return k;
    }

    const ArrivalModel &model() const { return model_; }

  private:
    struct Table {
        double mean;
        std::vector<double> cdf;
    };
    ArrivalModel model_;
    std::vector<Table> cache_;
    std::size_t next_ = 0;
};

/** @brief Deterministic stream: mt19937_64 with 53-bit uniforms. */
class RandomStream {
  public:
    RandomStream(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{(std::uint32_t)seed, (std::uint32_t)(seed >> 32), (std::uint32_t)stream, (std::uint32_t)(stream >> 32)};
        rng_.seed(seq);
    }
    double uniform() { return (double)(rng_() >> 11) * 0x1.0p-53; }

  private:
    std::mt19937_64 rng_;
};

struct SimState {
    /** n server queues then m customer queues. */
    std::vector<int> q;
    /** Secondary queues, one per edge, when the policy uses them. */
    std::vector<int> q_server_edge, q_customer_edge;
    long k = 0;
    int atom = 0;
};

/** @brief What one step did; all vectors are overwritten by step(). */
struct StepRecord {
    std::vector<double> lambda;
    std::vector<int> arrivals;
    std::vector<int> y;
    int clamps = 0;
    double revenue = 0.0;
};

/**
 * @brief The per-step engine: prices from q(k), mixture draw, arrivals, matching.
 */
class Simulator {
  public:
    Simulator(const Policy &policy, ArrivalModel arrivals) : policy_(policy), sampler_(arrivals) {
        const MarketSpec &s = policy.spec();
        if (arrivals.support_max() > s.a_max) throw ConfigError("arrival support exceeds a_max");
        n_ = s.n();
        m_ = s.m();
        E_ = (int)s.graph.edges.size();
        const auto &w = policy.server_weights();
        cum_.resize(w.size());
        double acc = 0.0;
        for (std::size_t g = 0; g < w.size(); ++g) cum_[g] = acc += w[g];
        cum_.back() = 1.0;
        mean_mu_ = policy.fluid().mean_server_rates();
        for (int e : policy.support_edges()) inst_.edges.push_back(s.graph.edges[e]);
        inst_.supplies.resize(n_);
        inst_.demands.resize(m_);
        inst_.weights.resize(inst_.edges.size());
        if (policy.secondary()) routing_ = secondary_routing(s.graph, policy.fluid());
    }

    SimState initial_state() const {
        SimState st;
        st.q.assign(n_ + m_, 0);
        if (policy_.secondary()) {
            st.q_server_edge.assign(E_, 0);
            st.q_customer_edge.assign(E_, 0);
        }
        return st;
    }

    void step(SimState &st, RandomStream &rs, StepRecord &rec) {
        const MarketSpec &s = policy_.spec();
        rec.arrivals.assign(n_ + m_, 0);
        rec.y.assign(E_, 0);
        double u = rs.uniform();
        int g = 0;
        while (u >= cum_[g]) ++g;
        st.atom = g;
        const std::vector<double> &mu = policy_.server_atoms()[g];
        if (policy_.secondary()) {
            secondary_step(st, rs, rec, mu);
        } else {
            rec.clamps = policy_.customer_rates(st.q, rec.lambda);
            for (int i = 0; i < n_; ++i) rec.arrivals[i] = sampler_.sample(mu[i], rs.uniform());
            for (int j = 0; j < m_; ++j) rec.arrivals[n_ + j] = sampler_.sample(rec.lambda[j], rs.uniform());
            if (policy_.policy_spec().matching == MatchingKind::ImprovedRandom)
                improved_random(st, rs, rec);
            else
                max_weight(st, rec);
        }
        rec.revenue = 0.0;
        for (int j = 0; j < m_; ++j) rec.revenue += s.demand[j].revenue(rec.lambda[j]);
        ++st.k;
    }

    int n() const { return n_; }
    int m() const { return m_; }
    int num_edges() const { return E_; }

  private:
    void max_weight(SimState &st, StepRecord &rec) {
        const auto &sup = policy_.support_edges();
        for (int i = 0; i < n_; ++i) inst_.supplies[i] = st.q[i] + rec.arrivals[i];
        for (int j = 0; j < m_; ++j) inst_.demands[j] = st.q[n_ + j] + rec.arrivals[n_ + j];
        for (std::size_t a = 0; a < sup.size(); ++a) inst_.weights[a] = st.q[inst_.edges[a].server] + st.q[n_ + inst_.edges[a].customer];
        matcher_.solve(inst_, res_);
        for (int k = 0; k < n_ + m_; ++k) st.q[k] += rec.arrivals[k];
        for (std::size_t a = 0; a < sup.size(); ++a) {
            rec.y[sup[a]] = res_.y[a];
            st.q[inst_.edges[a].server] -= res_.y[a];
            st.q[n_ + inst_.edges[a].customer] -= res_.y[a];
        }
#ifndef NDEBUG
        for (std::size_t a = 0; a < sup.size(); ++a)
            assert(st.q[inst_.edges[a].server] == 0 || st.q[n_ + inst_.edges[a].customer] == 0);
#endif
    }

    void improved_random(SimState &st, RandomStream &rs, StepRecord &rec) {
        const MarketSpec &s = policy_.spec();
        const FluidSolution &f = policy_.fluid();
        for (int k = 0; k < n_ + m_; ++k) st.q[k] += rec.arrivals[k];
        for (int e : policy_.support_edges()) {
            const Edge &ed = s.graph.edges[e];
            double t = std::min(f.chi_star[e] / mean_mu_[ed.server] * st.q[ed.server],
                                f.chi_star[e] / f.lambda_star[ed.customer] * st.q[n_ + ed.customer]);
            double fl = std::floor(t);
            rec.y[e] = (int)fl + (rs.uniform() < t - fl ? 1 : 0);
        }
        for (int e : policy_.support_edges()) {
            const Edge &ed = s.graph.edges[e];
            int take = std::min({rec.y[e], st.q[ed.server], st.q[n_ + ed.customer]});
            rec.y[e] = take;
            st.q[ed.server] -= take;
            st.q[n_ + ed.customer] -= take;
        }
    }

    void secondary_step(SimState &st, RandomStream &rs, StepRecord &rec, const std::vector<double> &mu) {
        const MarketSpec &s = policy_.spec();
        rec.clamps = policy_.secondary_customer_rates(st.q_customer_edge, edge_rate_);
        rec.lambda.assign(m_, 0.0);
        for (int e = 0; e < E_; ++e) rec.lambda[s.graph.edges[e].customer] += edge_rate_[e];
        for (int i = 0; i < n_; ++i) rec.arrivals[i] = sampler_.sample(mu[i], rs.uniform());
        for (int j = 0; j < m_; ++j) rec.arrivals[n_ + j] = sampler_.sample(rec.lambda[j], rs.uniform());
        server_split_.assign(rec.arrivals.begin(), rec.arrivals.begin() + n_);
        customer_split_.assign(rec.arrivals.begin() + n_, rec.arrivals.end());
        auto uni = [&]() { return rs.uniform(); };
        split_arrivals(s.graph, server_split_, true, routing_.server_prob, uni, as_);
        split_arrivals(s.graph, customer_split_, false, edge_rate_, uni, ac_);
        for (int e = 0; e < E_; ++e) {
            int a = st.q_server_edge[e] + as_[e], b = st.q_customer_edge[e] + ac_[e];
            int y = std::min(a, b);
            rec.y[e] = y;
            st.q_server_edge[e] = a - y;
            st.q_customer_edge[e] = b - y;
        }
        std::fill(st.q.begin(), st.q.end(), 0);
        for (int e = 0; e < E_; ++e) {
            st.q[s.graph.edges[e].server] += st.q_server_edge[e];
            st.q[n_ + s.graph.edges[e].customer] += st.q_customer_edge[e];
        }
    }

    const Policy &policy_;
    ArrivalSampler sampler_;
    int n_ = 0, m_ = 0, E_ = 0;
    std::vector<double> cum_, mean_mu_, edge_rate_;
    MatchInstance inst_;
    MatchResult res_;
    MaxWeightMatcher matcher_;
    SecondaryRouting routing_;
    std::vector<int> server_split_, customer_split_, as_, ac_;
};

/** @brief Mean and Student-t 95% half-width over replications. */
struct Estimate {
    double mean = 0.0;
    double ci = 0.0;
};

inline Estimate estimate(const std::vector<double> &x) {
    Estimate e;
    const std::size_t R = x.size();
    if (R == 0) return e;
    for (double v : x) e.mean += v;
    e.mean /= R;
    if (R < 2) {
        e.ci = std::numeric_limits<double>::infinity();
        return e;
    }
    double ss = 0.0;
    for (double v : x) ss += (v - e.mean) * (v - e.mean);
    double sd = std::sqrt(ss / (R - 1));
    boost::math::students_t dist((double)(R - 1));
    e.ci = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt((double)R);
    return e;
}

struct SimConfig {
    double eta = 1.0;
    long horizon = 200000;
    long burn_in = 20000;
    int replications = 10;
    std::uint64_t seed = 42;
    /** Worker threads for replications; results do not depend on it. */
    int threads = 1;
    /** Trace of replication 0, one CSV row per step; disabled when null. */
    std::ostream *trace = nullptr;
};

/** @brief Per-replication averages over the measured window. */
struct ReplicationStats {
    double revenue = 0.0;
    double cost = 0.0;
    double penalty = 0.0;
    double total_queue = 0.0;
    std::vector<double> queue;
    std::vector<double> empty_prob;
    std::vector<double> lambda;
    std::vector<double> matches;
    double first_order = 0.0;
    long clamps = 0;
};

struct SimReport {
    double eta = 1.0;
    double epsilon = 0.0;
    long horizon = 0;
    long burn_in = 0;
    int replications = 0;
    std::uint64_t seed = 0;
    std::string arrivals;
    double fluid_value = 0.0;

    /** Per-step (normalized) profit and net profit. */
    Estimate profit_rate;
    Estimate net_profit_rate;
    Estimate revenue_rate;
    double cost_rate = 0.0;
    Estimate mean_queue;
    std::vector<Estimate> queue;
    std::vector<Estimate> empty_prob;
    std::vector<Estimate> lambda;
    std::vector<Estimate> matches;
    std::vector<double> server_rates;
    /** R~* - P^ per step. */
    Estimate profit_loss;
    /** eta (R~* - R^): net loss per unit time. */
    Estimate net_loss;
    Estimate percent_loss;
    /** Sum_j R_j'(lambda*_j) (P[q_j > 0] - P[q_j = 0]). */
    Estimate first_order;
    long clamp_count = 0;
    std::vector<ReplicationStats> per_replication;
};

/** @brief Runs R independent replications of T steps and averages steps B..T-1. */
inline SimReport run(const MarketSpec &spec, const PolicySpec &ps, const ArrivalModel &arrivals, const SimConfig &cfg) {
    if (!(cfg.horizon > cfg.burn_in && cfg.burn_in >= 0)) throw ConfigError("need horizon > burn_in >= 0");
    if (cfg.replications < 1) throw ConfigError("need at least one replication");
    if (!(cfg.eta > 0.0)) throw ConfigError("eta must be positive");
    Policy policy(spec, ps, cfg.eta);
    const FluidSolution &f = policy.fluid();
    const int n = spec.n(), m = spec.m(), E = (int)spec.graph.edges.size();
    const double cost_rate = f.mean_cost();
    std::vector<double> rprime(m);
    for (int j = 0; j < m; ++j) rprime[j] = spec.demand[j].marginal_revenue(f.lambda_star[j]);

    SimReport rep;
    rep.eta = cfg.eta;
    rep.epsilon = policy.epsilon();
    rep.horizon = cfg.horizon;
    rep.burn_in = cfg.burn_in;
    rep.replications = cfg.replications;
    rep.seed = cfg.seed;
    rep.arrivals = arrivals.name();
    rep.fluid_value = f.value;
    rep.cost_rate = cost_rate;
    rep.server_rates = f.mean_server_rates();

    if (cfg.trace) {
        *cfg.trace << "k";
        for (int i = 0; i < n + m; ++i) *cfg.trace << ",q_" << i + 1;
        *cfg.trace << ",revenue,cost,penalty\n";
    }
    auto replicate = [&](int r) {
        Simulator sim(policy, arrivals);
        StepRecord rec;
        char buf[64];
        RandomStream rs(cfg.seed, (std::uint64_t)r);
        SimState st = sim.initial_state();
        std::vector<int> q0;
        ReplicationStats acc;
        acc.queue.assign(n + m, 0.0);
        acc.empty_prob.assign(n + m, 0.0);
        acc.lambda.assign(m, 0.0);
        acc.matches.assign(E, 0.0);
        for (long k = 0; k < cfg.horizon; ++k) {
            q0 = st.q;
            double pen = 0.0;
            for (int i = 0; i < n + m; ++i) pen += spec.penalty[i] * q0[i];
            sim.step(st, rs, rec);
            if (cfg.trace && r == 0) {
                *cfg.trace << k;
                for (int v : q0) *cfg.trace << ',' << v;
                std::snprintf(buf, sizeof buf, ",%.10g,%.10g,%.10g\n", rec.revenue, cost_rate, pen);
                *cfg.trace << buf;
            }
            if (k < cfg.burn_in) continue;
            acc.revenue += rec.revenue;
            acc.penalty += pen;
            acc.clamps += rec.clamps;
            for (int i = 0; i < n + m; ++i) {
                acc.queue[i] += q0[i];
                acc.total_queue += q0[i];
                if (q0[i] == 0) acc.empty_prob[i] += 1.0;
            }
            for (int j = 0; j < m; ++j) {
                acc.lambda[j] += rec.lambda[j];
                acc.first_order += rprime[j] * (q0[n + j] > 0 ? 1.0 : -1.0);
            }
            for (int e = 0; e < E; ++e) acc.matches[e] += rec.y[e];
        }
        const double T = (double)(cfg.horizon - cfg.burn_in);
        acc.revenue /= T;
        acc.penalty /= T;
        acc.total_queue /= T;
        acc.first_order /= T;
        acc.cost = cost_rate;
        for (auto &v : acc.queue) v /= T;
        for (auto &v : acc.empty_prob) v /= T;
        for (auto &v : acc.lambda) v /= T;
        for (auto &v : acc.matches) v /= T;
        return acc;
    };
    rep.per_replication.resize(cfg.replications);
    const int workers = std::clamp(cfg.threads, 1, cfg.replications);
    if (workers == 1) {
        for (int r = 0; r < cfg.replications; ++r) rep.per_replication[r] = replicate(r);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex mtx;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (int r = w; r < cfg.replications; r += workers) rep.per_replication[r] = replicate(r);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(mtx);
                    failure = std::current_exception();
                }
            });
        for (auto &t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    for (const auto &a : rep.per_replication) rep.clamp_count += a.clamps;

    auto collect = [&](auto fn) {
        std::vector<double> x;
        for (const auto &a : rep.per_replication) x.push_back(fn(a));
        return estimate(x);
    };
    const double eta = cfg.eta, R = f.value;
    rep.revenue_rate = collect([](const ReplicationStats &a) { return a.revenue; });
    rep.profit_rate = collect([](const ReplicationStats &a) { return a.revenue - a.cost; });
    rep.net_profit_rate = collect([&](const ReplicationStats &a) { return a.revenue - a.cost - a.penalty / eta; });
    rep.mean_queue = collect([](const ReplicationStats &a) { return a.total_queue; });
    rep.profit_loss = collect([&](const ReplicationStats &a) { return R - (a.revenue - a.cost); });
    rep.net_loss = collect([&](const ReplicationStats &a) { return eta * (R - (a.revenue - a.cost)) + a.penalty; });
    rep.percent_loss = collect([&](const ReplicationStats &a) { return (R - (a.revenue - a.cost - a.penalty / eta)) / R * 100.0; });
    rep.first_order = collect([](const ReplicationStats &a) { return a.first_order; });
    for (int i = 0; i < n + m; ++i) {
        rep.queue.push_back(collect([&](const ReplicationStats &a) { return a.queue[i]; }));
        rep.empty_prob.push_back(collect([&](const ReplicationStats &a) { return a.empty_prob[i]; }));
    }
    for (int j = 0; j < m; ++j) rep.lambda.push_back(collect([&](const ReplicationStats &a) { return a.lambda[j]; }));
    for (int e = 0; e < E; ++e) rep.matches.push_back(collect([&](const ReplicationStats &a) { return a.matches[e]; }));
    return rep;
}

struct WaitingTimes {
    std::vector<double> server;
    std::vector<double> customer;
};

/** @brief Little's law: w = E[q] / (eta * throughput rate). */
inline WaitingTimes waiting_times(const SimReport &rep, double eta) {
    WaitingTimes w;
    const int m = (int)rep.lambda.size();
    const int n = (int)rep.queue.size() - m;
    for (int i = 0; i < n; ++i) {
        double rate = rep.server_rates[i];
        if (rate < 1e-9) throw ZeroThroughput("server queue " + std::to_string(i + 1) + " has zero throughput");
        w.server.push_back(rep.queue[i].mean / (eta * rate));
    }
    for (int j = 0; j < m; ++j) {
        double rate = rep.lambda[j].mean;
        if (rate < 1e-9) throw ZeroThroughput("customer queue " + std::to_string(j + 1) + " has zero throughput");
        w.customer.push_back(rep.queue[n + j].mean / (eta * rate));
    }
    return w;
}

inline double waiting_time(double mean_queue, double eta, double rate) {
    if (rate < 1e-9) throw ZeroThroughput("zero throughput");
    return mean_queue / (eta * rate);
}

/** @brief Waiting-time model loss eta (R~* - P^) + <s, w> for each replication. */
inline Estimate waiting_model_loss(const MarketSpec &spec, const SimReport &rep) {
    const int m = spec.m(), n = spec.n();
    std::vector<double> x;
    for (const auto &a : rep.per_replication) {
        double v = rep.eta * (rep.fluid_value - (a.revenue - a.cost));
        for (int i = 0; i < n; ++i) v += spec.penalty[i] * waiting_time(a.queue[i], rep.eta, rep.server_rates[i]);
        for (int j = 0; j < m; ++j) v += spec.penalty[n + j] * waiting_time(a.queue[n + j], rep.eta, a.lambda[j]);
        x.push_back(v);
    }
    return estimate(x);
}

struct CouplingReport {
    bool precondition_ok = true;
    std::string message;
    double epsilon = 0.0;
    double mean_abs_imbalance = 0.0;
    double mean_total_queue = 0.0;
    double aux_queue_mean = 0.0;
    /** E|z| * eps. */
    double ratio = 0.0;
    /** (sum of server variances + min customer variances) / (8 max(m,n) eps). */
    double theorem_bound = 0.0;
};

/**
 * @brief Imbalance z = sum q_server - sum q_customer under two-price max-weight,
 * next to a single-server queue whose service exceeds arrivals by 2 max(m,n) eps.
 */
inline CouplingReport coupled_single_server_bound(const MarketSpec &spec, std::shared_ptr<const FluidSolution> fluid, double eps,
                                                  long horizon, std::uint64_t seed,
                                                  ArrivalModel arrivals = {ArrivalKind::Bernoulli, 1}) {
    CouplingReport rep;
    rep.epsilon = eps;
    double lo = std::numeric_limits<double>::infinity(), rho = 0.0;
    for (double l : fluid->lambda_star) lo = std::min(lo, l), rho += l;
    if (!(eps > 0.0 && eps <= 0.1 * lo)) {
        rep.precondition_ok = false;
        rep.message = "epsilon must lie in (0, 0.1 * min lambda*]";
        return rep;
    }
    const int n = spec.n(), m = spec.m();
    const double gamma = std::max(n, m);
    PolicySpec ps;
    ps.pricing = PricingKind::TwoPrice;
    ps.matching = MatchingKind::MaxWeight;
    ps.fluid = fluid;
    ps.epsilon = eps;
    Policy policy(spec, ps, 1.0);
    Simulator sim(policy, arrivals);
    RandomStream rs(seed, 0);
    SimState st = sim.initial_state();
    StepRecord rec;
    ArrivalModel aux_model = arrivals;
    if (rho + gamma * eps > aux_model.support_max()) aux_model = {ArrivalKind::Binomial, spec.a_max * std::max(n, m)};
    ArrivalSampler aux(aux_model);
    RandomStream rs_aux(seed, 1);
    long qa = 0;
    const long burn = horizon / 10;
    double sz = 0.0, sq = 0.0, sa = 0.0;
    for (long k = 0; k < horizon; ++k) {
        sim.step(st, rs, rec);
        long a = aux.sample(rho - gamma * eps, rs_aux.uniform());
        long s = aux.sample(rho + gamma * eps, rs_aux.uniform());
        qa = std::max(0L, qa + a - s);
        if (k < burn) continue;
        long z = 0, tot = 0;
        for (int i = 0; i < n; ++i) z += st.q[i], tot += st.q[i];
        for (int j = 0; j < m; ++j) z -= st.q[n + j], tot += st.q[n + j];
        sz += std::labs(z);
        sq += tot;
        sa += qa;
    }
    const double T = (double)(horizon - burn);
    rep.mean_abs_imbalance = sz / T;
    rep.mean_total_queue = sq / T;
    rep.aux_queue_mean = sa / T;
    rep.ratio = rep.mean_abs_imbalance * eps;
    double var = 0.0;
    const FluidSolution &f = *fluid;
    std::vector<double> mu = f.mean_server_rates();
    for (int i = 0; i < n; ++i) {
        double ex2 = 0.0;
        for (std::size_t g = 0; g < f.atoms.size(); ++g)
            ex2 += f.weights[g] * (arrivals.variance(f.atoms[g][i]) + f.atoms[g][i] * f.atoms[g][i]);
        var += ex2 - mu[i] * mu[i];
    }
    for (int j = 0; j < m; ++j)
        var += std::min(arrivals.variance(f.lambda_star[j] + eps), arrivals.variance(f.lambda_star[j] - eps));
    rep.theorem_bound = var / (8.0 * gamma * eps);
    return rep;
}

} // namespace twosided
