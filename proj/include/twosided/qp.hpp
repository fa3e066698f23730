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
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace twosided {

/** @brief max g'x - x'Hx/2 subject to A x >= b and x >= 0, with H positive semidefinite. */
struct ConcaveQp {
    Eigen::VectorXd g;
    Eigen::MatrixXd H;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;

    double objective(const Eigen::VectorXd &x) const { return g.dot(x) - 0.5 * x.dot(H * x); }
};

struct QpSolution {
    bool ok = false;
    Eigen::VectorXd x;
    /** Multipliers of the rows of A. */
    Eigen::VectorXd nu;
    double value = -std::numeric_limits<double>::infinity();
    std::vector<int> zero_set;
    std::vector<int> active_rows;
    std::size_t systems_tried = 0;
    std::size_t singular_systems = 0;
};

namespace detail {

inline bool kkt_point(const ConcaveQp &qp, const Eigen::VectorXd &x, const Eigen::VectorXd &nu, double tol) {
    if ((x.array() < -tol).any()) return false;
    if (nu.size() && (nu.array() < -tol).any()) return false;
    if (qp.A.rows() && ((qp.A * x - qp.b).array() < -tol).any()) return false;
    Eigen::VectorXd grad = qp.g - qp.H * x;
    if (qp.A.rows()) grad += qp.A.transpose() * nu;
    for (int k = 0; k < x.size(); ++k)
        if (grad[k] > tol) return false;
    return true;
}

} // namespace detail

/** @brief Number of (zero set, active rows) combinations the enumeration would visit. */
inline double active_set_combinations(int nx, int nrows) {
    double total = 0.0;
    for (int f = 0; f <= nx; ++f) {
        double choose_f = std::tgamma(nx + 1.0) / (std::tgamma(f + 1.0) * std::tgamma(nx - f + 1.0));
        double rows = 0.0;
        for (int k = 0; k <= std::min(f, nrows); ++k)
            rows += std::tgamma(nrows + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(nrows - k + 1.0));
        total += choose_f * rows;
    }
    return total;
}

/**
 * @brief Exact KKT search over all zero sets and active row sets.
 *
 * free_ok may reject a free set before any system is solved.
 */
inline QpSolution solve_qp_active_set(const ConcaveQp &qp, const std::function<bool(const std::vector<int> &)> &free_ok = {},
                                      double tol = 1e-9) {
    const int nx = (int)qp.g.size();
    const int nr = (int)qp.A.rows();
    QpSolution best;
    std::vector<int> freev, rows;
    for (unsigned fmask = 0; fmask < (1u << nx); ++fmask) {
        freev.clear();
        for (int k = 0; k < nx; ++k)
            if (fmask >> k & 1) freev.push_back(k);
        if (free_ok && !free_ok(freev)) continue;
        const int nf = (int)freev.size();
        for (unsigned rmask = 0; rmask < (1u << nr); ++rmask) {
            int na = __builtin_popcount(rmask);
            if (na > nf) continue;
            rows.clear();
            for (int r = 0; r < nr; ++r)
                if (rmask >> r & 1) rows.push_back(r);
            Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nf + na, nf + na);
            Eigen::VectorXd rhs(nf + na);
            for (int a = 0; a < nf; ++a) {
                for (int c = 0; c < nf; ++c) K(a, c) = qp.H(freev[a], freev[c]);
                for (int r = 0; r < na; ++r) K(a, nf + r) = -qp.A(rows[r], freev[a]);
                rhs[a] = qp.g[freev[a]];
            }
            for (int r = 0; r < na; ++r) {
                for (int c = 0; c < nf; ++c) K(nf + r, c) = qp.A(rows[r], freev[c]);
                rhs[nf + r] = qp.b[rows[r]];
            }
            ++best.systems_tried;
            Eigen::VectorXd sol;
            if (nf + na > 0) {
                Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
                if (!lu.isInvertible()) {
                    ++best.singular_systems;
                    continue;
                }
                sol = lu.solve(rhs);
            }
            Eigen::VectorXd x = Eigen::VectorXd::Zero(nx), nu = Eigen::VectorXd::Zero(nr);
            for (int a = 0; a < nf; ++a) x[freev[a]] = sol[a];
            for (int r = 0; r < na; ++r) nu[rows[r]] = sol[nf + r];
            if (!detail::kkt_point(qp, x, nu, tol * (1.0 + qp.g.cwiseAbs().maxCoeff()))) continue;
            double v = qp.objective(x);
            if (!best.ok || v > best.value) {
                best.ok = true;
                best.value = v;
                best.x = x.cwiseMax(0.0);
                best.nu = nu.cwiseMax(0.0);
                best.zero_set.clear();
                for (int k = 0; k < nx; ++k)
                    if (!(fmask >> k & 1)) best.zero_set.push_back(k);
                best.active_rows = rows;
            }
        }
    }
    return best;
}

struct LcpResult {
    bool solved = false;
    Eigen::VectorXd z;
    int pivots = 0;
};

/** @brief Lemke's method with lexicographic ratio test for w = Mz + q, w, z >= 0, w'z = 0. */
inline LcpResult solve_lcp_lemke(const Eigen::MatrixXd &M, const Eigen::VectorXd &q, int max_pivots = 20000) {
    const int N = (int)q.size();
    LcpResult res;
    res.z = Eigen::VectorXd::Zero(N);
    if (N == 0 || q.minCoeff() >= 0.0) {
        res.solved = true;
        return res;
    }
    // columns: w (0..N-1), z (N..2N-1), z0 (2N), rhs (2N+1)
    const int Z0 = 2 * N, RHS = 2 * N + 1;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(N, 2 * N + 2);
    for (int i = 0; i < N; ++i) {
        T(i, i) = 1.0;
        for (int j = 0; j < N; ++j) T(i, N + j) = -M(i, j);
        T(i, Z0) = -1.0;
        T(i, RHS) = q[i];
    }
    std::vector<int> basis(N);
    for (int i = 0; i < N; ++i) basis[i] = i;
    auto pivot = [&](int r, int c) {
        const double piv = T(r, c);
        T.row(r) /= piv;
        for (int i = 0; i < N; ++i) {
            const double f = T(i, c);
            if (i != r && f != 0.0) T.row(i) -= f * T.row(r);
        }
        basis[r] = c;
    };
    int r0 = 0;
    for (int i = 1; i < N; ++i)
        if (q[i] < q[r0]) r0 = i;
    int leaving = basis[r0];
    pivot(r0, Z0);
    const double tol = 1e-11;
    for (int it = 0; it < max_pivots; ++it) {
        int enter = leaving < N ? leaving + N : leaving - N;
        int r = -1;
        for (int i = 0; i < N; ++i) {
            if (T(i, enter) <= tol) continue;
            if (r < 0) {
                r = i;
                continue;
            }
            // lexicographic comparison of (rhs, B^-1) rows scaled by the pivot column
            double a = T(i, RHS) / T(i, enter), b = T(r, RHS) / T(r, enter);
            int cmp = 0;
            if (a < b - 1e-12) cmp = -1;
            else if (a > b + 1e-12) cmp = 1;
            for (int k = 0; k < N && cmp == 0; ++k) {
                a = T(i, k) / T(i, enter);
                b = T(r, k) / T(r, enter);
                if (a < b - 1e-12) cmp = -1;
                else if (a > b + 1e-12) cmp = 1;
            }
            if (cmp < 0 || (cmp == 0 && basis[i] == Z0)) r = i;
        }
        ++res.pivots;
        if (r < 0) return res; // secondary ray
        leaving = basis[r];
        pivot(r, enter);
        if (leaving == Z0) {
            for (int i = 0; i < N; ++i)
                if (basis[i] >= N && basis[i] < 2 * N) res.z[basis[i] - N] = std::max(0.0, T(i, RHS));
            res.solved = true;
            return res;
        }
    }
    return res;
}

/** @brief Solves the QP through its KKT complementarity system. */
inline QpSolution solve_qp_lemke(const ConcaveQp &qp) {
    const int nx = (int)qp.g.size();
    const int nr = (int)qp.A.rows();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nx + nr, nx + nr);
    Eigen::VectorXd q(nx + nr);
    M.topLeftCorner(nx, nx) = qp.H;
    if (nr) {
        M.topRightCorner(nx, nr) = -qp.A.transpose();
        M.bottomLeftCorner(nr, nx) = qp.A;
    }
    q.head(nx) = -qp.g;
    if (nr) q.tail(nr) = -qp.b;
    LcpResult lcp = solve_lcp_lemke(M, q);
    QpSolution out;
    out.systems_tried = (std::size_t)lcp.pivots;
    if (!lcp.solved) return out;
    out.x = lcp.z.head(nx);
    out.nu = lcp.z.tail(nr);
    if (!detail::kkt_point(qp, out.x, out.nu, 1e-7 * (1.0 + qp.g.cwiseAbs().maxCoeff()))) return out;
    out.ok = true;
    out.value = qp.objective(out.x);
    for (int k = 0; k < nx; ++k)
        if (out.x[k] <= 1e-12) out.zero_set.push_back(k);
    for (int r = 0; r < nr; ++r)
        if (std::abs((qp.A.row(r) * out.x)(0) - qp.b[r]) <= 1e-9) out.active_rows.push_back(r);
    return out;
}

} // namespace twosided
