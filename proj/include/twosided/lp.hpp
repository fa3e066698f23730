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
#include <vector>

namespace twosided {

class LpNumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class RowSense { LE, EQ, GE };
enum class LpStatus { Optimal, Infeasible, Unbounded };

/** @brief min c'x subject to row constraints and x >= 0. */
struct LpProblem {
    int num_vars = 0;
    std::vector<double> objective;
    std::vector<double> coeffs; // row-major, num_rows x num_vars
    std::vector<RowSense> sense;
    std::vector<double> rhs;

    explicit LpProblem(int vars = 0) : num_vars(vars), objective(vars, 0.0) {}

    int num_rows() const { return (int)rhs.size(); }

    /** Appends a zero row and returns a pointer to its coefficients. */
    double *add_row(RowSense s, double b) {
        coeffs.resize(coeffs.size() + num_vars, 0.0);
        sense.push_back(s);
        rhs.push_back(b);
        return coeffs.data() + coeffs.size() - num_vars;
    }
};

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    double value = 0.0;
    std::vector<double> x;
};

/**
 * @brief Dense two-phase primal simplex with Bland's rule.
 *
 * The object keeps its tableau storage between calls.
 */
class DenseSimplex {
  public:
    explicit DenseSimplex(double tol = 1e-9, int max_iter = 5000) : tol_(tol), max_iter_(max_iter) {}

    LpResult solve(const LpProblem &lp) {
        const int m = lp.num_rows();
        const int nv = lp.num_vars;
        int nslack = 0, nart = 0;
        for (int r = 0; r < m; ++r) {
            RowSense s = flipped_sense(lp, r);
            if (s != RowSense::EQ) ++nslack;
            if (s != RowSense::LE) ++nart;
        }
        cols_ = nv + nslack + nart;
        art_begin_ = nv + nslack;
        stride_ = cols_ + 1;
        rows_ = m;
        tab_.assign((std::size_t)(m + 1) * stride_, 0.0);
        basis_.assign(m, -1);

        int slack = nv, art = art_begin_;
        for (int r = 0; r < m; ++r) {
            double sign = lp.rhs[r] < 0.0 ? -1.0 : 1.0;
            double *row = &tab_[(std::size_t)r * stride_];
            const double *src = lp.coeffs.data() + (std::size_t)r * nv;
            for (int j = 0; j < nv; ++j) row[j] = sign * src[j];
            row[cols_] = sign * lp.rhs[r];
            RowSense s = flipped_sense(lp, r);
            if (s == RowSense::LE) {
                row[slack] = 1.0;
                basis_[r] = slack++;
            } else if (s == RowSense::GE) {
                row[slack++] = -1.0;
                row[art] = 1.0;
                basis_[r] = art++;
            } else {
                row[art] = 1.0;
                basis_[r] = art++;
            }
        }

        LpResult res;
        double *z = &tab_[(std::size_t)m * stride_];
        if (nart > 0) {
            std::fill(z, z + stride_, 0.0);
            for (int r = 0; r < m; ++r) {
                if (basis_[r] < art_begin_) continue;
                const double *row = &tab_[(std::size_t)r * stride_];
                for (int j = 0; j <= cols_; ++j)
                    if (j < art_begin_ || j == cols_) z[j] -= row[j];
            }
            if (!iterate(cols_)) throw LpNumericalError("simplex phase one did not terminate");
            if (-z[cols_] > 1e3 * tol_ * (1.0 + max_abs_rhs(lp))) {
                res.status = LpStatus::Infeasible;
                return res;
            }
            drive_out_artificials();
        }

        std::fill(z, z + stride_, 0.0);
        for (int j = 0; j < nv; ++j) z[j] = lp.objective[j];
        for (int r = 0; r < m; ++r) {
            int b = basis_[r];
            if (b < 0 || b >= nv) continue;
            double cb = lp.objective[b];
            if (cb == 0.0) continue;
            const double *row = &tab_[(std::size_t)r * stride_];
            for (int j = 0; j <= cols_; ++j) z[j] -= cb * row[j];
        }
        if (!iterate(art_begin_)) throw LpNumericalError("simplex phase two did not terminate");
        if (unbounded_) {
            res.status = LpStatus::Unbounded;
            return res;
        }
        res.status = LpStatus::Optimal;
        res.x.assign(nv, 0.0);
        for (int r = 0; r < m; ++r)
            if (basis_[r] >= 0 && basis_[r] < nv) res.x[basis_[r]] = std::max(0.0, tab_[(std::size_t)r * stride_ + cols_]);
        res.value = 0.0;
        for (int j = 0; j < nv; ++j) res.value += lp.objective[j] * res.x[j];
        return res;
    }

  private:
    static RowSense flipped_sense(const LpProblem &lp, int r) {
        RowSense s = lp.sense[r];
        if (lp.rhs[r] >= 0.0 || s == RowSense::EQ) return s;
        return s == RowSense::LE ? RowSense::GE : RowSense::LE;
    }

    static double max_abs_rhs(const LpProblem &lp) {
        double v = 0.0;
        for (double b : lp.rhs) v = std::max(v, std::abs(b));
        return v;
    }

    // Pivots until optimal over columns [0, ncols). Returns false at the cap.
    bool iterate(int ncols) {
        unbounded_ = false;
        double *z = &tab_[(std::size_t)rows_ * stride_];
        for (int it = 0; it < max_iter_; ++it) {
            int enter = -1;
            for (int j = 0; j < ncols; ++j)
                if (z[j] < -tol_) {
                    enter = j;
                    break;
                }
            if (enter < 0) return true;
            int leave = -1;
            double best = 0.0;
            for (int r = 0; r < rows_; ++r) {
                double a = tab_[(std::size_t)r * stride_ + enter];
                if (a <= tol_) continue;
                double ratio = tab_[(std::size_t)r * stride_ + cols_] / a;
                if (leave < 0 || ratio < best - tol_ || (ratio <= best + tol_ && basis_[r] < basis_[leave])) {
                    leave = r;
                    best = ratio;
                }
            }
            if (leave < 0) {
                unbounded_ = true;
                return true;
            }
            pivot(leave, enter);
        }
        return false;
    }

    void pivot(int r, int c) {
        double *pr = &tab_[(std::size_t)r * stride_];
        double inv = 1.0 / pr[c];
        for (int j = 0; j <= cols_; ++j) pr[j] *= inv;
        pr[c] = 1.0;
        for (int k = 0; k <= rows_; ++k) {
            if (k == r) continue;
            double *rk = &tab_[(std::size_t)k * stride_];
            double f = rk[c];
            if (f == 0.0) continue;
            for (int j = 0; j <= cols_; ++j) rk[j] -= f * pr[j];
            rk[c] = 0.0;
        }
        basis_[r] = c;
    }

    void drive_out_artificials() {
        for (int r = 0; r < rows_; ++r) {
            if (basis_[r] < art_begin_) continue;
            const double *row = &tab_[(std::size_t)r * stride_];
            int c = -1;
            for (int j = 0; j < art_begin_; ++j)
                if (std::abs(row[j]) > 1e-7) {
                    c = j;
                    break;
                }
            if (c >= 0) pivot(r, c);
            // otherwise the row is redundant; its artificial stays basic at zero
        }
    }

    double tol_;
    int max_iter_;
    int rows_ = 0, cols_ = 0, stride_ = 0, art_begin_ = 0;
    bool unbounded_ = false;
    std::vector<double> tab_;
    std::vector<int> basis_;
};

} // namespace twosided
