#include "hdlr/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "hdlr/errors.hpp"

namespace hdlr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tableau {
public:
    Tableau(const LinearProgram& lp, const SimplexOptions& options) : options_(options) {
        rows_ = lp.A.rows();
        n_orig_ = lp.A.cols();
        flipped_.assign(rows_, false);
        std::vector<RowSense> sense = lp.sense;
        for (Index i = 0; i < rows_; ++i) {
            if (lp.b(i) < 0.0) {
                flipped_[i] = true;
                if (sense[i] == RowSense::LessEqual) sense[i] = RowSense::GreaterEqual;
                else if (sense[i] == RowSense::GreaterEqual) sense[i] = RowSense::LessEqual;
            }
        }
        Index n_slack = 0, n_art = 0;
        for (Index i = 0; i < rows_; ++i) {
            if (sense[i] != RowSense::Equal) ++n_slack;
            if (sense[i] != RowSense::LessEqual) ++n_art;
        }
        first_art_ = n_orig_ + n_slack;
        cols_ = first_art_ + n_art;

        // Constraint matrix in normalized form, kept for dual recovery.
        full_ = MatrixXd::Zero(rows_, cols_);
        rhs_ = VectorXd(rows_);
        t_ = RowMatrix::Zero(rows_ + 1, cols_ + 1);
        basis_.assign(rows_, -1);
        Index slack = n_orig_, art = first_art_;
        for (Index i = 0; i < rows_; ++i) {
            const double sign = flipped_[i] ? -1.0 : 1.0;
            full_.row(i).head(n_orig_) = sign * lp.A.row(i);
            rhs_(i) = sign * lp.b(i);
            if (sense[i] == RowSense::LessEqual) {
                full_(i, slack) = 1.0;
                basis_[i] = slack++;
            } else if (sense[i] == RowSense::GreaterEqual) {
                full_(i, slack++) = -1.0;
                full_(i, art) = 1.0;
                basis_[i] = art++;
            } else {
                full_(i, art) = 1.0;
                basis_[i] = art++;
            }
        }
        // Spread the right-hand side slightly so degenerate vertices become
        // distinct; extract() re-solves against the unperturbed values.
        work_rhs_ = rhs_;
        if (options_.perturbation > 0.0) {
            std::uint64_t state = 0x9e3779b97f4a7c15ULL;
            for (Index i = 0; i < rows_; ++i) {
                state = state * 6364136223846793005ULL + 1442695040888963407ULL;
                const double u = static_cast<double>(state >> 11) * 0x1.0p-53;
                work_rhs_(i) += options_.perturbation * (1.0 + u) * std::max(1.0, std::abs(rhs_(i)));
            }
        }
        t_.topLeftCorner(rows_, cols_) = full_;
        t_.col(cols_).head(rows_) = work_rhs_;
    }

    // Rebuilds the tableau from the original data for the current basis,
    // discarding the rounding error accumulated by successive pivots.
    void refactor() {
        MatrixXd basis_mat(rows_, rows_);
        for (Index i = 0; i < rows_; ++i) basis_mat.col(i) = full_.col(basis_[i]);
        Eigen::PartialPivLU<MatrixXd> lu(basis_mat);
        t_.topLeftCorner(rows_, cols_) = lu.solve(full_);
        t_.col(cols_).head(rows_) = lu.solve(work_rhs_);
        for (Index i = 0; i < rows_; ++i) {
            t_.row(i).head(cols_) = t_.row(i).head(cols_).unaryExpr([](double v) { return std::abs(v) < 1e-13 ? 0.0 : v; });
            t_(i, basis_[i]) = 1.0;
            if (t_(i, cols_) < 0.0) t_(i, cols_) = 0.0;
        }
        load_costs(cost_);
    }

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    Index first_artificial() const { return first_art_; }
    bool has_artificials() const { return first_art_ < cols_; }

    // Loads cost vector (length cols_) into the objective row as reduced costs.
    void load_costs(const VectorXd& cost) {
        cost_ = cost;
        VectorXd cb(rows_);
        for (Index i = 0; i < rows_; ++i) cb(i) = cost(basis_[i]);
        const Eigen::RowVectorXd z = cb.transpose() * t_.topRows(rows_);
        t_.row(rows_).head(cols_) = cost.transpose() - z.head(cols_);
        t_(rows_, cols_) = -z(cols_);
    }

    double objective() const { return -t_(rows_, cols_); }

    LpStatus iterate(bool allow_artificial, int& iterations) {
        int degenerate_run = 0;
        while (true) {
            if (iterations >= options_.max_iterations) return LpStatus::IterationLimit;
            const bool bland = degenerate_run >= options_.degenerate_switch;
            const Index limit = allow_artificial ? cols_ : first_art_;
            Index enter = -1;
            double best = options_.cost_tolerance;
            for (Index j = 0; j < limit; ++j) {
                const double d = t_(rows_, j);
                if (d > best) {
                    enter = j;
                    if (bland) break;
                    best = d;
                }
            }
            if (enter < 0) return LpStatus::Optimal;

            // Harris ratio test: bound the step with a small feasibility
            // allowance, then take the largest pivot among rows within it.
            const double harris = options_.feasibility_tolerance;
            double step = std::numeric_limits<double>::infinity();
            for (Index i = 0; i < rows_; ++i) {
                const double a = t_(i, enter);
                if (a <= options_.pivot_tolerance) continue;
                step = std::min(step, (std::max(t_(i, cols_), 0.0) + harris) / a);
            }
            Index leave = -1;
            double best_ratio = 0.0;
            double best_pivot = 0.0;
            for (Index i = 0; i < rows_; ++i) {
                const double a = t_(i, enter);
                if (a <= options_.pivot_tolerance) continue;
                const double ratio = std::max(t_(i, cols_), 0.0) / a;
                if (ratio > step) continue;
                const bool take = leave < 0 || (bland ? basis_[i] < basis_[leave] : a > best_pivot);
                if (take) {
                    leave = i;
                    best_ratio = ratio;
                    best_pivot = a;
                }
            }
            if (leave < 0) return LpStatus::Unbounded;
            degenerate_run = best_ratio * best_pivot <= 1e-14 ? degenerate_run + 1 : 0;
            pivot(leave, enter);
            ++iterations;
        }
    }

    void pivot(Index r, Index q) {
        t_.row(r) /= t_(r, q);
        const VectorXd factors = t_.col(q);
        for (Index i = 0; i <= rows_; ++i) {
            if (i == r || factors(i) == 0.0) continue;
            t_.row(i).noalias() -= factors(i) * t_.row(r);
        }
        t_(r, q) = 1.0;
        basis_[r] = q;
    }

    // Moves zero-level artificial variables out of the basis where possible.
    void expel_artificials() {
        for (Index i = 0; i < rows_; ++i) {
            if (basis_[i] < first_art_) continue;
            Index best = -1;
            double mag = options_.pivot_tolerance;
            for (Index j = 0; j < first_art_; ++j) {
                if (std::abs(t_(i, j)) > mag) {
                    mag = std::abs(t_(i, j));
                    best = j;
                }
            }
            if (best >= 0) pivot(i, best);
        }
    }

    void extract(LpSolution& sol) const {
        // Re-solve with the final basis for accuracy.
        MatrixXd basis_mat(rows_, rows_);
        VectorXd cb(rows_);
        for (Index i = 0; i < rows_; ++i) {
            basis_mat.col(i) = full_.col(basis_[i]);
            cb(i) = cost_(basis_[i]);
        }
        Eigen::PartialPivLU<MatrixXd> lu(basis_mat);
        const VectorXd xb = lu.solve(rhs_);
        const VectorXd y = lu.transpose().solve(cb);
        sol.x = VectorXd::Zero(n_orig_);
        for (Index i = 0; i < rows_; ++i) {
            if (basis_[i] < n_orig_) sol.x(basis_[i]) = std::max(xb(i), 0.0);
        }
        sol.duals.resize(rows_);
        for (Index i = 0; i < rows_; ++i) sol.duals(i) = flipped_[i] ? -y(i) : y(i);
    }

private:
    SimplexOptions options_;
    Index rows_ = 0, n_orig_ = 0, cols_ = 0, first_art_ = 0;
    std::vector<bool> flipped_;
    std::vector<Index> basis_;
    MatrixXd full_;
    VectorXd rhs_;
    VectorXd work_rhs_;
    VectorXd cost_;
    RowMatrix t_;
};

// Geometric-mean equilibration, rounded to powers of two so scaling is exact.
void equilibrate(const MatrixXd& A, VectorXd& row_scale, VectorXd& col_scale) {
    row_scale = VectorXd::Ones(A.rows());
    col_scale = VectorXd::Ones(A.cols());
    for (int pass = 0; pass < 6; ++pass) {
        for (Index i = 0; i < A.rows(); ++i) {
            double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
            for (Index j = 0; j < A.cols(); ++j) {
                const double v = std::abs(A(i, j)) * col_scale(j);
                if (v == 0.0) continue;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi > 0.0) row_scale(i) = 1.0 / std::sqrt(lo * hi);
        }
        for (Index j = 0; j < A.cols(); ++j) {
            double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
            for (Index i = 0; i < A.rows(); ++i) {
                const double v = std::abs(A(i, j)) * row_scale(i);
                if (v == 0.0) continue;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi > 0.0) col_scale(j) = 1.0 / std::sqrt(lo * hi);
        }
    }
    // Capped so that rows of negligible coefficients keep meaningful duals.
    auto round2 = [](double v) { return std::exp2(std::clamp(std::round(std::log2(v)), -10.0, 10.0)); };
    row_scale = row_scale.unaryExpr(round2);
    col_scale = col_scale.unaryExpr(round2);
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp_in, const SimplexOptions& options) {
    const Index m = lp_in.A.rows();
    const Index n = lp_in.A.cols();
    if (lp_in.b.size() != m || lp_in.c.size() != n || static_cast<Index>(lp_in.sense.size()) != m) {
        fail(ErrorCode::DimensionMismatch, "inconsistent linear program dimensions");
    }
    // Solve  max (C c)^T x'  s.t.  (R A C) x' (sense) R b,  then x = C x', y = R y'.
    VectorXd row_scale, col_scale;
    equilibrate(lp_in.A, row_scale, col_scale);
    LinearProgram lp;
    lp.A = row_scale.asDiagonal() * lp_in.A * col_scale.asDiagonal();
    lp.b = row_scale.cwiseProduct(lp_in.b);
    lp.c = col_scale.cwiseProduct(lp_in.c);
    lp.sense = lp_in.sense;
    Tableau tab(lp, options);
    LpSolution sol;

    if (tab.has_artificials()) {
        VectorXd phase1 = VectorXd::Zero(tab.cols());
        phase1.tail(tab.cols() - tab.first_artificial()).setConstant(-1.0);
        tab.load_costs(phase1);
        sol.status = tab.iterate(true, sol.iterations);
        if (sol.status == LpStatus::IterationLimit) return sol;
        if (tab.objective() < -options.feasibility_tolerance * std::max(1.0, lp.b.cwiseAbs().maxCoeff())) {
            sol.status = LpStatus::Infeasible;
            return sol;
        }
        tab.expel_artificials();
    }

    VectorXd cost = VectorXd::Zero(tab.cols());
    cost.head(n) = lp.c;
    tab.load_costs(cost);
    // A fresh factorization can expose improving columns hidden by drift.
    for (int round = 0; round < 20; ++round) {
        const int before = sol.iterations;
        sol.status = tab.iterate(false, sol.iterations);
        if (sol.status != LpStatus::Optimal) return sol;
        if (round > 0 && sol.iterations == before) break;
        tab.refactor();
    }
    tab.extract(sol);
    sol.x = col_scale.cwiseProduct(sol.x);
    sol.duals = row_scale.cwiseProduct(sol.duals);
    sol.objective = lp_in.c.dot(sol.x);
    return sol;
}

}  // namespace hdlr
