#pragma once

#include <vector>

#include <Eigen/Dense>

namespace hdlr {

enum class RowSense { LessEqual, Equal, GreaterEqual };
enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

// maximize c^T x  subject to  A x (sense) b,  x >= 0.
struct LinearProgram {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    std::vector<RowSense> sense;
};

struct SimplexOptions {
    double pivot_tolerance = 1e-9;
    double cost_tolerance = 1e-10;
    double feasibility_tolerance = 1e-8;
    int max_iterations = 50000;
    // Consecutive degenerate pivots before switching to Bland's rule.
    int degenerate_switch = 50;
    // Relative size of the right-hand-side perturbation; zero disables it.
    double perturbation = 1e-7;
};

struct LpSolution {
    LpStatus status = LpStatus::IterationLimit;
    Eigen::VectorXd x;
    // Shadow prices d(objective)/d(b_i); the optimal point of the dual LP.
    Eigen::VectorXd duals;
    double objective = 0.0;
    int iterations = 0;
};

// Dense tableau simplex; phase one only runs when some row lacks a slack basis.
LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

}  // namespace hdlr
