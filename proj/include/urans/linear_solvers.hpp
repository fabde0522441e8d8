/// @file linear_solvers.hpp
/// @brief Matrix-free Krylov solvers and a cell-centered multigrid preconditioner.
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace urans {

struct SolveStats {
    int iterations = 0;
    double residual_l2 = 0.0;
    double residual_inf = 0.0;
    bool converged = false;
};

/// Raised when an iterative solve fails to meet its tolerance.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, SolveStats stats) : std::runtime_error(what), stats_(stats) {}
    const SolveStats& stats() const { return stats_; }

private:
    SolveStats stats_;
};

/// Stopping rule: converged when ||r||_2 <= rel_tol ||b||_2 or ||r||_inf <= abs_tol_inf.
/// A non-positive tolerance disables that test.
struct SolveControl {
    double rel_tol = 1e-10;
    double abs_tol_inf = 0.0;
    int max_iter = 2000;
    std::string label = "linear solve";
};

using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

/// Preconditioned conjugate gradients for symmetric positive (semi)definite operators.
SolveStats pcg(const LinearOperator& apply, const LinearOperator& precondition, std::span<const double> b,
               std::span<double> x, const SolveControl& control);

/// Preconditioned BiCGSTAB for general nonsymmetric operators.
SolveStats bicgstab(const LinearOperator& apply, const LinearOperator& precondition, std::span<const double> b,
                    std::span<double> x, const SolveControl& control);

/// Builds z = r / diag.
LinearOperator jacobi_preconditioner(std::vector<double> diagonal);

/// -Laplacian on a uniform cell-centered grid with periodic or zero-flux sides,
/// together with a symmetric V(2,2) cycle usable as a CG preconditioner.
class PoissonMultigrid {
public:
    PoissonMultigrid(int nx, int ny, double dx, double dy, bool periodic_x, bool periodic_y);
    ~PoissonMultigrid();
    PoissonMultigrid(PoissonMultigrid&&) noexcept;
    PoissonMultigrid& operator=(PoissonMultigrid&&) noexcept;

    /// y = -Lap x. Singular: constants are in the null space.
    void apply(std::span<const double> x, std::span<double> y) const;
    /// One V-cycle from a zero guess; result has zero mean.
    void precondition(std::span<const double> r, std::span<double> z) const;
    int levels() const;

private:
    struct Level;
    std::vector<std::unique_ptr<Level>> levels_;
    void vcycle(std::size_t level, std::span<const double> r, std::span<double> x) const;
};

void remove_mean(std::span<double> x);

}  // namespace urans
