#pragma once

/// @file linear_solver.hpp
/// @brief Sparse direct LU solves with explicit failure reporting.

#include "cdapicard/space.hpp"

#include <memory>
#include <stdexcept>
#include <string>

namespace cdapicard {

class LinearSolveError : public std::runtime_error {
public:
    LinearSolveError(const std::string& what, double rcond, double relative_residual)
        : std::runtime_error(what), rcond_(rcond), relative_residual_(relative_residual)
    {
    }

    /// Reciprocal condition estimate of the factorization (NaN if unavailable).
    [[nodiscard]] double rcond() const { return rcond_; }
    [[nodiscard]] double relative_residual() const { return relative_residual_; }

private:
    double rcond_;
    double relative_residual_;
};

struct SolveInfo {
    double rcond = 0.0;
    double relative_residual = 0.0;
};

/// Owns one LU factorization. Not copyable; movable.
class DirectSolver {
public:
    /// Factorizations whose reciprocal pivot-ratio estimate falls below this are rejected.
    static constexpr double kMinRcond = 1e-15;
    /// Solves whose relative residual exceeds this are rejected.
    static constexpr double kMaxRelativeResidual = 1e-10;

    explicit DirectSolver(std::string context = "linear solve");
    ~DirectSolver();
    DirectSolver(DirectSolver&&) noexcept;
    DirectSolver& operator=(DirectSolver&&) noexcept;
    DirectSolver(const DirectSolver&) = delete;
    DirectSolver& operator=(const DirectSolver&) = delete;

    /// Throws LinearSolveError if A is structurally or numerically singular.
    void factorize(const SparseMatrix& A);
    /// Throws LinearSolveError if the relative residual exceeds kMaxRelativeResidual.
    [[nodiscard]] Vector solve(const Vector& b, SolveInfo* info = nullptr) const;
    [[nodiscard]] double rcond() const;

    /// Name of the backend compiled in ("umfpack" or "eigen-sparselu").
    static const char* backend();

private:
    friend bool sparse_backend_healthy();
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string context_;
};

/// One-shot factorize + solve.
Vector linear_solve(const SparseMatrix& A, const Vector& b, const std::string& context = "linear solve",
                    SolveInfo* info = nullptr);

/// Factors a small Laplacian through the compiled sparse backend and checks
/// the residual. Some OpenBLAS builds pick a faulty kernel on virtualized
/// AVX-512 hosts, which this detects.
bool sparse_backend_healthy();

/// Forces the Eigen SparseLU backend for every later factorization.
void disable_umfpack(bool disabled = true);

/// Program-entry guard: if the backend probe fails and OPENBLAS_CORETYPE is
/// unset, re-executes the current binary with OPENBLAS_CORETYPE=Haswell; if
/// the probe still fails, switches to Eigen SparseLU. Returns the backend name.
const char* ensure_sparse_backend(char** argv);

}  // namespace cdapicard
