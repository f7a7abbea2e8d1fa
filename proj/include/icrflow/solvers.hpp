#pragma once

/// Linear solvers: a direct sparse LU factorization (used for every
/// application of the velocity-block inverse) and the two Krylov methods the
/// Schur-complement pressure solves rely on. Krylov tolerances are absolute;
/// callers derive them from the right-hand side they assemble.

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icrflow/sparse.hpp"

namespace icrflow {

/// Matrix-free operator: y = op(x).
using LinearOperator = std::function<Vec(const Vec&)>;

struct KrylovReport {
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    enum class Status { Converged, MaxIterations, Breakdown, Stagnated } status = Status::MaxIterations;
};

struct SingularMatrixError : std::runtime_error {
    explicit SingularMatrixError(const std::string& what, int pivot_index)
        : std::runtime_error(what), pivot(pivot_index) {}
    int pivot = -1;
};

struct KrylovBreakdownError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Sparse LU with partial pivoting and a fill-reducing (COLAMD) ordering.
class Factorization {
  public:
    explicit Factorization(const SparseMatrix& A) : n_(A.rows()) {
        if (A.rows() != A.cols()) throw std::invalid_argument("Factorization: matrix must be square");

        // A structurally empty row or column makes the matrix singular; report
        // the offending index before handing off to the numerical factorization.
        std::vector<char> col_seen(static_cast<std::size_t>(A.cols()), 0);
        for (int r = 0; r < A.rows(); ++r) {
            if (A.row_offsets()[static_cast<std::size_t>(r)] == A.row_offsets()[static_cast<std::size_t>(r) + 1])
                throw SingularMatrixError("Factorization: structurally empty row " + std::to_string(r), r);
        }
        for (int c : A.col_indices()) col_seen[static_cast<std::size_t>(c)] = 1;
        for (int c = 0; c < A.cols(); ++c)
            if (!col_seen[static_cast<std::size_t>(c)])
                throw SingularMatrixError("Factorization: structurally empty column " + std::to_string(c), c);

        Eigen::SparseMatrix<double> M(A.rows(), A.cols());
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(A.nnz()));
        for (int r = 0; r < A.rows(); ++r)
            for (int k = A.row_offsets()[static_cast<std::size_t>(r)]; k < A.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
                trips.emplace_back(r, A.col_indices()[static_cast<std::size_t>(k)], A.values()[static_cast<std::size_t>(k)]);
        M.setFromTriplets(trips.begin(), trips.end());
        M.makeCompressed();

        lu_.analyzePattern(M);
        lu_.factorize(M);
        if (lu_.info() != Eigen::Success) {
            // Eigen's message carries the zero-pivot column when numerical.
            throw SingularMatrixError("Factorization failed: " + lu_.lastErrorMessage(), -1);
        }
    }

    int size() const { return n_; }

    Vec solve(const Vec& b) const {
        Vec x = lu_.solve(b);
        if (lu_.info() != Eigen::Success) throw std::runtime_error("Factorization::solve failed");
        return x;
    }

  private:
    int n_ = 0;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

/// Preconditioned conjugate gradient for symmetric positive (semi)definite
/// operators; `tol` bounds the true residual ||b - op(x)|| in l2.
inline std::pair<Vec, KrylovReport> cg(const LinearOperator& op, const Vec& b,
                                       const LinearOperator& precond, double tol, int maxit) {
    KrylovReport rep;
    Vec x = Vec::Zero(b.size());
    Vec r = b;
    rep.residual = r.norm();
    if (rep.residual <= tol) {
        rep.converged = true;
        rep.status = KrylovReport::Status::Converged;
        return {x, rep};
    }
    Vec z = precond(r);
    Vec p = z;
    double rz = r.dot(z);
    const double breakdown_eps = 1e-300;
    for (int it = 1; it <= maxit; ++it) {
        const Vec Ap = op(p);
        const double pAp = p.dot(Ap);
        if (std::abs(pAp) < breakdown_eps || !std::isfinite(pAp)) {
            rep.iterations = it - 1;
            rep.status = KrylovReport::Status::Breakdown;
            throw KrylovBreakdownError("cg: breakdown, p^T A p = " + std::to_string(pAp));
        }
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        rep.iterations = it;
        rep.residual = r.norm();
        if (rep.residual <= tol) {
            rep.converged = true;
            rep.status = KrylovReport::Status::Converged;
            return {x, rep};
        }
        z = precond(r);
        const double rz_new = r.dot(z);
        if (std::abs(rz) < breakdown_eps || !std::isfinite(rz_new)) {
            rep.status = KrylovReport::Status::Breakdown;
            throw KrylovBreakdownError("cg: breakdown in beta");
        }
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    rep.status = KrylovReport::Status::MaxIterations;
    return {x, rep};
}

/// Restarted GMRES, right-preconditioned so the monitored residual is the
/// true residual ||b - op(x)||.
inline std::pair<Vec, KrylovReport> gmres(const LinearOperator& op, const Vec& b,
                                          const LinearOperator& precond, double tol,
                                          int restart, int maxit) {
    KrylovReport rep;
    const int n = static_cast<int>(b.size());
    Vec x = Vec::Zero(n);
    Vec r = b;
    double beta = r.norm();
    rep.residual = beta;
    if (beta <= tol) {
        rep.converged = true;
        rep.status = KrylovReport::Status::Converged;
        return {x, rep};
    }

    std::vector<Vec> V;     // Arnoldi basis
    std::vector<Vec> Z;     // preconditioned directions, x update uses these
    std::vector<double> H;  // Hessenberg, column-major with leading dim restart+1
    const auto Hat = [&](int i, int j) -> double& { return H[static_cast<std::size_t>(j) * (restart + 1) + i]; };

    int total_it = 0;
    double last_cycle_residual = beta;
    while (total_it < maxit) {
        V.assign(1, r / beta);
        Z.clear();
        H.assign(static_cast<std::size_t>(restart + 1) * restart, 0.0);
        std::vector<double> cs(static_cast<std::size_t>(restart), 0.0);
        std::vector<double> sn(static_cast<std::size_t>(restart), 0.0);
        std::vector<double> g(static_cast<std::size_t>(restart) + 1, 0.0);
        g[0] = beta;

        int j = 0;
        for (; j < restart && total_it < maxit; ++j, ++total_it) {
            Z.push_back(precond(V[static_cast<std::size_t>(j)]));
            Vec w = op(Z[static_cast<std::size_t>(j)]);
            for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
                Hat(i, j) = w.dot(V[static_cast<std::size_t>(i)]);
                w -= Hat(i, j) * V[static_cast<std::size_t>(i)];
            }
            Hat(j + 1, j) = w.norm();
            if (Hat(j + 1, j) > 1e-300) V.push_back(w / Hat(j + 1, j));

            for (int i = 0; i < j; ++i) {  // apply stored Givens rotations
                const double t = cs[static_cast<std::size_t>(i)] * Hat(i, j) + sn[static_cast<std::size_t>(i)] * Hat(i + 1, j);
                Hat(i + 1, j) = -sn[static_cast<std::size_t>(i)] * Hat(i, j) + cs[static_cast<std::size_t>(i)] * Hat(i + 1, j);
                Hat(i, j) = t;
            }
            const double denom = std::hypot(Hat(j, j), Hat(j + 1, j));
            if (denom < 1e-300) {
                rep.iterations = total_it + 1;
                rep.status = KrylovReport::Status::Breakdown;
                throw KrylovBreakdownError("gmres: breakdown, zero Hessenberg column");
            }
            cs[static_cast<std::size_t>(j)] = Hat(j, j) / denom;
            sn[static_cast<std::size_t>(j)] = Hat(j + 1, j) / denom;
            Hat(j, j) = denom;
            g[static_cast<std::size_t>(j) + 1] = -sn[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(j)];
            g[static_cast<std::size_t>(j)] = cs[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(j)];

            rep.iterations = total_it + 1;
            rep.residual = std::abs(g[static_cast<std::size_t>(j) + 1]);
            if (rep.residual <= tol || Hat(j + 1, j) <= 1e-300) {
                ++j;
                ++total_it;
                break;
            }
        }

        // Back-substitute the least-squares solution of this cycle.
        std::vector<double> y(static_cast<std::size_t>(j), 0.0);
        for (int i = j - 1; i >= 0; --i) {
            double s = g[static_cast<std::size_t>(i)];
            for (int k = i + 1; k < j; ++k) s -= Hat(i, k) * y[static_cast<std::size_t>(k)];
            y[static_cast<std::size_t>(i)] = s / Hat(i, i);
        }
        for (int i = 0; i < j; ++i) x += y[static_cast<std::size_t>(i)] * Z[static_cast<std::size_t>(i)];

        r = b - op(x);
        beta = r.norm();
        rep.residual = beta;
        if (beta <= tol) {
            rep.converged = true;
            rep.status = KrylovReport::Status::Converged;
            return {x, rep};
        }
        if (beta >= 0.999 * last_cycle_residual) {
            rep.status = KrylovReport::Status::Stagnated;
            return {x, rep};
        }
        last_cycle_residual = beta;
    }
    rep.status = KrylovReport::Status::MaxIterations;
    return {x, rep};
}

inline LinearOperator identity_preconditioner() {
    return [](const Vec& v) { return v; };
}

}  // namespace icrflow
