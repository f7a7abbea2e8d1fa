#pragma once

/// Compressed-row sparse matrices assembled from triplets, with the matrix
/// and transpose products the solvers need, plus a MatrixMarket dump for
/// debugging.

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace icrflow {

using Vec = Eigen::VectorXd;

struct Triplet {
    int row;
    int col;
    double value;
};

class SparseMatrix {
  public:
    SparseMatrix() = default;
    SparseMatrix(int rows, int cols) : rows_(rows), cols_(cols), row_offsets_(static_cast<std::size_t>(rows) + 1, 0) {}

    static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
        SparseMatrix A(rows, cols);
        std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        A.col_indices_.reserve(triplets.size());
        A.values_.reserve(triplets.size());
        for (const auto& t : triplets) {
            if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
                throw std::out_of_range("SparseMatrix::from_triplets: index out of range");
            if (!A.col_indices_.empty() && A.row_of_last_ == t.row && A.col_indices_.back() == t.col) {
                A.values_.back() += t.value;  // duplicate entries accumulate
            } else {
                for (int r = A.row_of_last_ + 1; r <= t.row; ++r)
                    A.row_offsets_[static_cast<std::size_t>(r)] = static_cast<int>(A.col_indices_.size());
                A.row_of_last_ = t.row;
                A.col_indices_.push_back(t.col);
                A.values_.push_back(t.value);
            }
        }
        for (int r = A.row_of_last_ + 1; r <= rows; ++r)
            A.row_offsets_[static_cast<std::size_t>(r)] = static_cast<int>(A.col_indices_.size());
        return A;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::int64_t nnz() const { return static_cast<std::int64_t>(values_.size()); }

    const std::vector<int>& row_offsets() const { return row_offsets_; }
    const std::vector<int>& col_indices() const { return col_indices_; }
    const std::vector<double>& values() const { return values_; }

    Vec apply(const Vec& x) const {
        Vec y = Vec::Zero(rows_);
        for (int r = 0; r < rows_; ++r) {
            double acc = 0.0;
            for (int k = row_offsets_[static_cast<std::size_t>(r)]; k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k)
                acc += values_[static_cast<std::size_t>(k)] * x[col_indices_[static_cast<std::size_t>(k)]];
            y[r] = acc;
        }
        return y;
    }

    Vec apply_transpose(const Vec& x) const {
        Vec y = Vec::Zero(cols_);
        for (int r = 0; r < rows_; ++r) {
            const double xr = x[r];
            if (xr == 0.0) continue;
            for (int k = row_offsets_[static_cast<std::size_t>(r)]; k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k)
                y[col_indices_[static_cast<std::size_t>(k)]] += values_[static_cast<std::size_t>(k)] * xr;
        }
        return y;
    }

    SparseMatrix transpose() const {
        std::vector<Triplet> trips;
        trips.reserve(values_.size());
        for (int r = 0; r < rows_; ++r)
            for (int k = row_offsets_[static_cast<std::size_t>(r)]; k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k)
                trips.push_back({col_indices_[static_cast<std::size_t>(k)], r, values_[static_cast<std::size_t>(k)]});
        return from_triplets(cols_, rows_, std::move(trips));
    }

    /// Submatrix from global index maps: keeps entry (r,c) when both maps are
    /// nonnegative, relocating it to (row_map[r], col_map[c]).
    SparseMatrix select(const std::vector<int>& row_map, int sub_rows,
                        const std::vector<int>& col_map, int sub_cols) const {
        std::vector<Triplet> trips;
        for (int r = 0; r < rows_; ++r) {
            const int rr = row_map[static_cast<std::size_t>(r)];
            if (rr < 0) continue;
            for (int k = row_offsets_[static_cast<std::size_t>(r)]; k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k) {
                const int cc = col_map[static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(k)])];
                if (cc >= 0) trips.push_back({rr, cc, values_[static_cast<std::size_t>(k)]});
            }
        }
        return from_triplets(sub_rows, sub_cols, std::move(trips));
    }

    double quadratic_form(const Vec& x) const { return x.dot(apply(x)); }

    void write_matrix_market(std::ostream& os) const {
        os << "%%MatrixMarket matrix coordinate real general\n";
        os << rows_ << ' ' << cols_ << ' ' << nnz() << '\n';
        for (int r = 0; r < rows_; ++r)
            for (int k = row_offsets_[static_cast<std::size_t>(r)]; k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k)
                os << r + 1 << ' ' << col_indices_[static_cast<std::size_t>(k)] + 1 << ' '
                   << values_[static_cast<std::size_t>(k)] << '\n';
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    int row_of_last_ = -1;
    std::vector<int> row_offsets_;
    std::vector<int> col_indices_;
    std::vector<double> values_;
};

}  // namespace icrflow
