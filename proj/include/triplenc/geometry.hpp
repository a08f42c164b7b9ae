#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "triplenc/error.hpp"

namespace triplenc {

/// Raw (unnormalized) embedding. Norms are computed on demand; pooling works on raw values.
using Vector = std::vector<float>;

/// Dense row-major matrix. Storage type is float for embeddings and double for scores.
template <class T>
class BasicMatrix {
  public:
    BasicMatrix() = default;
    BasicMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
    BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw DimMismatch(rows_ * cols_, data_.size());
        }
    }

    /// Builds a matrix from equally sized rows. An empty row list gives a 0 x 0 matrix.
    template <class Row>
    static BasicMatrix from_rows(const std::vector<Row>& rows) {
        BasicMatrix m;
        if (rows.empty()) {
            return m;
        }
        m.rows_ = rows.size();
        m.cols_ = rows.front().size();
        m.data_.reserve(m.rows_ * m.cols_);
        for (const auto& r : rows) {
            if (r.size() != m.cols_) {
                throw DimMismatch(m.cols_, r.size());
            }
            m.data_.insert(m.data_.end(), r.begin(), r.end());
        }
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool empty() const noexcept { return rows_ == 0; }

    [[nodiscard]] std::span<const T> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    [[nodiscard]] std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<const T> data() const noexcept { return data_; }
    [[nodiscard]] std::span<T> data() noexcept { return data_; }

    void append_row(std::span<const T> r) {
        if (rows_ == 0 && cols_ == 0) {
            cols_ = r.size();
        }
        if (r.size() != cols_) {
            throw DimMismatch(cols_, r.size());
        }
        data_.insert(data_.end(), r.begin(), r.end());
        ++rows_;
    }

    bool operator==(const BasicMatrix&) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using Matrix = BasicMatrix<float>;
using ScoreMatrix = BasicMatrix<double>;

double dot(std::span<const float> u, std::span<const float> v);
double norm(std::span<const float> u);

/// dot(u,v) / (|u| |v|), accumulated in double.
/// Throws DimMismatch on unequal lengths and ZeroNorm if either side has zero norm.
double cosine(std::span<const float> u, std::span<const float> v);

/// Elementwise (u + v) / 2. mean_pool(u, u) == u exactly.
Vector mean_pool(std::span<const float> u, std::span<const float> v);

/// Throws NonFinite if any entry is NaN or infinite.
void require_finite(std::span<const float> values, const char* what);

/// Row norms of a matrix, in double.
std::vector<double> row_norms(const Matrix& m);

/// Cosine of every pair row against every candidate row: result(p, c) = cosine(pairs[p], candidates[c]).
/// Throws ZeroNorm naming the offending row.
ScoreMatrix batch_pair_candidate_scores(const Matrix& pairs, const Matrix& candidates);

/// Same as above with precomputed candidate norms (one per candidate row).
ScoreMatrix batch_pair_candidate_scores(const Matrix& pairs, const Matrix& candidates,
                                        std::span<const double> candidate_norms);

}  // namespace triplenc
