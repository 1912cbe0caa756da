#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vulforge {

struct SparseEntry {
    std::uint32_t index;
    double value;

    friend bool operator==(const SparseEntry &, const SparseEntry &) = default;
};

/// Row-compressed matrix of training rows.
class SparseMatrix {
  public:
    explicit SparseMatrix(std::size_t cols = 0) : cols_(cols) { row_ptr_.push_back(0); }

    /// Appends a row; entry indices must be < cols().
    void add_row(std::span<const SparseEntry> entries);
    void add_dense_row(std::span<const double> values);

    [[nodiscard]] std::size_t rows() const noexcept { return row_ptr_.size() - 1; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::span<const SparseEntry> row(std::size_t i) const noexcept {
        return {entries_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }

  private:
    std::size_t cols_;
    std::vector<std::size_t> row_ptr_;
    std::vector<SparseEntry> entries_;
};

}  // namespace vulforge
