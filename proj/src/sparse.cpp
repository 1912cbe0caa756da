#include "vulforge/sparse.hpp"

#include "vulforge/error.hpp"

#include <string>

namespace vulforge {

void SparseMatrix::add_row(std::span<const SparseEntry> entries) {
    for (const auto &e : entries) {
        if (e.index >= cols_) {
            throw Error(ErrorCode::WidthMismatch, "column " + std::to_string(e.index) + " >= width " + std::to_string(cols_));
        }
        entries_.push_back(e);
    }
    row_ptr_.push_back(entries_.size());
}

void SparseMatrix::add_dense_row(std::span<const double> values) {
    if (values.size() != cols_) {
        throw Error(ErrorCode::WidthMismatch, "row width " + std::to_string(values.size()) + " != " + std::to_string(cols_));
    }
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (values[j] != 0.0) {
            entries_.push_back({static_cast<std::uint32_t>(j), values[j]});
        }
    }
    row_ptr_.push_back(entries_.size());
}

}  // namespace vulforge
