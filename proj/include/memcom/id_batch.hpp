#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace memcom {

/// Row-major matrix of category ids (b examples x l positions).
struct IdBatch {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int64_t> ids;

    IdBatch() = default;
    IdBatch(std::size_t r, std::size_t c, std::int64_t fill = 0) : rows(r), cols(c), ids(r * c, fill) {}
    IdBatch(std::size_t r, std::size_t c, std::vector<std::int64_t> v) : rows(r), cols(c), ids(std::move(v)) {}

    std::size_t size() const noexcept { return ids.size(); }
    std::int64_t& at(std::size_t i, std::size_t j) { return ids[i * cols + j]; }
    std::int64_t at(std::size_t i, std::size_t j) const { return ids[i * cols + j]; }
    std::span<const std::int64_t> row(std::size_t i) const { return {ids.data() + i * cols, cols}; }

    friend bool operator==(const IdBatch&, const IdBatch&) = default;
};

}  // namespace memcom
