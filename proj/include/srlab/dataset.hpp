#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace srlab {

// Numeric regression table: n rows of x_1..x_dim plus a target column.
// Optionally carries the per-variable sampling interval it was drawn from.
struct Dataset {
  int dim = 0;
  std::vector<double> xs;       // row-major, size() == rows * dim
  std::vector<double> targets;  // size() == rows
  std::vector<std::array<double, 2>> support;  // empty or one [lo,hi] per dim

  std::size_t rows() const { return targets.size(); }
  std::span<const double> row(std::size_t i) const {
    return {xs.data() + i * std::size_t(dim), std::size_t(dim)};
  }

  // stable content identity; ignores support
  std::uint64_t content_hash() const;
};

// CSV with header x_1,...,x_dim,y; %.17g numbers so values round-trip.
void write_csv(const Dataset& d, const std::string& path);
Dataset read_csv(const std::string& path);

}  // namespace srlab
