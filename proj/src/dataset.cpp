#include "srlab/dataset.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "srlab/rng.hpp"

namespace srlab {

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = Rng::hash_label("dataset");
  auto feed = [&h](const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h = Rng::mix(h, b[i]);
  };
  std::uint64_t d = std::uint64_t(dim);
  feed(&d, sizeof d);
  feed(xs.data(), xs.size() * sizeof(double));
  feed(targets.data(), targets.size() * sizeof(double));
  return h;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (int j = 1; j <= d.dim; ++j) out << "x_" << j << ',';
  out << "y\n";
  for (std::size_t i = 0; i < d.rows(); ++i) {
    auto r = d.row(i);
    for (double v : r) out << fmt_double(v) << ',';
    out << fmt_double(d.targets[i]) << '\n';
  }
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
  int cols = 1;
  for (char c : line) cols += c == ',';
  Dataset d;
  d.dim = cols - 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int j = 0;
    while (std::getline(ss, cell, ',')) {
      double v = std::stod(cell);
      if (j < d.dim)
        d.xs.push_back(v);
      else
        d.targets.push_back(v);
      ++j;
    }
    if (j != cols) throw std::runtime_error("ragged csv row in " + path);
  }
  return d;
}

}  // namespace srlab
