#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ehom/environment.hpp"

namespace ehom {

// Binary containers. All integers and floats are little-endian.
//
//   EHF1: "EHF1" u32 version=1, u32 d, u32 N, f64 h,
//         N^d x d(d+1)/2 f64 packed upper-triangular cell matrices,
//         N^d f64 lambda, N^d f64 Lambda.
//   CHI1: same header with magic "CHI1", followed by d scalar fields of N^d f64.
//   WLK1: "WLK1" u32 version=1, u32 d, u64 path id,
//         then records of f64 time, d x i64 unwrapped cell until end of stream.

inline constexpr std::uint32_t kFormatVersion = 1;

void write_field(std::ostream& os, const CoefficientField& field);
void write_field(const std::filesystem::path& path, const CoefficientField& field);
CoefficientField read_field(std::istream& is);
CoefficientField read_field(const std::filesystem::path& path);

struct ScalarFields {
  Grid grid;
  double spacing = 1.0;
  std::vector<std::vector<double>> fields;
};

void write_scalar_fields(std::ostream& os, const ScalarFields& data);
ScalarFields read_scalar_fields(std::istream& is);

struct WalkTrace {
  int dim = 0;
  std::uint64_t path_id = 0;
  std::vector<double> times;
  std::vector<std::int64_t> cells; ///< times.size() x dim, unwrapped
};

void write_walk(std::ostream& os, const WalkTrace& trace);
WalkTrace read_walk(std::istream& is);

} // namespace ehom
