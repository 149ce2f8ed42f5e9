#include "ehom/field_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "ehom/errors.hpp"

namespace ehom {

namespace {

template <class T> void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T> && sizeof(T) <= 8);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  os.write(bytes.data(), sizeof(T));
}

template <class T> T get(std::istream& is) {
  std::array<char, sizeof(T)> bytes;
  if (!is.read(bytes.data(), sizeof(T))) {
    throw FormatError("unexpected end of stream");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

void put_doubles(std::ostream& os, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      put(os, v);
    }
  }
}

std::vector<double> get_doubles(std::istream& is, std::size_t count) {
  std::vector<double> values(count);
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(count * sizeof(double)))) {
      throw FormatError("unexpected end of stream");
    }
  } else {
    for (double& v : values) {
      v = get<double>(is);
    }
  }
  return values;
}

void put_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

void expect_magic(std::istream& is, const char (&magic)[5]) {
  char buf[4];
  if (!is.read(buf, 4) || std::memcmp(buf, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
}

struct Header {
  Grid grid;
  double spacing;
};

void put_header(std::ostream& os, const char (&magic)[5], const Grid& grid, double spacing) {
  put_magic(os, magic);
  put<std::uint32_t>(os, kFormatVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(grid.dim()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(grid.n()));
  put<double>(os, spacing);
}

Header get_header(std::istream& is, const char (&magic)[5]) {
  expect_magic(is, magic);
  const auto version = get<std::uint32_t>(is);
  if (version != kFormatVersion) {
    throw FormatError("unsupported format version " + std::to_string(version));
  }
  const auto d = get<std::uint32_t>(is);
  const auto n = get<std::uint32_t>(is);
  const auto h = get<double>(is);
  if (d < 1 || d > static_cast<std::uint32_t>(kMaxDim) || n < 1 || n > (1U << 20)) {
    throw FormatError("implausible grid header");
  }
  return {Grid(static_cast<int>(d), static_cast<int>(n)), h};
}

} // namespace

void write_field(std::ostream& os, const CoefficientField& field) {
  put_header(os, "EHF1", field.grid(), field.spacing());
  put_doubles(os, field.entries());
  put_doubles(os, field.lambda());
  put_doubles(os, field.Lambda());
  if (!os) {
    throw FormatError("failed writing EHF1 stream");
  }
}

void write_field(const std::filesystem::path& path, const CoefficientField& field) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw FormatError("cannot open " + path.string() + " for writing");
  }
  write_field(os, field);
}

CoefficientField read_field(std::istream& is) {
  const Header hdr = get_header(is, "EHF1");
  const std::size_t cells = hdr.grid.size();
  auto entries = get_doubles(is, cells * static_cast<std::size_t>(CoefficientField::packed_size(hdr.grid.dim())));
  auto lam = get_doubles(is, cells);
  auto Lam = get_doubles(is, cells);
  return CoefficientField(hdr.grid, hdr.spacing, std::move(entries), std::move(lam), std::move(Lam));
}

CoefficientField read_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw FormatError("cannot open " + path.string());
  }
  return read_field(is);
}

void write_scalar_fields(std::ostream& os, const ScalarFields& data) {
  if (static_cast<int>(data.fields.size()) != data.grid.dim()) {
    throw ShapeError("CHI1 holds exactly d scalar fields");
  }
  put_header(os, "CHI1", data.grid, data.spacing);
  for (const auto& f : data.fields) {
    if (f.size() != data.grid.size()) {
      throw ShapeError("CHI1 scalar field does not match grid size");
    }
    put_doubles(os, f);
  }
  if (!os) {
    throw FormatError("failed writing CHI1 stream");
  }
}

ScalarFields read_scalar_fields(std::istream& is) {
  const Header hdr = get_header(is, "CHI1");
  ScalarFields out{hdr.grid, hdr.spacing, {}};
  for (int k = 0; k < hdr.grid.dim(); ++k) {
    out.fields.push_back(get_doubles(is, hdr.grid.size()));
  }
  return out;
}

void write_walk(std::ostream& os, const WalkTrace& trace) {
  if (trace.cells.size() != trace.times.size() * static_cast<std::size_t>(trace.dim)) {
    throw ShapeError("WLK1 trace cells do not match times");
  }
  put_magic(os, "WLK1");
  put<std::uint32_t>(os, kFormatVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(trace.dim));
  put<std::uint64_t>(os, trace.path_id);
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    put<double>(os, trace.times[i]);
    for (int a = 0; a < trace.dim; ++a) {
      put<std::int64_t>(os, trace.cells[i * static_cast<std::size_t>(trace.dim) + static_cast<std::size_t>(a)]);
    }
  }
  if (!os) {
    throw FormatError("failed writing WLK1 stream");
  }
}

WalkTrace read_walk(std::istream& is) {
  expect_magic(is, "WLK1");
  const auto version = get<std::uint32_t>(is);
  if (version != kFormatVersion) {
    throw FormatError("unsupported WLK1 version " + std::to_string(version));
  }
  WalkTrace trace;
  trace.dim = static_cast<int>(get<std::uint32_t>(is));
  if (trace.dim < 1 || trace.dim > kMaxDim) {
    throw FormatError("implausible WLK1 dimension");
  }
  trace.path_id = get<std::uint64_t>(is);
  while (is.peek() != std::char_traits<char>::eof()) {
    trace.times.push_back(get<double>(is));
    for (int a = 0; a < trace.dim; ++a) {
      trace.cells.push_back(get<std::int64_t>(is));
    }
  }
  return trace;
}

} // namespace ehom
