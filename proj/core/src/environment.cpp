#include "ehom/environment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "ehom/errors.hpp"
#include "ehom/rng.hpp"
#include "ehom/statistics.hpp"

namespace ehom {

namespace {

template <class... Ts> struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> Overloaded(Ts...) -> Overloaded<Ts...>;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << what << " must be finite and strictly positive, got " << v;
    throw ConfigError(os.str());
  }
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

} // namespace

void EnvironmentSpec::validate() const {
  if (dimension < 1 || dimension > kMaxDim) {
    throw ConfigError("environment dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  }
  std::visit(Overloaded{
                 [](const model::Identity&) {},
                 [](const model::ScaledIdentity& m) { require_positive(m.c, "scaled_identity.c"); },
                 [](const model::Laminate& m) {
                   require_positive(m.a_low, "laminate.a_low");
                   require_positive(m.a_high, "laminate.a_high");
                   if (!(m.volume_fraction > 0.0 && m.volume_fraction < 1.0)) {
                     throw ConfigError("laminate.volume_fraction must lie in (0, 1)");
                   }
                 },
                 [](const model::Checkerboard& m) {
                   require_positive(m.a_low, "checkerboard.a_low");
                   require_positive(m.a_high, "checkerboard.a_high");
                   if (m.tile_cells < 1) {
                     throw ConfigError("checkerboard.tile_cells must be >= 1");
                   }
                 },
                 [](const model::HeavyTail& m) {
                   require_positive(m.tail_index_lo, "heavy_tail.tail_index_lo");
                   require_positive(m.tail_index_hi, "heavy_tail.tail_index_hi");
                   if (m.correlation_cells < 1) {
                     throw ConfigError("heavy_tail.correlation_cells must be >= 1");
                   }
                 },
                 [this](const model::BesselTrap& m) {
                   require_positive(m.exponent, "bessel_trap.exponent");
                   if (dimension < 2) {
                     throw ConfigError("bessel_trap requires dimension >= 2");
                   }
                 },
             },
             model);
}

std::string EnvironmentSpec::model_name() const {
  return std::visit(Overloaded{
                        [](const model::Identity&) { return std::string("identity"); },
                        [](const model::ScaledIdentity&) { return std::string("scaled_identity"); },
                        [](const model::Laminate&) { return std::string("laminate_two_phase"); },
                        [](const model::Checkerboard&) { return std::string("checkerboard"); },
                        [](const model::HeavyTail&) { return std::string("heavy_tail"); },
                        [](const model::BesselTrap&) { return std::string("bessel_trap"); },
                    },
                    model);
}

// ---------------------------------------------------------------------------
// CoefficientField

int CoefficientField::packed_index(int d, int i, int j) noexcept {
  if (i > j) {
    std::swap(i, j);
  }
  return i * d - i * (i - 1) / 2 + (j - i);
}

CoefficientField::CoefficientField(Grid grid, double spacing, std::vector<double> entries,
                                   bool degenerate)
    : grid_(grid), spacing_(spacing), entries_(std::move(entries)), degenerate_(degenerate) {
  const int d = grid_.dim();
  const auto m = static_cast<std::size_t>(packed_size(d));
  if (entries_.size() != grid_.size() * m) {
    throw ShapeError("coefficient entries do not match grid size");
  }
  lambda_.resize(grid_.size());
  Lambda_.resize(grid_.size());
  Eigen::MatrixXd a(d, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  for (std::size_t c = 0; c < grid_.size(); ++c) {
    const double* e = entries_.data() + c * m;
    bool diagonal = true;
    for (int i = 0; i < d && diagonal; ++i) {
      for (int j = i + 1; j < d; ++j) {
        if (e[packed_index(d, i, j)] != 0.0) {
          diagonal = false;
          break;
        }
      }
    }
    if (diagonal) {
      double lo = e[0];
      double hi = e[0];
      for (int i = 1; i < d; ++i) {
        const double v = e[packed_index(d, i, i)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      lambda_[c] = lo;
      Lambda_[c] = hi;
      continue;
    }
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        a(i, j) = e[packed_index(d, i, j)];
      }
    }
    eig.compute(a, Eigen::EigenvaluesOnly);
    lambda_[c] = eig.eigenvalues().minCoeff();
    Lambda_[c] = eig.eigenvalues().maxCoeff();
  }
  finish();
}

CoefficientField::CoefficientField(Grid grid, double spacing, std::vector<double> entries,
                                   std::vector<double> lambda, std::vector<double> Lambda,
                                   bool degenerate)
    : grid_(grid), spacing_(spacing), entries_(std::move(entries)), lambda_(std::move(lambda)),
      Lambda_(std::move(Lambda)), degenerate_(degenerate) {
  const auto m = static_cast<std::size_t>(packed_size(grid_.dim()));
  if (entries_.size() != grid_.size() * m || lambda_.size() != grid_.size() ||
      Lambda_.size() != grid_.size()) {
    throw ShapeError("coefficient arrays do not match grid size");
  }
  finish();
}

void CoefficientField::finish() {
  if (!(spacing_ > 0.0) || !std::isfinite(spacing_)) {
    throw ConfigError("grid spacing must be finite and strictly positive");
  }
  std::uint64_t h = counter_hash(0x45484631ULL, {static_cast<std::uint64_t>(grid_.dim()),
                                                 static_cast<std::uint64_t>(grid_.n()),
                                                 std::bit_cast<std::uint64_t>(spacing_)});
  for (double v : entries_) {
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
  }
  hash_ = h;
}

double CoefficientField::volume() const { return std::pow(box_side(), dim()); }

double CoefficientField::entry(std::size_t cell, int i, int j) const noexcept {
  return matrix(cell)[static_cast<std::size_t>(packed_index(dim(), i, j))];
}

double CoefficientField::quadratic_form(std::size_t cell, std::span<const double> xi) const {
  const int d = dim();
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      s += entry(cell, i, j) * xi[i] * xi[j];
    }
  }
  return s;
}

bool CoefficientField::operator==(const CoefficientField& other) const {
  return grid_ == other.grid_ && spacing_ == other.spacing_ && entries_ == other.entries_ &&
         lambda_ == other.lambda_ && Lambda_ == other.Lambda_;
}

// ---------------------------------------------------------------------------
// Generation

CoefficientField generate_field(const EnvironmentSpec& spec, int cells_per_side, double spacing,
                                std::int64_t origin) {
  spec.validate();
  if (cells_per_side < 2) {
    throw ConfigError("cells_per_side must be >= 2");
  }
  require_positive(spacing, "spacing");
  const int d = spec.dimension;
  const Grid grid(d, cells_per_side);
  const int n = cells_per_side;
  const auto m = static_cast<std::size_t>(CoefficientField::packed_size(d));
  std::vector<double> entries(grid.size() * m, 0.0);
  std::array<std::int64_t, kMaxDim> c{};

  auto set_diagonal = [&](std::size_t cell, int axis, double v) {
    entries[cell * m + static_cast<std::size_t>(CoefficientField::packed_index(d, axis, axis))] = v;
  };
  auto set_isotropic = [&](std::size_t cell, double v) {
    for (int a = 0; a < d; ++a) {
      set_diagonal(cell, a, v);
    }
  };

  bool degenerate = false;
  std::visit(
      Overloaded{
          [&](const model::Identity&) {
            for (std::size_t i = 0; i < grid.size(); ++i) {
              set_isotropic(i, 1.0);
            }
          },
          [&](const model::ScaledIdentity& mdl) {
            for (std::size_t i = 0; i < grid.size(); ++i) {
              set_isotropic(i, mdl.c);
            }
          },
          [&](const model::Laminate& mdl) {
            const auto low_layers = std::llround(mdl.volume_fraction * n);
            if (low_layers <= 0 || low_layers >= n) {
              throw ConfigError("laminate volume_fraction leaves a phase empty at this resolution");
            }
            for (std::size_t i = 0; i < grid.size(); ++i) {
              set_isotropic(i, grid.coord(i, 0) < low_layers ? mdl.a_low : mdl.a_high);
            }
          },
          [&](const model::Checkerboard& mdl) {
            if (n % (2 * mdl.tile_cells) != 0) {
              throw ConfigError("checkerboard needs cells_per_side divisible by 2*tile_cells");
            }
            for (std::size_t i = 0; i < grid.size(); ++i) {
              std::int64_t parity = 0;
              for (int a = 0; a < d; ++a) {
                parity += floor_div(grid.coord(i, a) + origin, mdl.tile_cells);
              }
              set_isotropic(i, (parity % 2 == 0) ? mdl.a_low : mdl.a_high);
            }
          },
          [&](const model::HeavyTail& mdl) {
            if (n % mdl.correlation_cells != 0) {
              throw ConfigError("heavy_tail needs cells_per_side divisible by correlation_cells");
            }
            for (std::size_t i = 0; i < grid.size(); ++i) {
              grid.coords(i, std::span(c.data(), d));
              std::uint64_t block = 0x51ed270b27a4f1c3ULL;
              for (int a = 0; a < d; ++a) {
                block = counter_hash(block, {static_cast<std::uint64_t>(
                                               floor_div(c[a] + origin, mdl.correlation_cells))});
              }
              const double u = unit_open(counter_hash(spec.seed, {block, 0}));
              const double v = unit_open(counter_hash(spec.seed, {block, 1}));
              const double lo = std::pow(u, 1.0 / mdl.tail_index_lo);
              const double hi = std::max(lo, std::pow(v, -1.0 / mdl.tail_index_hi));
              if (d == 1) {
                set_diagonal(i, 0, lo);
                continue;
              }
              const int weak_axis = static_cast<int>(counter_hash(spec.seed, {block, 2}) %
                                                     static_cast<std::uint64_t>(d));
              for (int a = 0; a < d; ++a) {
                set_diagonal(i, a, a == weak_axis ? lo : hi);
              }
            }
          },
          [&](const model::BesselTrap& mdl) {
            degenerate = true;
            const std::vector<double> center = box_center(grid, spacing);
            for (std::size_t i = 0; i < grid.size(); ++i) {
              const double r = periodic_distance(grid, spacing, i, center);
              const double phi = r < 1.0 ? std::pow(std::max(r, spacing), -mdl.exponent) : 1.0;
              set_isotropic(i, 1.0 / phi);
            }
          },
      },
      spec.model);

  return CoefficientField(grid, spacing, std::move(entries), degenerate);
}

// ---------------------------------------------------------------------------
// Moments

namespace {

double mean_power(std::span<const double> values, double power, bool invert) {
  if (std::isinf(power)) {
    double mx = 0.0;
    for (double v : values) {
      mx = std::max(mx, invert ? 1.0 / v : v);
    }
    return mx;
  }
  double s = 0.0;
  for (double v : values) {
    s += std::pow(invert ? 1.0 / v : v, power);
  }
  return s / static_cast<double>(values.size());
}

double reciprocal(double x) { return std::isinf(x) ? 0.0 : 1.0 / x; }

} // namespace

MomentReport validate_moments(const CoefficientField& field, double p, double q) {
  if (!(p >= 1.0) || !(q >= 1.0)) {
    throw ConfigError("moment exponents p, q must be >= 1");
  }
  MomentReport r;
  r.p = p;
  r.q = q;
  r.emp_lambda_inv_q = mean_power(field.lambda(), q, true);
  r.emp_Lambda_p = mean_power(field.Lambda(), p, false);
  r.condition_value = reciprocal(p) + reciprocal(q);
  r.threshold = 2.0 / field.dim();
  r.admissible = r.condition_value < r.threshold && std::isfinite(r.emp_lambda_inv_q) &&
                 std::isfinite(r.emp_Lambda_p);
  return r;
}

MomentSweep moment_sweep(const EnvironmentSpec& spec, double p, double q, std::span<const int> sizes,
                         int seeds) {
  if (sizes.size() < 2) {
    throw ConfigError("moment sweep needs at least two sizes");
  }
  if (seeds < 1) {
    throw ConfigError("moment sweep needs at least one seed");
  }
  MomentSweep sweep;
  sweep.p = p;
  sweep.q = q;
  sweep.sizes.assign(sizes.begin(), sizes.end());
  bool finite = true;
  double condition = 0.0;
  double threshold = 0.0;
  for (int n : sizes) {
    std::vector<double> lam;
    std::vector<double> Lam;
    for (int s = 0; s < seeds; ++s) {
      EnvironmentSpec seeded = spec;
      seeded.seed = spec.seed + static_cast<std::uint64_t>(s);
      const MomentReport r = validate_moments(generate_field(seeded, n, 1.0 / n), p, q);
      lam.push_back(r.emp_lambda_inv_q);
      Lam.push_back(r.emp_Lambda_p);
      finite = finite && std::isfinite(r.emp_lambda_inv_q) && std::isfinite(r.emp_Lambda_p);
      condition = r.condition_value;
      threshold = r.threshold;
    }
    sweep.lambda_inv_q.push_back(median(lam));
    sweep.Lambda_p.push_back(median(Lam));
  }
  std::vector<double> logn;
  std::vector<double> logl;
  std::vector<double> logL;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    logn.push_back(std::log(static_cast<double>(sizes[i])));
    logl.push_back(std::log(sweep.lambda_inv_q[i]));
    logL.push_back(std::log(sweep.Lambda_p[i]));
  }
  sweep.lambda_growth_slope = finite ? least_squares_slope(logn, logl) : kInf;
  sweep.Lambda_growth_slope = finite ? least_squares_slope(logn, logL) : kInf;
  sweep.diverging = !finite || sweep.lambda_growth_slope > kDivergenceSlope ||
                    sweep.Lambda_growth_slope > kDivergenceSlope;
  sweep.admissible = condition < threshold && !sweep.diverging;
  return sweep;
}

// ---------------------------------------------------------------------------
// Doubling diagnostic

std::vector<DoublingRow> doubling_diagnostic(const CoefficientField& field, std::size_t center_cell,
                                             std::span<const double> radii) {
  const Grid& g = field.grid();
  const double h = field.spacing();
  if (center_cell >= g.size()) {
    throw RangeError("doubling_diagnostic: centre cell out of range");
  }
  std::vector<double> center(static_cast<std::size_t>(g.dim()));
  for (int a = 0; a < g.dim(); ++a) {
    center[a] = cell_center(g, center_cell, a, h);
  }
  double previous = 0.0;
  for (double r : radii) {
    if (!(r > previous)) {
      throw ConfigError("doubling_diagnostic: radii must be positive and increasing");
    }
    if (r > 0.5 * field.box_side()) {
      throw RangeError("doubling_diagnostic: radius exceeds half the box side");
    }
    previous = r;
  }
  std::vector<double> dist(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    dist[i] = periodic_distance(g, h, i, center);
  }
  std::vector<DoublingRow> rows;
  for (double r : radii) {
    double lam_r = 0.0;
    double lam_2r = 0.0;
    double inv_r = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (dist[i] < r) {
        lam_r += field.Lambda()[i];
        inv_r += 1.0 / field.lambda()[i];
        ++count;
      }
      if (dist[i] < 2.0 * r) {
        lam_2r += field.Lambda()[i];
      }
    }
    const double cnt = static_cast<double>(count);
    rows.push_back({r, lam_2r / lam_r, (lam_r / cnt) * (inv_r / cnt)});
  }
  return rows;
}

CoefficientField translate(const CoefficientField& field, std::span<const std::int64_t> offset) {
  const Grid& g = field.grid();
  if (static_cast<int>(offset.size()) != g.dim()) {
    throw ShapeError("translate: offset rank does not match field dimension");
  }
  const auto m = static_cast<std::size_t>(CoefficientField::packed_size(g.dim()));
  std::vector<double> entries(field.entries().size());
  std::vector<double> lam(g.size());
  std::vector<double> Lam(g.size());
  for (std::size_t x = 0; x < g.size(); ++x) {
    const std::size_t src = g.shift(x, offset);
    std::copy_n(field.entries().begin() + static_cast<std::ptrdiff_t>(src * m), m,
                entries.begin() + static_cast<std::ptrdiff_t>(x * m));
    lam[x] = field.lambda()[src];
    Lam[x] = field.Lambda()[src];
  }
  return CoefficientField(g, field.spacing(), std::move(entries), std::move(lam), std::move(Lam),
                          field.degenerate());
}

} // namespace ehom
