#include "ehom/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ehom/errors.hpp"

namespace ehom {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

void remove_mean(std::span<double> v) {
  if (v.empty()) {
    return;
  }
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) {
    x -= m;
  }
}

} // namespace

SolveStats conjugate_gradient(const LinearMap& apply, const LinearMap& precondition,
                              std::span<const double> b_in, std::span<double> x, const CgOptions& opts) {
  const std::size_t n = b_in.size();
  if (x.size() != n) {
    throw ShapeError("conjugate_gradient: solution and right-hand side sizes differ");
  }
  std::vector<double> b(b_in.begin(), b_in.end());
  if (opts.project_mean) {
    remove_mean(b);
  }
  SolveStats stats;
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    stats.converged = true;
    return stats;
  }

  std::vector<double> r(n);
  std::vector<double> z(n);
  std::vector<double> p(n);
  std::vector<double> q(n);
  apply(x, q);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = b[i] - q[i];
  }
  auto precond = [&](std::span<const double> in, std::span<double> out) {
    if (precondition) {
      precondition(in, out);
    } else {
      std::copy(in.begin(), in.end(), out.begin());
    }
    if (opts.project_mean) {
      remove_mean(out);
    }
  };
  precond(r, z);
  p = z;
  double rz = dot(r, z);
  double rel = std::sqrt(dot(r, r)) / bnorm;
  int it = 0;
  while (rel > opts.tol && it < opts.max_iter) {
    ++it;
    apply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) {
      break;
    }
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    rel = std::sqrt(dot(r, r)) / bnorm;
    stats.residual_history.push_back(rel);
    if (rel <= opts.tol) {
      break;
    }
    precond(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = z[i] + beta * p[i];
    }
  }
  if (opts.project_mean) {
    remove_mean(x);
  }
  apply(x, q);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = b[i] - q[i];
  }
  stats.iterations = it;
  stats.residual_norm = std::sqrt(dot(r, r));
  stats.relative_residual = stats.residual_norm / bnorm;
  stats.converged = rel <= opts.tol;
  if (!stats.converged) {
    std::ostringstream os;
    os << "conjugate gradients did not reach tol " << opts.tol << " within " << it
       << " iterations (relative residual " << rel << ")";
    throw NonConvergenceError(os.str(), it, rel);
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Aggregation multigrid

struct AggregationMultigrid::Impl {
  struct Level {
    Grid grid;
    std::vector<double> cond;
    std::vector<double> diag;
    std::vector<std::size_t> parent; // fine cell -> coarse cell of the next level
    mutable std::vector<double> x;
    mutable std::vector<double> b;
    mutable std::vector<double> r;
  };

  std::vector<Level> levels;
  int sweeps = 2;
  bool dense_coarse = false;
  int coarse_sweeps = 30;
  Eigen::LLT<Eigen::MatrixXd> coarse_llt;

  static std::vector<double> diagonal_of(const Grid& g, const std::vector<double>& cond) {
    std::vector<double> diag(g.size(), 0.0);
    const auto d = static_cast<std::size_t>(g.dim());
    for_each_edge(g, [&](std::size_t c, std::size_t up, int axis) {
      const double a = cond[c * d + static_cast<std::size_t>(axis)];
      diag[c] += a;
      diag[up] += a;
    });
    return diag;
  }

  void residual(const Level& lv) const {
    const auto d = static_cast<std::size_t>(lv.grid.dim());
    std::copy(lv.b.begin(), lv.b.end(), lv.r.begin());
    for_each_edge(lv.grid, [&](std::size_t c, std::size_t up, int axis) {
      const double flux = lv.cond[c * d + static_cast<std::size_t>(axis)] * (lv.x[c] - lv.x[up]);
      lv.r[c] -= flux;
      lv.r[up] += flux;
    });
  }

  /// One Gauss-Seidel sweep in lexicographic (forward) or reverse order,
  /// processed as lines along the fastest axis.
  static void gauss_seidel(const Level& lv, bool forward) {
    const Grid& g = lv.grid;
    const int dim = g.dim();
    const auto d = static_cast<std::size_t>(dim);
    const auto n = static_cast<std::size_t>(g.n());
    const std::size_t lines = g.size() / n;
    const int last = dim - 1;
    const double* cond = lv.cond.data();
    const double* b = lv.b.data();
    const double* diag = lv.diag.data();
    double* x = lv.x.data();
    std::array<std::size_t, kMaxDim> up{};
    std::array<std::size_t, kMaxDim> down{};
    for (std::size_t step = 0; step < lines; ++step) {
      const std::size_t line = forward ? step : lines - 1 - step;
      const std::size_t base = line * n;
      for (int a = 0; a < last; ++a) {
        const std::size_t s = g.stride(a);
        const auto c = static_cast<std::size_t>(g.coord(base, a));
        up[a] = c + 1 == n ? base - (n - 1) * s : base + s;
        down[a] = c == 0 ? base + (n - 1) * s : base - s;
      }
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = forward ? j : n - 1 - j;
        const std::size_t c = base + k;
        const std::size_t right = k + 1 == n ? base : c + 1;
        const std::size_t left = k == 0 ? base + n - 1 : c - 1;
        double sum = b[c] + cond[c * d + last] * x[right] + cond[left * d + last] * x[left];
        for (int a = 0; a < last; ++a) {
          const std::size_t dn = down[a] + k;
          sum += cond[c * d + a] * x[up[a] + k] + cond[dn * d + a] * x[dn];
        }
        x[c] = sum / diag[c];
      }
    }
  }

  void coarse_solve(const Level& lv) const {
    if (dense_coarse) {
      Eigen::Map<const Eigen::VectorXd> b(lv.b.data(), static_cast<Eigen::Index>(lv.b.size()));
      Eigen::Map<Eigen::VectorXd> x(lv.x.data(), static_cast<Eigen::Index>(lv.x.size()));
      x = coarse_llt.solve(b);
      return;
    }
    std::fill(lv.x.begin(), lv.x.end(), 0.0);
    for (int s = 0; s < coarse_sweeps; ++s) {
      gauss_seidel(lv, true);
    }
    for (int s = 0; s < coarse_sweeps; ++s) {
      gauss_seidel(lv, false);
    }
  }

  void vcycle(std::size_t l) const {
    const Level& lv = levels[l];
    if (l + 1 == levels.size()) {
      coarse_solve(lv);
      return;
    }
    std::fill(lv.x.begin(), lv.x.end(), 0.0);
    for (int s = 0; s < sweeps; ++s) {
      gauss_seidel(lv, true);
    }
    residual(lv);
    const Level& next = levels[l + 1];
    std::fill(next.b.begin(), next.b.end(), 0.0);
    for (std::size_t c = 0; c < lv.grid.size(); ++c) {
      next.b[lv.parent[c]] += lv.r[c];
    }
    vcycle(l + 1);
    for (std::size_t c = 0; c < lv.grid.size(); ++c) {
      lv.x[c] += next.x[lv.parent[c]];
    }
    for (int s = 0; s < sweeps; ++s) {
      gauss_seidel(lv, false);
    }
  }
};

AggregationMultigrid::AggregationMultigrid(const DirichletForm& form, int sweeps)
    : impl_(std::make_unique<Impl>()) {
  impl_->sweeps = sweeps;
  Impl::Level fine;
  fine.grid = form.grid();
  fine.cond.assign(form.conductances().begin(), form.conductances().end());
  impl_->levels.push_back(std::move(fine));

  constexpr std::size_t kMinCoarseCells = 16;
  for (;;) {
    Impl::Level& lv = impl_->levels.back();
    const Grid& g = lv.grid;
    if (g.n() % 2 != 0 || g.n() < 4 || g.size() <= kMinCoarseCells) {
      break;
    }
    Impl::Level coarse;
    coarse.grid = Grid(g.dim(), g.n() / 2);
    const auto d = static_cast<std::size_t>(g.dim());
    coarse.cond.assign(coarse.grid.size() * d, 0.0);
    lv.parent.resize(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) {
      std::size_t parent = 0;
      for (int a = 0; a < g.dim(); ++a) {
        parent += static_cast<std::size_t>(g.coord(c, a) / 2) * coarse.grid.stride(a);
      }
      lv.parent[c] = parent;
      for (int a = 0; a < g.dim(); ++a) {
        if (g.coord(c, a) % 2 == 1) {
          coarse.cond[parent * d + static_cast<std::size_t>(a)] += lv.cond[c * d + static_cast<std::size_t>(a)];
        }
      }
    }
    impl_->levels.push_back(std::move(coarse));
  }
  for (auto& lv : impl_->levels) {
    lv.diag = Impl::diagonal_of(lv.grid, lv.cond);
    lv.x.assign(lv.grid.size(), 0.0);
    lv.b.assign(lv.grid.size(), 0.0);
    lv.r.assign(lv.grid.size(), 0.0);
  }

  const Impl::Level& last = impl_->levels.back();
  constexpr std::size_t kMaxDenseCells = 4096;
  if (last.grid.size() <= kMaxDenseCells) {
    const auto m = static_cast<Eigen::Index>(last.grid.size());
    const auto d = static_cast<std::size_t>(last.grid.dim());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
    for_each_edge(last.grid, [&](std::size_t c, std::size_t up, int axis) {
      const double w = last.cond[c * d + static_cast<std::size_t>(axis)];
      const auto i = static_cast<Eigen::Index>(c);
      const auto j = static_cast<Eigen::Index>(up);
      a(i, i) += w;
      a(j, j) += w;
      a(i, j) -= w;
      a(j, i) -= w;
    });
    // Shift the constant mode so the singular Laplacian becomes SPD; for
    // mean-zero right-hand sides the solution is unchanged.
    const double shift = a.diagonal().mean() / static_cast<double>(m);
    a.array() += shift;
    impl_->coarse_llt.compute(a);
    impl_->dense_coarse = impl_->coarse_llt.info() == Eigen::Success;
  }
}

AggregationMultigrid::~AggregationMultigrid() = default;
AggregationMultigrid::AggregationMultigrid(AggregationMultigrid&&) noexcept = default;
AggregationMultigrid& AggregationMultigrid::operator=(AggregationMultigrid&&) noexcept = default;

void AggregationMultigrid::apply(std::span<const double> r, std::span<double> z) const {
  const auto& top = impl_->levels.front();
  std::copy(r.begin(), r.end(), top.b.begin());
  impl_->vcycle(0);
  std::copy(top.x.begin(), top.x.end(), z.begin());
}

int AggregationMultigrid::levels() const { return static_cast<int>(impl_->levels.size()); }

// ---------------------------------------------------------------------------

PeriodicSolver::PeriodicSolver(const DirichletForm& form, SolverOptions options)
    : form_(&form), options_(options) {
  if (form.degenerate()) {
    throw SingularityError("refusing to solve on a degenerate (trap) medium");
  }
  if (!(form.min_conductance() > 0.0)) {
    throw SingularityError("zero-conductance edge: the cell problem is singular");
  }
  if (!(options.tol > 0.0)) {
    throw ConfigError("solver tolerance must be > 0");
  }
  switch (options_.preconditioner) {
  case Preconditioner::none:
    break;
  case Preconditioner::jacobi: {
    inv_diag_ = form.diagonal();
    for (double& v : inv_diag_) {
      v = 1.0 / v;
    }
    break;
  }
  case Preconditioner::multigrid:
    multigrid_ = std::make_shared<AggregationMultigrid>(form);
    break;
  }
}

SolveStats PeriodicSolver::solve(std::span<const double> b, std::span<double> x) const {
  const DirichletForm& form = *form_;
  LinearMap apply = [&form](std::span<const double> in, std::span<double> out) {
    form.apply_laplacian(in, out);
  };
  LinearMap precond;
  if (options_.preconditioner == Preconditioner::jacobi) {
    precond = [this](std::span<const double> in, std::span<double> out) {
      for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = inv_diag_[i] * in[i];
      }
    };
  } else if (options_.preconditioner == Preconditioner::multigrid) {
    precond = [this](std::span<const double> in, std::span<double> out) { multigrid_->apply(in, out); };
  }
  CgOptions opts;
  opts.tol = options_.tol;
  opts.max_iter = options_.max_iter;
  opts.project_mean = true;
  return conjugate_gradient(apply, precond, b, x, opts);
}

} // namespace ehom
