#include "ehom/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>

#include "ehom/errors.hpp"
#include "ehom/rng.hpp"
#include "ehom/statistics.hpp"

namespace ehom {

void WalkConfig::validate() const {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) {
    throw ConfigError("walk horizon t_max must be finite and > 0");
  }
  if (paths < 1) {
    throw ConfigError("walk needs at least one path");
  }
  if (threads < 1) {
    throw ConfigError("walk threads must be >= 1");
  }
  if (!std::isfinite(record_stride)) {
    throw ConfigError("record_stride must be finite");
  }
}

std::vector<double> WalkConfig::sample_times() const {
  std::vector<double> t;
  if (record_stride > 0.0) {
    for (int k = 1;; ++k) {
      const double s = k * record_stride;
      if (s >= t_max * (1.0 - 1e-12)) {
        break;
      }
      t.push_back(s);
    }
  }
  t.push_back(t_max);
  return t;
}

std::vector<double> WalkResult::displacement(std::size_t path, std::size_t sample) const {
  const auto d = static_cast<std::size_t>(dim());
  const PathSample& p = paths[path];
  std::vector<double> x(d);
  for (std::size_t a = 0; a < d; ++a) {
    x[a] = spacing * static_cast<double>(p.positions[sample * d + a] - p.start[a]);
  }
  return x;
}

std::size_t WalkResult::functional_index(const std::string& name) const {
  const auto it = std::find(functional_names.begin(), functional_names.end(), name);
  if (it == functional_names.end()) {
    throw ConsistencyError("walk did not record functional '" + name + "'");
  }
  return static_cast<std::size_t>(it - functional_names.begin());
}

namespace {

constexpr std::size_t kMaxTraceRecords = std::size_t{1} << 26;

struct Kernel {
  const Grid* grid = nullptr;
  int dim = 0;
  std::vector<double> rates; ///< [cell][2 axis + (0: up, 1: down)]
  std::vector<double> total;
  const WalkConfig* config = nullptr;
  const RecordSpec* record = nullptr;
  std::vector<double> sample_times;

  PathSample run(std::uint64_t id) const {
    const Grid& g = *grid;
    const int n = g.n();
    const auto d = static_cast<std::size_t>(dim);
    Engine engine = make_stream(config->seed, id);

    PathSample out;
    out.path_id = id;
    out.start.assign(d, 0);
    if (config->random_start) {
      std::uniform_int_distribution<int> cell(0, n - 1);
      for (auto& v : out.start) {
        v = cell(engine);
      }
    } else if (!config->start.empty()) {
      out.start = config->start;
    }
    std::vector<std::int64_t> pos = out.start;
    std::array<int, kMaxDim> w{};
    std::size_t c = g.index(pos);
    for (std::size_t a = 0; a < d; ++a) {
      w[a] = g.coord(c, static_cast<int>(a));
    }

    const auto& funcs = record->functionals;
    const std::size_t nf = funcs.size();
    std::vector<double> integral(nf, 0.0);
    out.integrals.assign(nf, {});
    for (auto& v : out.integrals) {
      v.reserve(sample_times.size());
    }
    out.positions.reserve(sample_times.size() * d);
    const bool clock = !record->theta.empty();
    const std::size_t nc = clock ? record->clock_times.size() : 0;
    if (record->occupation) {
      out.occupation.assign(g.size(), 0.0);
    }
    if (id < static_cast<std::uint64_t>(std::max(record->trace_paths, 0))) {
      out.trace = WalkTrace{dim, id, {0.0}, pos};
    }

    const double t_max = config->t_max;
    double s = 0.0;
    double A = 0.0;
    std::size_t j = 0;
    std::size_t m = 0;
    const std::size_t ns = sample_times.size();
    for (;;) {
      const double rate = total[c];
      const double hold = -std::log(uniform_open(engine)) / rate;
      const double end = s + hold;
      while (j < ns && sample_times[j] < end) {
        out.positions.insert(out.positions.end(), pos.begin(), pos.end());
        for (std::size_t f = 0; f < nf; ++f) {
          out.integrals[f].push_back(integral[f] + funcs[f].values[c] * (sample_times[j] - s));
        }
        ++j;
      }
      if (clock) {
        const double th = record->theta[c];
        const double A_end = A + th * hold;
        while (m < nc && record->clock_times[m] < A_end) {
          out.clock_positions.insert(out.clock_positions.end(), pos.begin(), pos.end());
          out.clock_natural_times.push_back(s + (record->clock_times[m] - A) / th);
          ++m;
        }
        A = A_end;
      }
      if (record->occupation && s < t_max) {
        out.occupation[c] += std::min(end, t_max) - s;
      }
      if (j == ns && m == nc) {
        break;
      }
      for (std::size_t f = 0; f < nf; ++f) {
        integral[f] += funcs[f].values[c] * hold;
      }
      s = end;

      // Pick the edge proportionally to its rate.
      double u = uniform_open(engine) * rate;
      const double* r = &rates[c * 2 * d];
      std::size_t k = 0;
      const std::size_t last = 2 * d - 1;
      while (k < last && u >= r[k]) {
        u -= r[k];
        ++k;
      }
      // Round-off can leave u past the last rate; skip zero-rate edges.
      while (r[k] == 0.0) {
        --k;
      }
      const std::size_t a = k / 2;
      const std::size_t stride = g.stride(static_cast<int>(a));
      if (k % 2 == 0) {
        ++pos[a];
        if (w[a] == n - 1) {
          w[a] = 0;
          c -= static_cast<std::size_t>(n - 1) * stride;
        } else {
          ++w[a];
          c += stride;
        }
      } else {
        --pos[a];
        if (w[a] == 0) {
          w[a] = n - 1;
          c += static_cast<std::size_t>(n - 1) * stride;
        } else {
          --w[a];
          c -= stride;
        }
      }
      ++out.jumps;
      if (out.trace) {
        if (out.trace->times.size() >= kMaxTraceRecords) {
          throw RangeError("walk trace exceeds the record limit; lower trace_paths");
        }
        out.trace->times.push_back(s);
        out.trace->cells.insert(out.trace->cells.end(), pos.begin(), pos.end());
      }
    }
    return out;
  }
};

} // namespace

WalkResult simulate_walk(const DirichletForm& form, const WalkConfig& config, const RecordSpec& record) {
  config.validate();
  if (form.degenerate() || !(form.min_conductance() > 0.0)) {
    throw SingularityError("walk refused: the medium has zero-rate (trap) cells");
  }
  const Grid& g = form.grid();
  const int dim = g.dim();
  const auto d = static_cast<std::size_t>(dim);
  if (!config.start.empty() && config.start.size() != d) {
    throw ShapeError("walk start cell rank does not match the grid");
  }
  for (const auto& f : record.functionals) {
    if (f.values.size() != g.size()) {
      throw ShapeError("functional '" + f.name + "' does not match the grid");
    }
  }
  double theta_min = 1.0;
  if (!record.theta.empty()) {
    if (record.theta.size() != g.size()) {
      throw ShapeError("time-change weight does not match the grid");
    }
    theta_min = *std::min_element(record.theta.begin(), record.theta.end());
    if (!(theta_min > 0.0) || !std::all_of(record.theta.begin(), record.theta.end(),
                                            [](double v) { return std::isfinite(v); })) {
      throw ConfigError("time-change weight must be finite and > 0 on every cell");
    }
    if (record.clock_times.empty() || !std::is_sorted(record.clock_times.begin(), record.clock_times.end()) ||
        !(record.clock_times.front() > 0.0)) {
      throw ConfigError("clock times must be positive and sorted");
    }
  }

  Kernel kernel;
  kernel.grid = &g;
  kernel.dim = dim;
  kernel.config = &config;
  kernel.record = &record;
  kernel.sample_times = config.sample_times();
  const double h2 = form.spacing() * form.spacing();
  kernel.rates.assign(g.size() * 2 * d, 0.0);
  kernel.total.assign(g.size(), 0.0);
  double max_total = 0.0;
  for (std::size_t c = 0; c < g.size(); ++c) {
    double t = 0.0;
    for (int a = 0; a < dim; ++a) {
      const double up = form.conductance(c, a) / h2;
      const double down = form.conductance(g.neighbor(c, a, -1), a) / h2;
      kernel.rates[c * 2 * d + 2 * static_cast<std::size_t>(a)] = up;
      kernel.rates[c * 2 * d + 2 * static_cast<std::size_t>(a) + 1] = down;
      t += up + down;
    }
    kernel.total[c] = t;
    max_total = std::max(max_total, t);
  }
  const double horizon =
      std::max(config.t_max, record.theta.empty() ? 0.0 : record.clock_times.back() / theta_min);
  if (!(max_total * horizon < 0x1.0p53)) {
    throw RangeError("walk horizon too long: expected jump count overflows the unwrapped coordinates");
  }

  WalkResult result;
  result.grid = g;
  result.spacing = form.spacing();
  result.field_hash = form.field_hash();
  result.sample_times = kernel.sample_times;
  if (!record.theta.empty()) {
    result.clock_times = record.clock_times;
  }
  for (const auto& f : record.functionals) {
    result.functional_names.push_back(f.name);
  }
  result.paths.resize(static_cast<std::size_t>(config.paths));

  const int workers = std::min(config.threads, config.paths);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  auto work = [&](int wid) {
    try {
      for (int p = wid; p < config.paths; p += workers) {
        result.paths[static_cast<std::size_t>(p)] = kernel.run(static_cast<std::uint64_t>(p));
      }
    } catch (...) {
      errors[static_cast<std::size_t>(wid)] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int wid = 0; wid < workers; ++wid) {
      pool.emplace_back(work, wid);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

std::vector<Functional> quadratic_variation_densities(const DirichletForm& form,
                                                      const CorrectorField& correctors) {
  if (form.field_hash() != correctors.field_hash) {
    throw ConsistencyError("correctors were solved on a different field");
  }
  const Grid& g = form.grid();
  const int dim = form.dim();
  const double h = form.spacing();
  std::vector<Functional> out;
  for (int hh = 0; hh < dim; ++hh) {
    for (int k = hh; k < dim; ++k) {
      Functional f;
      f.name = "qv:" + std::to_string(hh + 1) + "," + std::to_string(k + 1);
      f.values.assign(g.size(), 0.0);
      const auto& ch = correctors.chi[static_cast<std::size_t>(hh)];
      const auto& ck = correctors.chi[static_cast<std::size_t>(k)];
      for_each_edge(g, [&](std::size_t c, std::size_t up, int axis) {
        const double dyh = (axis == hh ? h : 0.0) - (ch[up] - ch[c]);
        const double dyk = (axis == k ? h : 0.0) - (ck[up] - ck[c]);
        const double v = form.conductance(c, axis) / (h * h) * dyh * dyk;
        f.values[c] += v;
        f.values[up] += v;
      });
      out.push_back(std::move(f));
    }
  }
  return out;
}

namespace {

std::size_t sample_index(const std::vector<double>& times, double t) {
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (std::abs(times[j] - t) <= 1e-12 * std::max(1.0, t)) {
      return j;
    }
  }
  std::ostringstream os;
  os << "time " << t << " was not recorded by the walk";
  throw RangeError(os.str());
}

Eigen::MatrixXd covariance(const std::vector<std::vector<double>>& samples, int d) {
  const auto n = static_cast<double>(samples.size());
  Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
  for (const auto& x : samples) {
    for (int a = 0; a < d; ++a) {
      m(a) += x[static_cast<std::size_t>(a)];
    }
  }
  m /= n;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  for (const auto& x : samples) {
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        c(a, b) += (x[static_cast<std::size_t>(a)] - m(a)) * (x[static_cast<std::size_t>(b)] - m(b));
      }
    }
  }
  return c / (n - 1.0);
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

} // namespace

MartingaleReport martingale_decomposition(const WalkResult& walk, const CorrectorField& correctors) {
  if (walk.field_hash != correctors.field_hash || !(walk.grid == correctors.grid)) {
    throw ConsistencyError("walk and correctors come from different fields");
  }
  const int dim = walk.dim();
  const auto d = static_cast<std::size_t>(dim);
  const double h = walk.spacing;
  const std::size_t ns = walk.sample_times.size();
  const std::size_t last = ns - 1;
  const double t = walk.sample_times[last];
  const std::size_t half = ns >= 2 ? (ns - 1) / 2 : 0;

  std::vector<std::vector<std::size_t>> qv_index(d, std::vector<std::size_t>(d));
  for (int a = 0; a < dim; ++a) {
    for (int b = a; b < dim; ++b) {
      const std::size_t idx = walk.functional_index("qv:" + std::to_string(a + 1) + "," + std::to_string(b + 1));
      qv_index[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = idx;
      qv_index[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = idx;
    }
  }

  MartingaleReport rep;
  rep.time = t;
  rep.qv_over_t = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<std::vector<double>> m_end;
  std::vector<std::vector<double>> first(d);
  std::vector<std::vector<double>> second(d);
  std::vector<std::int64_t> cell(d);
  auto y_at = [&](std::span<const std::int64_t> p, std::size_t k, double& err) {
    const double x = h * static_cast<double>(p[k]);
    const double chi = correctors.chi[k][walk.grid.index(p)];
    const double y = x - chi;
    err = std::max(err, std::abs(x - y - chi));
    return y;
  };
  for (const PathSample& path : walk.paths) {
    std::vector<double> y0(d);
    for (std::size_t k = 0; k < d; ++k) {
      y0[k] = y_at(path.start, k, rep.decomposition_error);
    }
    std::vector<double> y_half(d);
    std::vector<double> m(d);
    for (std::size_t j = 0; j < ns; ++j) {
      const std::span<const std::int64_t> p(&path.positions[j * d], d);
      for (std::size_t k = 0; k < d; ++k) {
        const double y = y_at(p, k, rep.decomposition_error);
        if (j == half) {
          y_half[k] = y;
        }
        if (j == last) {
          m[k] = y - y0[k];
        }
      }
    }
    for (std::size_t k = 0; k < d; ++k) {
      first[k].push_back(y_half[k] - y0[k]);
      second[k].push_back(m[k] - (y_half[k] - y0[k]));
      const auto& qv = path.integrals[qv_index[k][k]];
      for (std::size_t j = 1; j < ns; ++j) {
        if (qv[j] < qv[j - 1]) {
          rep.qv_monotone = false;
        }
      }
    }
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        rep.qv_over_t(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
            path.integrals[qv_index[a][b]][last] / t;
      }
    }
    for (double& v : m) {
      v /= std::sqrt(t);
    }
    m_end.push_back(std::move(m));
  }
  const auto np = static_cast<double>(walk.paths.size());
  rep.qv_over_t /= np;
  rep.martingale_cov = walk.paths.size() >= 2 ? covariance(m_end, dim) : Eigen::MatrixXd::Zero(dim, dim);
  if (ns >= 2 && walk.paths.size() >= 2) {
    for (std::size_t k = 0; k < d; ++k) {
      rep.increment_correlation = std::max(rep.increment_correlation, std::abs(correlation(first[k], second[k])));
    }
  }
  return rep;
}

CltReport clt_statistics(const WalkResult& walk, const Eigen::MatrixXd& D, std::span<const double> eval_times,
                         std::span<const std::vector<double>> directions, double ks_threshold) {
  if (static_cast<int>(walk.paths.size()) < kMinCltPaths) {
    std::ostringstream os;
    os << "CLT statistics need at least " << kMinCltPaths << " paths, got " << walk.paths.size();
    throw StatisticsError(os.str());
  }
  const int dim = walk.dim();
  if (D.rows() != dim || D.cols() != dim) {
    throw ShapeError("target D does not match the walk dimension");
  }
  CltReport rep;
  rep.target = D;
  rep.ks_threshold = ks_threshold;
  {
    std::ostringstream os;
    os << "per-direction KS threshold p > " << ks_threshold << "; with " << directions.size()
       << " directions the family-wise (Bonferroni) level is at most " << ks_threshold * directions.size();
    rep.note = os.str();
  }
  for (double t : eval_times) {
    const std::size_t j = sample_index(walk.sample_times, t);
    std::vector<std::vector<double>> x;
    x.reserve(walk.paths.size());
    for (std::size_t p = 0; p < walk.paths.size(); ++p) {
      x.push_back(walk.displacement(p, j));
    }
    CltRow row;
    row.time = walk.sample_times[j];
    row.covariance_over_t = covariance(x, dim) / row.time;
    row.relative_error = (row.covariance_over_t - D).cwiseAbs().maxCoeff() / D.cwiseAbs().maxCoeff();
    for (const auto& xi : directions) {
      if (static_cast<int>(xi.size()) != dim) {
        throw ShapeError("KS direction rank does not match the walk dimension");
      }
      double var = 0.0;
      for (int a = 0; a < dim; ++a) {
        for (int b = 0; b < dim; ++b) {
          var += xi[static_cast<std::size_t>(a)] * D(a, b) * xi[static_cast<std::size_t>(b)];
        }
      }
      const double scale = std::sqrt(row.time * var);
      std::vector<double> z;
      z.reserve(x.size());
      for (const auto& v : x) {
        double s = 0.0;
        for (int a = 0; a < dim; ++a) {
          s += xi[static_cast<std::size_t>(a)] * v[static_cast<std::size_t>(a)];
        }
        z.push_back(s / scale);
      }
      const KsResult ks = ks_test_standard_normal(std::move(z));
      row.ks.push_back(KsRow{xi, ks.statistic, ks.p_value, ks.p_value > ks_threshold});
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

std::string CltReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17) << "time,entry,covariance_over_t,target\n";
  for (const auto& r : rows) {
    for (Eigen::Index i = 0; i < target.rows(); ++i) {
      for (Eigen::Index j = 0; j < target.cols(); ++j) {
        os << r.time << ",d" << i + 1 << j + 1 << ',' << r.covariance_over_t(i, j) << ',' << target(i, j) << '\n';
      }
    }
  }
  return os.str();
}

WalkTrace time_change(const WalkTrace& trace, const Grid& grid, std::span<const double> theta) {
  if (theta.size() != grid.size()) {
    throw ShapeError("time-change weight does not match the grid");
  }
  const auto d = static_cast<std::size_t>(trace.dim);
  WalkTrace out = trace;
  double A = 0.0;
  for (std::size_t i = 1; i < trace.times.size(); ++i) {
    const std::span<const std::int64_t> cell(&trace.cells[(i - 1) * d], d);
    const double th = theta[grid.index(cell)];
    if (!(th > 0.0)) {
      throw ConfigError("time-change weight must be > 0");
    }
    A += th * (trace.times[i] - trace.times[i - 1]);
    if (!std::isfinite(A)) {
      throw RangeError("time-change clock overflow");
    }
    out.times[i] = A;
  }
  return out;
}

TimeChangeReport time_change_statistics(const WalkResult& walk, std::span<const double> theta) {
  if (walk.clock_times.empty()) {
    throw ConsistencyError("walk did not record a time-change clock");
  }
  const int dim = walk.dim();
  const auto d = static_cast<std::size_t>(dim);
  const std::size_t last = walk.clock_times.size() - 1;
  TimeChangeReport rep;
  rep.time = walk.clock_times[last];
  rep.theta_mean = mean(theta);
  rep.conservativeness_target = 1.0 / rep.theta_mean;
  std::vector<std::vector<double>> x;
  double tau = 0.0;
  for (const PathSample& p : walk.paths) {
    std::vector<double> v(d);
    for (std::size_t a = 0; a < d; ++a) {
      v[a] = walk.spacing * static_cast<double>(p.clock_positions[last * d + a] - p.start[a]);
    }
    x.push_back(std::move(v));
    tau += p.clock_natural_times[last];
  }
  rep.covariance_over_t = Eigen::MatrixXd::Zero(dim, dim);
  if (walk.paths.size() >= 2) {
    rep.covariance_over_t = covariance(x, dim) / rep.time;
  }
  rep.conservativeness = tau / static_cast<double>(walk.paths.size()) / rep.time;
  return rep;
}

EnvironmentAverage environment_average(const WalkResult& walk, const std::string& functional,
                                       double mixing_time, double mixing_factor) {
  const std::size_t f = walk.functional_index(functional);
  const std::size_t last = walk.sample_times.size() - 1;
  EnvironmentAverage out;
  out.time = walk.sample_times[last];
  std::vector<double> v;
  v.reserve(walk.paths.size());
  for (const PathSample& p : walk.paths) {
    v.push_back(p.integrals[f][last] / out.time);
  }
  out.mean = mean(v);
  out.standard_error = v.size() >= 2 ? std::sqrt(sample_variance(v) / static_cast<double>(v.size())) : 0.0;
  out.horizon_ok = out.time >= mixing_factor * mixing_time;
  return out;
}

double mixing_time(const Eigen::MatrixXd& D, double box_side) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(D, Eigen::EigenvaluesOnly);
  return box_side * box_side / (2.0 * std::numbers::pi * std::numbers::pi * eig.eigenvalues().minCoeff());
}

} // namespace ehom
