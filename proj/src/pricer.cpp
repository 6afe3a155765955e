#include "glsm/pricer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/QR>

#include "glsm/basis.hpp"
#include "glsm/errors.hpp"

namespace glsm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Range {
  Index begin;
  Index end;
};

// Contiguous row ranges; the count depends only on M and N_b, never on the thread count,
// so per-chunk partial sums merged in order are reproducible.
std::vector<Range> make_chunks(Index rows, Index cols) {
  constexpr double kGramBudget = 512.0 * 1024.0 * 1024.0;
  const double per_chunk = 8.0 * static_cast<double>(cols) * static_cast<double>(cols);
  int count = static_cast<int>(std::clamp(kGramBudget / per_chunk, 1.0, 8.0));
  count = static_cast<int>(std::min<Index>(count, std::max<Index>(rows / 256, 1)));
  std::vector<Range> out;
  for (int c = 0; c < count; ++c) {
    out.push_back({rows * c / count, rows * (c + 1) / count});
  }
  return out;
}

// Per-stage thread time, used to split measured wall time between stages.
struct StageClock {
  double basis = 0.0;
  double matrix = 0.0;
  double linear = 0.0;
  double update = 0.0;
  double sum() const { return basis + matrix + linear + update; }
};

void attribute(Timings& t, const std::vector<StageClock>& clocks, double wall) {
  StageClock total;
  for (const auto& c : clocks) {
    total.basis += c.basis;
    total.matrix += c.matrix;
    total.linear += c.linear;
    total.update += c.update;
  }
  const double s = total.sum();
  if (!(s > 0.0)) return;
  t.basis += wall * total.basis / s;
  t.matrix += wall * total.matrix / s;
  t.linear += wall * total.linear / s;
  t.update += wall * total.update / s;
}

class BackwardSweep {
 public:
  BackwardSweep(const BlackScholesMarket& market, const Payoff& payoff, const BrownianPaths& paths,
                const PricerOptions& options)
      : market_(market),
        payoff_(payoff),
        paths_(paths),
        options_(options),
        set_(build_index_set(market.dimension(), options.order, options.rule)),
        chunks_(make_chunks(paths.paths(), set_.size())) {
    if (paths.dimension() != market.dimension()) {
      throw std::invalid_argument("price_on_paths: path dimension does not match the market");
    }
    if (paths.paths() < set_.size()) {
      std::ostringstream msg;
      msg << "price_on_paths: M = " << paths.paths() << " is smaller than N_b = " << set_.size();
      throw std::invalid_argument(msg.str());
    }
    if (options.block_rows < 1) throw std::invalid_argument("price_on_paths: block_rows must be >= 1");
  }

  PricingResult run() {
    const auto start = Clock::now();
    const Index m = paths_.paths();
    const int n = paths_.steps();
    const double horizon = paths_.horizon();
    PricingResult res;
    res.basis_size = set_.size();
    res.nonzeros = set_.nonzero_count();

    // Terminal values.
    {
      const auto t0 = Clock::now();
      const Eigen::MatrixXd s = prices_from_brownian(paths_.at(n), horizon, market_);
      u_ = std::exp(-market_.rate() * horizon) * payoff_.values(s);
      stopped_ = u_;
      res.stopping_times = Eigen::VectorXd::Constant(m, horizon);
      res.european = u_.mean();
      res.timings.update += seconds_since(t0);
    }

    for (int k = n - 1; k >= 1; --k) {
      const double t = paths_.time(k);
      StepDiagnostics diag;
      diag.step = k;
      const Eigen::VectorXd beta = regress(k, t, res.timings, diag);
      update(k, t, beta, res);
      res.diagnostics.push_back(diag);
      res.steps.push_back({k, t, beta});
    }

    const double mean = stopped_.mean();
    const double var = m > 1 ? (stopped_.array() - mean).square().sum() / static_cast<double>(m - 1) : 0.0;
    res.standard_error = std::sqrt(var / static_cast<double>(m));
    const double g0 = payoff_.value(market_.spot());
    res.price = std::max(mean, g0);

    if (options_.compute_delta) {
      const auto t0 = Clock::now();
      if (g0 > mean) {
        res.delta = payoff_.gradient(market_.spot());
      } else {
        res.delta = delta_at_zero(paths_.at(1), u_, set_, market_, paths_.dt());
      }
      res.timings.linear += seconds_since(t0);
    }
    res.timings.total = seconds_since(start);
    return res;
  }

 private:
  bool gradient() const { return options_.method == Method::kGlsm; }

  // Builds rows [r0, r0 + len) of the regression matrix for step k into `a`.
  void build_block(int k, double t, Index r0, Index len, Eigen::MatrixXd& a, StageClock& clock) const {
    auto t0 = Clock::now();
    BasisMatrix<double> phi = eval_basis_matrix(paths_.at(k).middleRows(r0, len), t, set_);
    clock.basis += seconds_since(t0);
    t0 = Clock::now();
    if (gradient()) {
      const Eigen::MatrixXd dw = paths_.at(k + 1).middleRows(r0, len) - paths_.at(k).middleRows(r0, len);
      assemble_regression_matrix_into(phi, dw, set_, a);
    } else {
      a = std::move(phi.values);
    }
    clock.matrix += seconds_since(t0);
  }

  template <typename Body>
  void for_blocks(const Range& range, Body&& body) const {
    for (Index r0 = range.begin; r0 < range.end; r0 += options_.block_rows) {
      body(r0, std::min(options_.block_rows, range.end - r0));
    }
  }

  Eigen::VectorXd regress(int k, double t, Timings& timings, StepDiagnostics& diag) {
    const Index nb = set_.size();
    const auto chunk_count = static_cast<int>(chunks_.size());
    std::vector<StageClock> clocks(static_cast<std::size_t>(chunk_count));
    LeastSquaresSolution sol;

    if (nb <= options_.solver.gram_limit) {
      const auto wall = Clock::now();
      std::vector<NormalEquations> partial(static_cast<std::size_t>(chunk_count), NormalEquations(nb));
#pragma omp parallel for schedule(static, 1)
      for (int c = 0; c < chunk_count; ++c) {
        Eigen::MatrixXd a;
        auto& clock = clocks[static_cast<std::size_t>(c)];
        for_blocks(chunks_[static_cast<std::size_t>(c)], [&](Index r0, Index len) {
          build_block(k, t, r0, len, a, clock);
          const auto t0 = Clock::now();
          partial[static_cast<std::size_t>(c)].add(a, u_.segment(r0, len));
          clock.linear += seconds_since(t0);
        });
      }
      for (int c = 1; c < chunk_count; ++c) partial[0].merge(partial[static_cast<std::size_t>(c)]);
      attribute(timings, clocks, seconds_since(wall));

      const auto t0 = Clock::now();
      sol = solve_normal_equations(partial[0], options_.solver);
      if (options_.estimate_condition) {
        const Eigen::MatrixXd g = partial[0].gram() / static_cast<double>(paths_.paths());
        const ConditionEstimate est = condition_from_gram(g, options_.order, set_.dimension(), k);
        diag.condition = est.empirical;
        diag.theoretical_condition = est.theoretical;
      }
      timings.linear += seconds_since(t0);
    } else {
      sol = regress_matrix_free(k, t, timings);
    }
    diag.solve = sol.diagnostics;
    if (!sol.diagnostics.converged || !sol.beta.allFinite()) {
      std::ostringstream msg;
      msg << "regression failed at step " << k << " (residual " << sol.diagnostics.residual << ")";
      throw NumericalError(msg.str());
    }
    return sol.beta;
  }

  LeastSquaresSolution regress_matrix_free(int k, double t, Timings& timings) {
    const Index nb = set_.size();
    const auto chunk_count = static_cast<int>(chunks_.size());
    std::vector<StageClock> clocks(static_cast<std::size_t>(chunk_count));
    std::vector<Eigen::VectorXd> part_a(static_cast<std::size_t>(chunk_count), Eigen::VectorXd::Zero(nb));
    std::vector<Eigen::VectorXd> part_b(static_cast<std::size_t>(chunk_count), Eigen::VectorXd::Zero(nb));

    auto wall = Clock::now();
#pragma omp parallel for schedule(static, 1)
    for (int c = 0; c < chunk_count; ++c) {
      Eigen::MatrixXd a;
      auto& clock = clocks[static_cast<std::size_t>(c)];
      for_blocks(chunks_[static_cast<std::size_t>(c)], [&](Index r0, Index len) {
        build_block(k, t, r0, len, a, clock);
        const auto t0 = Clock::now();
        part_a[static_cast<std::size_t>(c)] += a.colwise().squaredNorm().transpose();
        part_b[static_cast<std::size_t>(c)].noalias() += a.transpose() * u_.segment(r0, len);
        clock.linear += seconds_since(t0);
      });
    }
    Eigen::VectorXd diag = part_a[0];
    Eigen::VectorXd rhs = part_b[0];
    for (int c = 1; c < chunk_count; ++c) {
      diag += part_a[static_cast<std::size_t>(c)];
      rhs += part_b[static_cast<std::size_t>(c)];
    }
    const double shift = options_.solver.ridge * static_cast<double>(paths_.paths());
    diag.array() += shift;
    attribute(timings, clocks, seconds_since(wall));

    auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
      const auto w0 = Clock::now();
      std::vector<StageClock> cl(static_cast<std::size_t>(chunk_count));
#pragma omp parallel for schedule(static, 1)
      for (int c = 0; c < chunk_count; ++c) {
        Eigen::MatrixXd a;
        Eigen::VectorXd ax;
        auto& clock = cl[static_cast<std::size_t>(c)];
        auto& acc = part_b[static_cast<std::size_t>(c)];
        acc.setZero();
        for_blocks(chunks_[static_cast<std::size_t>(c)], [&](Index r0, Index len) {
          build_block(k, t, r0, len, a, clock);
          const auto t0 = Clock::now();
          ax.noalias() = a * x;
          acc.noalias() += a.transpose() * ax;
          clock.linear += seconds_since(t0);
        });
      }
      y = part_b[0];
      for (int c = 1; c < chunk_count; ++c) y += part_b[static_cast<std::size_t>(c)];
      y += shift * x;
      attribute(timings, cl, seconds_since(w0));
    };
    LeastSquaresSolution sol =
        conjugate_gradient(apply, rhs, diag, options_.solver.tolerance, options_.solver.max_iterations);
    if (!sol.diagnostics.converged) {
      // Dense fallback on the explicit normal equations.
      NormalEquations sys(nb);
      Eigen::MatrixXd a;
      StageClock clock;
      wall = Clock::now();
      for_blocks(Range{0, paths_.paths()}, [&](Index r0, Index len) {
        build_block(k, t, r0, len, a, clock);
        sys.add(a, u_.segment(r0, len));
      });
      SolverOptions dense = options_.solver;
      dense.max_iterations = 0;
      const int iterations = sol.diagnostics.iterations;
      sol = solve_normal_equations(sys, dense);
      sol.diagnostics.iterations = iterations;
      timings.linear += seconds_since(wall);
    }
    return sol;
  }

  void update(int k, double t, const Eigen::VectorXd& beta, PricingResult& res) {
    const auto wall = Clock::now();
    const auto chunk_count = static_cast<int>(chunks_.size());
    std::vector<StageClock> clocks(static_cast<std::size_t>(chunk_count));
    std::vector<long long> exercised(static_cast<std::size_t>(chunk_count), 0);
    const double discount = std::exp(-market_.rate() * t);
    const bool classify =
        std::find(options_.classify_steps.begin(), options_.classify_steps.end(), k) != options_.classify_steps.end();
    ClassificationRecord record;
    if (classify) {
      record.step = k;
      record.states.resize(paths_.paths(), market_.dimension());
      record.payoff.resize(paths_.paths());
      record.continuation.resize(paths_.paths());
      record.exercised.assign(static_cast<std::size_t>(paths_.paths()), 0);
    }

#pragma omp parallel for schedule(static, 1)
    for (int c = 0; c < chunk_count; ++c) {
      auto& clock = clocks[static_cast<std::size_t>(c)];
      for_blocks(chunks_[static_cast<std::size_t>(c)], [&](Index r0, Index len) {
        auto t0 = Clock::now();
        const BasisMatrix<double> phi = eval_basis_matrix(paths_.at(k).middleRows(r0, len), t, set_);
        clock.basis += seconds_since(t0);
        t0 = Clock::now();
        const Eigen::VectorXd cont = phi.values * beta;
        const Eigen::MatrixXd s = prices_from_brownian(paths_.at(k).middleRows(r0, len), t, market_);
        const Eigen::VectorXd g = payoff_.values(s);
        for (Index i = 0; i < len; ++i) {
          const Index row = r0 + i;
          const double gd = discount * g(i);
          const bool ex = exercise_decision(cont(i), gd, g(i) > 0.0);
          if (ex) {
            u_(row) = gd;
            stopped_(row) = gd;
            res.stopping_times(row) = t;
            ++exercised[static_cast<std::size_t>(c)];
          } else {
            u_(row) = cont(i);
          }
          if (classify) {
            record.exercised[static_cast<std::size_t>(row)] = ex ? 1 : 0;
          }
        }
        if (classify) {
          record.states.middleRows(r0, len) = s;
          record.payoff.segment(r0, len) = g;
          record.continuation.segment(r0, len) = cont / discount;
        }
        clock.update += seconds_since(t0);
      });
    }
    for (auto e : exercised) res.exercises += e;
    if (classify) res.classification.push_back(std::move(record));
    attribute(res.timings, clocks, seconds_since(wall));
  }

  const BlackScholesMarket& market_;
  const Payoff& payoff_;
  const BrownianPaths& paths_;
  const PricerOptions& options_;
  IndexSet set_;
  std::vector<Range> chunks_;
  Eigen::VectorXd u_;        // discounted value estimates u_{k+1}
  Eigen::VectorXd stopped_;  // discounted payoff at the current stopping time
};

}  // namespace

PricingResult price_on_paths(const BlackScholesMarket& market, const Payoff& payoff, const BrownianPaths& paths,
                             const PricerOptions& options) {
  BackwardSweep sweep(market, payoff, paths, options);
  return sweep.run();
}

PricingResult glsm_price(const BlackScholesMarket& market, const Payoff& payoff, double maturity, Index paths,
                         int steps, std::uint64_t seed, PricerOptions options) {
  options.method = Method::kGlsm;
  const auto t0 = Clock::now();
  const BrownianPaths w = simulate_brownian(paths, steps, maturity, market.dimension(), seed);
  const double sim = seconds_since(t0);
  PricingResult res = price_on_paths(market, payoff, w, options);
  res.timings.total += sim;
  return res;
}

PricingResult lsm_price(const BlackScholesMarket& market, const Payoff& payoff, double maturity, Index paths,
                        int steps, std::uint64_t seed, PricerOptions options) {
  options.method = Method::kLsm;
  const auto t0 = Clock::now();
  const BrownianPaths w = simulate_brownian(paths, steps, maturity, market.dimension(), seed);
  const double sim = seconds_since(t0);
  PricingResult res = price_on_paths(market, payoff, w, options);
  res.timings.total += sim;
  return res;
}

Eigen::VectorXd delta_at_zero(const Eigen::Ref<const Eigen::MatrixXd>& w1, const Eigen::Ref<const Eigen::VectorXd>& u1,
                              const IndexSet& set, const BlackScholesMarket& market, double dt) {
  const int d = set.dimension();
  if (w1.cols() != d || w1.rows() != u1.size() || market.dimension() != d) {
    throw std::invalid_argument("delta_at_zero: shape mismatch");
  }
  // Every row is phi(0) + grad phi(0) . W_1, so A = [1, W_1] C^T with C = [phi(0), grad phi(0)].
  const Eigen::MatrixXd origin = Eigen::MatrixXd::Zero(1, d);
  const BasisMatrix<double> phi0 = eval_basis_matrix(origin, dt, set);
  Eigen::MatrixXd c(set.size(), d + 1);
  c.col(0) = phi0.values.row(0).transpose();
  c.rightCols(d).setZero();
  for (Index n = 0; n < set.size(); ++n) {
    for (const auto& [axis, order] : set.support(n)) {
      c(n, 1 + axis) = std::sqrt(order / dt) * phi0.values(0, set.neighbor(n, axis));
    }
  }
  Eigen::MatrixXd x(w1.rows(), d + 1);
  x.col(0).setOnes();
  x.rightCols(d) = w1;
  const auto qr = x.colPivHouseholderQr();
  if (qr.rank() < d + 1) throw NumericalError("delta_at_zero: Brownian sample is rank deficient");
  const Eigen::VectorXd gamma = qr.solve(u1);
  // Minimum-norm coefficients reproducing the reduced fit.
  const Eigen::VectorXd beta = c.transpose().completeOrthogonalDecomposition().solve(gamma);
  if (!beta.allFinite()) throw NumericalError("delta_at_zero: non-finite coefficients");
  const Eigen::VectorXd grad_w = c.rightCols(d).transpose() * beta;
  return inverse_jacobian(market, market.spot()).transpose() * grad_w;
}

StepDelta delta_at_step(int step, double time, const Eigen::Ref<const Eigen::VectorXd>& coefficients,
                        const IndexSet& set, const BlackScholesMarket& market, const Payoff& payoff,
                        const Eigen::Ref<const Eigen::MatrixXd>& states) {
  if (step < 1 || !(time > 0.0)) throw std::invalid_argument("delta_at_step: step must be >= 1");
  const Eigen::MatrixXd w = brownian_from_prices(states, time, market);
  const BasisMatrix<double> phi = eval_basis_matrix(w, time, set);
  const double growth = std::exp(market.rate() * time);
  StepDelta out;
  out.delta.resize(states.rows(), states.cols());
  out.exercise_region.assign(static_cast<std::size_t>(states.rows()), 0);
  for (Index q = 0; q < states.rows(); ++q) {
    const Eigen::VectorXd s = states.row(q).transpose();
    const double cont = phi.values.row(q).dot(coefficients) * growth;
    const double g = payoff.value(s);
    if (exercise_decision(cont, g, g > 0.0)) {
      out.delta.row(q) = payoff.gradient(s).transpose();
      out.exercise_region[static_cast<std::size_t>(q)] = 1;
      continue;
    }
    const Eigen::VectorXd grad_w = eval_gradient(coefficients, set, phi.values.row(q).transpose(), time);
    out.delta.row(q) = growth * (inverse_jacobian(market, s).transpose() * grad_w).transpose();
  }
  return out;
}

ClassificationRecord classify_exercise(int step, const Eigen::Ref<const Eigen::VectorXd>& coefficients,
                                       const IndexSet& set, const BrownianPaths& paths,
                                       const BlackScholesMarket& market, const Payoff& payoff) {
  if (step < 1 || step >= paths.steps()) throw std::invalid_argument("classify_exercise: invalid step");
  const double t = paths.time(step);
  const double discount = std::exp(-market.rate() * t);
  ClassificationRecord rec;
  rec.step = step;
  rec.states = prices_from_brownian(paths.at(step), t, market);
  rec.payoff = payoff.values(rec.states);
  rec.continuation = eval_basis_matrix(paths.at(step), t, set).values * coefficients / discount;
  rec.exercised.resize(static_cast<std::size_t>(paths.paths()));
  for (Index m = 0; m < paths.paths(); ++m) {
    rec.exercised[static_cast<std::size_t>(m)] =
        exercise_decision(rec.continuation(m), rec.payoff(m), rec.payoff(m) > 0.0) ? 1 : 0;
  }
  return rec;
}

void write_classification_csv(std::ostream& out, const ClassificationRecord& record, const Payoff& payoff) {
  const Index d = record.states.cols();
  out << "step,";
  if (d <= 2) {
    for (Index j = 0; j < d; ++j) out << 's' << j + 1 << ',';
  } else {
    out << "geometric_mean," << (payoff.kind() == PayoffKind::kMaxCall ? "max" : "s1") << ',';
  }
  out << "payoff,continuation,exercised\n";
  out << std::setprecision(10);
  for (Index m = 0; m < record.states.rows(); ++m) {
    out << record.step << ',';
    if (d <= 2) {
      for (Index j = 0; j < d; ++j) out << record.states(m, j) << ',';
    } else {
      const double gm = std::exp(record.states.row(m).array().log().mean());
      const double other = payoff.kind() == PayoffKind::kMaxCall ? record.states.row(m).maxCoeff() : record.states(m, 0);
      out << gm << ',' << other << ',';
    }
    out << record.payoff(m) << ',' << record.continuation(m) << ',' << int(record.exercised[static_cast<std::size_t>(m)])
        << '\n';
  }
}

Eigen::MatrixXd chebyshev_table(const Eigen::Ref<const Eigen::VectorXd>& x, int max_order) {
  Eigen::MatrixXd t(x.size(), max_order + 1);
  t.col(0).setOnes();
  if (max_order >= 1) t.col(1) = x;
  for (int n = 1; n < max_order; ++n) t.col(n + 1) = 2.0 * x.cwiseProduct(t.col(n)) - t.col(n - 1);
  return t;
}

Eigen::MatrixXd chebyshev_derivative_table(const Eigen::Ref<const Eigen::VectorXd>& x, int max_order) {
  // T_n' = n U_{n-1}.
  Eigen::MatrixXd dt = Eigen::MatrixXd::Zero(x.size(), max_order + 1);
  if (max_order == 0) return dt;
  Eigen::VectorXd u_prev = Eigen::VectorXd::Ones(x.size());
  Eigen::VectorXd u_cur = 2.0 * x;
  dt.col(1) = u_prev;
  for (int n = 2; n <= max_order; ++n) {
    dt.col(n) = n * u_cur;
    Eigen::VectorXd u_next = 2.0 * x.cwiseProduct(u_cur) - u_prev;
    u_prev = std::move(u_cur);
    u_cur = std::move(u_next);
  }
  return dt;
}

namespace {

std::pair<double, double> quantile_range(const Eigen::Ref<const Eigen::VectorXd>& x, double q) {
  if (!(q > 0.0)) return {x.minCoeff(), x.maxCoeff()};
  std::vector<double> v(x.data(), x.data() + x.size());
  const auto pick = [&](double level) {
    const auto pos = static_cast<std::ptrdiff_t>(std::floor(level * static_cast<double>(v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + pos, v.end());
    return v[static_cast<std::size_t>(pos)];
  };
  const double lo = pick(q);
  const double hi = pick(1.0 - q);
  return {lo, hi};
}

}  // namespace

IndexSet heston_index_set(const HestonOptions& options) {
  if (options.price_order < 0 || options.logvar_order < 0) {
    throw std::invalid_argument("heston_index_set: orders must be non-negative");
  }
  const IndexSet full = build_index_set(2, options.order, CrossRule::kShiftedProduct);
  std::vector<MultiIndex> kept;
  for (const auto& alpha : full.indices()) {
    if (alpha[0] <= options.price_order && alpha[1] <= options.logvar_order) kept.push_back(alpha);
  }
  return IndexSet(2, options.order, CrossRule::kShiftedProduct, std::move(kept));
}

std::vector<PricingResult> glsm_price_heston_spots(const HestonMarket& params, const std::vector<double>& spots,
                                                   const Payoff& payoff, double maturity, Index paths, int steps,
                                                   std::uint64_t seed, const HestonOptions& options) {
  if (spots.empty()) return {};
  for (double s : spots) {
    if (!(s > 0.0)) throw std::invalid_argument("glsm_price_heston: spots must be positive");
  }
  if (!(options.range_quantile >= 0.0 && options.range_quantile < 0.5)) {
    throw std::invalid_argument("glsm_price_heston: range_quantile must lie in [0, 0.5)");
  }
  const auto start = Clock::now();
  const HestonPaths sim = simulate_heston(paths, steps, maturity, params, seed, options.substeps);
  const IndexSet set = heston_index_set(options);
  std::vector<MultiIndex> flat_indices;
  for (const auto& alpha : set.indices()) {
    if (alpha[1] == 0) flat_indices.push_back(alpha);
  }
  const IndexSet flat(2, options.order, CrossRule::kShiftedProduct, std::move(flat_indices));
  if (paths < set.size()) throw std::invalid_argument("glsm_price_heston: M is smaller than N_b");

  const std::size_t count = spots.size();
  std::vector<PricingResult> res(count);
  std::vector<Eigen::VectorXd> u(count);
  std::vector<Eigen::VectorXd> stopped(count);
  const double rho_bar = std::sqrt(1.0 - params.rho * params.rho);

  auto payoff_at = [&](double spot, const Eigen::MatrixXd& state) {
    Eigen::MatrixXd s = (spot * state.col(0).array().exp()).matrix();
    return payoff.values(s);
  };
  {
    const Eigen::MatrixXd& terminal = sim.state[static_cast<std::size_t>(steps)];
    for (std::size_t i = 0; i < count; ++i) {
      u[i] = std::exp(-params.rate * maturity) * payoff_at(spots[i], terminal);
      stopped[i] = u[i];
      res[i].european = u[i].mean();
      res[i].stopping_times = Eigen::VectorXd::Constant(paths, maturity);
      res[i].basis_size = set.size();
      res[i].nonzeros = set.nonzero_count();
    }
  }

  Timings shared;
  for (int k = steps - 1; k >= 1; --k) {
    const double t = sim.time(k);
    const Eigen::MatrixXd& x = sim.state[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd& dw = sim.increments[static_cast<std::size_t>(k)];

    auto t0 = Clock::now();
    const double mean = x.col(0).mean();
    const double sd = std::sqrt((x.col(0).array() - mean).square().mean());
    const auto [lo, hi] = quantile_range(x.col(1), options.range_quantile);
    const bool degenerate = !(hi - lo > 1e-6);
    const IndexSet& basis = degenerate ? flat : set;
    Eigen::VectorXd z = sd > 0.0 ? Eigen::VectorXd((x.col(0).array() - mean) / sd) : Eigen::VectorXd::Zero(paths);
    const auto [z_lo, z_hi] = quantile_range(z, options.range_quantile);
    const Eigen::ArrayXd z_inside = (z.array() >= z_lo && z.array() <= z_hi).cast<double>();
    z = z.array().max(z_lo).min(z_hi).matrix();
    const Eigen::ArrayXd mapped = 2.0 * (x.col(1).array() - lo) / (degenerate ? 1.0 : hi - lo) - 1.0;
    const Eigen::VectorXd xi = degenerate ? Eigen::VectorXd(Eigen::VectorXd::Constant(paths, -1.0))
                                          : Eigen::VectorXd(mapped.max(-1.0).min(1.0).matrix());
    // Clamped paths see a flat extension in X2.
    const Eigen::ArrayXd inside = (mapped >= -1.0 && mapped <= 1.0).cast<double>();
    const Eigen::MatrixXd h = hermite_table(z, 1.0, options.price_order);
    const Eigen::MatrixXd c = chebyshev_table(xi, options.logvar_order);
    Eigen::MatrixXd phi(paths, basis.size());
    for (Index n = 0; n < basis.size(); ++n) phi.col(n) = h.col(basis[n][0]).cwiseProduct(c.col(basis[n][1]));
    shared.basis += seconds_since(t0);

    Eigen::MatrixXd a = phi;
    if (options.method == Method::kGlsm) {
      t0 = Clock::now();
      const Eigen::MatrixXd dc = chebyshev_derivative_table(xi, options.logvar_order);
      const Eigen::ArrayXd v = x.col(1).array().exp();
      const Eigen::ArrayXd sv = v.sqrt();
      const Eigen::ArrayXd e1 = z_inside * sv * (params.rho * dw.col(0).array() + rho_bar * dw.col(1).array());
      const Eigen::ArrayXd e2 = inside * params.nu / sv * dw.col(0).array();
      const double scale1 = sd > 0.0 ? 1.0 / sd : 0.0;
      const double scale2 = degenerate ? 0.0 : 2.0 / (hi - lo);
      for (Index n = 0; n < basis.size(); ++n) {
        const int a1 = basis[n][0];
        const int a2 = basis[n][1];
        if (a1 > 0) {
          a.col(n).array() +=
              (std::sqrt(static_cast<double>(a1)) * scale1) * h.col(a1 - 1).array() * c.col(a2).array() * e1;
        }
        if (a2 > 0) {
          a.col(n).array() += scale2 * h.col(a1).array() * dc.col(a2).array() * e2;
        }
      }
      shared.matrix += seconds_since(t0);
    }

    t0 = Clock::now();
    NormalEquations sys(basis.size());
    Eigen::MatrixXd rhs(paths, static_cast<Index>(count));
    for (std::size_t i = 0; i < count; ++i) rhs.col(static_cast<Index>(i)) = u[i];
    sys.add(a, u[0]);
    const Eigen::MatrixXd b_all = a.transpose() * rhs;
    shared.linear += seconds_since(t0);

    const double discount = std::exp(-params.rate * t);
    for (std::size_t i = 0; i < count; ++i) {
      t0 = Clock::now();
      sys.set_rhs(b_all.col(static_cast<Index>(i)));
      const LeastSquaresSolution sol = solve_normal_equations(sys, options.solver);
      if (!sol.diagnostics.converged || !sol.beta.allFinite()) {
        std::ostringstream msg;
        msg << "heston regression failed at step " << k;
        throw NumericalError(msg.str());
      }
      StepDiagnostics diag;
      diag.step = k;
      diag.solve = sol.diagnostics;
      res[i].diagnostics.push_back(diag);
      res[i].steps.push_back({k, t, sol.beta});
      res[i].timings.linear += seconds_since(t0);

      t0 = Clock::now();
      const Eigen::VectorXd cont = phi * sol.beta;
      const Eigen::VectorXd g = payoff_at(spots[i], x);
      for (Index m = 0; m < paths; ++m) {
        const double gd = discount * g(m);
        if (exercise_decision(cont(m), gd, g(m) > 0.0)) {
          u[i](m) = gd;
          stopped[i](m) = gd;
          res[i].stopping_times(m) = t;
          ++res[i].exercises;
        } else {
          u[i](m) = cont(m);
        }
      }
      res[i].timings.update += seconds_since(t0);
    }
  }

  const double total = seconds_since(start);
  for (std::size_t i = 0; i < count; ++i) {
    const double mean = stopped[i].mean();
    const double var = paths > 1 ? (stopped[i].array() - mean).square().sum() / static_cast<double>(paths - 1) : 0.0;
    res[i].standard_error = std::sqrt(var / static_cast<double>(paths));
    Eigen::VectorXd s0(1);
    s0(0) = spots[i];
    res[i].price = std::max(mean, payoff.value(s0));
    res[i].timings.basis += shared.basis;
    res[i].timings.matrix += shared.matrix;
    res[i].timings.linear += shared.linear;
    res[i].timings.total = total;
  }
  return res;
}

PricingResult glsm_price_heston(const HestonMarket& params, const Payoff& payoff, double maturity, Index paths,
                                int steps, std::uint64_t seed, const HestonOptions& options) {
  return glsm_price_heston_spots(params, {params.spot}, payoff, maturity, paths, steps, seed, options).front();
}

}  // namespace glsm
