#include "bcm/response.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace bcm {

Vec TimeLattice::weights(long horizon_steps) const {
  Vec w = Vec::Constant(horizon_steps + 1, dt);
  w[0] = w[horizon_steps] = 0.5 * dt;
  return w;
}

TimeLattice choose_lattice(const WaveSystem& sys, double T, int delays, double cfl_factor,
                           double courant) {
  if (!(T > 0.0)) throw ConfigError("T must be positive");
  if (delays < 1) throw ConfigError("delay count must be at least 1");
  if (!(courant > 0.0)) throw ConfigError("courant number must be positive");
  const double dt_max =
      std::min(courant * sys.grid().min_spacing(), cfl_factor * sys.cfl_limit());
  const long unit = std::lcm(2L, static_cast<long>(delays));
  long steps = unit * static_cast<long>(std::ceil(T / (unit * dt_max) - 1e-12));
  steps = std::max(steps, unit);
  return {T, steps, T / static_cast<double>(steps)};
}

Vec odd_continuation(const Vec& f) {
  const long n = f.size() - 1;
  if (n < 2 || n % 2) throw ConfigError("odd continuation needs an even number of steps");
  Vec out(2 * n + 1);
  for (long j = 0; j < n; ++j) out[j] = f[j];
  for (long j = n; j <= 2 * n; ++j) out[j] = -f[2 * n - j];
  return out;
}

Mat odd_continuation_adjoint(const Mat& g) {
  const long two_n = g.rows() - 1;
  if (two_n < 4 || two_n % 4) throw ConfigError("odd continuation adjoint: bad record length");
  const long n = two_n / 2;
  Mat out(n + 1, g.cols());
  out.row(0) = g.row(0) - g.row(two_n);
  for (long j = 1; j < n; ++j) out.row(j) = g.row(j) - g.row(two_n - j);
  out.row(n) = -2.0 * g.row(n);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<int> ControlBasis::delayed_class_index(const BoundaryPatch& sigma, int k) const {
  std::vector<int> out;
  if (k <= 0) return out;
  std::vector<char> inside(supports.size(), 0);
  for (std::size_t s = 0; s < supports.size(); ++s)
    inside[s] = std::includes(sigma.faces.begin(), sigma.faces.end(),
                              supports[s].faces.begin(), supports[s].faces.end());
  for (int c = 0; c < size(); ++c)
    if (inside[support_index[c]] && delay_index[c] <= k) out.push_back(c);
  return out;
}

std::vector<int> ControlBasis::delayed_class(const BoundaryPatch& sigma, double s) const {
  int k = 0;
  for (int i = 0; i < delays; ++i)
    if (delay_grid[i] <= s + 1e-12 * lattice.T) k = i + 1;
  return delayed_class_index(sigma, k);
}

std::pair<double, double> ControlBasis::gram_extremes() const {
  if (gram.size() == 0) return {0.0, 0.0};
  Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

Mat control_gram(const WaveSystem& sys, const std::vector<ControlSignal>& controls,
                 const Vec& time_weights) {
  const int n = static_cast<int>(controls.size());
  const int nb = sys.num_boundary_dofs();
  Mat spatial = Mat::Zero(nb, n);
  Mat temporal = Mat::Zero(time_weights.size(), n);
  for (int c = 0; c < n; ++c) {
    const auto& f = controls[c];
    for (std::size_t i = 0; i < f.dofs.size(); ++i)
      spatial(sys.boundary_slot(f.dofs[i]), c) = f.spatial[static_cast<Eigen::Index>(i)];
    const Eigen::Index m = std::min<Eigen::Index>(f.temporal.size(), time_weights.size());
    temporal.col(c).head(m) = f.temporal.head(m);
  }
  Mat sg = spatial.transpose() * sys.boundary_weight().asDiagonal() * spatial;
  Mat tg = temporal.transpose() * time_weights.asDiagonal() * temporal;
  return sg.cwiseProduct(tg);
}

ControlBasis build_basis(const WaveSystem& sys, const std::vector<BoundaryPatch>& supports,
                         const TimeLattice& lattice, const BasisSpec& spec) {
  if (lattice.steps % 2 || lattice.steps % spec.delays)
    throw ConfigError("time lattice must have an even multiple of the delay count");
  ControlBasis basis;
  basis.lattice = lattice;
  basis.delays = spec.delays;
  basis.supports = supports;
  const double ds = lattice.T / spec.delays;
  for (int k = 1; k <= spec.delays; ++k) basis.delay_grid.push_back(k * ds);

  std::vector<Polarization> pols;
  if (sys.mode() == WaveMode::Scalar) {
    pols.push_back(Polarization::Diagonal);
  } else {
    for (const auto& p : spec.polarizations) pols.push_back(polarization_from_string(p));
    if (pols.empty()) throw ConfigError("at least one polarization is required");
  }

  int profile = 0;
  for (std::size_t s = 0; s < supports.size(); ++s) {
    for (Polarization pol : pols) {
      auto [dofs, values] = spatial_profile(sys, supports[s], pol, spec.space_order);
      if (dofs.empty()) throw ConfigError("patch '" + supports[s].id + "' too small for a control");
      for (int k = 1; k <= spec.delays; ++k) {
        ControlSignal f;
        f.patch = supports[s];
        f.dofs = dofs;
        f.spatial = values;
        f.dt = lattice.dt;
        f.delay = k * ds;
        f.temporal = sample_bump(lattice.T - k * ds, lattice.T - (k - 1) * ds,
                                 spec.time_order, lattice.dt, lattice.steps);
        f.tag = basis.size();
        basis.controls.push_back(std::move(f));
        basis.support_index.push_back(static_cast<int>(s));
        basis.delay_index.push_back(k);
        basis.profile_index.push_back(profile);
      }
      ++profile;
    }
  }
  basis.num_profiles = profile;
  basis.gram = control_gram(sys, basis.controls, lattice.weights(lattice.steps));
  return basis;
}

// ---------------------------------------------------------------------------

Vec response_row(const WaveSystem& sys, const ControlBasis& basis, const Mat& trace) {
  const long n = basis.lattice.steps;
  if (trace.rows() != 2 * n + 1 || trace.cols() != sys.num_boundary_dofs())
    throw ShapeError("response_row: trace has the wrong shape");
  Mat z = odd_continuation_adjoint(trace);  // (n+1) x nb
  const Vec wt = basis.lattice.weights(n);
  const Vec& wb = sys.boundary_weight();

  // Project onto each spatial profile once.
  Mat y = Mat::Zero(n + 1, basis.num_profiles);
  std::vector<char> seen(basis.num_profiles, 0);
  for (int c = 0; c < basis.size(); ++c) {
    const int p = basis.profile_index[c];
    if (seen[p]) continue;
    seen[p] = 1;
    const auto& f = basis.controls[c];
    for (std::size_t i = 0; i < f.dofs.size(); ++i) {
      const int slot = sys.boundary_slot(f.dofs[i]);
      y.col(p) += (wb[slot] * f.spatial[static_cast<Eigen::Index>(i)]) * z.col(slot);
    }
  }
  Vec row(basis.size());
  for (int c = 0; c < basis.size(); ++c) {
    const auto& f = basis.controls[c];
    row[c] = (wt.array() * f.temporal.array() * y.col(basis.profile_index[c]).array()).sum();
  }
  return row;
}

ForwardData assemble_response(const WaveSystem& sys, const ControlBasis& basis,
                              const AssembleOptions& options) {
  const int n = basis.size();
  const long steps = basis.lattice.steps;
  ForwardData out;
  out.response.entries = Mat::Zero(n, n);
  if (options.keep_snapshots) out.oracle.snapshots = Mat::Zero(sys.primary_size(), n);
  for (int c = 0; c < n; ++c) {
    out.oracle.control.push_back(c);
    out.oracle.patch_ids.push_back(basis.controls[c].patch.id);
    out.oracle.delays.push_back(basis.controls[c].delay);
  }

  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr error;
  auto worker = [&]() {
    for (int c = next++; c < n; c = next++) {
      try {
        ControlSignal sf = basis.controls[c];
        sf.temporal = odd_continuation(sf.temporal);
        SolveOptions opt;
        opt.record_trace = true;
        opt.cfl_factor = options.cfl_factor;
        if (options.keep_snapshots)
          opt.observer = [&, c](const WaveState& s) {
            if (s.step == steps) out.oracle.snapshots.col(c) = s.p;
          };
        SolveResult r = solve(sys, sf, 2 * steps, opt);
        out.response.entries.row(c) = response_row(sys, basis, r.trace).transpose();
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min(options.threads, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

double connecting_form(const ResponseMatrix& resp, int k, int l) {
  if (k < 0 || l < 0 || k >= resp.entries.rows() || l >= resp.entries.cols())
    throw ShapeError("connecting_form: index out of range");
  return 0.5 * resp.entries(k, l);
}

GramMatrix gram_matrix(const ResponseMatrix& resp) {
  GramMatrix g;
  Mat c = 0.5 * resp.entries;
  const double norm = c.norm();
  g.asymmetry = norm > 0.0 ? (c - c.transpose()).norm() / norm : 0.0;
  if (g.asymmetry > 0.2)
    throw StageError("gram_matrix", "connecting form asymmetry " +
                                        std::to_string(g.asymmetry) + " exceeds 20%");
  g.entries = 0.5 * (c + c.transpose());
  return g;
}

Mat oracle_gram(const WaveSystem& sys, const OracleFields& oracle) {
  return oracle.snapshots.transpose() * sys.primary_mass().asDiagonal() * oracle.snapshots;
}

ModelOperator sqrt_operator(const GramMatrix& C, const Mat& basis_gram) {
  const Eigen::Index n = C.entries.rows();
  if (basis_gram.rows() != n || basis_gram.cols() != n)
    throw ShapeError("sqrt_operator: Gram size mismatch");
  ModelOperator out;
  if (n == 0) return out;
  Eigen::LLT<Mat> llt(basis_gram);
  if (llt.info() != Eigen::Success)
    throw StageError("sqrt_operator", "control Gram matrix is not positive definite");
  out.gram_factor = llt.matrixL();
  const auto L = llt.matrixL();
  Mat ct = L.solve(C.entries);
  ct = L.solve(ct.transpose()).transpose();
  ct = 0.5 * (ct + ct.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(ct);
  if (es.info() != Eigen::Success) throw StageError("sqrt_operator", "eigensolver failed");
  Vec lam = es.eigenvalues();
  out.min_eigenvalue = lam.minCoeff();
  out.max_eigenvalue = lam.maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lam[i] < 0.0) {
      ++out.clamped;
      lam[i] = 0.0;
    }
  }
  out.matrix = es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose());
  return out;
}

}  // namespace bcm
