#include "bcm/pipeline.hpp"

#include "bcm/io.hpp"

#include <algorithm>

namespace bcm {

using nlohmann::json;

namespace {

std::vector<BoundaryPatch> eikonal_family(const MetricGrid& grid, const std::string& name) {
  std::vector<BoundaryPatch> fam = default_patch_family(grid);
  if (name == "faces") fam.resize(6);
  return fam;
}

std::vector<std::string> labels_of(const std::vector<BoundaryPatch>& fam) {
  std::vector<std::string> out;
  for (const auto& p : fam) out.push_back(p.id);
  return out;
}

json basis_description(const Problem& p) {
  return {{"controls", p.basis.size()},
          {"supports", labels_of(p.basis.supports)},
          {"delays", p.basis.delay_grid},
          {"profiles", p.basis.num_profiles},
          {"steps_per_T", p.lattice.steps},
          {"dt", p.lattice.dt}};
}

void require(const std::string& path) {
  if (!file_exists(path)) throw ConfigError("missing input '" + path + "'");
}

MatrixFile load_checked(const Problem& p, const std::string& path) {
  require(path);
  MatrixFile f = read_matrix(path);
  if (f.config_hash() != p.hash)
    throw ConfigError("'" + path + "' was produced by config " + f.config_hash() +
                      ", current config is " + p.hash);
  return f;
}

}  // namespace

BasisSpec basis_spec(const RunConfig& c) {
  BasisSpec s;
  s.delays = c.delays;
  s.polarizations = c.polarizations;
  s.time_order = c.time_order;
  s.space_order = c.space_order;
  return s;
}

Problem::Problem(const RunConfig& c)
    : config((validate_config(c), c)),
      hash(config_hash(c)),
      grid(c.dims, c.spacing(), c.metric),
      sys(grid, wave_mode_from_string(c.mode)) {
  const Vec depth = geodesic_distance(grid, whole_boundary(grid)).values;
  check_layer_condition(grid, depth, c.T);
  lattice = choose_lattice(sys, c.T, c.delays, c.cfl_factor, c.courant);
  basis = build_basis(sys, tile_family(grid, c.control_tiles), lattice, basis_spec(c));
  family = eikonal_family(grid, c.patch_family);
}

// ---------------------------------------------------------------------------

ForwardData forward(const Problem& p) {
  AssembleOptions opt;
  opt.cfl_factor = p.config.cfl_factor;
  opt.threads = p.config.threads;
  opt.keep_snapshots = true;
  return assemble_response(p.sys, p.basis, opt);
}

ForwardData run_forward(const Problem& p, const std::string& dir) {
  ensure_directory(dir);
  ForwardData data = forward(p);
  const json basis = basis_description(p);
  write_matrix(join_path(dir, "response.bcm"), data.response.entries, p.hash,
               {{"kind", "response"}, {"basis", basis}});
  write_matrix(join_path(dir, "snapshots.bcm"), data.oracle.snapshots, p.hash,
               {{"kind", "snapshots"},
                {"placement", to_string(p.sys.primary_placement())},
                {"control", data.oracle.control},
                {"patch_ids", data.oracle.patch_ids},
                {"delays", data.oracle.delays}});
  json manifest;
  manifest["config"] = config_to_json(p.config);
  manifest["config_hash"] = p.hash;
  manifest["basis"] = basis;
  manifest["files"] = {"response.bcm", "snapshots.bcm"};
  write_json(join_path(dir, "manifest.json"), manifest);
  return data;
}

ResponseMatrix load_response(const Problem& p, const std::string& dir) {
  MatrixFile f = load_checked(p, join_path(dir, "response.bcm"));
  if (f.data.rows() != p.basis.size() || f.data.cols() != p.basis.size())
    throw ConfigError("response.bcm does not match the control basis");
  return {std::move(f.data)};
}

OracleFields load_snapshots(const Problem& p, const std::string& dir) {
  MatrixFile f = load_checked(p, join_path(dir, "snapshots.bcm"));
  if (f.data.rows() != p.sys.primary_size() || f.data.cols() != p.basis.size())
    throw ConfigError("snapshots.bcm does not match the wave system");
  OracleFields o;
  o.snapshots = std::move(f.data);
  o.control = f.header.value("control", std::vector<int>{});
  o.patch_ids = f.header.value("patch_ids", std::vector<std::string>{});
  o.delays = f.header.value("delays", std::vector<double>{});
  return o;
}

// ---------------------------------------------------------------------------

OperatorFamily model_eikonals(const Problem& p, const ModelOperator& w, double eps_rank,
                              std::vector<SubspaceChain>* chains) {
  const Mat images = model_images(w);
  OperatorFamily fam;
  fam.space = "model";
  for (const auto& sigma : p.family) {
    SubspaceChain chain = build_chain(images, p.basis, sigma, eps_rank);
    fam.members.push_back(eikonal(chain).matrix);
    fam.labels.push_back(sigma.id);
    if (chains) chains->push_back(std::move(chain));
  }
  return fam;
}

Reconstruction reconstruct(const Problem& p, const ResponseMatrix& response, double eps_rank,
                           bool diagonalize) {
  Reconstruction r;
  r.gram = gram_matrix(response);
  r.w = sqrt_operator(r.gram, p.basis.gram);
  r.family = model_eikonals(p, r.w, eps_rank, &r.chains);
  if (diagonalize) {
    r.jd = joint_diagonalize(r.family, p.config.jd_tol, p.config.jd_max_sweeps,
                             p.config.jd_warm_start);
    r.cloud = spectrum_cloud(r.jd, r.family, p.config.T);
  }
  return r;
}

std::vector<std::string> cloud_columns(const std::vector<std::string>& labels) {
  std::vector<std::string> cols{"weight", "residual"};
  cols.insert(cols.end(), labels.begin(), labels.end());
  return cols;
}

Mat cloud_rows(const Mat& points, const Vec& weights, double residual) {
  Mat rows(points.rows(), points.cols() + 2);
  rows.col(0) = weights;
  rows.col(1).setConstant(residual);
  rows.rightCols(points.cols()) = points;
  return rows;
}

Reconstruction run_reconstruct(const Problem& p, const std::string& dir) {
  const ResponseMatrix resp = load_response(p, dir);
  Reconstruction r = reconstruct(p, resp, p.config.eps_rank);

  const auto labels = labels_of(p.family);
  write_csv(join_path(dir, "cloud.csv"), cloud_columns(labels),
            cloud_rows(r.cloud.points, r.cloud.weights, r.cloud.residual));
  write_matrix(join_path(dir, "cloud.bcm"), r.cloud.points, p.hash,
               {{"kind", "cloud"}, {"labels", labels}, {"residual", r.jd.residual},
                {"sweeps", r.jd.sweeps}, {"converged", r.jd.converged}});
  write_matrix(join_path(dir, "model_operator.bcm"), r.w.matrix, p.hash,
               {{"kind", "abs_W"}, {"clamped", r.w.clamped}});

  const Eigen::Index n = r.family.dimension();
  Mat stacked(n * r.family.size(), n);
  json ranks = json::object();
  for (int i = 0; i < r.family.size(); ++i) {
    stacked.middleRows(i * n, n) = r.family.members[i];
    ranks[labels[i]] = r.chains[i].ranks;
  }
  write_matrix(join_path(dir, "eikonals.bcm"), stacked, p.hash,
               {{"kind", "eikonals"}, {"labels", labels}, {"ranks", ranks},
                {"delays", p.basis.delay_grid}, {"eps_rank", p.config.eps_rank}});

  json diag;
  diag["config_hash"] = p.hash;
  diag["gram"] = {{"asymmetry", r.gram.asymmetry}};
  diag["abs_W"] = {{"clamped", r.w.clamped},
                   {"min_eigenvalue", r.w.min_eigenvalue},
                   {"max_eigenvalue", r.w.max_eigenvalue}};
  diag["ranks"] = ranks;
  diag["joint_diagonalization"] = {{"residual", r.jd.residual},
                                   {"converged", r.jd.converged},
                                   {"sweeps", r.jd.sweeps},
                                   {"energy", r.jd.energy}};
  diag["cloud_points"] = r.cloud.points.rows();
  write_json(join_path(dir, "reconstruct.json"), diag);
  return r;
}

// ---------------------------------------------------------------------------

bool VerifyReport::all_pass() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.pass; });
}

json VerifyReport::to_json() const {
  json j;
  j["pass"] = all_pass();
  json cs = json::array();
  for (const auto& c : criteria)
    cs.push_back({{"name", c.name}, {"pass", c.pass}, {"measured", c.measured}});
  j["criteria"] = cs;
  j["details"] = details;
  return j;
}

double blagoveshchenskii_error(const Problem& p, const ForwardData& data) {
  const Mat c = gram_matrix(data.response).entries;
  const Mat o = oracle_gram(p.sys, data.oracle);
  const double no = o.norm();
  return no > 0.0 ? (c - o).norm() / no : (c.norm() > 0.0 ? 1.0 : 0.0);
}

double solenoidality(const Problem& p, const OracleFields& oracle) {
  const MetricGrid& g = p.grid;
  if (p.sys.primary_placement() != Placement::Edge || oracle.snapshots.cols() == 0) return 0.0;
  double worst = 0.0;
  for (Eigen::Index c = 0; c < oracle.snapshots.cols(); ++c) {
    const Vec e = oracle.snapshots.col(c);
    const double scale = e.cwiseAbs().maxCoeff();
    if (scale == 0.0) continue;
    const Vec d = div_dual(g, {Placement::Edge, e}).values;
    double m = 0.0;
    for (int n = 0; n < g.num_nodes(); ++n)
      if (!g.is_boundary_node(n)) m = std::max(m, std::abs(d[n]));
    worst = std::max(worst, m * g.min_spacing() / scale);
  }
  return worst;
}

namespace {

// Largest violation of the nesting P_k P_{k+1} = P_k along a chain.
double nesting_defect(const SubspaceChain& chain) {
  double worst = 0.0;
  for (int k = 1; k < static_cast<int>(chain.ranks.size()); ++k) {
    if (chain.ranks[k] < chain.ranks[k - 1]) return 1.0;
    const Mat a = projection_index(chain, k).matrix;
    const Mat b = projection_index(chain, k + 1).matrix;
    worst = std::max(worst, (b * a - a).norm());
  }
  return worst;
}

}  // namespace

VerifyReport verify(const Problem& p, const ForwardData& data, const Reconstruction& rec) {
  const RunConfig& c = p.config;
  const double T = c.T, h = p.grid.max_spacing();
  VerifyReport rep;
  auto add = [&](std::string name, bool pass, json measured) {
    rep.criteria.push_back({std::move(name), pass, std::move(measured)});
  };

  // Solenoidal snapshots.
  const double sol = solenoidality(p, data.oracle);
  add("solenoidal_snapshots", sol <= 1e-10, {{"max_div_ratio", sol}, {"tolerance", 1e-10}});

  // Data-side Gram against the interior oracle.
  const double blag = blagoveshchenskii_error(p, data);
  add("blagoveshchenskii", blag <= c.blagoveshchenskii_tol,
      {{"relative_error", blag}, {"tolerance", c.blagoveshchenskii_tol},
       {"asymmetry", rec.gram.asymmetry}, {"clamped", rec.w.clamped}});

  // |W|^2 against the clamped connecting form.
  {
    const Mat l = rec.w.gram_factor;
    const Mat ct = l.triangularView<Eigen::Lower>().solve(
        l.triangularView<Eigen::Lower>().solve(rec.gram.entries).transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (ct + ct.transpose()));
    const Vec lam = es.eigenvalues().cwiseMax(0.0);
    const Mat clamped = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    const double err = (rec.w.matrix * rec.w.matrix - clamped).norm() /
                       std::max(clamped.norm(), 1e-300);
    add("abs_W_square", err <= 1e-10, {{"relative_error", err}});
  }

  // Nesting and eikonal range.
  {
    double nest = 0.0, lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < rec.chains.size(); ++i) {
      nest = std::max(nest, nesting_defect(rec.chains[i]));
      const Vec lam = sorted_spectrum(rec.family.members[i]);
      if (lam.size()) {
        lo = std::min(lo, lam.minCoeff());
        hi = std::max(hi, lam.maxCoeff());
      }
    }
    const double eps = 1e-6 * T;
    add("projection_nesting", nest <= 1e-10, {{"max_defect", nest}});
    add("eikonal_range", lo >= -eps && hi <= T + eps,
        {{"min_eigenvalue", lo}, {"max_eigenvalue", hi}, {"T", T}});
  }

  // Unitary equivalence against oracle eikonals.
  const OracleSpace space = oracle_space(p.sys, data.oracle, c.eps_rank);
  {
    double worst = 0.0;
    json per = json::object();
    for (std::size_t i = 0; i < p.family.size(); ++i) {
      const Vec a = sorted_spectrum(rec.family.members[i]);
      const Vec b = sorted_spectrum(oracle_eikonal(space, p.basis, p.family[i], c.eps_rank).matrix);
      const double d = spectrum_distance(a, b);
      per[p.family[i].id] = d;
      worst = std::max(worst, d);
    }
    add("unitary_equivalence", worst <= 0.05, {{"max_relative_l2", worst}, {"per_patch", per}});
  }

  // Commutators (reported; their decay is a two-resolution property).
  {
    const CommutatorProfile prof = commutator_profile(rec.family, false);
    rep.details["commutators"] = {{"max_normalized", prof.max_normalized()},
                                  {"mean_normalized", prof.mean_normalized()}};
  }

  // Compact defect and the quadrature identity on the six faces.
  {
    json per = json::array();
    double worst = 0.0;
    bool k0_ok = true;
    for (int side = 0; side < 6; ++side) {
      const BoundaryPatch face = face_patch(p.grid, side);
      const DefectReport d =
          compact_defect(p.sys, space, p.basis, face, c.eps_rank, c.defect_samples, c.seed + side);
      worst = std::max(worst, d.identity_residual);
      k0_ok = k0_ok && d.k0 >= 0 && d.k0 <= d.singular_values.size() + 1;
      per.push_back({{"patch", d.patch_id}, {"k0", d.k0}, {"space_rank", d.singular_values.size()},
                     {"identity_residual", d.identity_residual},
                     {"curl_ratio", d.curl_ratio},
                     {"s1", d.singular_values.size() ? d.singular_values[0] : 0.0}});
    }
    // Residuals are in units of one delay step: a right-endpoint Riemann sum
    // of an indicator integral is off by at most one step per point.
    add("defect_identity", k0_ok && worst <= 1.0,
        {{"max_identity_residual", worst}, {"tolerance", 1.0}, {"per_patch", per}});
  }

  // Rank-threshold sensitivity.
  {
    json sweep = json::array();
    for (double eps : c.eps_sweep) {
      std::vector<SubspaceChain> chains;
      const OperatorFamily fam = model_eikonals(p, rec.w, eps, &chains);
      int total = 0;
      for (const auto& ch : chains) total += ch.ranks.empty() ? 0 : ch.ranks.back();
      double worst = 0.0;
      for (std::size_t i = 0; i < p.family.size(); ++i) {
        const Vec a = sorted_spectrum(fam.members[i]);
        const Vec b = sorted_spectrum(oracle_eikonal(space, p.basis, p.family[i], eps).matrix);
        worst = std::max(worst, spectrum_distance(a, b));
      }
      sweep.push_back({{"eps_rank", eps}, {"total_rank", total},
                       {"max_unitary_distance", worst},
                       {"commutator_max", commutator_profile(fam, false).max_normalized()}});
    }
    rep.details["eps_sweep"] = sweep;
  }

  // Separation of interior points by boundary distances.
  {
    const SeparationReport s = separation_audit(p.grid, T, c.separation_samples, c.seed);
    add("separation", s.sampled > 0 && s.separated == s.sampled,
        {{"sampled", s.sampled}, {"separated", s.separated},
         {"excluded_near_cut", s.excluded_near_cut}});
  }

  // Injectivity of the patch family's tuple map.
  const DistanceTable table = distance_table(p.grid, p.family);
  {
    const DensityReport d = density_audit(table, p.grid, T, true);
    const DensityReport single = density_audit({p.family.front()}, p.grid, T, false);
    json m = {{"injective", d.injective}, {"colliding_pairs", d.colliding_pairs},
              {"minimal_family_size", d.minimal_family_size},
              {"excluded_near_cut", d.excluded_near_cut},
              {"single_patch_injective", single.injective}};
    if (!d.injective) {
      const auto a = p.grid.node_at(d.example.first), b = p.grid.node_at(d.example.second);
      m["example"] = {{a.i, a.j, a.k}, {b.i, b.j, b.k}};
    }
    add("density", d.injective && !single.injective, m);
  }

  // End-to-end: cloud against ground truth.
  {
    const EmbeddingImage gt = ground_truth_embedding(p.grid, table, T);
    const ComparisonReport cmp = hausdorff(rec.cloud.points, gt.points);
    const double bound = c.hausdorff_factor * h;
    add("hausdorff", cmp.hausdorff <= bound,
        {{"hausdorff", cmp.hausdorff}, {"hausdorff_over_h", cmp.hausdorff / h},
         {"bound", bound}, {"cloud_to_truth", cmp.forward}, {"truth_to_cloud", cmp.backward},
         {"cloud_to_truth_quantiles", cmp.forward_quantiles},
         {"truth_to_cloud_quantiles", cmp.backward_quantiles},
         {"jd_residual", rec.jd.residual}, {"jd_sweeps", rec.jd.sweeps},
         {"config_hash", p.hash}});
    rep.details["ground_truth_points"] = gt.points.rows();
  }
  rep.details["config_hash"] = p.hash;
  return rep;
}

VerifyReport run_verify(const Problem& p, const std::string& dir) {
  ForwardData data;
  data.response = load_response(p, dir);
  data.oracle = load_snapshots(p, dir);

  // The stored cloud is what gets judged; the operators are rebuilt from the
  // response (deterministic and cheap next to diagonalization).
  Reconstruction rec = reconstruct(p, data.response, p.config.eps_rank, false);
  MatrixFile cloud = load_checked(p, join_path(dir, "cloud.bcm"));
  if (cloud.data.cols() != static_cast<Eigen::Index>(p.family.size()))
    throw ConfigError("cloud.bcm does not match the patch family");
  rec.cloud.points = std::move(cloud.data);
  rec.cloud.weights = Vec::Ones(rec.cloud.points.rows());
  rec.jd.residual = cloud.header.value("residual", 0.0);
  rec.jd.sweeps = cloud.header.value("sweeps", 0);
  rec.jd.converged = cloud.header.value("converged", false);
  rec.cloud.residual = rec.jd.residual;

  VerifyReport rep = verify(p, data, rec);
  write_json(join_path(dir, "report.json"), rep.to_json());

  const EmbeddingImage gt = ground_truth_embedding(p.grid, p.family, p.config.T);
  write_csv(join_path(dir, "ground_truth.csv"), cloud_columns(labels_of(p.family)),
            cloud_rows(gt.points, Vec::Ones(gt.points.rows()), 0.0));

  const CommutatorProfile prof = commutator_profile(rec.family, true);
  Eigen::Index width = 0;
  for (const Vec& s : prof.singular_values) width = std::max(width, s.size());
  Mat rows = Mat::Zero(static_cast<Eigen::Index>(prof.pairs.size()), 3 + width);
  for (std::size_t k = 0; k < prof.pairs.size(); ++k) {
    const auto [i, j] = prof.pairs[k];
    rows(k, 0) = i;
    rows(k, 1) = j;
    rows(k, 2) = prof.normalized(i, j);
    rows.row(k).segment(3, prof.singular_values[k].size()) = prof.singular_values[k].transpose();
  }
  std::vector<std::string> cols{"i", "j", "normalized"};
  for (Eigen::Index s = 0; s < width; ++s) cols.push_back("s" + std::to_string(s + 1));
  write_csv(join_path(dir, "commutators.csv"), cols, rows);
  return rep;
}

// ---------------------------------------------------------------------------

void run_oracle(const Problem& p, const std::string& dir) {
  ensure_directory(dir);
  const DistanceTable table = distance_table(p.grid, p.family);
  const int n = p.grid.num_nodes();
  const auto m = static_cast<Eigen::Index>(p.family.size());
  Mat rows(n, 3 + m + 1);
  for (int v = 0; v < n; ++v) {
    const Index3 ix = p.grid.node_at(v);
    rows(v, 0) = ix.i;
    rows(v, 1) = ix.j;
    rows(v, 2) = ix.k;
    for (Eigen::Index i = 0; i < m; ++i) rows(v, 3 + i) = table.to_patch[i][v];
    rows(v, 3 + m) = table.to_boundary[v];
  }
  std::vector<std::string> cols{"i", "j", "k"};
  for (const auto& pch : p.family) cols.push_back(pch.id);
  cols.push_back("boundary");
  write_csv(join_path(dir, "distances.csv"), cols, rows);

  const EmbeddingImage gt = ground_truth_embedding(p.grid, table, p.config.T);
  write_csv(join_path(dir, "ground_truth.csv"), cloud_columns(labels_of(p.family)),
            cloud_rows(gt.points, Vec::Ones(gt.points.rows()), 0.0));
}

}  // namespace bcm
