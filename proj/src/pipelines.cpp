#include "omegaflow/pipelines.hpp"

#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <future>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "omegaflow/flows_finite.hpp"
#include "omegaflow/flows_pde.hpp"
#include "omegaflow/functionals.hpp"
#include "omegaflow/moment.hpp"
#include "omegaflow/quantization.hpp"
#include "omegaflow/section_basis.hpp"
#include "omegaflow/trace.hpp"
#include "omegaflow/util.hpp"

namespace omegaflow {

namespace {

constexpr const char* kCodeVersion = "0.1.0";
constexpr int kManifestSchemaVersion = 1;

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Accumulates per-file schemas while a pipeline runs and writes manifest.json
// last, once every trace is complete.
class ManifestBuilder {
 public:
  ManifestBuilder(const char* command, const ExperimentConfig& cfg, const RunContext& ctx)
      : start_(Clock::now()), ctx_out_(ctx.out_dir) {
    m_["schema_version"] = kManifestSchemaVersion;
    m_["code_version"] = kCodeVersion;
    m_["command"] = command;
    m_["config"] = cfg.canonical();
    m_["config_hash"] = hash_hex(cfg.hash());
    m_["run_id"] = hash_hex(cfg.hash()) + "-s" + std::to_string(ctx.seed);
    m_["seed"] = ctx.seed;
    m_["threads"] = ctx.threads;
    m_["files"] = json::object();
  }

  void add_file(const TraceWriter& w) {
    m_["files"][w.path().filename().string()] = {{"columns", w.columns()},
                                                 {"rows", w.rows()}};
  }

  json& extra() { return m_; }

  void write() {
    m_["wall_time_s"] =
        std::chrono::duration<double>(Clock::now() - start_).count();
    std::ofstream out(ctx_out_ / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest.json");
    out << m_.dump(2) << '\n';
  }

 private:
  json m_;
  Clock::time_point start_;
  std::filesystem::path ctx_out_;
};

void ensure_out_dir(const RunContext& ctx) {
  std::error_code ec;
  std::filesystem::create_directories(ctx.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + ctx.out_dir.string() + "'");
}

std::vector<int> k_sweep(const ExperimentConfig& cfg, std::vector<int> fallback) {
  if (cfg.has("k_list")) return cfg.get_int_list("k_list", fallback);
  if (cfg.has("k")) return {static_cast<int>(cfg.get_long("k", fallback.front()))};
  return fallback;
}

// Runs fn(index) for every index, ctx.threads at a time.  Each job owns its
// output files; summaries are assembled afterwards in index order so the
// emitted bytes do not depend on the thread count.
void parallel_over(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::size_t i = 0;
  while (i < count) {
    std::vector<std::future<void>> batch;
    for (int j = 0; j < threads && i < count; ++j, ++i) {
      batch.push_back(std::async(std::launch::async, fn, i));
    }
    for (auto& f : batch) {
      try {
        f.get();
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  }
}

BalancingFlowOptions flow_options_from(const ExperimentConfig& cfg) {
  BalancingFlowOptions o;
  o.t_max = cfg.get_double("flow_t_max", 50.0);
  o.dt0 = cfg.get_double("flow_dt0", 1e-3);
  o.dt_min = cfg.get_double("flow_dt_min", 1e-9);
  o.dt_max = cfg.get_double("flow_dt_max", 0.25);
  o.mu0_tol = cfg.get_double("flow_tol", 1e-11);
  o.max_steps = cfg.get_long("flow_max_steps", 200000);
  return o;
}

PdeFlowOptions pde_options_from(const ExperimentConfig& cfg) {
  PdeFlowOptions o;
  o.t_max = cfg.get_double("pde_t_max", 50.0);
  o.cfl = cfg.get_double("pde_cfl", 0.4);
  o.stop_tol = cfg.get_double("pde_tol", 1e-8);
  o.max_steps = cfg.get_long("pde_max_steps", 2000000);
  return o;
}

TkRunOptions tk_options_from(const ExperimentConfig& cfg) {
  TkRunOptions o;
  o.max_iterations = static_cast<int>(cfg.get_long("tk_max_iterations", 2000));
  if (o.max_iterations < 1) {
    throw ConfigError("config key 'tk_max_iterations': must be at least 1");
  }
  o.mu0_tol = cfg.get_double("tk_tol", 1e-12);
  return o;
}

void require_all_snapshots(std::size_t have, std::size_t want, const char* what) {
  if (have != want) {
    throw ConvergenceError(std::string(what) + ": run ended before reaching all sample times");
  }
}

std::string k_file(const char* prefix, int k, const char* suffix) {
  return std::string(prefix) + "_k" + std::to_string(k) + "_" + suffix + ".csv";
}

void require_sphere(const GeometryBackend& geom, const char* command) {
  if (geom.kind != GeometryKind::Sphere) {
    throw ConfigError(std::string(command) + " requires sphere geometry");
  }
}

}  // namespace

void cmd_balanced(const ExperimentConfig& cfg, const RunContext& ctx) {
  ensure_out_dir(ctx);
  const auto geom = make_geometry(cfg);
  require_sphere(*geom, "balanced");
  const DensityField omega = make_omega(cfg, *geom);
  const std::vector<int> ks = k_sweep(cfg, {8});
  const TkRunOptions tk_opts = tk_options_from(cfg);
  const double perturbation = cfg.get_double("perturbation_scale", 0.3);

  ManifestBuilder manifest("balanced", cfg, ctx);
  struct KOutcome {
    std::vector<double> summary;
    json file_entries;
  };
  std::vector<KOutcome> outcomes(ks.size());

  parallel_over(ks.size(), ctx.threads, [&](std::size_t i) {
    const int k = ks[i];
    const SectionBasis basis = make_section_basis(geom, k);
    const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom->num_nodes());
    const HermitianInnerProduct h0 = hilb_omega(basis, FibrewiseMetric{k, zero}, omega);

    TraceWriter tk_writer(ctx.out_dir / k_file("balanced", k, "tk"), {"iteration", "mu0_hs"});
    TkRunOptions topts = tk_opts;
    topts.trace_sink = tk_writer.sink();
    const TkRunResult tk = run_tk(basis, h0, omega, topts);

    TraceWriter flow_writer(ctx.out_dir / k_file("balanced", k, "flow"),
                            {"t", "dt", "mu0_hs", "mu_op"});
    BalancingFlowOptions fopts = flow_options_from(cfg);
    fopts.trace_sink = flow_writer.sink();
    const BalancingFlowResult flow = run_balancing_flow(basis, h0, omega, fopts);

    const double agreement_dist = dist_geodesic(normalize_det(tk.h), normalize_det(flow.h));

    // Second start on the far side of a seeded geodesic perturbation.
    std::mt19937_64 rng(ctx.seed ^ (0x9e3779b97f4a7c15ull * std::uint64_t(k + 1)));
    const Eigen::MatrixXcd l0 = cholesky_factor(h0, "cmd_balanced");
    const Eigen::MatrixXcd a = random_hermitian(rng, basis.dim, perturbation);
    const HermitianInnerProduct h_seeded{
        k, hermitize(l0 * matrix_exp_hermitian(a) * l0.adjoint())};
    TraceWriter seeded_writer(ctx.out_dir / k_file("balanced", k, "tk_seeded"),
                              {"iteration", "mu0_hs"});
    TkRunOptions sopts = tk_opts;
    sopts.trace_sink = seeded_writer.sink();
    const TkRunResult tk2 = run_tk(basis, h_seeded, omega, sopts);

    const Eigen::ArrayXd pot1 = centered(*geom, fs(basis, tk.h).potential);
    const Eigen::ArrayXd pot2 = centered(*geom, fs(basis, tk2.h).potential);
    const double seeded_sup = (pot1 - pot2).abs().maxCoeff();

    const Eigen::ArrayXd density = ma_density(*geom, pot1).values;
    write_node_fields_csv(ctx.out_dir / k_file("balanced", k, "density"), *geom,
                          {{"fs_potential", &pot1}, {"ma_density", &density},
                           {"omega", &omega.values}});

    outcomes[i].summary = {double(k),
                           double(tk.iterations),
                           tk.converged ? 1.0 : 0.0,
                           tk.mu0_history.back(),
                           double(flow.steps),
                           flow.mu0_history.back(),
                           agreement_dist,
                           seeded_sup};
    outcomes[i].file_entries = json::object();
    for (const TraceWriter* w : {&tk_writer, &flow_writer, &seeded_writer}) {
      outcomes[i].file_entries[w->path().filename().string()] = {
          {"columns", w->columns()}, {"rows", w->rows()}};
    }
  });

  TraceWriter summary(ctx.out_dir / "balanced_summary.csv",
                      {"k", "tk_iterations", "tk_converged", "tk_mu0_final", "flow_steps",
                       "flow_mu0_final", "tk_flow_distance", "seeded_agreement_sup"});
  for (const KOutcome& o : outcomes) {
    summary.push(o.summary);
    for (auto it = o.file_entries.begin(); it != o.file_entries.end(); ++it) {
      manifest.extra()["files"][it.key()] = it.value();
    }
  }
  manifest.add_file(summary);
  manifest.write();
}

void cmd_bergman_asymptotics(const ExperimentConfig& cfg, const RunContext& ctx) {
  ensure_out_dir(ctx);
  const auto geom = make_geometry(cfg);
  require_sphere(*geom, "bergman-asymptotics");
  const DensityField omega = make_omega(cfg, *geom);
  const std::vector<int> ks = k_sweep(cfg, {4, 8, 12, 16, 24, 32});

  // Fixed smooth test functions for the Berezin-transform table.
  const Eigen::ArrayXd t = geom->cos_theta;
  const Eigen::ArrayXd sin_theta = (1.0 - t.square()).sqrt();
  const std::vector<Eigen::ArrayXd> fs_test = {
      t, sin_theta * geom->coord2.cos(), (0.2 * t).exp()};

  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom->num_nodes());
  const Eigen::ArrayXd beta_target = 1.0 - omega.values;

  ManifestBuilder manifest("bergman-asymptotics", cfg, ctx);
  std::vector<std::vector<double>> rows(ks.size());

  parallel_over(ks.size(), ctx.threads, [&](std::size_t i) {
    const int k = ks[i];
    const SectionBasis basis = make_section_basis(geom, k);
    const FibrewiseMetric ref{k, zero};
    const HermitianInnerProduct h = hilb_omega(basis, ref, omega);

    const Eigen::ArrayXd rho = bergman_density(basis, ref, BergmanWeighting::GivenVolume,
                                               omega);
    const double rho_err =
        (rho / double(k) - omega.values.inverse()).abs().maxCoeff();

    std::vector<double> row = {double(k), rho_err};
    for (const Eigen::ArrayXd& f : fs_test) {
      const Eigen::ArrayXd q = berezin_qk(basis, ref, omega, f);
      row.push_back((q - f).abs().maxCoeff());
    }

    const Eigen::ArrayXd beta = balancing_potential(basis, h, omega);
    row.push_back((beta - beta_target).abs().maxCoeff());
    rows[i] = row;
  });

  TraceWriter errors(ctx.out_dir / "bergman_errors.csv",
                     {"k", "rho_sup_err", "qk_sup_err_f1", "qk_sup_err_f2", "qk_sup_err_f3",
                      "beta_sup_err"});
  for (const auto& row : rows) errors.push(row);

  std::vector<double> kd(ks.begin(), ks.end());
  std::vector<double> slope_row;
  for (std::size_t col = 1; col < errors.columns().size(); ++col) {
    std::vector<double> err;
    err.reserve(rows.size());
    for (const auto& row : rows) err.push_back(row[col]);
    slope_row.push_back(fit_loglog_slope(kd, err));
  }
  TraceWriter slopes(ctx.out_dir / "bergman_slopes.csv",
                     {"rho_slope", "qk_f1_slope", "qk_f2_slope", "qk_f3_slope", "beta_slope"});
  slopes.push(slope_row);

  manifest.add_file(errors);
  manifest.add_file(slopes);
  manifest.write();
}

void cmd_quantization(const ExperimentConfig& cfg, const RunContext& ctx) {
  ensure_out_dir(ctx);
  const auto geom = make_geometry(cfg);
  require_sphere(*geom, "quantization");
  const DensityField omega = make_omega(cfg, *geom);
  const std::vector<int> ks = k_sweep(cfg, {6, 10, 14, 18});
  const std::vector<double> sample_times = cfg.get_double_list("sample_times", {0.3});
  if (sample_times.empty()) throw ConfigError("config key 'sample_times': empty");

  ManifestBuilder manifest("quantization", cfg, ctx);

  // Reference parabolic flow, sampled exactly at the comparison times.
  PdeFlowOptions popts = pde_options_from(cfg);
  popts.t_max = sample_times.back();
  popts.snapshot_times = sample_times;
  TraceWriter pde_writer(ctx.out_dir / "quantization_pde.csv",
                         {"t", "dt", "vdot_sup", "vdot_min", "vdot_max", "residual",
                          "energy", "f0"});
  popts.trace_sink = pde_writer.sink();
  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom->num_nodes());
  const PdeFlowResult pde = run_volume_flow(*geom, omega, zero, popts);
  manifest.add_file(pde_writer);
  require_all_snapshots(pde.snapshots.size(), sample_times.size(), "quantization pde flow");

  std::vector<Eigen::ArrayXd> pde_density(sample_times.size());
  for (std::size_t s = 0; s < sample_times.size(); ++s) {
    pde_density[s] = ma_density(*geom, pde.snapshots[s].second).values;
  }

  struct KOutcome {
    std::vector<std::vector<double>> distance_rows;
    json file_entries;
  };
  std::vector<KOutcome> outcomes(ks.size());

  parallel_over(ks.size(), ctx.threads, [&](std::size_t i) {
    const int k = ks[i];
    const SectionBasis basis = make_section_basis(geom, k);
    const HermitianInnerProduct h0 = hilb_omega(basis, FibrewiseMetric{k, zero}, omega);

    BalancingFlowOptions fopts = flow_options_from(cfg);
    fopts.t_max = sample_times.back();
    fopts.dt_max = cfg.get_double("quant_dt_max", 1e-3);
    fopts.dt0 = std::min(fopts.dt0, fopts.dt_max);
    fopts.mu0_tol = 0.0;  // run to t_max regardless of how balanced we get
    fopts.snapshot_times = sample_times;
    TraceWriter flow_writer(ctx.out_dir / k_file("quantization", k, "flow"),
                            {"t", "dt", "mu0_hs", "mu_op"});
    fopts.trace_sink = flow_writer.sink();
    const BalancingFlowResult flow = run_balancing_flow(basis, h0, omega, fopts);
    require_all_snapshots(flow.snapshots.size(), sample_times.size(),
                          "quantization balancing flow");

    for (std::size_t s = 0; s < sample_times.size(); ++s) {
      const Eigen::ArrayXd u_k = ma_density(*geom, flow.snapshots[s].second).values;
      const double density_err = (u_k - pde_density[s]).abs().maxCoeff();
      const HermitianInnerProduct h_pde =
          hilb_omega(basis, FibrewiseMetric{k, pde.snapshots[s].second}, omega);
      const double metric_dist =
          dist_geodesic(normalize_det(flow.metric_snapshots[s].second), normalize_det(h_pde));
      outcomes[i].distance_rows.push_back(
          {double(k), sample_times[s], density_err, metric_dist});
    }
    outcomes[i].file_entries = json::object();
    outcomes[i].file_entries[flow_writer.path().filename().string()] = {
        {"columns", flow_writer.columns()}, {"rows", flow_writer.rows()}};
  });

  TraceWriter distance(ctx.out_dir / "quantization_distance.csv",
                       {"k", "t", "density_sup_err", "metric_distance"});
  for (const KOutcome& o : outcomes) {
    for (const auto& row : o.distance_rows) distance.push(row);
    for (auto it = o.file_entries.begin(); it != o.file_entries.end(); ++it) {
      manifest.extra()["files"][it.key()] = it.value();
    }
  }

  TraceWriter slopes(ctx.out_dir / "quantization_slopes.csv", {"t", "density_slope"});
  std::vector<double> kd(ks.begin(), ks.end());
  for (std::size_t s = 0; s < sample_times.size(); ++s) {
    std::vector<double> err;
    for (const KOutcome& o : outcomes) err.push_back(o.distance_rows[s][2]);
    slopes.push({sample_times[s], fit_loglog_slope(kd, err)});
  }

  manifest.add_file(distance);
  manifest.add_file(slopes);
  manifest.write();
}

void cmd_calabi(const ExperimentConfig& cfg, const RunContext& ctx) {
  ensure_out_dir(ctx);
  const auto geom = make_geometry(cfg);
  const DensityField omega = make_omega(cfg, *geom);

  ManifestBuilder manifest("calabi", cfg, ctx);

  PdeFlowOptions popts = pde_options_from(cfg);
  TraceWriter trace(ctx.out_dir / "calabi_trace.csv",
                    {"t", "dt", "vdot_sup", "vdot_min", "vdot_max", "residual", "energy",
                     "f0"});
  popts.trace_sink = trace.sink();
  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(geom->num_nodes());
  const PdeFlowResult pde = run_volume_flow(*geom, omega, zero, popts);
  manifest.add_file(trace);

  double f0_scale = 1e-300;
  for (double v : pde.f0) f0_scale = std::max(f0_scale, std::abs(v));
  bool monotone = true;
  for (std::size_t i = 1; i < pde.f0.size(); ++i) {
    if (pde.f0[i] > pde.f0[i - 1] + 1e-12 * f0_scale) monotone = false;
  }
  // Convexity via divided differences on the (nearly uniform) time grid,
  // ignoring the first few rows where the flow still reorganizes itself.
  bool convex = true;
  for (std::size_t i = 4; i + 1 < pde.f0.size(); ++i) {
    const double g_prev =
        (pde.f0[i] - pde.f0[i - 1]) / (pde.times[i] - pde.times[i - 1]);
    const double g_next =
        (pde.f0[i + 1] - pde.f0[i]) / (pde.times[i + 1] - pde.times[i]);
    if (g_next < g_prev - 1e-8 * std::max(1.0, f0_scale)) convex = false;
  }

  const Eigen::ArrayXd phi = centered(*geom, pde.phi);
  const Eigen::ArrayXd u = ma_density(*geom, phi).values;
  const Eigen::ArrayXd gap = u - omega.values;
  write_node_fields_csv(ctx.out_dir / "calabi_density.csv", *geom,
                        {{"potential", &phi}, {"ma_density", &u}, {"omega", &omega.values},
                         {"residual", &gap}});

  TraceWriter summary(ctx.out_dir / "calabi_summary.csv",
                      {"converged", "steps", "t_final", "residual_final", "vdot_sup_final",
                       "f0_final", "f0_monotone", "f0_convex", "energy_final"});
  summary.push({pde.converged ? 1.0 : 0.0, double(pde.steps), pde.t, pde.residual.back(),
                pde.vdot_sup.back(), pde.f0.back(), monotone ? 1.0 : 0.0,
                convex ? 1.0 : 0.0, pde.energy.back()});
  manifest.add_file(summary);

  const bool endgame_default = geom->kind == GeometryKind::Sphere;
  if (cfg.get_long("calabi_endgame", endgame_default ? 1 : 0) != 0) {
    require_sphere(*geom, "calabi_endgame");
    const std::vector<int> ks = k_sweep(cfg, {4, 8, 12, 16});
    const TkRunOptions topts = tk_options_from(cfg);
    std::vector<std::vector<double>> rows(ks.size());
    parallel_over(ks.size(), ctx.threads, [&](std::size_t i) {
      const int k = ks[i];
      const SectionBasis basis = make_section_basis(geom, k);
      const HermitianInnerProduct h0 = hilb_omega(basis, FibrewiseMetric{k, zero}, omega);
      const TkRunResult tk = run_tk(basis, h0, omega, topts);
      const Eigen::ArrayXd u_k = ma_density(*geom, fs(basis, tk.h).potential).values;
      rows[i] = {double(k), (u_k / omega.values - 1.0).abs().maxCoeff(),
                 tk.mu0_history.back()};
    });
    TraceWriter endgame(ctx.out_dir / "calabi_endgame.csv",
                        {"k", "density_ratio_sup_err", "mu0_final"});
    for (const auto& row : rows) endgame.push(row);
    manifest.add_file(endgame);
    bool decreasing = true;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i][1] >= rows[i - 1][1]) decreasing = false;
    }
    manifest.extra()["endgame_decreasing"] = decreasing;
  }

  manifest.write();
}

}  // namespace omegaflow
