#include "jdfilter/commands.hpp"

#include "jdfilter/assumptions.hpp"
#include "jdfilter/csv.hpp"
#include "jdfilter/grid_bayes.hpp"
#include "jdfilter/ks.hpp"
#include "jdfilter/measure.hpp"
#include "jdfilter/particle.hpp"
#include "jdfilter/simulate.hpp"
#include "jdfilter/zakai.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace jdfilter {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr std::uint64_t kParticleSeedTag = 0xf117e500ull;

std::string seeds_summary(const std::vector<std::uint64_t>& seeds) {
  bool contiguous = seeds.size() > 1;
  for (std::size_t i = 1; i < seeds.size() && contiguous; ++i)
    contiguous = seeds[i] == seeds[i - 1] + 1;
  std::ostringstream out;
  if (contiguous) {
    out << seeds.front() << ".." << seeds.back();
  } else {
    for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
  }
  return out.str();
}

std::string out_file(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output.dir) / name).string();
}

void write_joint_path_csv(const std::string& path, const JointPath& jp,
                          const std::string& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "# " << manifest << "\n";
  out << "t,x,y\n";
  for (Eigen::Index i = 0; i < jp.t.size(); ++i)
    out << format_double(jp.t[i]) << "," << format_double(jp.x[i]) << ","
        << format_double(jp.y[i]) << "\n";
}

void write_density_csv(const std::string& path, const DensityTrajectory& d,
                       const std::string& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "# " << manifest << "\n";
  out << "t,log_z0,log_z1,log_z,log_theta\n";
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    out << format_double(d.t[i]) << "," << format_double(d.log_z0[i]) << ","
        << format_double(d.log_z1[i]) << "," << format_double(d.log_z[i]) << ","
        << format_double(d.log_theta[i]) << "\n";
}

// Solver instances named by occurrence so a solver listed twice gets distinct
// files (and a zero self-distance column in the summary).
std::vector<std::string> solver_instance_names(const std::vector<std::string>& solvers) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < solvers.size(); ++i) {
    std::string name = solvers[i];
    int count = 0;
    for (std::size_t j = 0; j < i; ++j)
      if (solvers[j] == solvers[i]) ++count;
    if (count > 0) name += "_" + std::to_string(count + 1);
    names.push_back(name);
  }
  return names;
}

FilterTrajectory run_solver(const ExperimentConfig& cfg, const std::string& solver,
                            const ObservationPath& obs, std::uint64_t seed,
                            Eigen::VectorXd* log_mass) {
  const FiniteStateSignalModel& model = cfg.finite_model();
  if (solver == "zakai") {
    ZakaiResult r = run_zakai(model, obs);
    if (log_mass) *log_mass = r.unnormalized.log_mass;
    return r.filter;
  }
  if (solver == "ks") return run_ks(model, obs).filter;
  if (solver == "grid_bayes") return grid_bayes_filter(model, obs);
  if (solver == "particle")
    return particle_filter(model, obs, cfg.run.n_particles, derive_seed(seed, kParticleSeedTag),
                           cfg.run.resample_threshold)
        .filter;
  throw ConfigError("output.solvers: unknown solver '" + solver + "'");
}

void write_summary_csv(const ExperimentConfig& cfg, const std::vector<std::string>& names,
                       const std::vector<std::vector<FilterTrajectory>>& per_seed) {
  const std::string path = out_file(cfg, "summary.csv");
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "# " << manifest_line(cfg) << "\n";
  out << "seed";
  for (std::size_t a = 0; a < names.size(); ++a)
    for (std::size_t b = a + 1; b < names.size(); ++b)
      out << ",L1_" << names[a] << "_" << names[b];
  out << "\n";
  for (std::size_t s = 0; s < cfg.run.seeds.size(); ++s) {
    out << cfg.run.seeds[s];
    for (std::size_t a = 0; a < names.size(); ++a)
      for (std::size_t b = a + 1; b < names.size(); ++b)
        out << "," << format_double(sup_l1_distance(per_seed[s][a], per_seed[s][b]));
    out << "\n";
  }
  std::cout << "wrote " << path << "\n";
}

}  // namespace

std::string manifest_line(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "manifest config=" << hex64(cfg.config_hash) << " seeds=" << seeds_summary(cfg.run.seeds)
      << " version=" << kVersion;
  return out.str();
}

int cmd_simulate(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output.dir);
  const std::string manifest = manifest_line(cfg);
  for (const std::uint64_t seed : cfg.run.seeds) {
    JointPath path;
    ObservationPath obs;
    if (cfg.is_finite()) {
      const auto& model = cfg.finite_model();
      path = simulate_path(model, cfg.run.dt, seed);
      obs = extract_observation(model, path);
    } else {
      const auto& model = std::get<JumpDiffusionSystem>(cfg.model);
      path = simulate_path(model, cfg.run.dt, seed);
      obs = extract_observation(model, path);
    }
    const std::string tag = "seed" + std::to_string(seed);
    write_joint_path_csv(out_file(cfg, "path_" + tag + ".csv"), path, manifest);
    save_observation(obs, out_file(cfg, "obs_" + tag + ".csv"), manifest);
  }
  {
    std::ofstream out(out_file(cfg, "manifest.txt"));
    out << manifest << "\n";
  }
  std::cout << "simulated " << cfg.run.seeds.size() << " path(s) into " << cfg.output.dir << "\n";
  return 0;
}

int cmd_filter(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output.dir);
  const std::string manifest = manifest_line(cfg);
  const FiniteStateSignalModel& model = cfg.finite_model();
  const auto names = solver_instance_names(cfg.output.solvers);

  std::vector<std::vector<FilterTrajectory>> per_seed;
  for (const std::uint64_t seed : cfg.run.seeds) {
    const std::string tag = "seed" + std::to_string(seed);
    ObservationPath obs = load_observation(out_file(cfg, "obs_" + tag + ".csv"));
    obs.wtilde = reconstruct_wtilde(model, obs);

    std::vector<FilterTrajectory> results;
    for (std::size_t k = 0; k < cfg.output.solvers.size(); ++k) {
      Eigen::VectorXd log_mass;
      FilterTrajectory traj;
      try {
        traj = run_solver(cfg, cfg.output.solvers[k], obs, seed, &log_mass);
      } catch (const std::exception& e) {
        throw std::runtime_error("solver " + cfg.output.solvers[k] + ", seed " +
                                 std::to_string(seed) + ": " + e.what());
      }
      write_filter_csv(out_file(cfg, "filter_" + names[k] + "_" + tag + ".csv"), traj,
                       model.labels(), log_mass.size() ? &log_mass : nullptr, manifest);
      results.push_back(std::move(traj));
    }
    per_seed.push_back(std::move(results));
  }
  write_summary_csv(cfg, names, per_seed);
  return 0;
}

int cmd_compare(const ExperimentConfig& cfg) {
  const auto names = solver_instance_names(cfg.output.solvers);
  std::vector<std::vector<FilterTrajectory>> per_seed;
  for (const std::uint64_t seed : cfg.run.seeds) {
    const std::string tag = "seed" + std::to_string(seed);
    std::vector<FilterTrajectory> results;
    for (const auto& name : names)
      results.push_back(read_filter_csv(out_file(cfg, "filter_" + name + "_" + tag + ".csv")));
    per_seed.push_back(std::move(results));
  }
  write_summary_csv(cfg, names, per_seed);
  return 0;
}

int cmd_diagnose(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output.dir);
  const std::string manifest = manifest_line(cfg);
  bool hard_failure = false;
  std::cout << "== diagnose ==\n";

  // Assumption lint (soft).
  {
    SampleBox box{-10.0, 10.0, -10.0, 10.0};
    AssumptionReport rep;
    if (cfg.is_finite())
      rep = validate_assumptions(cfg.finite_model(), box, 2000, cfg.run.seeds.front(), 50.0, 50.0);
    else
      rep = validate_assumptions(std::get<JumpDiffusionSystem>(cfg.model), box, 2000,
                                 cfg.run.seeds.front(), 50.0, 50.0);
    for (const auto& c : rep.conditions) {
      if (!c.pass)
        std::cout << "lint FLAG  " << c.name << " worst ratio " << format_double(c.worst_ratio)
                  << " at x=" << format_double(c.witness_x) << " y=" << format_double(c.witness_y)
                  << "\n";
    }
    std::cout << "assumption lint: " << (rep.all_pass ? "pass" : "flagged") << "\n";
  }

  if (!cfg.is_finite()) {
    std::cout << "model family is not finite_state; measure diagnostics skipped\n";
    return 0;
  }
  const FiniteStateSignalModel& model = cfg.finite_model();

  // Hard invariants along the configured seeds.
  long clamped = 0;
  double worst_norm = 0.0, worst_identity = 0.0, worst_mass_rel = 0.0;
  double min_theta = std::numeric_limits<double>::infinity();
  double worst_integrability = 0.0;
  for (const std::uint64_t seed : cfg.run.seeds) {
    const JointPath path = simulate_path(model, cfg.run.dt, seed);
    const ObservationPath obs = extract_observation(model, path);
    const ZakaiResult zakai = run_zakai(model, obs);
    const DensityTrajectory dens = density_processes(model, obs, zakai.filter);
    const IntegrabilityDiagnostic integ = integrability_diagnostic(model, obs, zakai);
    worst_integrability =
        std::max(worst_integrability, std::max(integ.normalized, integ.unnormalized));
    clamped += zakai.diagnostics.negative_clamps;
    for (Eigen::Index i = 0; i < zakai.filter.rows(); ++i) {
      worst_norm = std::max(worst_norm, std::abs(zakai.filter.probs.row(i).sum() - 1.0));
      if (zakai.filter.probs.row(i).minCoeff() < 0.0) hard_failure = true;
      if (!std::isfinite(zakai.unnormalized.log_mass[i])) hard_failure = true;
      worst_identity =
          std::max(worst_identity, std::abs(dens.log_z[i] - dens.log_z0[i] - dens.log_z1[i]));
      worst_identity = std::max(worst_identity, std::abs(dens.log_z[i] + dens.log_theta[i]));
      worst_mass_rel = std::max(
          worst_mass_rel, std::abs(std::expm1(dens.log_theta[i] - zakai.unnormalized.log_mass[i])));
      min_theta = std::min(min_theta, std::exp(dens.log_theta[i]));
    }
    write_density_csv(out_file(cfg, "diagnose_density_seed" + std::to_string(seed) + ".csv"), dens,
                      manifest);
  }
  if (worst_norm > 1e-12 || worst_identity > 1e-9 || worst_mass_rel > 1e-6 || !(min_theta > 0.0))
    hard_failure = true;
  std::cout << "normalization worst |sum-1| = " << format_double(worst_norm) << "\n";
  std::cout << "density identity worst error = " << format_double(worst_identity) << "\n";
  std::cout << "mass consistency worst rel = " << format_double(worst_mass_rel) << "\n";
  std::cout << "min filter mass = " << format_double(min_theta) << "\n";
  std::cout << "negative clamps = " << clamped << "\n";
  if (!std::isfinite(worst_integrability)) hard_failure = true;
  std::cout << "integrability functional worst = " << format_double(worst_integrability) << "\n";

  // Measure-change diagnostics (soft).
  const MartingaleReport mart =
      martingale_check(model, std::max(100, cfg.run.n_paths), cfg.run.dt, cfg.run.seeds.front());
  std::cout << "martingale mean(Z_T) = " << format_double(mart.z_mean) << " +- "
            << format_double(mart.z_se) << (mart.z_pass ? "  pass" : "  FLAG") << "\n";
  for (const auto& r : mart.reweighted_rates)
    std::cout << "reweighted rate size " << format_double(r.size) << " = "
              << format_double(r.rate_mean) << " +- " << format_double(r.rate_se)
              << (r.pass ? "  pass" : "  FLAG") << "\n";

  const ProtterShimboReport ps =
      protter_shimbo_report(model, std::max(1, cfg.run.n_paths / 10), cfg.run.dt,
                            derive_seed(cfg.run.seeds.front(), 1));
  std::cout << "exponential-moment functional mean = " << format_double(ps.mc_mean) << " +- "
            << format_double(ps.mc_se);
  if (ps.bound_available) std::cout << "  interval bound = " << format_double(ps.interval_bound);
  std::cout << "\n";

  std::cout << "hard invariants: " << (hard_failure ? "FAIL" : "pass") << "\n";
  return hard_failure ? 1 : 0;
}

}  // namespace jdfilter
