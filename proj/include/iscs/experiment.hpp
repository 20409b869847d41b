#pragma once

// JSON-configured experiment harness.
//
// A config describes one task (sparse-view CT, limited-angle CT, or z
// super-resolution) on a synthetic phantom, one solver, and a list of seeds.
// Each seed runs on its own counter-based RNG stream keyed by the experiment
// name, so runs are reproducible regardless of execution order, and seed
// directories are disjoint so seeds may run concurrently. Optional sweeps
// (eta or anchor angle) repeat the seed set per value.
//
// Output layout:
//   <outdir>/<task>/<solver>/<strategy>/[<leg>/]seed<k>/
//       recon.ivf, metrics.csv, trajectory.csv
// where <leg> appears only for sweep runs ("eta0.25", "angle90"). After all
// seeds of a leg finish, a finalizer writes the leg-level metrics.csv with
// per-seed rows plus mean/std aggregate rows; sweep runs additionally get a
// top-level sweep_metrics.csv with one aggregate block per swept value.
//
// All CSV numbers are emitted with shortest round-trip formatting, so a
// repeated run of the same config produces byte-identical files.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <initializer_list>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "iscs/core.hpp"
#include "iscs/metrics.hpp"
#include "iscs/noise.hpp"
#include "iscs/operators.hpp"
#include "iscs/phantom.hpp"
#include "iscs/priors.hpp"
#include "iscs/schedule.hpp"
#include "iscs/solvers.hpp"
#include "iscs/volume.hpp"

namespace iscs {

enum class TaskKind { Svct, Lact, Sr };
enum class SolverKind { Dds, Ddnm, Fbp, Sirt, AdmmTv };

inline const char* to_string(TaskKind t) {
  switch (t) {
    case TaskKind::Svct: return "svct";
    case TaskKind::Lact: return "lact";
    case TaskKind::Sr: return "sr";
  }
  return "?";
}

inline const char* to_string(SolverKind s) {
  switch (s) {
    case SolverKind::Dds: return "dds";
    case SolverKind::Ddnm: return "ddnm";
    case SolverKind::Fbp: return "fbp";
    case SolverKind::Sirt: return "sirt";
    case SolverKind::AdmmTv: return "admm_tv";
  }
  return "?";
}

struct PhantomConfig {
  std::string kind = "varying_ellipses";
  Index slices = 48;
  Index height = 64;
  Index width = 64;
};

struct ExperimentConfig {
  std::string name = "experiment";
  TaskKind task = TaskKind::Svct;

  // geometry (svct/lact)
  Index views = 30;
  double angle_span_deg = 100.0;  // lact only
  Index detector_bins = 0;        // 0 = ceil(sqrt(2) * max(H, W))
  Index sr_factor = 4;            // sr only
  double noise_sigma = 0.0;

  SolverKind solver = SolverKind::Dds;
  double gamma = 1.0;  // dds fidelity weight
  int cg_iters = 10;
  int sirt_iters = 30;
  double tv_lambda = 0.05;  // admm_tv
  double rho = 0.5;         // admm_tv
  int admm_iters = 12;

  NoiseStrategy strategy = NoiseStrategy::Slerp;
  std::optional<double> anchor_angle_deg;
  bool freeze_anchors = false;
  bool strategy_init = false;
  double eta = 1.0;

  int timesteps = 30;
  double beta_start = 1e-4;
  double beta_end = 0.2;

  double prior_blur_sigma = 2.0;
  double prior_var = 0.04;
  double data_range = 1.0;

  PhantomConfig phantom;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string outdir = "out";

  // at most one sweep; empty = plain run
  std::vector<double> eta_sweep;
  std::vector<double> anchor_angle_sweep_deg;

  void validate() const {
    if (name.empty()) throw ConfigError("config: name must not be empty");
    if (seeds.empty()) throw ConfigError("config: seeds must not be empty");
    for (size_t i = 0; i < seeds.size(); ++i)
      for (size_t j = i + 1; j < seeds.size(); ++j)
        if (seeds[i] == seeds[j])
          throw ConfigError("config: duplicate seed " + std::to_string(seeds[i]));
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("config: eta must lie in [0, 1]");
    for (double e : eta_sweep)
      if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("config: eta_sweep value outside [0, 1]");
    for (double a : anchor_angle_sweep_deg)
      if (!(a > 0.0 && a < 180.0))
        throw ConfigError("config: anchor angle sweep value outside (0, 180)");
    if (anchor_angle_deg && !(*anchor_angle_deg > 0.0 && *anchor_angle_deg < 180.0))
      throw ConfigError("config: anchor_angle_deg outside (0, 180)");
    if (!eta_sweep.empty() && !anchor_angle_sweep_deg.empty())
      throw ConfigError("config: only one sweep may be active");
    if (task == TaskKind::Sr) {
      if (sr_factor < 1) throw ConfigError("config: sr_factor must be >= 1");
      if (phantom.slices % sr_factor != 0)
        throw ConfigError("config: phantom slices must be divisible by sr_factor");
      if (solver == SolverKind::Fbp || solver == SolverKind::Sirt)
        throw ConfigError("config: fbp/sirt solve tomography tasks only");
    }
    if (outdir.empty()) throw ConfigError("config: outdir must not be empty");
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> allowed, const char* where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError(std::string(where) + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: key '") + key + "' has the wrong type");
  }
}

inline TaskKind parse_task(const std::string& s) {
  if (s == "svct") return TaskKind::Svct;
  if (s == "lact") return TaskKind::Lact;
  if (s == "sr") return TaskKind::Sr;
  throw ConfigError("config: unknown task '" + s + "'");
}

inline SolverKind parse_solver(const std::string& s) {
  if (s == "dds") return SolverKind::Dds;
  if (s == "ddnm") return SolverKind::Ddnm;
  if (s == "fbp") return SolverKind::Fbp;
  if (s == "sirt") return SolverKind::Sirt;
  if (s == "admm_tv") return SolverKind::AdmmTv;
  throw ConfigError("config: unknown solver '" + s + "'");
}

inline NoiseStrategy parse_strategy(const std::string& s) {
  if (s == "independent") return NoiseStrategy::Independent;
  if (s == "identical") return NoiseStrategy::Identical;
  if (s == "slerp") return NoiseStrategy::Slerp;
  throw ConfigError("config: unknown noise strategy '" + s + "'");
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  detail::reject_unknown_keys(
      j,
      {"name",          "task",         "views",          "angle_span_deg",
       "detector_bins", "sr_factor",    "noise_sigma",    "solver",
       "gamma",         "cg_iters",     "sirt_iters",     "tv_lambda",
       "rho",           "admm_iters",   "strategy",       "anchor_angle_deg",
       "freeze_anchors", "strategy_init", "eta",          "timesteps",
       "beta_start",    "beta_end",     "prior_blur_sigma", "prior_var",
       "data_range",    "phantom",      "seeds",          "outdir",
       "eta_sweep",     "anchor_angle_sweep_deg"},
      "config");

  ExperimentConfig c;
  c.name = detail::get_or<std::string>(j, "name", c.name);
  c.task = detail::parse_task(detail::get_or<std::string>(j, "task", "svct"));
  c.views = detail::get_or<Index>(j, "views", c.views);
  c.angle_span_deg = detail::get_or<double>(j, "angle_span_deg", c.angle_span_deg);
  c.detector_bins = detail::get_or<Index>(j, "detector_bins", c.detector_bins);
  c.sr_factor = detail::get_or<Index>(j, "sr_factor", c.sr_factor);
  c.noise_sigma = detail::get_or<double>(j, "noise_sigma", c.noise_sigma);
  c.solver = detail::parse_solver(detail::get_or<std::string>(j, "solver", "dds"));
  c.gamma = detail::get_or<double>(j, "gamma", c.gamma);
  c.cg_iters = detail::get_or<int>(j, "cg_iters", c.cg_iters);
  c.sirt_iters = detail::get_or<int>(j, "sirt_iters", c.sirt_iters);
  c.tv_lambda = detail::get_or<double>(j, "tv_lambda", c.tv_lambda);
  c.rho = detail::get_or<double>(j, "rho", c.rho);
  c.admm_iters = detail::get_or<int>(j, "admm_iters", c.admm_iters);
  c.strategy = detail::parse_strategy(detail::get_or<std::string>(j, "strategy", "slerp"));
  if (j.contains("anchor_angle_deg"))
    c.anchor_angle_deg = detail::get_or<double>(j, "anchor_angle_deg", 0.0);
  c.freeze_anchors = detail::get_or<bool>(j, "freeze_anchors", c.freeze_anchors);
  c.strategy_init = detail::get_or<bool>(j, "strategy_init", c.strategy_init);
  c.eta = detail::get_or<double>(j, "eta", c.eta);
  c.timesteps = detail::get_or<int>(j, "timesteps", c.timesteps);
  c.beta_start = detail::get_or<double>(j, "beta_start", c.beta_start);
  c.beta_end = detail::get_or<double>(j, "beta_end", c.beta_end);
  c.prior_blur_sigma = detail::get_or<double>(j, "prior_blur_sigma", c.prior_blur_sigma);
  c.prior_var = detail::get_or<double>(j, "prior_var", c.prior_var);
  c.data_range = detail::get_or<double>(j, "data_range", c.data_range);

  if (j.contains("phantom")) {
    const auto& p = j.at("phantom");
    if (!p.is_object()) throw ConfigError("config: phantom must be an object");
    detail::reject_unknown_keys(p, {"kind", "slices", "height", "width"}, "config.phantom");
    c.phantom.kind = detail::get_or<std::string>(p, "kind", c.phantom.kind);
    c.phantom.slices = detail::get_or<Index>(p, "slices", c.phantom.slices);
    c.phantom.height = detail::get_or<Index>(p, "height", c.phantom.height);
    c.phantom.width = detail::get_or<Index>(p, "width", c.phantom.width);
  }
  c.seeds = detail::get_or<std::vector<std::uint64_t>>(j, "seeds", c.seeds);
  c.outdir = detail::get_or<std::string>(j, "outdir", c.outdir);
  c.eta_sweep = detail::get_or<std::vector<double>>(j, "eta_sweep", c.eta_sweep);
  c.anchor_angle_sweep_deg =
      detail::get_or<std::vector<double>>(j, "anchor_angle_sweep_deg", c.anchor_angle_sweep_deg);

  c.validate();
  return c;
}

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_experiment_config(j);
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_experiment_config(text);
}

// ---- deterministic CSV plumbing ------------------------------------------------

// Versioned schema lines; golden tests pin these bytes.
inline constexpr const char* kMetricsSchemaLine = "# iscs-metrics-v1";
inline constexpr const char* kMetricsHeader =
    "seed,axis,psnr,ssim,sdiff_recon,sdiff_gt,delta,abs_delta";
inline constexpr const char* kTrajectorySchemaLine = "# iscs-trajectory-v1";
inline constexpr const char* kTrajectoryHeader = "t,psnr,sdiff,residual";
inline constexpr const char* kSweepSchemaLine = "# iscs-sweep-v1";
inline constexpr const char* kSweepHeader =
    "param,value,axis,psnr_mean,psnr_std,ssim_mean,ssim_std,sdiff_mean,sdiff_std,"
    "abs_delta_mean,abs_delta_std";

// Shortest round-trip decimal form: value-determined bytes, no locale, no
// fixed precision to go stale.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

struct AxisRow {
  const char* axis;
  double psnr, ssim;
};

inline std::vector<AxisRow> report_rows(const MetricReport& r) {
  return {{"axial", r.axial.psnr, r.axial.ssim},
          {"coronal", r.coronal.psnr, r.coronal.ssim},
          {"sagittal", r.sagittal.psnr, r.sagittal.ssim}};
}

inline void write_metric_row(std::ostream& os, const std::string& seed_label,
                             const AxisRow& ax, const MetricReport& r) {
  os << seed_label << ',' << ax.axis << ',' << format_double(ax.psnr) << ','
     << format_double(ax.ssim) << ',' << format_double(r.sdiff_recon) << ','
     << format_double(r.sdiff_reference) << ',' << format_double(r.sdiff_delta) << ','
     << format_double(r.sdiff_abs_delta) << '\n';
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw FormatError("short write to " + path.string());
}

inline double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace detail

// ---- runner --------------------------------------------------------------------

struct SeedResult {
  std::uint64_t seed = 0;
  MetricReport report;
};

struct LegResult {
  std::string leg;  // "" for a plain run, "eta0.25" / "angle90" for sweeps
  double param_value = 0.0;
  std::vector<SeedResult> seeds;
};

struct ExperimentResult {
  std::filesystem::path root;  // <outdir>/<task>/<solver>/<strategy>
  std::vector<LegResult> legs;
};

inline std::filesystem::path experiment_root(const ExperimentConfig& cfg) {
  return std::filesystem::path(cfg.outdir) / to_string(cfg.task) / to_string(cfg.solver) /
         to_string(cfg.strategy);
}

namespace detail {

// Everything one seed needs, shared read-only across seeds.
struct ExperimentSetup {
  ExperimentConfig cfg;
  Volume ground_truth;
  GaussianPrior prior;
  NoiseSchedule schedule;
  TomoGeometry geometry;  // tomography tasks only
  std::shared_ptr<const LinearOperator> op;
  std::uint64_t stream = 0;
};

template <typename F>
auto run_step(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw Error(std::string("step '") + what + "': " + e.what());
  }
}

inline ExperimentSetup build_setup(const ExperimentConfig& cfg) {
  ExperimentSetup s;
  s.cfg = cfg;
  s.stream = fnv1a64(cfg.name);
  s.ground_truth = run_step("phantom", [&] {
    return generate_phantom(
        phantom_preset(cfg.phantom.kind, cfg.phantom.slices, cfg.phantom.height,
                       cfg.phantom.width));
  });
  s.prior = run_step("prior", [&] {
    return prior_from_volume(s.ground_truth, cfg.prior_blur_sigma, cfg.prior_var);
  });
  s.schedule = run_step("schedule", [&] {
    return schedule_linear(cfg.timesteps, cfg.beta_start, cfg.beta_end);
  });
  run_step("operator", [&] {
    const Dims dims = s.ground_truth.dims();
    switch (cfg.task) {
      case TaskKind::Svct:
        s.geometry = sparse_view_geometry(dims.h, dims.w, cfg.views, cfg.detector_bins);
        s.op = std::make_shared<RadonOperator>(s.geometry, dims.s, cfg.sirt_iters);
        break;
      case TaskKind::Lact:
        s.geometry =
            limited_angle_geometry(dims.h, dims.w, cfg.views, cfg.angle_span_deg,
                                   cfg.detector_bins);
        s.op = std::make_shared<RadonOperator>(s.geometry, dims.s, cfg.sirt_iters);
        break;
      case TaskKind::Sr:
        s.op = std::make_shared<ZDownsampleOperator>(dims, cfg.sr_factor);
        break;
    }
    return 0;
  });
  return s;
}

struct SeedArtifacts {
  Volume recon;
  std::vector<TrajectoryPoint> trajectory;
  MetricReport report;
};

inline SeedArtifacts run_seed(const ExperimentSetup& s, std::uint64_t seed, double eta,
                              std::optional<double> anchor_angle_deg) {
  const ExperimentConfig& cfg = s.cfg;
  NormalStream rng(seed, s.stream);

  Measurement y{s.op->apply(s.ground_truth), 0.0};
  run_step("measurement", [&] {
    add_measurement_noise(y, cfg.noise_sigma, rng);
    return 0;
  });

  SeedArtifacts art;
  switch (cfg.solver) {
    case SolverKind::Dds:
    case SolverKind::Ddnm: {
      GaussianDenoiser den(s.prior);
      ReconstructOptions opts;
      opts.eta = eta;
      opts.strategy = cfg.strategy;
      opts.anchor_angle_deg = anchor_angle_deg;
      opts.freeze_anchors = cfg.freeze_anchors;
      opts.strategy_init = cfg.strategy_init;
      FidelityConfig fid;
      if (cfg.solver == SolverKind::Dds)
        fid = DdsFidelity{cfg.gamma, cfg.cg_iters};
      else
        fid = DdnmFidelity{};
      Reconstruction rec = run_step("reconstruct", [&] {
        return reconstruct(*s.op, y, den, s.schedule, fid, opts, rng, &s.ground_truth);
      });
      art.recon = std::move(rec.x);
      art.trajectory = std::move(rec.trajectory);
      break;
    }
    case SolverKind::Fbp:
      art.recon = run_step("fbp", [&] { return fbp(s.geometry, y.data); });
      break;
    case SolverKind::Sirt:
      art.recon = run_step("sirt", [&] { return s.op->pinv(y.data); });
      break;
    case SolverKind::AdmmTv: {
      AdmmResult res = run_step("admm_tv", [&] {
        return admm_tv(*s.op, y.data, cfg.tv_lambda, cfg.rho, cfg.admm_iters, cfg.cg_iters);
      });
      art.recon = std::move(res.x);
      break;
    }
  }
  art.report = run_step("metrics", [&] {
    return compute_metric_report(art.recon, s.ground_truth, cfg.data_range);
  });
  return art;
}

inline void write_seed_outputs(const std::filesystem::path& dir, std::uint64_t seed,
                               const SeedArtifacts& art) {
  std::filesystem::create_directories(dir);
  volume_write(art.recon, dir / "recon.ivf", VolumeDtype::F64);

  std::string m;
  m += kMetricsSchemaLine;
  m += '\n';
  m += kMetricsHeader;
  m += '\n';
  {
    std::ostringstream os;
    for (const AxisRow& ax : report_rows(art.report))
      write_metric_row(os, std::to_string(seed), ax, art.report);
    m += os.str();
  }
  write_text_file(dir / "metrics.csv", m);

  std::string t;
  t += kTrajectorySchemaLine;
  t += '\n';
  t += kTrajectoryHeader;
  t += '\n';
  {
    std::ostringstream os;
    for (const TrajectoryPoint& pt : art.trajectory)
      os << pt.t << ',' << format_double(pt.psnr_vs_gt) << ','
         << format_double(pt.sdiff_value) << ',' << format_double(pt.residual) << '\n';
    t += os.str();
  }
  write_text_file(dir / "trajectory.csv", t);
}

inline void write_leg_aggregate(const std::filesystem::path& leg_dir, const LegResult& leg) {
  std::ostringstream os;
  os << kMetricsSchemaLine << '\n' << kMetricsHeader << '\n';
  for (const SeedResult& sr : leg.seeds)
    for (const AxisRow& ax : report_rows(sr.report))
      write_metric_row(os, std::to_string(sr.seed), ax, sr.report);

  // mean / std per axis over seeds
  for (const std::string& stat : {std::string("mean"), std::string("std")}) {
    for (int a = 0; a < 3; ++a) {
      std::vector<double> psnr_v, ssim_v, sr_v, sg_v, d_v, ad_v;
      const char* axis = nullptr;
      for (const SeedResult& sr : leg.seeds) {
        const AxisRow ax = report_rows(sr.report)[static_cast<size_t>(a)];
        axis = ax.axis;
        psnr_v.push_back(ax.psnr);
        ssim_v.push_back(ax.ssim);
        sr_v.push_back(sr.report.sdiff_recon);
        sg_v.push_back(sr.report.sdiff_reference);
        d_v.push_back(sr.report.sdiff_delta);
        ad_v.push_back(sr.report.sdiff_abs_delta);
      }
      auto stat_of = [&](const std::vector<double>& v) {
        const double m = mean_of(v);
        return stat == "mean" ? m : sample_std(v, m);
      };
      os << stat << ',' << axis << ',' << format_double(stat_of(psnr_v)) << ','
         << format_double(stat_of(ssim_v)) << ',' << format_double(stat_of(sr_v)) << ','
         << format_double(stat_of(sg_v)) << ',' << format_double(stat_of(d_v)) << ','
         << format_double(stat_of(ad_v)) << '\n';
    }
  }
  write_text_file(leg_dir / "metrics.csv", os.str());
}

inline void write_sweep_summary(const std::filesystem::path& root, const char* param,
                                const std::vector<LegResult>& legs) {
  std::ostringstream os;
  os << kSweepSchemaLine << '\n' << kSweepHeader << '\n';
  for (const LegResult& leg : legs) {
    for (int a = 0; a < 3; ++a) {
      std::vector<double> psnr_v, ssim_v, sd_v, ad_v;
      const char* axis = nullptr;
      for (const SeedResult& sr : leg.seeds) {
        const AxisRow ax = report_rows(sr.report)[static_cast<size_t>(a)];
        axis = ax.axis;
        psnr_v.push_back(ax.psnr);
        ssim_v.push_back(ax.ssim);
        sd_v.push_back(sr.report.sdiff_recon);
        ad_v.push_back(sr.report.sdiff_abs_delta);
      }
      const double pm = mean_of(psnr_v), sm = mean_of(ssim_v), dm = mean_of(sd_v),
                   am = mean_of(ad_v);
      os << param << ',' << format_double(leg.param_value) << ',' << axis << ','
         << format_double(pm) << ',' << format_double(sample_std(psnr_v, pm)) << ','
         << format_double(sm) << ',' << format_double(sample_std(ssim_v, sm)) << ','
         << format_double(dm) << ',' << format_double(sample_std(sd_v, dm)) << ','
         << format_double(am) << ',' << format_double(sample_std(ad_v, am)) << '\n';
    }
  }
  write_text_file(root / "sweep_metrics.csv", os.str());
}

}  // namespace detail

// Runs all legs and seeds, writes every output file, and returns the metric
// reports. Throws iscs::Error with step context on the first failure; the
// caller owns cleanup policy (run_experiment below removes partial outputs).
inline ExperimentResult run_experiment_collect(const ExperimentConfig& cfg,
                                               std::ostream* log = nullptr) {
  cfg.validate();
  const detail::ExperimentSetup setup = detail::build_setup(cfg);

  struct Leg {
    std::string name;
    double value = 0.0;
    double eta;
    std::optional<double> anchor_angle_deg;
  };
  std::vector<Leg> legs;
  if (!cfg.eta_sweep.empty()) {
    for (double e : cfg.eta_sweep)
      legs.push_back({"eta" + format_double(e), e, e, cfg.anchor_angle_deg});
  } else if (!cfg.anchor_angle_sweep_deg.empty()) {
    for (double a : cfg.anchor_angle_sweep_deg)
      legs.push_back({"angle" + format_double(a), a, cfg.eta, a});
  } else {
    legs.push_back({"", 0.0, cfg.eta, cfg.anchor_angle_deg});
  }

  ExperimentResult result;
  result.root = experiment_root(cfg);
  for (const Leg& leg : legs) {
    const std::filesystem::path leg_dir =
        leg.name.empty() ? result.root : result.root / leg.name;
    std::filesystem::create_directories(leg_dir);

    // Seeds are independent streams writing to disjoint directories, so they
    // can run concurrently; results are collected in configured order.
    std::vector<std::future<detail::SeedArtifacts>> futs;
    futs.reserve(cfg.seeds.size());
    for (std::uint64_t seed : cfg.seeds)
      futs.push_back(std::async(std::launch::async, [&, seed] {
        return detail::run_seed(setup, seed, leg.eta, leg.anchor_angle_deg);
      }));

    LegResult lr;
    lr.leg = leg.name;
    lr.param_value = leg.value;
    for (size_t i = 0; i < futs.size(); ++i) {
      detail::SeedArtifacts art = futs[i].get();
      const std::uint64_t seed = cfg.seeds[i];
      detail::run_step("write outputs", [&] {
        detail::write_seed_outputs(leg_dir / ("seed" + std::to_string(seed)), seed, art);
        return 0;
      });
      if (log)
        *log << cfg.name << (leg.name.empty() ? "" : " " + leg.name) << " seed " << seed
             << ": axial psnr " << format_double(art.report.axial.psnr) << " dB\n";
      lr.seeds.push_back({seed, std::move(art.report)});
    }
    detail::run_step("aggregate", [&] {
      detail::write_leg_aggregate(leg_dir, lr);
      return 0;
    });
    result.legs.push_back(std::move(lr));
  }

  if (!cfg.eta_sweep.empty())
    detail::write_sweep_summary(result.root, "eta", result.legs);
  else if (!cfg.anchor_angle_sweep_deg.empty())
    detail::write_sweep_summary(result.root, "anchor_angle_deg", result.legs);

  return result;
}

// CLI-facing wrapper: on failure prints the step context, removes the
// partial output tree of this run, and returns a nonzero status.
inline int run_experiment(const ExperimentConfig& cfg, bool quiet = false,
                          std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    run_experiment_collect(cfg, quiet ? nullptr : &out);
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    std::error_code ec;
    std::filesystem::remove_all(experiment_root(cfg), ec);
    if (ec) err << "warning: could not remove partial outputs: " << ec.message() << '\n';
    return 1;
  }
}

}  // namespace iscs
