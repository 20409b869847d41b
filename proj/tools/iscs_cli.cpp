// Command-line front end: phantom generation, experiment runs, RNG sanity
// checks, and metric reports over IVF1 volume files.

#include <cmath>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iscs/experiment.hpp"

namespace {

int cmd_phantom(const std::string& kind, iscs::Index slices, iscs::Index height,
                iscs::Index width, const std::string& out) {
  const iscs::Volume v =
      iscs::generate_phantom(iscs::phantom_preset(kind, slices, height, width));
  iscs::volume_write(v, out, iscs::VolumeDtype::F64);
  std::cout << "wrote " << out << " (" << slices << "x" << height << "x" << width << ", "
            << kind << ")\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& outdir,
            const std::vector<std::uint64_t>& seeds, bool quiet) {
  iscs::ExperimentConfig cfg = iscs::load_experiment_config(config_path);
  if (!outdir.empty()) cfg.outdir = outdir;
  if (!seeds.empty()) cfg.seeds = seeds;
  cfg.validate();
  return iscs::run_experiment(cfg, quiet);
}

int cmd_noise_check(iscs::Index dim, iscs::Index draws, iscs::Index pairs,
                    std::uint64_t seed) {
  iscs::NormalStream rng(seed, iscs::fnv1a64("noise-check"));

  const iscs::AnnulusReport ann = iscs::annulus_check(dim, draws, 4.0, rng);
  const bool ann_ok = ann.fraction_outside <= 0.05;
  std::cout << "annulus: dim=" << ann.dim << " draws=" << ann.draws
            << " mean_norm=" << iscs::format_double(ann.mean_norm)
            << " expected=" << iscs::format_double(ann.expected_norm)
            << " fraction_outside=" << iscs::format_double(ann.fraction_outside)
            << " (tol 0.05) " << (ann_ok ? "PASS" : "FAIL") << '\n';

  const iscs::AngleConcentrationReport ang =
      iscs::angle_concentration_check(dim, pairs, rng);
  // Gaussian pairs in dimension d concentrate at 90 degrees with spread
  // ~ (180/pi)/sqrt(d); allow 35% slack on the spread and a mean tolerance
  // that shrinks with the number of pairs.
  const double std_theory = (180.0 / std::numbers::pi) / std::sqrt(static_cast<double>(dim));
  const double std_tol = 1.35 * std_theory;
  const double mean_tol = 6.0 * std_theory / std::sqrt(static_cast<double>(pairs));
  const bool ang_ok =
      std::abs(ang.mean_deg - 90.0) <= mean_tol && ang.std_deg <= std_tol;
  std::cout << "angle: dim=" << ang.dim << " pairs=" << ang.pairs
            << " mean=" << iscs::format_double(ang.mean_deg) << "deg (tol +-"
            << iscs::format_double(mean_tol)
            << ") std=" << iscs::format_double(ang.std_deg) << "deg (tol "
            << iscs::format_double(std_tol) << ") " << (ang_ok ? "PASS" : "FAIL") << '\n';

  const bool ok = ann_ok && ang_ok;
  std::cout << "noise-check: " << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : 1;
}

int cmd_metrics(const std::string& recon_path, const std::string& reference_path,
                double data_range) {
  const iscs::Volume recon = iscs::volume_read(recon_path);
  const iscs::Volume reference = iscs::volume_read(reference_path);
  const iscs::MetricReport r = iscs::compute_metric_report(recon, reference, data_range);
  std::cout << iscs::kMetricsSchemaLine << '\n' << iscs::kMetricsHeader << '\n';
  for (const auto& [axis, m] : {std::pair{"axial", r.axial},
                                std::pair{"coronal", r.coronal},
                                std::pair{"sagittal", r.sagittal}})
    std::cout << "-," << axis << ',' << iscs::format_double(m.psnr) << ','
              << iscs::format_double(m.ssim) << ',' << iscs::format_double(r.sdiff_recon)
              << ',' << iscs::format_double(r.sdiff_reference) << ','
              << iscs::format_double(r.sdiff_delta) << ','
              << iscs::format_double(r.sdiff_abs_delta) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slice-consistent diffusion reconstruction toolkit"};
  app.require_subcommand(1);

  auto* ph = app.add_subcommand("phantom", "Generate a phantom volume as an IVF1 file");
  std::string ph_kind = "varying_ellipses";
  iscs::Index ph_slices = 48, ph_height = 64, ph_width = 64;
  std::string ph_out = "phantom.ivf";
  ph->add_option("--kind", ph_kind,
                 "Preset: varying_ellipses, extruded_ellipses, step_lesion")
      ->capture_default_str();
  ph->add_option("--slices", ph_slices, "Slice count")->capture_default_str();
  ph->add_option("--height", ph_height, "Slice height in pixels")->capture_default_str();
  ph->add_option("--width", ph_width, "Slice width in pixels")->capture_default_str();
  ph->add_option("--out", ph_out, "Output IVF1 path")->capture_default_str();

  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  std::string run_config, run_outdir;
  std::vector<std::uint64_t> run_seeds;
  bool run_quiet = false;
  run->add_option("--config", run_config, "JSON config path")->required();
  run->add_option("--outdir", run_outdir, "Override the config's output directory");
  run->add_option("--seeds", run_seeds, "Override the config's seed list, e.g. 1,2,3")
      ->delimiter(',');
  run->add_flag("--quiet", run_quiet, "Suppress progress output");

  auto* nc = app.add_subcommand(
      "noise-check", "Validate the Gaussian sampler: norm annulus and angle concentration");
  iscs::Index nc_dim = 4096, nc_draws = 200, nc_pairs = 1000;
  std::uint64_t nc_seed = 1;
  nc->add_option("--dim", nc_dim, "Vector dimension")->capture_default_str();
  nc->add_option("--draws", nc_draws, "Draws for the annulus check")->capture_default_str();
  nc->add_option("--pairs", nc_pairs, "Pairs for the angle check")->capture_default_str();
  nc->add_option("--seed", nc_seed, "RNG seed")->capture_default_str();

  auto* mt = app.add_subcommand("metrics", "Print a metric report for two IVF1 volumes");
  std::string mt_recon, mt_reference;
  double mt_range = 1.0;
  mt->add_option("recon", mt_recon, "Reconstruction IVF1 path")->required();
  mt->add_option("reference", mt_reference, "Reference IVF1 path")->required();
  mt->add_option("--data-range", mt_range, "Intensity range for PSNR/SSIM")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
    if (*ph) return cmd_phantom(ph_kind, ph_slices, ph_height, ph_width, ph_out);
    if (*run) return cmd_run(run_config, run_outdir, run_seeds, run_quiet);
    if (*nc) return cmd_noise_check(nc_dim, nc_draws, nc_pairs, nc_seed);
    if (*mt) return cmd_metrics(mt_recon, mt_reference, mt_range);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
