#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"

#include "scatter/analysis.hpp"
#include "scatter/errors.hpp"
#include "scatter/histogram.hpp"
#include "scatter/io.hpp"
#include "scatter/random.hpp"
#include "scatter/simulate.hpp"
#include "scatter/theory.hpp"
#include "scatter/units.hpp"
#include "scatter/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace scatter;

fs::path resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("PHOTONSCATTER_OUT"); env != nullptr && *env != '\0')
    return env;
  return ".";
}

void check_config_fields(const json& obj, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError("config: document must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const auto a : allowed) known = known || item.key() == a;
    if (!known) throw ConfigError("config: unknown field /" + item.key());
  }
}

Eigen::ArrayXd to_array(const std::vector<double>& v) {
  Eigen::ArrayXd a(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) a[static_cast<Eigen::Index>(i)] = v[i];
  return a;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void report(const fs::path& p) { std::cout << "wrote " << p.string() << '\n'; }

// ---------------------------------------------------------------- theory --

struct TheoryOptions {
  std::optional<double> lambda;
  double gamma0_mhz = 6.07;
  std::vector<double> ratios;
  std::vector<double> grid;
  double tmax_ns = 100.0;
  double dt_ns = 0.5;
  std::string out;
  std::string config_path;
};

void run_theory(TheoryOptions opts, const CLI::App* cmd) {
  if (cmd->count("--gammap-over-gamma0") > 0 && cmd->count("--gammap-grid") > 0)
    throw ConfigError("use either --gammap-over-gamma0 or --gammap-grid, not both");
  if (!opts.config_path.empty()) {
    const json cfg = io::unwrap_config(io::read_json(opts.config_path), "theory");
    check_config_fields(
        cfg, {"schema", "lambda", "gamma0_mhz", "gammap_over_gamma0", "tmax_ns", "dt_ns"});
    if (cmd->count("--lambda") == 0 && cfg.contains("lambda"))
      opts.lambda = cfg.at("lambda").get<double>();
    if (cmd->count("--gamma0-mhz") == 0 && cfg.contains("gamma0_mhz"))
      opts.gamma0_mhz = cfg.at("gamma0_mhz").get<double>();
    if (cmd->count("--gammap-over-gamma0") == 0 && cmd->count("--gammap-grid") == 0 &&
        cfg.contains("gammap_over_gamma0"))
      opts.ratios = cfg.at("gammap_over_gamma0").get<std::vector<double>>();
    if (cmd->count("--tmax-ns") == 0 && cfg.contains("tmax_ns"))
      opts.tmax_ns = cfg.at("tmax_ns").get<double>();
    if (cmd->count("--dt-ns") == 0 && cfg.contains("dt_ns"))
      opts.dt_ns = cfg.at("dt_ns").get<double>();
  }
  if (!opts.lambda) throw ConfigError("--lambda is required (directly or via --config)");

  std::vector<double> ratios = opts.ratios;
  if (!opts.grid.empty()) {
    const double lo = opts.grid[0];
    const double hi = opts.grid[1];
    const int n = static_cast<int>(std::llround(opts.grid[2]));
    if (!(lo > 0.0) || !(hi > lo) || n < 2)
      throw ConfigError("--gammap-grid needs 0 < lo < hi and count >= 2");
    ratios.clear();
    for (int i = 0; i < n; ++i)
      ratios.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
  }
  if (ratios.empty()) ratios = {1.96, 2.6, 3.5, 4.5, 6.09};
  for (double r : ratios)
    if (!(r > 0.0) || !std::isfinite(r))
      throw ConfigError("--gammap-over-gamma0 values must be positive");
  if (!(opts.tmax_ns > 0.0)) throw ConfigError("--tmax-ns must be positive");
  if (!(opts.dt_ns > 0.0)) throw ConfigError("--dt-ns must be positive");

  AtomParams atom{linewidth_mhz_to_angular(opts.gamma0_mhz), *opts.lambda};
  atom.validate();

  const Eigen::Index ng = static_cast<Eigen::Index>(ratios.size());
  const Eigen::ArrayXd rho = to_array(ratios);
  Eigen::ArrayXd eps(ng), pmax(ng), tpeak_ns(ng);
  for (Eigen::Index i = 0; i < ng; ++i) {
    const PhotonParams photon{atom.gamma0 * rho[i], 0.0};
    eps[i] = theory::scattering_probability(atom, photon);
    pmax[i] = theory::peak_excitation(atom, photon);
    tpeak_ns[i] = theory::peak_time(atom, photon) / ns;
  }

  const Eigen::Index nt =
      static_cast<Eigen::Index>(std::floor((opts.tmax_ns + 10.0) / opts.dt_ns)) + 1;
  Eigen::ArrayXd long_rho(ng * nt), long_t(ng * nt), long_pe(ng * nt);
  for (Eigen::Index i = 0; i < ng; ++i) {
    const PhotonParams photon{atom.gamma0 * rho[i], 0.0};
    for (Eigen::Index j = 0; j < nt; ++j) {
      const double t_ns = -10.0 + opts.dt_ns * static_cast<double>(j);
      long_rho[i * nt + j] = rho[i];
      long_t[i * nt + j] = t_ns;
      long_pe[i * nt + j] = theory::excited_population(t_ns * ns, atom, photon);
    }
  }

  const std::vector<std::string> meta{"lambda=" + fmt(*opts.lambda),
                                      "gamma0_mhz=" + fmt(opts.gamma0_mhz)};
  const fs::path dir = resolve_out_dir(opts.out);
  const fs::path eps_path = dir / "epsilon_vs_bandwidth.csv";
  const fs::path exc_path = dir / "excitation_vs_time.csv";
  const fs::path peak_path = dir / "peak_vs_bandwidth.csv";
  io::atomic_write(eps_path,
                   io::table_csv(meta, "gammap_over_gamma0,epsilon", {rho, eps}));
  io::atomic_write(exc_path, io::table_csv(meta, "gammap_over_gamma0,t_ns,p_e",
                                           {long_rho, long_t, long_pe}));
  io::atomic_write(peak_path, io::table_csv(meta, "gammap_over_gamma0,p_e_max,peak_time_ns",
                                            {rho, pmax, tpeak_ns}));

  const json config{{"schema", 1},
                    {"lambda", *opts.lambda},
                    {"gamma0_mhz", opts.gamma0_mhz},
                    {"gammap_over_gamma0", ratios},
                    {"tmax_ns", opts.tmax_ns},
                    {"dt_ns", opts.dt_ns}};
  const fs::path man_path = dir / "manifest_theory.json";
  io::write_json(man_path,
                 io::make_manifest("theory", config, 0, {}, {eps_path, exc_path, peak_path}));
  report(eps_path);
  report(exc_path);
  report(peak_path);
  report(man_path);
}

// -------------------------------------------------------------- simulate --

struct SimulateOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void run_simulate(const SimulateOptions& opts) {
  json doc = io::unwrap_config(io::read_json(opts.config_path), "simulate");
  if (opts.seed) doc["seed"] = *opts.seed;
  const json resolved = io::resolved_sim_config_json(doc);
  const SimConfig config = io::sim_config_from_json(resolved);

  SimDiagnostics diag;
  const Histogram reference = simulate_reference(config, &diag);
  const Histogram with_atom = simulate_with_atom(config, &diag);
  if (diag.truncation_warning)
    std::fprintf(stderr,
                 "warning: %.3g%% of the photon envelope falls outside the histogram "
                 "window; eta_f and extinction will be biased\n",
                 100.0 * (1.0 - diag.envelope_coverage));
  if (diag.clamped_bins > 0)
    std::fprintf(stderr, "note: clamped %lld tiny negative bin means to zero\n",
                 static_cast<long long>(diag.clamped_bins));

  const fs::path dir = resolve_out_dir(opts.out);
  const fs::path ref_path = dir / "reference.csv";
  const fs::path atom_path = dir / "with_atom.csv";
  io::write_histogram_csv(ref_path, reference, config.seed);
  io::write_histogram_csv(atom_path, with_atom, config.seed);
  const fs::path man_path = dir / "manifest_simulate.json";
  io::write_json(man_path, io::make_manifest("simulate", resolved, config.seed,
                                             {fs::path(opts.config_path)},
                                             {ref_path, atom_path}));
  report(ref_path);
  report(atom_path);
  report(man_path);
}

// --------------------------------------------------------------- analyze --

struct AnalyzeOptions {
  std::string ref_path;
  std::string atom_path;
  std::vector<double> window;
  std::vector<double> fit_window;
  int bootstrap = 0;
  std::uint64_t seed = 0;
  double lambda = 0.033;
  double gamma0_mhz = 6.07;
  std::string out;
  std::string config_path;
};

void run_analyze(AnalyzeOptions opts, const CLI::App* cmd) {
  if (!opts.config_path.empty()) {
    const json cfg = io::unwrap_config(io::read_json(opts.config_path), "analyze");
    check_config_fields(cfg, {"schema", "reference_csv", "with_atom_csv", "window_s",
                              "fit_window_s", "bootstrap_resamples", "seed", "lambda",
                              "gamma0_mhz"});
    if (cmd->count("reference") == 0 && cfg.contains("reference_csv"))
      opts.ref_path = cfg.at("reference_csv").get<std::string>();
    if (cmd->count("with_atom") == 0 && cfg.contains("with_atom_csv"))
      opts.atom_path = cfg.at("with_atom_csv").get<std::string>();
    if (cmd->count("--window") == 0 && cfg.contains("window_s"))
      opts.window = cfg.at("window_s").get<std::vector<double>>();
    if (cmd->count("--fit-window") == 0 && cfg.contains("fit_window_s"))
      opts.fit_window = cfg.at("fit_window_s").get<std::vector<double>>();
    if (cmd->count("--bootstrap") == 0 && cfg.contains("bootstrap_resamples"))
      opts.bootstrap = cfg.at("bootstrap_resamples").get<int>();
    if (cmd->count("--seed") == 0 && cfg.contains("seed"))
      opts.seed = cfg.at("seed").get<std::uint64_t>();
    if (cmd->count("--lambda") == 0 && cfg.contains("lambda"))
      opts.lambda = cfg.at("lambda").get<double>();
    if (cmd->count("--gamma0-mhz") == 0 && cfg.contains("gamma0_mhz"))
      opts.gamma0_mhz = cfg.at("gamma0_mhz").get<double>();
  }
  if (opts.ref_path.empty() || opts.atom_path.empty())
    throw ConfigError("need reference and with_atom CSV paths (positional or via --config)");

  AnalysisOptions options;
  if (!opts.window.empty()) options.sum_window = {opts.window[0], opts.window[1]};
  if (!opts.fit_window.empty())
    options.fit_window = {opts.fit_window[0], opts.fit_window[1]};
  options.bootstrap_resamples = opts.bootstrap;
  options.seed = opts.seed;
  AtomParams atom{linewidth_mhz_to_angular(opts.gamma0_mhz), opts.lambda};
  atom.validate();

  const Histogram reference = io::read_histogram_csv(opts.ref_path);
  const Histogram with_atom = io::read_histogram_csv(opts.atom_path);
  const AnalysisResult result = analyze(reference, with_atom, atom, options);

  const fs::path dir = resolve_out_dir(opts.out);
  json doc = io::analysis_to_json(result);
  doc["provenance"] = json{
      {"command", "analyze"},
      {"version", version_string},
      {"reference_csv",
       {{"path", opts.ref_path}, {"fnv1a64", io::hash_file(opts.ref_path)}}},
      {"with_atom_csv",
       {{"path", opts.atom_path}, {"fnv1a64", io::hash_file(opts.atom_path)}}},
  };
  const fs::path json_path = dir / "analysis.json";
  io::write_json(json_path, doc);
  const fs::path exc_path = dir / "excitation.csv";
  io::atomic_write(
      exc_path,
      io::table_csv({"lambda=" + fmt(opts.lambda), "gamma0_mhz=" + fmt(opts.gamma0_mhz)},
                    "t_ns,p_e,sigma",
                    {result.excitation.times / ns, result.excitation.p_e,
                     result.excitation.sigma}));
  const json mconfig{{"schema", 1},
                     {"reference_csv", opts.ref_path},
                     {"with_atom_csv", opts.atom_path},
                     {"window_s", {options.sum_window.t_min, options.sum_window.t_max}},
                     {"fit_window_s", {options.fit_window.t_min, options.fit_window.t_max}},
                     {"bootstrap_resamples", options.bootstrap_resamples},
                     {"seed", options.seed},
                     {"lambda", opts.lambda},
                     {"gamma0_mhz", opts.gamma0_mhz}};
  const fs::path man_path = dir / "manifest_analyze.json";
  io::write_json(man_path,
                 io::make_manifest("analyze", mconfig, options.seed,
                                   {fs::path(opts.ref_path), fs::path(opts.atom_path)},
                                   {json_path, exc_path}));

  const double g0 = atom.gamma0;
  std::printf("eta_f       %.6g\n", result.eta_f);
  std::printf("gammap      %.6g gamma0 (+/- %.3g), %.6g MHz, reduced chi2 %.4g\n",
              result.fit.gammap_hat / g0, result.fit.sigma_gammap / g0,
              angular_to_linewidth_mhz(result.fit.gammap_hat),
              result.fit.reduced_chi_square);
  std::printf("epsilon     %.6g +/- %.3g (closed form at fitted gammap: %.6g)\n",
              result.extinction.epsilon_hat, result.extinction.sigma,
              result.epsilon_predicted);
  std::printf("peak P_e    %.6g +/- %.3g at %.6g ns (closed form: %.6g)\n",
              result.peak.value, result.peak.sigma, result.peak.time / ns,
              result.peak_predicted);
  report(json_path);
  report(exc_path);
  report(man_path);
}

// ------------------------------------------------------ reproduce-figures --

struct ReproduceOptions {
  std::int64_t heralds = 10000000;
  int bootstrap = 500;
  std::uint64_t seed = 1;
  std::string out;
  std::string config_path;
};

std::string rho_tag(double rho) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.4g", rho);
  return buf;
}

void run_reproduce(ReproduceOptions opts, const CLI::App* cmd) {
  if (!opts.config_path.empty()) {
    const json cfg = io::unwrap_config(io::read_json(opts.config_path), "reproduce-figures");
    check_config_fields(cfg, {"schema", "n_heralds", "bootstrap_resamples", "seed"});
    if (cmd->count("--heralds") == 0 && cfg.contains("n_heralds"))
      opts.heralds = cfg.at("n_heralds").get<std::int64_t>();
    if (cmd->count("--bootstrap") == 0 && cfg.contains("bootstrap_resamples"))
      opts.bootstrap = cfg.at("bootstrap_resamples").get<int>();
    if (cmd->count("--seed") == 0 && cfg.contains("seed"))
      opts.seed = cfg.at("seed").get<std::uint64_t>();
  }
  if (opts.heralds < 1) throw ConfigError("--heralds must be positive");

  const fs::path dir = resolve_out_dir(opts.out);
  const double lambda = 0.033;
  const double gamma0_mhz = 6.07;
  const AtomParams atom{linewidth_mhz_to_angular(gamma0_mhz), lambda};
  const std::vector<double> rhos{6.09, 4.5, 3.5, 2.6, 1.96};
  const std::vector<std::string> meta{"lambda=" + fmt(lambda),
                                      "gamma0_mhz=" + fmt(gamma0_mhz)};

  std::vector<fs::path> outputs;
  const Eigen::Index nb = static_cast<Eigen::Index>(rhos.size());
  Eigen::ArrayXd col_rho(nb), col_fit(nb), col_eps(nb), col_eps_sig(nb), col_peak(nb),
      col_peak_sig(nb);
  json bands = json::array();
  double eps_narrow = 0.0, eps_narrow_sig = 0.0, eps_broad = 0.0, eps_broad_sig = 0.0;
  double peak_narrow = 0.0, peak_narrow_sig = 0.0, peak_broad = 0.0, peak_broad_sig = 0.0;

  for (Eigen::Index i = 0; i < nb; ++i) {
    const double rho = rhos[static_cast<std::size_t>(i)];
    SimConfig config;
    config.atom = atom;
    config.photon = {atom.gamma0 * rho, 0.0};
    config.n_heralds = opts.heralds;
    config.seed = derive_stream(opts.seed, static_cast<std::uint64_t>(i) + 1);
    const Histogram reference = simulate_reference(config);
    const Histogram with_atom = simulate_with_atom(config);

    AnalysisOptions aopts;
    aopts.bootstrap_resamples = opts.bootstrap;
    aopts.seed = config.seed;
    const AnalysisResult res = analyze(reference, with_atom, atom, aopts);
    const double eps_sigma =
        res.has_bootstrap ? res.bootstrap.epsilon_sigma : res.extinction.sigma;

    col_rho[i] = rho;
    col_fit[i] = res.fit.gammap_hat / atom.gamma0;
    col_eps[i] = res.extinction.epsilon_hat;
    col_eps_sig[i] = eps_sigma;
    col_peak[i] = res.peak.value;
    col_peak_sig[i] = res.peak.sigma;
    const PhotonParams nominal{atom.gamma0 * rho, 0.0};
    bands.push_back(json{
        {"gammap_over_gamma0", rho},
        {"gammap_fitted_over_gamma0", res.fit.gammap_hat / atom.gamma0},
        {"eta_f", res.eta_f},
        {"epsilon", res.extinction.epsilon_hat},
        {"epsilon_sigma", eps_sigma},
        {"epsilon_predicted", theory::scattering_probability(atom, nominal)},
        {"peak", res.peak.value},
        {"peak_sigma", res.peak.sigma},
        {"peak_predicted", theory::peak_excitation(atom, nominal)},
    });

    const bool anchor = rho == 1.96 || rho == 6.09;
    if (rho == 1.96) {
      eps_narrow = res.extinction.epsilon_hat;
      eps_narrow_sig = eps_sigma;
      peak_narrow = res.peak.value;
      peak_narrow_sig = res.peak.sigma;
    } else if (rho == 6.09) {
      eps_broad = res.extinction.epsilon_hat;
      eps_broad_sig = eps_sigma;
      peak_broad = res.peak.value;
      peak_broad_sig = res.peak.sigma;
    }
    if (anchor) {
      const std::string tag = rho_tag(rho);
      const fs::path ref_path = dir / ("histogram_reference_gp" + tag + ".csv");
      const fs::path atom_path = dir / ("histogram_with_atom_gp" + tag + ".csv");
      io::write_histogram_csv(ref_path, reference, config.seed);
      io::write_histogram_csv(atom_path, with_atom, config.seed);
      outputs.push_back(ref_path);
      outputs.push_back(atom_path);

      const fs::path exc_path = dir / ("excitation_gp" + tag + ".csv");
      io::atomic_write(exc_path,
                       io::table_csv(meta, "t_ns,p_e,sigma",
                                     {res.excitation.times / ns, res.excitation.p_e,
                                      res.excitation.sigma}));
      outputs.push_back(exc_path);

      const Eigen::Index ntt = 1101;
      Eigen::ArrayXd tt(ntt), pe(ntt);
      for (Eigen::Index j = 0; j < ntt; ++j) {
        tt[j] = -10.0 + 0.1 * static_cast<double>(j);
        pe[j] = theory::excited_population(tt[j] * ns, atom, nominal);
      }
      const fs::path th_path = dir / ("excitation_theory_gp" + tag + ".csv");
      io::atomic_write(th_path, io::table_csv(meta, "t_ns,p_e", {tt, pe}));
      outputs.push_back(th_path);
    }
  }

  const fs::path eps_path = dir / "extinction_vs_bandwidth.csv";
  io::atomic_write(eps_path, io::table_csv(meta,
                                           "gammap_over_gamma0,gammap_fitted_over_gamma0,"
                                           "epsilon,sigma",
                                           {col_rho, col_fit, col_eps, col_eps_sig}));
  outputs.push_back(eps_path);
  const fs::path peak_path = dir / "peak_vs_bandwidth.csv";
  io::atomic_write(peak_path,
                   io::table_csv(meta, "gammap_over_gamma0,p_e_max,sigma",
                                 {col_rho, col_peak, col_peak_sig}));
  outputs.push_back(peak_path);

  const Eigen::ArrayXd grid = Eigen::ArrayXd::LinSpaced(111, 1.5, 7.0);
  Eigen::ArrayXd grid_eps(grid.size()), grid_peak(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const PhotonParams photon{atom.gamma0 * grid[i], 0.0};
    grid_eps[i] = theory::scattering_probability(atom, photon);
    grid_peak[i] = theory::peak_excitation(atom, photon);
  }
  const fs::path eps_th_path = dir / "extinction_theory.csv";
  io::atomic_write(eps_th_path,
                   io::table_csv(meta, "gammap_over_gamma0,epsilon", {grid, grid_eps}));
  outputs.push_back(eps_th_path);
  const fs::path peak_th_path = dir / "peak_theory.csv";
  io::atomic_write(peak_th_path,
                   io::table_csv(meta, "gammap_over_gamma0,p_e_max", {grid, grid_peak}));
  outputs.push_back(peak_th_path);

  const PhotonParams narrow{atom.gamma0 * 1.96, 0.0};
  const PhotonParams broad{atom.gamma0 * 6.09, 0.0};
  const double eps_ratio = eps_narrow / eps_broad;
  const double eps_ratio_sig =
      eps_ratio * std::sqrt(eps_narrow_sig * eps_narrow_sig / (eps_narrow * eps_narrow) +
                            eps_broad_sig * eps_broad_sig / (eps_broad * eps_broad));
  const double peak_ratio = peak_narrow / peak_broad;
  const double peak_ratio_sig =
      peak_ratio *
      std::sqrt(peak_narrow_sig * peak_narrow_sig / (peak_narrow * peak_narrow) +
                peak_broad_sig * peak_broad_sig / (peak_broad * peak_broad));

  const json summary{
      {"schema", 1},
      {"lambda", lambda},
      {"gamma0_mhz", gamma0_mhz},
      {"n_heralds", opts.heralds},
      {"bootstrap_resamples", opts.bootstrap},
      {"seed", opts.seed},
      {"bandwidths", bands},
      {"extinction_ratio",
       {{"bandwidths_compared", {1.96, 6.09}},
        {"value", eps_ratio},
        {"sigma", eps_ratio_sig},
        {"predicted", theory::scattering_probability(atom, narrow) /
                          theory::scattering_probability(atom, broad)}}},
      {"peak_excitation_ratio",
       {{"bandwidths_compared", {1.96, 6.09}},
        {"value", peak_ratio},
        {"sigma", peak_ratio_sig},
        {"predicted",
         theory::peak_excitation(atom, narrow) / theory::peak_excitation(atom, broad)}}},
  };
  const fs::path summary_path = dir / "summary.json";
  io::write_json(summary_path, summary);
  outputs.push_back(summary_path);

  const json config{{"schema", 1},
                    {"n_heralds", opts.heralds},
                    {"bootstrap_resamples", opts.bootstrap},
                    {"seed", opts.seed}};
  const fs::path man_path = dir / "manifest_reproduce_figures.json";
  io::write_json(man_path,
                 io::make_manifest("reproduce-figures", config, opts.seed, {}, outputs));

  std::printf("extinction ratio (1.96/6.09)  %.4g +/- %.3g (closed form %.4g)\n",
              eps_ratio, eps_ratio_sig,
              theory::scattering_probability(atom, narrow) /
                  theory::scattering_probability(atom, broad));
  std::printf("peak ratio (1.96/6.09)        %.4g +/- %.3g (closed form %.4g)\n",
              peak_ratio, peak_ratio_sig,
              theory::peak_excitation(atom, narrow) / theory::peak_excitation(atom, broad));
  for (const auto& p : outputs) report(p);
  report(man_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Single-photon scattering on a single two-level atom: closed-form curves, "
      "heralded-experiment simulation, and histogram analysis. The default output "
      "directory is $PHOTONSCATTER_OUT, falling back to the working directory."};
  app.set_version_flag("--version", scatter::version_string);
  app.require_subcommand(1);

  TheoryOptions th;
  CLI::App* theory_cmd =
      app.add_subcommand("theory", "Evaluate the closed-form curves onto CSV files");
  theory_cmd->add_option("--lambda", th.lambda, "spatial overlap Lambda")
      ->check(CLI::Range(0.0, 1.0));
  theory_cmd
      ->add_option("--gamma0-mhz", th.gamma0_mhz, "natural linewidth / 2pi in MHz")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  theory_cmd
      ->add_option("--gammap-over-gamma0", th.ratios,
                   "photon bandwidths in units of gamma0")
      ->check(CLI::PositiveNumber);
  theory_cmd
      ->add_option("--gammap-grid", th.grid, "uniform bandwidth grid: lo hi count")
      ->expected(3);
  theory_cmd->add_option("--tmax-ns", th.tmax_ns, "last excitation-curve sample (ns)")
      ->capture_default_str();
  theory_cmd->add_option("--dt-ns", th.dt_ns, "excitation-curve time step (ns)")
      ->capture_default_str();
  theory_cmd->add_option("--out", th.out, "output directory");
  theory_cmd->add_option("--config", th.config_path,
                         "config JSON or manifest from an earlier run");

  SimulateOptions sim;
  CLI::App* simulate_cmd = app.add_subcommand(
      "simulate", "Draw one heralded-photon experiment from a JSON config");
  simulate_cmd->add_option("--config", sim.config_path, "SimConfig JSON or manifest")
      ->required();
  simulate_cmd->add_option("--seed", sim.seed, "override the config seed");
  simulate_cmd->add_option("--out", sim.out, "output directory");

  AnalyzeOptions an;
  CLI::App* analyze_cmd = app.add_subcommand(
      "analyze", "Estimate bandwidth, extinction and excitation from two histograms");
  analyze_cmd->add_option("reference", an.ref_path, "reference histogram CSV");
  analyze_cmd->add_option("with_atom", an.atom_path, "with-atom histogram CSV");
  analyze_cmd
      ->add_option("--window", an.window, "summation window: t_min t_max (seconds)")
      ->expected(2);
  analyze_cmd
      ->add_option("--fit-window", an.fit_window, "bandwidth-fit window: t_min t_max (s)")
      ->expected(2);
  analyze_cmd
      ->add_option("--bootstrap", an.bootstrap, "bootstrap resamples (0 = off, else >= 100)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  analyze_cmd->add_option("--seed", an.seed, "bootstrap RNG seed")->capture_default_str();
  analyze_cmd
      ->add_option("--lambda", an.lambda, "spatial overlap used in the reconstruction")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  analyze_cmd->add_option("--gamma0-mhz", an.gamma0_mhz, "natural linewidth / 2pi in MHz")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  analyze_cmd->add_option("--out", an.out, "output directory");
  analyze_cmd->add_option("--config", an.config_path,
                          "config JSON or manifest from an earlier run");

  ReproduceOptions rp;
  CLI::App* reproduce_cmd = app.add_subcommand(
      "reproduce-figures",
      "Simulate and analyze the five-bandwidth scan; emit figure datasets");
  reproduce_cmd->add_option("--heralds", rp.heralds, "heralds per simulation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  reproduce_cmd->add_option("--bootstrap", rp.bootstrap, "bootstrap resamples per analysis")
      ->check(CLI::Range(100, 1000000))
      ->capture_default_str();
  reproduce_cmd->add_option("--seed", rp.seed, "master seed")->capture_default_str();
  reproduce_cmd->add_option("--out", rp.out, "output directory");
  reproduce_cmd->add_option("--config", rp.config_path,
                            "config JSON or manifest from an earlier run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*theory_cmd) run_theory(th, theory_cmd);
    if (*simulate_cmd) run_simulate(sim);
    if (*analyze_cmd) run_analyze(an, analyze_cmd);
    if (*reproduce_cmd) run_reproduce(rp, reproduce_cmd);
    return 0;
  } catch (const scatter::ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const scatter::FitError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 4;
  } catch (const scatter::IoError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
}
