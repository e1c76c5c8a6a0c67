#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "scatter/analysis.hpp"
#include "scatter/errors.hpp"
#include "scatter/io.hpp"
#include "scatter/simulate.hpp"
#include "scatter/units.hpp"

using namespace scatter;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// message of the E thrown by fn, empty if nothing was thrown
template <typename E, typename Fn>
std::string thrown(Fn&& fn) {
  try {
    fn();
  } catch (const E& err) {
    return err.what();
  }
  return {};
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

fs::path fresh_dir() {
  const fs::path dir = fs::temp_directory_path() / "photonscatter-io-tests";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json base_config() {
  return json{{"schema", 1},
              {"atom", {{"overlap", 0.033}}},
              {"photon", {{"gammap_over_gamma0", 1.96}}},
              {"n_heralds", 100000}};
}

SimConfig small_sim() {
  SimConfig config;
  config.atom = {rb87_d2_gamma0, 0.033, 0.0};
  config.photon = {1.96 * rb87_d2_gamma0, 0.0};
  config.n_heralds = 200000;
  config.seed = 2;
  return config;
}

}  // namespace

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(io::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(io::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(io::fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(io::fnv1a64_hex("") == "cbf29ce484222325");
}

TEST_CASE("atomic_write creates parents and round trips bytes") {
  const fs::path dir = fresh_dir();
  const fs::path target = dir / "a" / "b" / "c.txt";
  io::atomic_write(target, "alpha\nbeta\n");
  CHECK(io::read_file(target) == "alpha\nbeta\n");
  io::atomic_write(target, "gamma");
  CHECK(io::read_file(target) == "gamma");
  CHECK(io::hash_file(target) == io::fnv1a64_hex("gamma"));
  CHECK_FALSE(fs::exists(dir / "a" / "b" / "c.txt.tmp"));
}

TEST_CASE("read_file and read_json reject missing or malformed input") {
  const fs::path dir = fresh_dir();
  CHECK(contains(thrown<IoError>([&] { io::read_file(dir / "absent.txt"); }),
                 "cannot open"));
  io::atomic_write(dir / "broken.json", "{\"a\": ");
  CHECK(contains(thrown<ConfigError>([&] { io::read_json(dir / "broken.json"); }),
                 "invalid JSON"));
  io::write_json(dir / "ok.json", json{{"a", 1}});
  CHECK(io::read_json(dir / "ok.json") == json{{"a", 1}});
}

TEST_CASE("histogram csv round trips every field exactly") {
  const Histogram hist = simulate_reference(small_sim());
  const std::string text = io::histogram_to_csv(hist, 2);
  CHECK(contains(text, "# label=reference\n"));
  CHECK(contains(text, "# seed=2\n"));
  CHECK(contains(text, "# t_ns,counts\n"));

  const Histogram back = io::histogram_from_csv(text, "round.csv");
  CHECK(back.label == hist.label);
  CHECK(back.n_heralds == hist.n_heralds);
  CHECK(back.bin_width == hist.bin_width);
  CHECK(back.t_start == hist.t_start);
  REQUIRE(back.size() == hist.size());
  CHECK((back.counts == hist.counts).all());
  // a second serialization is byte-identical
  CHECK(io::histogram_to_csv(back, 2) == text);
}

TEST_CASE("histogram csv files survive a disk round trip") {
  const fs::path dir = fresh_dir();
  Histogram hist;
  hist.t_start = 2e-9;
  hist.bin_width = 0.5e-9;
  hist.n_heralds = 1000;
  hist.label = HistLabel::with_atom;
  hist.counts.resize(4);
  hist.counts << 5, 0, 7, 3;
  io::write_histogram_csv(dir / "h.csv", hist);
  const Histogram back = io::read_histogram_csv(dir / "h.csv");
  CHECK(back.label == HistLabel::with_atom);
  CHECK(back.t_start == hist.t_start);
  CHECK(back.bin_width == hist.bin_width);
  CHECK((back.counts == hist.counts).all());
}

TEST_CASE("histogram csv parse errors carry file and line") {
  const std::string good =
      "# label=reference\n"
      "# n_heralds=100\n"
      "# bin_width_ns=1\n"
      "# t_start_ns=0\n"
      "# t_ns,counts\n"
      "0.5,10\n"
      "1.5,12\n";
  CHECK(io::histogram_from_csv(good, "good.csv").counts[1] == 12);

  const auto parse = [](const std::string& text) {
    return thrown<IoError>([&] { io::histogram_from_csv(text, "bad.csv"); });
  };
  std::string s = good;
  s.replace(s.find("1.5,12"), 6, "1.5,tw");
  CHECK(contains(parse(s), "bad.csv:7: not an integer: 'tw'"));

  s = good;
  s.replace(s.find("0.5,10"), 6, "junk!!");
  CHECK(contains(parse(s), "bad.csv:6: expected 't,count'"));

  s = good;
  s.replace(s.find("bin_width_ns=1"), 14, "bin_width_ns=a");
  CHECK(contains(parse(s), "bad.csv:3: not a number: 'a'"));

  s = good;
  s.erase(s.find("# t_start_ns=0\n"), 15);
  CHECK(contains(parse(s), "missing metadata"));

  s = good;
  s.replace(s.find("label=reference"), 15, "label=scattered");
  CHECK(contains(parse(s), "unknown label 'scattered'"));

  s = good;
  s.replace(s.find("1.5,12"), 6, "1.5,-2");
  CHECK(contains(parse(s), "negative count"));

  CHECK(contains(parse("# label=reference\n# n_heralds=1\n# bin_width_ns=1\n"
                       "# t_start_ns=0\n"),
                 "no data rows"));
}

TEST_CASE("table csv renders metadata, header, and rows") {
  Eigen::ArrayXd x(2), y(2);
  x << 0.0, 1.0;
  y << 2.0, 3.5;
  const std::string text = io::table_csv({"lambda=0.033"}, "x,y", {x, y});
  CHECK(text == "# lambda=0.033\n# x,y\n0,2\n1,3.5\n");

  Eigen::ArrayXd longer(3);
  longer << 1, 2, 3;
  CHECK_THROWS_AS(io::table_csv({}, "x,y", {x, longer}), ConfigError);
  CHECK_THROWS_AS(io::table_csv({}, "x", {}), ConfigError);
}

TEST_CASE("sim config json round trips") {
  SimConfig config = small_sim();
  config.heralding_efficiency = 0.8;
  config.background_rate = 100.0;
  config.window = {-5e-9, 200e-9};
  config.bin_width = 0.5e-9;
  config.seed = 7;
  config.edge_smearing = 2e-9;
  const SimConfig back = io::sim_config_from_json(io::sim_config_to_json(config));
  CHECK(back.atom.gamma0 == doctest::Approx(config.atom.gamma0).epsilon(1e-14));
  CHECK(back.atom.overlap == config.atom.overlap);
  CHECK(back.photon.gammap == doctest::Approx(config.photon.gammap).epsilon(1e-14));
  CHECK(back.photon.t0 == config.photon.t0);
  CHECK(back.n_heralds == config.n_heralds);
  CHECK(back.heralding_efficiency == config.heralding_efficiency);
  CHECK(back.background_rate == config.background_rate);
  CHECK(back.window.t_min == config.window.t_min);
  CHECK(back.window.t_max == config.window.t_max);
  CHECK(back.bin_width == config.bin_width);
  CHECK(back.seed == config.seed);
  CHECK(back.edge_smearing == config.edge_smearing);
}

TEST_CASE("sim config parsing fills defaults and rejects junk") {
  const SimConfig config = io::sim_config_from_json(base_config());
  CHECK(config.atom.gamma0 == linewidth_mhz_to_angular(6.07));
  CHECK(config.photon.t0 == 0.0);
  CHECK(config.heralding_efficiency == 1.0);
  CHECK(config.background_rate == 0.0);
  CHECK(config.window.t_min == -10e-9);
  CHECK(config.window.t_max == 100e-9);
  CHECK(config.bin_width == 1e-9);
  CHECK(config.seed == 0);
  CHECK(config.edge_smearing == 0.0);

  const auto parse = [](json doc) {
    return thrown<ConfigError>([&] { io::sim_config_from_json(doc); });
  };
  json doc = base_config();
  doc["foo"] = 1;
  CHECK(contains(parse(doc), "unknown field /foo"));

  doc = base_config();
  doc["atom"]["foo"] = 1;
  CHECK(contains(parse(doc), "unknown field /atom/foo"));

  doc = base_config();
  doc.erase("schema");
  CHECK(contains(parse(doc), "missing field /schema"));

  doc = base_config();
  doc["schema"] = 2;
  CHECK(contains(parse(doc), "/schema must be 1"));

  doc = base_config();
  doc.erase("n_heralds");
  CHECK(contains(parse(doc), "missing field /n_heralds"));

  doc = base_config();
  doc["n_heralds"] = "many";
  CHECK(contains(parse(doc), "/n_heralds must be an integer"));

  doc = base_config();
  doc["atom"].erase("overlap");
  CHECK(contains(parse(doc), "missing field /atom/overlap"));

  doc = base_config();
  doc.erase("photon");
  CHECK(contains(parse(doc), "missing field /photon"));

  doc = base_config();
  doc["window_s"] = {1.0, 2.0, 3.0};
  CHECK(contains(parse(doc), "/window_s must be an array of two numbers"));

  doc = base_config();
  doc["seed"] = -1;
  CHECK(contains(parse(doc), "/seed must be a non-negative integer"));

  doc = base_config();
  doc["atom"]["overlap"] = 1.5;  // outside (0,1]: physical validation kicks in
  CHECK_THROWS_AS(io::sim_config_from_json(doc), ConfigError);
}

TEST_CASE("resolved config reparses to the identical simulation") {
  const json sparse = base_config();
  const json resolved = io::resolved_sim_config_json(sparse);
  // given fields are untouched, omitted ones get their defaults
  CHECK(resolved["photon"]["gammap_over_gamma0"] == json(1.96));
  CHECK(resolved["atom"]["gamma0_mhz"] == json(6.07));
  CHECK(resolved["bin_width_s"] == json(1e-9));
  CHECK(resolved.contains("seed"));
  CHECK(resolved.contains("edge_smearing_s"));

  const json reparsed = json::parse(resolved.dump(2));
  CHECK(reparsed == resolved);

  const SimConfig a = io::sim_config_from_json(sparse);
  const SimConfig b = io::sim_config_from_json(resolved);
  const SimConfig c = io::sim_config_from_json(reparsed);
  CHECK(a.atom.gamma0 == b.atom.gamma0);
  CHECK(a.photon.gammap == b.photon.gammap);
  CHECK(a.window.t_min == b.window.t_min);
  CHECK(a.bin_width == b.bin_width);
  CHECK(b.atom.gamma0 == c.atom.gamma0);
  CHECK(b.photon.gammap == c.photon.gammap);
  CHECK(b.n_heralds == c.n_heralds);
  CHECK(b.seed == c.seed);
}

TEST_CASE("manifests record the command, config, and file hashes") {
  const fs::path dir = fresh_dir();
  io::atomic_write(dir / "in.csv", "1,2\n");
  io::atomic_write(dir / "out.csv", "3,4\n");
  const json cfg = io::resolved_sim_config_json(base_config());
  const json manifest =
      io::make_manifest("simulate", cfg, 42, {dir / "in.csv"}, {dir / "out.csv"});
  CHECK(manifest["schema"] == json(1));
  CHECK(manifest["command"] == json("simulate"));
  CHECK(manifest["seed"] == json(42));
  CHECK(manifest["config"] == cfg);
  CHECK(manifest["inputs"][0]["fnv1a64"] == json(io::fnv1a64_hex("1,2\n")));
  CHECK(manifest["outputs"][0]["fnv1a64"] == json(io::fnv1a64_hex("3,4\n")));
  CHECK(manifest["version"].is_string());
  // ISO-8601 UTC, e.g. 2026-01-31T09:30:00Z
  const std::string ts = manifest["timestamp"].get<std::string>();
  CHECK(ts.size() == 20);
  CHECK(ts.back() == 'Z');
  CHECK(ts[4] == '-');
  CHECK(ts[10] == 'T');

  CHECK(io::unwrap_config(manifest, "simulate") == cfg);
  CHECK(io::unwrap_config(cfg, "simulate") == cfg);  // bare configs pass through
  CHECK(contains(thrown<ConfigError>([&] { io::unwrap_config(manifest, "analyze"); }),
                 "does not belong to command 'analyze'"));
}

TEST_CASE("load_sim_config accepts bare configs and matching manifests") {
  const fs::path dir = fresh_dir();
  io::write_json(dir / "config.json", base_config());
  const SimConfig from_bare = io::load_sim_config(dir / "config.json");
  CHECK(from_bare.n_heralds == 100000);

  const json manifest = io::make_manifest(
      "simulate", io::resolved_sim_config_json(base_config()), 9, {}, {});
  io::write_json(dir / "manifest.json", manifest);
  const SimConfig from_manifest = io::load_sim_config(dir / "manifest.json");
  CHECK(from_manifest.n_heralds == from_bare.n_heralds);
  CHECK(from_manifest.photon.gammap == from_bare.photon.gammap);

  json wrong = manifest;
  wrong["command"] = "analyze";
  io::write_json(dir / "wrong.json", wrong);
  CHECK_THROWS_AS(io::load_sim_config(dir / "wrong.json"), ConfigError);
}

TEST_CASE("analysis results round trip through json exactly") {
  const SimConfig config = small_sim();
  const Histogram ref = simulate_reference(config);
  const Histogram atom = simulate_with_atom(config);
  AnalysisOptions options;
  options.bootstrap_resamples = 100;
  options.seed = 3;
  const AnalysisResult r = analyze(ref, atom, config.atom, options);

  const json doc = json::parse(io::analysis_to_json(r).dump(2));
  const AnalysisResult b = io::analysis_from_json(doc);
  CHECK(b.eta_f == r.eta_f);
  CHECK(b.fit.gammap_hat == r.fit.gammap_hat);
  CHECK(b.fit.sigma_gammap == r.fit.sigma_gammap);
  CHECK(b.fit.t0_hat == r.fit.t0_hat);
  CHECK(b.fit.amplitude_hat == r.fit.amplitude_hat);
  CHECK(b.fit.sigma_amplitude == r.fit.sigma_amplitude);
  CHECK(b.fit.fit_window.t_min == r.fit.fit_window.t_min);
  CHECK(b.fit.reduced_chi_square == r.fit.reduced_chi_square);
  CHECK(b.fit.iterations == r.fit.iterations);
  CHECK(b.fit.converged == r.fit.converged);
  CHECK(b.extinction.epsilon_hat == r.extinction.epsilon_hat);
  CHECK(b.extinction.sigma == r.extinction.sigma);
  CHECK(b.extinction.window.t_max == r.extinction.window.t_max);
  REQUIRE(b.excitation.p_e.size() == r.excitation.p_e.size());
  CHECK((b.excitation.times == r.excitation.times).all());
  CHECK((b.excitation.p_e == r.excitation.p_e).all());
  CHECK((b.excitation.sigma == r.excitation.sigma).all());
  CHECK(b.excitation.lambda_used == r.excitation.lambda_used);
  CHECK(b.excitation.gamma0_used == r.excitation.gamma0_used);
  CHECK(b.peak.value == r.peak.value);
  CHECK(b.peak.sigma == r.peak.sigma);
  CHECK(b.peak.time == r.peak.time);
  CHECK(b.epsilon_predicted == r.epsilon_predicted);
  CHECK(b.peak_predicted == r.peak_predicted);
  CHECK(b.options.sum_window.t_min == r.options.sum_window.t_min);
  CHECK(b.options.fit_window.t_max == r.options.fit_window.t_max);
  CHECK(b.options.bootstrap_resamples == r.options.bootstrap_resamples);
  CHECK(b.options.seed == r.options.seed);
  REQUIRE(b.has_bootstrap);
  CHECK(b.bootstrap.epsilon_sigma == r.bootstrap.epsilon_sigma);
  CHECK(b.bootstrap.peak_sigma == r.bootstrap.peak_sigma);
  CHECK(b.bootstrap.peak_time_sigma == r.bootstrap.peak_time_sigma);
  CHECK((b.bootstrap.p_e_sigma == r.bootstrap.p_e_sigma).all());
  CHECK(b.bootstrap.epsilon_samples == r.bootstrap.epsilon_samples);

  AnalysisOptions plain;
  const AnalysisResult bare = analyze(ref, atom, config.atom, plain);
  const json bare_doc = io::analysis_to_json(bare);
  CHECK_FALSE(bare_doc.contains("bootstrap"));
  CHECK_FALSE(io::analysis_from_json(bare_doc).has_bootstrap);
}
