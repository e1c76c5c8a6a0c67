#include "scatter/io.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "scatter/errors.hpp"
#include "scatter/units.hpp"
#include "scatter/version.hpp"

namespace scatter::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return std::move(ss).str();
}

std::string hash_file(const fs::path& path) { return fnv1a64_hex(read_file(path)); }

void atomic_write(const fs::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return std::isspace(c) == 0; };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

long long parse_count(const std::string& raw, const std::string& origin, int line_no) {
  const std::string s = trim(raw);
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || errno != 0 || end != s.c_str() + s.size())
    throw IoError(origin + ":" + std::to_string(line_no) + ": not an integer: '" + raw +
                  "'");
  return v;
}

double parse_number(const std::string& raw, const std::string& origin, int line_no) {
  const std::string s = trim(raw);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || errno != 0 || end != s.c_str() + s.size())
    throw IoError(origin + ":" + std::to_string(line_no) + ": not a number: '" + raw +
                  "'");
  return v;
}

std::vector<double> to_vec(const Eigen::ArrayXd& a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

Eigen::ArrayXd from_vec(const std::vector<double>& v) {
  Eigen::ArrayXd a(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) a[static_cast<Eigen::Index>(i)] = v[i];
  return a;
}

std::string iso_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_known_fields(const json& obj, const std::string& where,
                          std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object())
    throw ConfigError("config: " + (where.empty() ? std::string("document") : where) +
                      " must be an object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw ConfigError("config: unknown field " + where + "/" + item.key());
  }
}

const json& require_field(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key))
    throw ConfigError("config: missing field " + where + "/" + key);
  return obj.at(key);
}

double get_number(const json& obj, const std::string& where, const char* key) {
  const json& v = require_field(obj, where, key);
  if (!v.is_number())
    throw ConfigError("config: " + where + "/" + key + " must be a number");
  return v.get<double>();
}

double get_number_or(const json& obj, const std::string& where, const char* key,
                     double fallback) {
  return obj.contains(key) ? get_number(obj, where, key) : fallback;
}

std::int64_t get_integer(const json& obj, const std::string& where, const char* key) {
  const json& v = require_field(obj, where, key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError("config: " + where + "/" + key + " must be an integer");
  return v.get<std::int64_t>();
}

std::uint64_t get_unsigned_or(const json& obj, const std::string& where, const char* key,
                              std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ConfigError("config: " + where + "/" + key +
                      " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

TimeWindow get_window_or(const json& obj, const std::string& where, const char* key,
                         TimeWindow fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError("config: " + where + "/" + key +
                      " must be an array of two numbers");
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

std::string histogram_to_csv(const Histogram& hist, std::optional<std::uint64_t> seed) {
  hist.validate();
  std::string out;
  out.reserve(24 * static_cast<std::size_t>(hist.size()) + 160);
  char buf[96];
  out += "# label=";
  out += hist.label == HistLabel::reference ? "reference" : "with_atom";
  out += '\n';
  std::snprintf(buf, sizeof(buf), "# n_heralds=%lld\n",
                static_cast<long long>(hist.n_heralds));
  out += buf;
  std::snprintf(buf, sizeof(buf), "# bin_width_ns=%.17g\n", hist.bin_width / ns);
  out += buf;
  std::snprintf(buf, sizeof(buf), "# t_start_ns=%.17g\n", hist.t_start / ns);
  out += buf;
  if (seed) {
    std::snprintf(buf, sizeof(buf), "# seed=%llu\n",
                  static_cast<unsigned long long>(*seed));
    out += buf;
  }
  out += "# t_ns,counts\n";
  for (Eigen::Index i = 0; i < hist.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.10g,%lld\n", hist.bin_center(i) / ns,
                  static_cast<long long>(hist.counts[i]));
    out += buf;
  }
  return out;
}

Histogram histogram_from_csv(const std::string& text, const std::string& origin) {
  std::optional<std::string> label;
  std::optional<long long> n_heralds;
  std::optional<double> bin_width_ns;
  std::optional<double> t_start_ns;
  std::vector<long long> counts;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;  // column header or free comment
      const std::string key = trim(line.substr(1, eq - 1));
      const std::string value = trim(line.substr(eq + 1));
      if (key == "label")
        label = value;
      else if (key == "n_heralds")
        n_heralds = parse_count(value, origin, line_no);
      else if (key == "bin_width_ns")
        bin_width_ns = parse_number(value, origin, line_no);
      else if (key == "t_start_ns")
        t_start_ns = parse_number(value, origin, line_no);
      // other keys (seed, ...) are informational
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw IoError(origin + ":" + std::to_string(line_no) + ": expected 't,count'");
    // The time column is redundant: the grid is fixed by the metadata.
    counts.push_back(parse_count(line.substr(comma + 1), origin, line_no));
  }
  if (!label || !n_heralds || !bin_width_ns || !t_start_ns)
    throw IoError(origin +
                  ": missing metadata, need label, n_heralds, bin_width_ns, t_start_ns");
  if (counts.empty()) throw IoError(origin + ": no data rows");

  Histogram hist;
  if (*label == "reference")
    hist.label = HistLabel::reference;
  else if (*label == "with_atom")
    hist.label = HistLabel::with_atom;
  else
    throw IoError(origin + ": unknown label '" + *label + "'");
  hist.n_heralds = *n_heralds;
  hist.bin_width = *bin_width_ns * ns;
  hist.t_start = *t_start_ns * ns;
  hist.counts.resize(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i)
    hist.counts[static_cast<Eigen::Index>(i)] = counts[i];
  try {
    hist.validate();
  } catch (const ConfigError& err) {
    throw IoError(origin + ": " + err.what());
  }
  return hist;
}

void write_histogram_csv(const fs::path& path, const Histogram& hist,
                         std::optional<std::uint64_t> seed) {
  atomic_write(path, histogram_to_csv(hist, seed));
}

Histogram read_histogram_csv(const fs::path& path) {
  return histogram_from_csv(read_file(path), path.string());
}

std::string table_csv(const std::vector<std::string>& metadata, const std::string& header,
                      const std::vector<Eigen::ArrayXd>& columns) {
  if (columns.empty()) throw ConfigError("table: no columns");
  const Eigen::Index n = columns.front().size();
  for (const auto& c : columns)
    if (c.size() != n) throw ConfigError("table: column length mismatch");
  std::string out;
  for (const auto& m : metadata) {
    out += "# ";
    out += m;
    out += '\n';
  }
  out += "# ";
  out += header;
  out += '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (j) out += ',';
      std::snprintf(buf, sizeof(buf), "%.12g", columns[j][i]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

json sim_config_to_json(const SimConfig& config) {
  return json{
      {"schema", 1},
      {"atom",
       {{"gamma0_mhz", angular_to_linewidth_mhz(config.atom.gamma0)},
        {"overlap", config.atom.overlap}}},
      {"photon",
       {{"gammap_over_gamma0", config.photon.gammap / config.atom.gamma0},
        {"t0_s", config.photon.t0}}},
      {"n_heralds", config.n_heralds},
      {"heralding_efficiency", config.heralding_efficiency},
      {"background_rate_hz", config.background_rate},
      {"window_s", {config.window.t_min, config.window.t_max}},
      {"bin_width_s", config.bin_width},
      {"seed", config.seed},
      {"edge_smearing_s", config.edge_smearing},
  };
}

SimConfig sim_config_from_json(const json& doc) {
  require_known_fields(doc, "",
                       {"schema", "atom", "photon", "n_heralds", "heralding_efficiency",
                        "background_rate_hz", "window_s", "bin_width_s", "seed",
                        "edge_smearing_s"});
  if (get_integer(doc, "", "schema") != 1)
    throw ConfigError("config: /schema must be 1");

  SimConfig config;
  const json& atom = require_field(doc, "", "atom");
  require_known_fields(atom, "/atom", {"gamma0_mhz", "overlap"});
  config.atom.gamma0 =
      linewidth_mhz_to_angular(get_number_or(atom, "/atom", "gamma0_mhz", 6.07));
  config.atom.overlap = get_number(atom, "/atom", "overlap");

  const json& photon = require_field(doc, "", "photon");
  require_known_fields(photon, "/photon", {"gammap_over_gamma0", "t0_s"});
  config.photon.gammap =
      config.atom.gamma0 * get_number(photon, "/photon", "gammap_over_gamma0");
  config.photon.t0 = get_number_or(photon, "/photon", "t0_s", 0.0);

  config.n_heralds = get_integer(doc, "", "n_heralds");
  config.heralding_efficiency = get_number_or(doc, "", "heralding_efficiency", 1.0);
  config.background_rate = get_number_or(doc, "", "background_rate_hz", 0.0);
  config.window = get_window_or(doc, "", "window_s", TimeWindow{-10e-9, 100e-9});
  config.bin_width = get_number_or(doc, "", "bin_width_s", 1e-9);
  config.seed = get_unsigned_or(doc, "", "seed", 0);
  config.edge_smearing = get_number_or(doc, "", "edge_smearing_s", 0.0);
  config.validate();
  return config;
}

json resolved_sim_config_json(json doc) {
  sim_config_from_json(doc);  // full validation first
  json& atom = doc.at("atom");
  if (!atom.contains("gamma0_mhz")) atom["gamma0_mhz"] = 6.07;
  json& photon = doc.at("photon");
  if (!photon.contains("t0_s")) photon["t0_s"] = 0.0;
  if (!doc.contains("heralding_efficiency")) doc["heralding_efficiency"] = 1.0;
  if (!doc.contains("background_rate_hz")) doc["background_rate_hz"] = 0.0;
  if (!doc.contains("window_s")) doc["window_s"] = {-10e-9, 100e-9};
  if (!doc.contains("bin_width_s")) doc["bin_width_s"] = 1e-9;
  if (!doc.contains("seed")) doc["seed"] = 0;
  if (!doc.contains("edge_smearing_s")) doc["edge_smearing_s"] = 0.0;
  return doc;
}

json unwrap_config(const json& doc, const std::string& command) {
  if (doc.is_object() && doc.contains("command") && doc.contains("config")) {
    if (!doc.at("command").is_string() ||
        doc.at("command").get<std::string>() != command)
      throw ConfigError("config: manifest does not belong to command '" + command + "'");
    return doc.at("config");
  }
  return doc;
}

SimConfig load_sim_config(const fs::path& path) {
  return sim_config_from_json(unwrap_config(read_json(path), "simulate"));
}

json analysis_to_json(const AnalysisResult& r) {
  json doc{
      {"schema", 1},
      {"eta_f", r.eta_f},
      {"bandwidth_fit",
       {{"gammap_rad_s", r.fit.gammap_hat},
        {"gammap_sigma_rad_s", r.fit.sigma_gammap},
        {"t0_s", r.fit.t0_hat},
        {"t0_sigma_s", r.fit.sigma_t0},
        {"amplitude", r.fit.amplitude_hat},
        {"amplitude_sigma", r.fit.sigma_amplitude},
        {"fit_window_s", {r.fit.fit_window.t_min, r.fit.fit_window.t_max}},
        {"reduced_chi_square", r.fit.reduced_chi_square},
        {"iterations", r.fit.iterations},
        {"converged", r.fit.converged}}},
      {"extinction",
       {{"epsilon", r.extinction.epsilon_hat},
        {"sigma", r.extinction.sigma},
        {"window_s", {r.extinction.window.t_min, r.extinction.window.t_max}}}},
      {"excitation",
       {{"times_s", to_vec(r.excitation.times)},
        {"p_e", to_vec(r.excitation.p_e)},
        {"sigma", to_vec(r.excitation.sigma)},
        {"lambda", r.excitation.lambda_used},
        {"gamma0_rad_s", r.excitation.gamma0_used}}},
      {"peak", {{"value", r.peak.value}, {"sigma", r.peak.sigma}, {"time_s", r.peak.time}}},
      {"predicted", {{"epsilon", r.epsilon_predicted}, {"peak", r.peak_predicted}}},
      {"options",
       {{"sum_window_s", {r.options.sum_window.t_min, r.options.sum_window.t_max}},
        {"fit_window_s", {r.options.fit_window.t_min, r.options.fit_window.t_max}},
        {"bootstrap_resamples", r.options.bootstrap_resamples},
        {"seed", r.options.seed}}},
  };
  if (r.has_bootstrap) {
    doc["bootstrap"] = json{
        {"epsilon_sigma", r.bootstrap.epsilon_sigma},
        {"peak_sigma", r.bootstrap.peak_sigma},
        {"peak_time_sigma", r.bootstrap.peak_time_sigma},
        {"p_e_sigma", to_vec(r.bootstrap.p_e_sigma)},
        {"epsilon_samples", r.bootstrap.epsilon_samples},
        {"peak_samples", r.bootstrap.peak_samples},
        {"peak_time_samples", r.bootstrap.peak_time_samples},
    };
  }
  return doc;
}

AnalysisResult analysis_from_json(const json& doc) {
  AnalysisResult r;
  r.eta_f = doc.at("eta_f").get<double>();
  const json& fit = doc.at("bandwidth_fit");
  r.fit.gammap_hat = fit.at("gammap_rad_s").get<double>();
  r.fit.sigma_gammap = fit.at("gammap_sigma_rad_s").get<double>();
  r.fit.t0_hat = fit.at("t0_s").get<double>();
  r.fit.sigma_t0 = fit.at("t0_sigma_s").get<double>();
  r.fit.amplitude_hat = fit.at("amplitude").get<double>();
  r.fit.sigma_amplitude = fit.at("amplitude_sigma").get<double>();
  r.fit.fit_window = {fit.at("fit_window_s")[0].get<double>(),
                      fit.at("fit_window_s")[1].get<double>()};
  r.fit.reduced_chi_square = fit.at("reduced_chi_square").get<double>();
  r.fit.iterations = fit.at("iterations").get<int>();
  r.fit.converged = fit.at("converged").get<bool>();
  const json& ext = doc.at("extinction");
  r.extinction.epsilon_hat = ext.at("epsilon").get<double>();
  r.extinction.sigma = ext.at("sigma").get<double>();
  r.extinction.window = {ext.at("window_s")[0].get<double>(),
                         ext.at("window_s")[1].get<double>()};
  const json& exc = doc.at("excitation");
  r.excitation.times = from_vec(exc.at("times_s").get<std::vector<double>>());
  r.excitation.p_e = from_vec(exc.at("p_e").get<std::vector<double>>());
  r.excitation.sigma = from_vec(exc.at("sigma").get<std::vector<double>>());
  r.excitation.lambda_used = exc.at("lambda").get<double>();
  r.excitation.gamma0_used = exc.at("gamma0_rad_s").get<double>();
  const json& peak = doc.at("peak");
  r.peak.value = peak.at("value").get<double>();
  r.peak.sigma = peak.at("sigma").get<double>();
  r.peak.time = peak.at("time_s").get<double>();
  r.epsilon_predicted = doc.at("predicted").at("epsilon").get<double>();
  r.peak_predicted = doc.at("predicted").at("peak").get<double>();
  const json& opt = doc.at("options");
  r.options.sum_window = {opt.at("sum_window_s")[0].get<double>(),
                          opt.at("sum_window_s")[1].get<double>()};
  r.options.fit_window = {opt.at("fit_window_s")[0].get<double>(),
                          opt.at("fit_window_s")[1].get<double>()};
  r.options.bootstrap_resamples = opt.at("bootstrap_resamples").get<int>();
  r.options.seed = opt.at("seed").get<std::uint64_t>();
  if (doc.contains("bootstrap")) {
    r.has_bootstrap = true;
    const json& b = doc.at("bootstrap");
    r.bootstrap.epsilon_sigma = b.at("epsilon_sigma").get<double>();
    r.bootstrap.peak_sigma = b.at("peak_sigma").get<double>();
    r.bootstrap.peak_time_sigma = b.at("peak_time_sigma").get<double>();
    r.bootstrap.p_e_sigma = from_vec(b.at("p_e_sigma").get<std::vector<double>>());
    r.bootstrap.epsilon_samples = b.at("epsilon_samples").get<std::vector<double>>();
    r.bootstrap.peak_samples = b.at("peak_samples").get<std::vector<double>>();
    r.bootstrap.peak_time_samples =
        b.at("peak_time_samples").get<std::vector<double>>();
  }
  return r;
}

json make_manifest(const std::string& command, const json& config, std::uint64_t seed,
                   const std::vector<fs::path>& inputs,
                   const std::vector<fs::path>& outputs) {
  json in_list = json::array();
  for (const auto& p : inputs)
    in_list.push_back({{"path", p.string()}, {"fnv1a64", hash_file(p)}});
  json out_list = json::array();
  for (const auto& p : outputs)
    out_list.push_back({{"path", p.string()}, {"fnv1a64", hash_file(p)}});
  return json{
      {"schema", 1},
      {"command", command},
      {"config", config},
      {"seed", seed},
      {"inputs", in_list},
      {"outputs", out_list},
      {"version", version_string},
      {"timestamp", iso_utc_now()},
  };
}

void write_json(const fs::path& path, const json& doc) {
  atomic_write(path, doc.dump(2) + "\n");
}

json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded())
    throw ConfigError(path.string() + ": invalid JSON");
  return doc;
}

}  // namespace scatter::io
