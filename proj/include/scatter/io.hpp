#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "scatter/analysis.hpp"
#include "scatter/histogram.hpp"
#include "scatter/simulate.hpp"

namespace scatter::io {

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// FNV-1a hash of the file contents, as 16 hex digits.
std::string hash_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

// Write via a temporary in the same directory plus rename, so readers never
// observe a partial file. Creates missing parent directories.
void atomic_write(const std::filesystem::path& path, std::string_view content);

// Histogram CSV: '#'-prefixed key=value metadata (label, n_heralds,
// bin_width_ns, t_start_ns, optional seed), a '# t_ns,counts' header, then
// one 'center,count' row per bin with times in nanoseconds.
std::string histogram_to_csv(const Histogram& hist,
                             std::optional<std::uint64_t> seed = std::nullopt);
Histogram histogram_from_csv(const std::string& text, const std::string& origin);
void write_histogram_csv(const std::filesystem::path& path, const Histogram& hist,
                         std::optional<std::uint64_t> seed = std::nullopt);
Histogram read_histogram_csv(const std::filesystem::path& path);

// Generic numeric table: metadata lines, a header naming the columns, then
// comma-separated rows. All columns must have equal length.
std::string table_csv(const std::vector<std::string>& metadata, const std::string& header,
                      const std::vector<Eigen::ArrayXd>& columns);

// SimConfig <-> JSON. Parsing is strict: "schema" must equal 1, unknown
// fields are rejected with the offending path in the message. Angular rates
// enter as linewidth/2pi in MHz (gamma0_mhz) or as multiples of gamma0
// (gammap_over_gamma0); every time is in seconds.
nlohmann::json sim_config_to_json(const SimConfig& config);
SimConfig sim_config_from_json(const nlohmann::json& doc);

// Load a simulation config from a config file or from a manifest written by
// an earlier run (its resolved config is reused).
SimConfig load_sim_config(const std::filesystem::path& path);

// The same document with every omitted field set to its default, without
// touching fields that were given: re-parsing the result yields bitwise the
// same SimConfig, which keeps manifest re-runs exactly reproducible.
nlohmann::json resolved_sim_config_json(nlohmann::json doc);

nlohmann::json analysis_to_json(const AnalysisResult& result);
AnalysisResult analysis_from_json(const nlohmann::json& doc);

// Manifest describing one command invocation: command name, fully resolved
// config, input/output paths with content hashes, seed, version, timestamp.
nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config,
                             std::uint64_t seed,
                             const std::vector<std::filesystem::path>& inputs,
                             const std::vector<std::filesystem::path>& outputs);

// If the document is a manifest for `command`, return its resolved config;
// if it is already a bare config object, return it unchanged.
nlohmann::json unwrap_config(const nlohmann::json& doc, const std::string& command);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace scatter::io
