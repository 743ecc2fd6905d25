#ifndef USWIM_REPORTS_HPP
#define USWIM_REPORTS_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uswim/eval_harness.hpp"
#include "uswim/sensitivity.hpp"
#include "uswim/strategy.hpp"

namespace uswim {

/// Writes to a temporary sibling and renames it over `path`.
/// Throws IoError if the directory is not writable.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

/// cell,strategy,device,sigma,nwc,mean,std,runs,failed,single_sample
std::string sweep_csv(const SweepResult* sweep);

/// One JSON object per trajectory record:
/// {strategy, run, batch, verified, cycles, nwc, acc_train, acc_eval}
std::string trajectories_jsonl(std::span<const Trajectory> trajectories);

/// Budgeted sweep runs in the same line format; `batch` is the grid index
/// and acc_train is null.
std::string sweep_trajectories_jsonl(const SweepResult& sweep);

/// weight_id,layer,rank,metric,h,var,magnitude
std::string sensitivity_csv(const SensitivityReport* report);

std::string correlation_csv(const CorrelationResult& result);

struct ManifestEntry {
  std::string file;
  std::uint64_t size = 0;
  std::string checksum;  // FNV-1a 64, hex
};

struct ReportBundle {
  std::string command;
  std::string config_text;       // canonical key = value rendering
  std::uint64_t config_hash = 0;
  std::vector<std::uint64_t> seeds;
  const SweepResult* sweep = nullptr;
  std::string trajectories;      // JSON lines
  const SensitivityReport* sensitivity = nullptr;
  /// Extra files (name, contents) written next to the standard ones.
  std::vector<std::pair<std::string, std::string>> extra_files;
  std::vector<InvariantFailure> failures;
};

/// Emits sweep.csv, trajectories.jsonl, sensitivity.csv, any extra files and
/// manifest.json into `out_dir`, each atomically. Returns the manifest entries.
std::vector<ManifestEntry> write_reports(const ReportBundle& bundle, const std::filesystem::path& out_dir);

/// Recomputes sizes and checksums of every file listed in a manifest.
/// Returns the names of files that are missing or differ.
std::vector<std::string> verify_manifest(const std::filesystem::path& out_dir);

std::string hex64(std::uint64_t v);

/// Shortest round-trip decimal representation ("nan" for NaN).
std::string format_real(double v);

}  // namespace uswim

#endif  // USWIM_REPORTS_HPP
