#include "uswim/reports.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <Eigen/Core>
#include <json.hpp>

#include "uswim/checkpoint.hpp"
#include "uswim/dataio.hpp"
#include "uswim/errors.hpp"

namespace uswim {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

ordered_json real_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

}  // namespace

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot replace " + path.string());
  }
}

void write_file_atomic(const fs::path& path, const std::string& text) { write_file_atomic(path, as_bytes(text)); }

std::string sweep_csv(const SweepResult* sweep) {
  std::string out = "cell,strategy,device,sigma,nwc,mean,std,runs,failed,single_sample\n";
  if (!sweep) return out;
  for (const auto& c : sweep->cells)
    for (const auto& p : c.points) {
      out += c.cell.label() + ',' + to_string(c.cell.strategy) + ',' + c.cell.device.name + ',' +
             format_real(c.cell.device.sigma) + ',' + format_real(p.nwc) + ',' +
             (p.summary.count ? format_real(p.summary.mean) : "nan") + ',' + format_real(p.summary.std) + ',' +
             std::to_string(p.summary.count) + ',' + std::to_string(p.failed) + ',' +
             (p.single_sample ? "true" : "false") + '\n';
    }
  return out;
}

std::string trajectories_jsonl(std::span<const Trajectory> trajectories) {
  std::string out;
  for (const auto& t : trajectories)
    for (const auto& r : t.records) {
      ordered_json j;
      j["strategy"] = to_string(t.strategy);
      j["run"] = t.run;
      j["batch"] = r.batch;
      j["verified"] = r.verified;
      j["cycles"] = r.cycles;
      j["nwc"] = r.nwc;
      j["acc_train"] = real_or_null(r.acc_train);
      j["acc_eval"] = real_or_null(r.acc_eval);
      out += j.dump() + '\n';
    }
  return out;
}

std::string sweep_trajectories_jsonl(const SweepResult& sweep) {
  std::string out;
  for (const auto& c : sweep.cells)
    for (std::size_t r = 0; r < c.accuracy.size(); ++r)
      for (std::size_t g = 0; g < sweep.nwc_grid.size(); ++g) {
        ordered_json j;
        j["strategy"] = to_string(c.cell.strategy);
        j["device"] = c.cell.device.name;
        j["sigma"] = c.cell.device.sigma;
        j["run"] = r;
        j["batch"] = g;
        j["verified"] = c.verified[r][g];
        j["cycles"] = c.cycles[r][g];
        j["nwc"] = real_or_null(c.realized_nwc[r][g]);
        j["acc_train"] = nullptr;
        j["acc_eval"] = real_or_null(c.accuracy[r][g]);
        out += j.dump() + '\n';
      }
  return out;
}

std::string sensitivity_csv(const SensitivityReport* report) {
  std::string out = "weight_id,layer,rank,metric,h,var,magnitude\n";
  if (!report) return out;
  for (const auto& e : report->entries)
    out += std::to_string(e.weight_id) + ',' + std::to_string(e.layer) + ',' + std::to_string(e.rank) + ',' +
           format_real(e.metric) + ',' + format_real(e.h) + ',' + format_real(e.var) + ',' + format_real(e.magnitude) +
           '\n';
  return out;
}

std::string correlation_csv(const CorrelationResult& result) {
  std::string out = "weight_id,layer,metric,magnitude,mean_drop\n";
  for (const auto& r : result.rows)
    out += std::to_string(r.weight_id) + ',' + std::to_string(r.layer) + ',' + format_real(r.metric) + ',' +
           format_real(r.magnitude) + ',' + format_real(r.mean_drop) + '\n';
  return out;
}

std::vector<ManifestEntry> write_reports(const ReportBundle& bundle, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());

  std::vector<std::pair<std::string, std::string>> files{
      {"sweep.csv", sweep_csv(bundle.sweep)},
      {"trajectories.jsonl", bundle.trajectories},
      {"sensitivity.csv", sensitivity_csv(bundle.sensitivity)},
  };
  files.insert(files.end(), bundle.extra_files.begin(), bundle.extra_files.end());

  std::vector<ManifestEntry> entries;
  for (const auto& [name, text] : files) {
    write_file_atomic(out_dir / name, text);
    entries.push_back({name, text.size(), hex64(fnv1a64(as_bytes(text)))});
  }

  ordered_json m;
  m["tool"] = "uswim";
  m["version"] = USWIM_VERSION;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  m["command"] = bundle.command;
  m["config_hash"] = hex64(bundle.config_hash);
  m["config"] = bundle.config_text;
  m["seeds"] = bundle.seeds;
  ordered_json list = ordered_json::array();
  for (const auto& e : entries) list.push_back({{"file", e.file}, {"size", e.size}, {"checksum", e.checksum}});
  m["files"] = list;
  ordered_json failures = ordered_json::array();
  for (const auto& f : bundle.failures)
    failures.push_back({{"cell", f.cell}, {"invariant", f.invariant}, {"detail", f.detail}});
  m["invariant_failures"] = failures;
  write_file_atomic(out_dir / "manifest.json", m.dump(2) + "\n");
  return entries;
}

std::vector<std::string> verify_manifest(const fs::path& out_dir) {
  const auto bytes = read_file(out_dir / "manifest.json");
  ordered_json m;
  try {
    m = ordered_json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::Malformed, std::string("manifest.json: ") + e.what());
  }
  std::vector<std::string> bad;
  for (const auto& f : m.at("files")) {
    const std::string name = f.at("file").get<std::string>();
    std::vector<std::uint8_t> content;
    try {
      content = read_file(out_dir / name);
    } catch (const IoError&) {
      bad.push_back(name);
      continue;
    }
    if (content.size() != f.at("size").get<std::uint64_t>() || hex64(fnv1a64(content)) != f.at("checksum").get<std::string>())
      bad.push_back(name);
  }
  return bad;
}

}  // namespace uswim
