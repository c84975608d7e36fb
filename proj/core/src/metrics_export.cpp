#include <fstream>

#include <fmt/format.h>

#include "netoffload/error.hpp"
#include "netoffload/simulator.hpp"

namespace netoffload {

namespace {

// Shortest round-trip representation, always with a decimal point so that
// columns read back as reals.
std::string real(double v) {
  auto s = fmt::format("{}", v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << content;
  if (!out) throw std::runtime_error(fmt::format("write failed for '{}'", path.string()));
}

}  // namespace

std::string series_csv(const RunMetrics& metrics) {
  std::string out = "time_ms,node_id,normalized_load\n";
  for (const auto& s : metrics.series) out += fmt::format("{},{},{}\n", real(s.time_ms), s.node, real(s.normalized_load));
  return out;
}

std::string summary_csv(const RunMetrics& m) {
  std::string out = "tau,phi_ms,psi,total,executed,executed_at_server,forwarded,dropped\n";
  out += fmt::format("{},{},{},{},{},{},{},{}\n", real(m.tau), real(m.phi_ms), real(m.psi), m.total, m.executed,
                     m.executed_at_server, m.forwarded, m.dropped);
  return out;
}

nlohmann::json metrics_to_json(const RunMetrics& m) {
  using nlohmann::json;
  json nodes = json::array();
  for (const auto& n : m.nodes)
    nodes.push_back({{"node_id", n.node},
                     {"mean_load", n.mean_load},
                     {"mean_concurrency", n.mean_concurrency},
                     {"peak_load", n.peak_load},
                     {"executed", n.executed},
                     {"forwarded", n.forwarded},
                     {"dropped", n.dropped},
                     {"proactive_decisions", n.proactive_decisions},
                     {"mean_q", n.mean_q}});
  json series = json::array();
  for (const auto& s : m.series)
    series.push_back({{"time_ms", s.time_ms}, {"node_id", s.node}, {"normalized_load", s.normalized_load}});
  return {{"summary",
           {{"tau", m.tau},
            {"phi_ms", m.phi_ms},
            {"psi", m.psi},
            {"total", m.total},
            {"executed", m.executed},
            {"executed_at_server", m.executed_at_server},
            {"forwarded", m.forwarded},
            {"dropped", m.dropped},
            {"window_start_s", m.window_start},
            {"window_end_s", m.window_end}}},
          {"nodes", nodes},
          {"series", series}};
}

std::vector<std::filesystem::path> export_metrics(const RunMetrics& metrics, MetricsFormat format,
                                                  const std::filesystem::path& destination) {
  std::error_code ec;
  std::filesystem::create_directories(destination, ec);
  if (ec || !std::filesystem::is_directory(destination))
    throw std::runtime_error(fmt::format("cannot create output directory '{}'", destination.string()));
  std::vector<std::filesystem::path> written;
  if (format == MetricsFormat::csv) {
    written.push_back(destination / "series.csv");
    write_file(written.back(), series_csv(metrics));
    written.push_back(destination / "summary.csv");
    write_file(written.back(), summary_csv(metrics));
  } else {
    written.push_back(destination / "metrics.json");
    write_file(written.back(), metrics_to_json(metrics).dump(2) + "\n");
  }
  return written;
}

}  // namespace netoffload
