#include "sim/report.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

namespace eq::sim {

namespace {

std::string leafName(const std::string &path) {
  auto pos = path.rfind('/');
  return pos == std::string::npos ? path : path.substr(pos + 1);
}

uint64_t maxHistBytes(const std::map<uint64_t, uint64_t> &hist) {
  uint64_t best = 0;
  for (const auto &[cycle, bytes] : hist) best = std::max(best, bytes);
  return best;
}

double avgBandwidth(uint64_t total_bytes, uint64_t total_cycles) {
  return total_cycles == 0 ? 0.0
                           : static_cast<double>(total_bytes) / static_cast<double>(total_cycles);
}

nlohmann::ordered_json connectionJson(const ConnectionStats &c, uint64_t total_cycles) {
  nlohmann::ordered_json j;
  if (c.max_bw)
    j["max_bw"] = *c.max_bw;
  else
    j["max_bw"] = nullptr;
  j["total_read"] = c.total_read;
  j["total_write"] = c.total_write;
  j["avg_read_bw"] = avgBandwidth(c.total_read, total_cycles);
  j["avg_write_bw"] = avgBandwidth(c.total_write, total_cycles);
  j["max_read_bw"] = maxHistBytes(c.read_hist);
  j["max_write_bw"] = maxHistBytes(c.write_hist);
  j["read_portion"] = c.read_portion;
  j["write_portion"] = c.write_portion;
  return j;
}

}  // namespace

std::string emitTrace(const SimResult &result) {
  nlohmann::ordered_json doc;
  doc["traceEvents"] = nlohmann::ordered_json::array();
  for (const TraceRecord &r : result.trace) {
    nlohmann::ordered_json e;
    e["name"] = r.name;
    e["cat"] = r.category;
    e["ph"] = "X";
    e["ts"] = r.start;
    e["dur"] = r.duration;
    e["pid"] = r.path;
    e["tid"] = leafName(r.path);
    doc["traceEvents"].push_back(std::move(e));
  }
  doc["displayTimeUnit"] = "ms";
  return doc.dump(2) + "\n";
}

std::string emitProfileMachine(const SimResult &result) {
  nlohmann::ordered_json doc;
  doc["total_cycles"] = result.total_cycles;
  doc["warm_up"] = result.warm_up;
  doc["connections"] = nlohmann::ordered_json::object();
  for (const auto &[name, stats] : result.connections)
    doc["connections"][name] = connectionJson(stats, result.total_cycles);
  doc["memories"] = nlohmann::ordered_json::object();
  for (const auto &[path, stats] : result.memories) {
    nlohmann::ordered_json m;
    m["bytes_read"] = stats.bytes_read;
    m["bytes_written"] = stats.bytes_written;
    doc["memories"][path] = std::move(m);
  }
  doc["events"] = nlohmann::ordered_json::object();
  for (const auto &[key, cycle] : result.event_completion) doc["events"][key] = cycle;
  return doc.dump(2) + "\n";
}

std::string emitProfileText(const SimResult &result) {
  std::ostringstream out;
  out << "total cycles : " << result.total_cycles << "\n";
  out << "warm-up      : " << result.warm_up << "\n";
  out << "wall time    : " << result.wall_time_seconds << " s\n";
  if (!result.connections.empty()) {
    out << "\nconnections (bytes/cycle)\n";
    out << "  name     max_bw   avg_rd   avg_wr   max_rd   max_wr   rd_port  wr_port\n";
    for (const auto &[name, c] : result.connections) {
      char line[256];
      std::string bw = c.max_bw ? std::to_string(*c.max_bw) : "inf";
      std::snprintf(line, sizeof line, "  %-8s %-8s %-8.2f %-8.2f %-8llu %-8llu %-8.2f %-8.2f\n",
                    name.c_str(), bw.c_str(), avgBandwidth(c.total_read, result.total_cycles),
                    avgBandwidth(c.total_write, result.total_cycles),
                    static_cast<unsigned long long>(maxHistBytes(c.read_hist)),
                    static_cast<unsigned long long>(maxHistBytes(c.write_hist)), c.read_portion,
                    c.write_portion);
      out << line;
    }
  }
  if (!result.memories.empty()) {
    out << "\nmemories (bytes)\n";
    for (const auto &[path, m] : result.memories) {
      char line[256];
      std::snprintf(line, sizeof line, "  %-24s read %-12llu written %-12llu\n", path.c_str(),
                    static_cast<unsigned long long>(m.bytes_read),
                    static_cast<unsigned long long>(m.bytes_written));
      out << line;
    }
  }
  return out.str();
}

}  // namespace eq::sim
