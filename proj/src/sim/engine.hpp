#ifndef EQ_SIM_ENGINE_HPP
#define EQ_SIM_ENGINE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ir/ir.hpp"
#include "sim/components.hpp"

namespace eq::sim {

struct EngineConfig {
  uint64_t cycle_limit = 50'000'000;
  uint64_t bucket_width = 1;  // bandwidth-histogram bucket, in cycles
  int trace_verbosity = 1;    // 0 = stats only, 1 = ops + stalls
};

struct TraceRecord {
  std::string path;      // slash-joined component path ("acc/pe_0_0/kernel")
  std::string name;      // op label when present, else the opcode name
  std::string category;  // "compute", "memory", "event", "stall"
  uint64_t start = 0;
  uint64_t duration = 0;
};

struct ConnectionStats {
  std::optional<uint64_t> max_bw;
  std::map<uint64_t, uint64_t> read_hist;   // cycle -> bytes
  std::map<uint64_t, uint64_t> write_hist;  // cycle -> bytes
  uint64_t total_read = 0;
  uint64_t total_write = 0;
  double read_portion = 0.0;   // max single-cycle utilisation in [0,1]
  double write_portion = 0.0;
};

struct MemoryStats {
  uint64_t bytes_read = 0;
  uint64_t bytes_written = 0;
};

struct SimResult {
  uint64_t total_cycles = 0;  // completion cycle of the last event
  uint64_t warm_up = 0;       // latest first-useful-work start across processors
  double wall_time_seconds = 0.0;
  std::vector<TraceRecord> trace;
  std::map<std::string, ConnectionStats> connections;  // "conn0", "conn1", ...
  std::map<std::string, MemoryStats> memories;         // component path
  std::map<std::string, uint64_t> event_completion;    // event key -> cycle
};

enum class SimErrorKind { UnresolvedSignature, UnknownModel, Deadlock, Timeout, Runtime };

struct SimError : std::runtime_error {
  SimErrorKind kind;
  SimError(SimErrorKind k, const std::string &msg) : std::runtime_error(msg), kind(k) {}
};

// Runs the program to quiescence. Deterministic: identical inputs produce a
// byte-identical SimResult apart from wall_time_seconds.
SimResult simulate(const ir::Program &program, const Registry &registry,
                   const EngineConfig &config = {});

// Completion-cycle lookup for tests and inspection. Event keys are the
// issuing op's label when present, otherwise "e<seq>"; a label issued more
// than once gets "#<n>" suffixes from the second occurrence on.
uint64_t completionOf(const SimResult &result, const std::string &event_key);

// Slash-joined path from the root composite down to the component.
std::string componentPath(const ir::Program &program, ir::ComponentId id);

}  // namespace eq::sim

#endif  // EQ_SIM_ENGINE_HPP
