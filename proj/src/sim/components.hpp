#ifndef EQ_SIM_COMPONENTS_HPP
#define EQ_SIM_COMPONENTS_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eq::sim {

struct RegistryError : std::runtime_error {
  explicit RegistryError(const std::string &msg) : std::runtime_error(msg) {}
};

// Timing parameters for one memory model tag.
struct MemoryModel {
  uint64_t cycles_per_access = 1;
  uint32_t read_ports = 1;   // per bank; 0 = unbounded
  uint32_t write_ports = 1;  // per bank; 0 = unbounded
  uint64_t warm_up = 0;      // extra cycles on the first access
};

enum class AccessKind { Read, Write };

struct AccessResult {
  bool stall = false;
  uint64_t cycles = 0;
};

// Live port/byte accounting for one memory component instance.
// Low-order address bits select the bank.
struct MemoryState {
  MemoryModel model;
  uint32_t banks = 1;
  uint64_t capacity_elems = 0;
  uint64_t bytes_read = 0;
  uint64_t bytes_written = 0;
  bool touched = false;

  // Per-bank counts of accesses that began in the current cycle.
  std::vector<uint32_t> reads_started;
  std::vector<uint32_t> writes_started;

  void beginCycle();
};

// Arbitration plus base latency. Addressed accesses hit one bank; bulk
// accesses (no address) stripe across every bank and port in parallel.
// Byte counters are credited by the caller on completion via creditBytes.
AccessResult memoryAccess(MemoryState &state, AccessKind kind, uint64_t elems,
                          uint32_t elem_bits, std::optional<uint64_t> addr);

void creditBytes(MemoryState &state, AccessKind kind, uint64_t bytes);

// ⌈bytes/bw⌉ for limited connections, 0 for unlimited.
uint64_t connectionTransferCycles(std::optional<uint64_t> bandwidth, uint64_t bytes);

// Per-direction transfer accounting for one connection instance.
struct ConnectionState {
  std::optional<uint64_t> max_bw;
  // cycle -> bytes moved, per direction.
  std::map<uint64_t, uint64_t> read_hist;
  std::map<uint64_t, uint64_t> write_hist;
  uint64_t total_read = 0;
  uint64_t total_write = 0;

  // Spreads a transfer ending at end_cycle across its duration, bw bytes per
  // cycle with the remainder in the first cycle. Instant when unlimited.
  void credit(AccessKind direction, uint64_t end_cycle, uint64_t duration, uint64_t bytes);

  // Largest single-cycle utilisation as a fraction of max_bw; 0 if unlimited.
  double maxBandwidthPortion(AccessKind direction) const;
};

// Operation functions: cycle count or a stall signal. The registry is the
// extension point for custom device behavior.
struct OpContext {
  std::vector<uint64_t> operand_elems;
  uint64_t result_elems = 1;
};

struct OpOutcome {
  uint64_t cycles = 0;
  bool stall = false;
};

using OperationFunction = std::function<OpOutcome(const OpContext &)>;

class Registry {
 public:
  // Preloaded with mac/mul4/mac4/add/mul at 1 cycle, SRAM (1 cycle/access,
  // 1 read + 1 write port per bank) and Register (0 cycles, unbounded ports).
  static Registry builtins();

  void registerOperation(const std::string &signature, OperationFunction fn);
  // Like registerOperation, but replaces an existing entry (latency
  // overrides of the built-ins).
  void setOperation(const std::string &signature, OperationFunction fn);
  const OperationFunction *findOperation(const std::string &signature) const;

  void setMemoryModel(const std::string &tag, MemoryModel model);
  std::optional<MemoryModel> memoryModel(const std::string &tag) const;

  // Registration is rejected once a simulation has started on this registry.
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

 private:
  std::map<std::string, OperationFunction> ops_;
  std::map<std::string, MemoryModel> memories_;
  bool frozen_ = false;
};

}  // namespace eq::sim

#endif  // EQ_SIM_COMPONENTS_HPP
