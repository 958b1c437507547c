#include "sim/components.hpp"

#include <algorithm>

namespace eq::sim {

void MemoryState::beginCycle() {
  reads_started.assign(banks, 0);
  writes_started.assign(banks, 0);
}

namespace {

uint64_t bytesFor(uint64_t elems, uint32_t elem_bits) {
  return (elems * elem_bits + 7) / 8;
}

}  // namespace

AccessResult memoryAccess(MemoryState &state, AccessKind kind, uint64_t elems,
                          uint32_t elem_bits, std::optional<uint64_t> addr) {
  (void)elem_bits;
  if (state.reads_started.size() != state.banks) state.beginCycle();
  uint32_t ports = kind == AccessKind::Read ? state.model.read_ports : state.model.write_ports;
  auto &started = kind == AccessKind::Read ? state.reads_started : state.writes_started;
  uint64_t warm = state.touched ? 0 : state.model.warm_up;

  if (ports == 0 || state.model.cycles_per_access == 0) {
    // Zero-latency or unbounded-port device: no arbitration.
    state.touched = true;
    uint64_t per = state.model.cycles_per_access;
    uint64_t lanes = ports == 0 ? elems : std::min<uint64_t>(elems, uint64_t(ports) * state.banks);
    uint64_t rounds = lanes == 0 ? 0 : (elems + lanes - 1) / lanes;
    return {false, warm + per * rounds};
  }

  if (addr) {
    // Addressed access: one port on one bank, elements served sequentially.
    uint32_t bank = static_cast<uint32_t>(*addr % state.banks);
    if (started[bank] >= ports) return {true, 0};
    started[bank]++;
    state.touched = true;
    return {false, warm + state.model.cycles_per_access * std::max<uint64_t>(elems, 1)};
  }

  // Bulk access: claims every bank. Stalls if any bank already saturated.
  for (uint32_t b = 0; b < state.banks; ++b)
    if (started[b] >= ports) return {true, 0};
  for (uint32_t b = 0; b < state.banks; ++b) started[b] = ports;
  state.touched = true;
  uint64_t lanes = uint64_t(ports) * state.banks;
  uint64_t rounds = (elems + lanes - 1) / lanes;
  return {false, warm + state.model.cycles_per_access * rounds};
}

void creditBytes(MemoryState &state, AccessKind kind, uint64_t bytes) {
  if (kind == AccessKind::Read)
    state.bytes_read += bytes;
  else
    state.bytes_written += bytes;
}

uint64_t connectionTransferCycles(std::optional<uint64_t> bandwidth, uint64_t bytes) {
  if (!bandwidth || bytes == 0) return 0;
  return (bytes + *bandwidth - 1) / *bandwidth;
}

void ConnectionState::credit(AccessKind direction, uint64_t end_cycle, uint64_t duration,
                             uint64_t bytes) {
  auto &hist = direction == AccessKind::Read ? read_hist : write_hist;
  auto &total = direction == AccessKind::Read ? total_read : total_write;
  total += bytes;
  if (!max_bw || duration == 0) {
    hist[end_cycle] += bytes;
    return;
  }
  // Last cycle of the transfer lands at end_cycle - 1 (completion boundary).
  uint64_t remaining = bytes;
  for (uint64_t i = 0; i < duration && remaining > 0; ++i) {
    uint64_t cycle = end_cycle - 1 - i;
    uint64_t chunk = std::min(remaining, *max_bw);
    hist[cycle] += chunk;
    remaining -= chunk;
  }
}

double ConnectionState::maxBandwidthPortion(AccessKind direction) const {
  if (!max_bw) return 0.0;
  const auto &hist = direction == AccessKind::Read ? read_hist : write_hist;
  uint64_t best = 0;
  for (const auto &[cycle, bytes] : hist) best = std::max(best, bytes);
  return static_cast<double>(best) / static_cast<double>(*max_bw);
}

Registry Registry::builtins() {
  Registry r;
  auto one_cycle = [](const OpContext &) { return OpOutcome{1, false}; };
  r.registerOperation("mac", one_cycle);
  r.registerOperation("mul4", one_cycle);
  r.registerOperation("mac4", one_cycle);
  r.registerOperation("add", one_cycle);
  r.registerOperation("mul", one_cycle);
  r.setMemoryModel("SRAM", MemoryModel{1, 1, 1, 0});
  r.setMemoryModel("Register", MemoryModel{0, 0, 0, 0});
  return r;
}

void Registry::registerOperation(const std::string &signature, OperationFunction fn) {
  if (frozen_) throw RegistryError("registry is frozen: simulation already started");
  if (ops_.count(signature))
    throw RegistryError("duplicate operation signature '" + signature + "'");
  ops_[signature] = std::move(fn);
}

void Registry::setOperation(const std::string &signature, OperationFunction fn) {
  if (frozen_) throw RegistryError("registry is frozen: simulation already started");
  ops_[signature] = std::move(fn);
}

const OperationFunction *Registry::findOperation(const std::string &signature) const {
  auto it = ops_.find(signature);
  return it == ops_.end() ? nullptr : &it->second;
}

void Registry::setMemoryModel(const std::string &tag, MemoryModel model) {
  if (frozen_) throw RegistryError("registry is frozen: simulation already started");
  memories_[tag] = model;
}

std::optional<MemoryModel> Registry::memoryModel(const std::string &tag) const {
  auto it = memories_.find(tag);
  if (it == memories_.end()) return std::nullopt;
  return it->second;
}

}  // namespace eq::sim
