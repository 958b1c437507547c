#ifndef EQ_SIM_REPORT_HPP
#define EQ_SIM_REPORT_HPP

#include <string>

#include "sim/engine.hpp"

namespace eq::sim {

// Chrome-loadable event trace: {"traceEvents": [...]} with one complete
// event (ph = "X") per record, ts/dur in microseconds where 1 us = 1 cycle,
// pid = component path, tid = leaf component name. Byte-deterministic.
std::string emitTrace(const SimResult &result);

// Human-readable profile: total cycles, warm-up, wall time, per-connection
// bandwidth figures, per-memory byte totals.
std::string emitProfileText(const SimResult &result);

// Stable-keyed JSON profile for diffing. Omits wall time so identical runs
// produce identical bytes.
std::string emitProfileMachine(const SimResult &result);

}  // namespace eq::sim

#endif  // EQ_SIM_REPORT_HPP
