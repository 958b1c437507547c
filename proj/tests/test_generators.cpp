#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "gen/generators.hpp"
#include "ir/ir.hpp"
#include "sim/engine.hpp"

using namespace eq;
using namespace eq::gen;
using sim::Registry;
using sim::SimResult;
using sim::TraceRecord;

namespace {

SimResult run(const ir::Program &p) {
  REQUIRE(ir::verify(p).empty());
  Registry reg = Registry::builtins();
  return sim::simulate(p, reg);
}

size_t countTrace(const SimResult &r, const std::string &name) {
  size_t n = 0;
  for (const TraceRecord &t : r.trace)
    if (t.name == name) ++n;
  return n;
}

ConvConfig smallConv() {
  ConvConfig c;
  c.h = 6, c.w = 6, c.f_h = 3, c.f_w = 3, c.c = 2, c.n = 4;
  return c;
}

}  // namespace

// ── FIR ─────────────────────────────────────────────────────────────────────

TEST_CASE("fir case 1: single core sustains one output group per 16 cycles") {
  FirConfig cfg;
  cfg.fir_case = 1;
  SimResult r = run(genFir(cfg));
  CHECK(r.total_cycles == 2048);
  CHECK(r.warm_up == 0);
  // 16 vector slots per group, nothing else on the core's timeline.
  CHECK(countTrace(r, "mul4") == 128);
  CHECK(countTrace(r, "mac4") == 128 * 15);
}

TEST_CASE("fir case 2: 16-core chain fills in 15 cycles and drains one group per cycle") {
  FirConfig cfg;
  cfg.fir_case = 2;
  SimResult r = run(genFir(cfg));
  CHECK(r.total_cycles == 143);  // 128 groups + 15-stage pipeline fill
  CHECK(r.warm_up == 15);
}

TEST_CASE("fir case 3: bandwidth-4 streaming makes every stage busy 1 cycle in 4") {
  FirConfig cfg;
  cfg.fir_case = 3;
  SimResult r = run(genFir(cfg));
  CHECK(r.total_cycles == 588);  // 4 cycles per group, 5 per pipeline stage
  CHECK(r.warm_up == 79);

  // Each stage runs its vector op exactly once every 4 cycles, from its very
  // first group on: the input connection is the bottleneck throughout.
  std::map<std::string, std::vector<uint64_t>> busy;
  for (const TraceRecord &t : r.trace)
    if (t.name == "mul4" || t.name == "mac4") busy[t.path].push_back(t.start);
  CHECK(busy.size() == 16);
  for (auto &[path, starts] : busy) {
    REQUIRE(starts.size() == 128);
    std::sort(starts.begin(), starts.end());
    for (size_t i = 1; i < starts.size(); ++i) CHECK(starts[i] - starts[i - 1] == 4);
  }

  // The feed connection is saturated end to end.
  const sim::ConnectionStats &feed = r.connections.at("conn0");
  CHECK(feed.total_write == 128 * 16);
  CHECK(feed.write_portion == 1.0);
}

TEST_CASE("fir case 4: four-core split keeps every core stall-free after warm-up") {
  FirConfig cfg;
  cfg.fir_case = 4;
  SimResult r = run(genFir(cfg));
  CHECK(r.total_cycles == 538);  // 4 cycles per group + 26-cycle pipeline fill
  CHECK(r.warm_up == 26);
  for (const TraceRecord &t : r.trace)
    if (t.category == "stall") CHECK(t.start < r.warm_up);
  // Each core covers 8 taps: 4 vector slots per group.
  CHECK(countTrace(r, "mul4") + countTrace(r, "mac4") == 128 * 16);
}

TEST_CASE("fir validation rejects malformed configs") {
  FirConfig cfg;
  cfg.fir_case = 5;
  CHECK_THROWS_AS(genFir(cfg), GenError);
  cfg.fir_case = 1;
  cfg.samples = 510;
  CHECK_THROWS_AS(genFir(cfg), GenError);
  cfg.samples = 512;
  cfg.taps = 7;
  CHECK_THROWS_AS(genFir(cfg), GenError);
  cfg.taps = 24;  // not divisible by 16
  cfg.fir_case = 4;
  CHECK_THROWS_AS(genFir(cfg), GenError);
}

// ── Systolic dims ───────────────────────────────────────────────────────────

TEST_CASE("dataflow dimension mapping and iteration count") {
  ConvConfig conv = smallConv();  // taps 18, out 16, n 4
  ArrayConfig arr{4, 4, Dataflow::WS};
  SystolicDims d = systolicDims(conv, arr);
  CHECK(d.d1 == 18);
  CHECK(d.d2 == 4);
  CHECK(d.l == 16);
  CHECK(loopIterations(conv, arr) == 5);  // ceil(18/4) * ceil(4/4)

  arr.dataflow = Dataflow::IS;
  d = systolicDims(conv, arr);
  CHECK(d.d1 == 18);
  CHECK(d.d2 == 16);
  CHECK(d.l == 4);
  CHECK(loopIterations(conv, arr) == 20);

  arr.dataflow = Dataflow::OS;
  d = systolicDims(conv, arr);
  CHECK(d.d1 == 4);
  CHECK(d.d2 == 18);
  CHECK(d.l == 16);
  CHECK(loopIterations(conv, arr) == 5);

  ConvConfig bad = conv;
  bad.f_h = 9;
  CHECK_THROWS_AS(systolicDims(bad, arr), GenError);
  CHECK_THROWS_AS(systolicDims(conv, ArrayConfig{0, 4, Dataflow::WS}), GenError);
  CHECK_THROWS_AS(dataflowFromName("XX"), GenError);
}

// ── Scheduled systolic program ──────────────────────────────────────────────

TEST_CASE("systolic MAC work is identical across dataflows") {
  ConvConfig conv = smallConv();
  uint64_t want = conv.eH() * conv.eW() * conv.n * conv.f_h * conv.f_w * conv.c;
  for (Dataflow df : {Dataflow::WS, Dataflow::IS, Dataflow::OS}) {
    ArrayConfig arr{2, 2, df};
    SimResult r = run(genSystolic(conv, arr));
    CHECK(countTrace(r, "mac") == want);
    // Partial sums leave through the bottom of the active rectangle once per
    // row tile: the reduction over D1 happens across tiles.
    SystolicDims d = systolicDims(conv, arr);
    CHECK(countTrace(r, "drain") == ((d.d1 + arr.a_h - 1) / arr.a_h) * d.d2 * d.l);
  }
}

TEST_CASE("stationary values are loaded exactly once per tile") {
  ConvConfig conv = smallConv();
  ArrayConfig arr{3, 2, Dataflow::WS};  // 18 % 3 == 0, 4 % 2 == 0: no ragged tiles
  uint64_t iters = loopIterations(conv, arr);
  SimResult r = run(genSystolic(conv, arr));
  for (uint64_t h = 0; h < arr.a_h; ++h)
    for (uint64_t w = 0; w < arr.a_w; ++w) {
      std::string path = "acc/pe_" + std::to_string(h) + "_" + std::to_string(w) + "/stat";
      CHECK(r.memories.at(path).bytes_written == iters * 4);
    }
}

TEST_CASE("ragged tiles only touch the PEs they use") {
  ConvConfig conv = smallConv();
  ArrayConfig arr{4, 4, Dataflow::WS};  // d1 = 18: last row tile uses 2 of 4 rows
  SimResult r = run(genSystolic(conv, arr));
  uint64_t iters = loopIterations(conv, arr);
  CHECK(r.memories.at("acc/pe_0_0/stat").bytes_written == iters * 4);
  // Rows 2..3 sit out the ragged tail tile.
  CHECK(r.memories.at("acc/pe_3_0/stat").bytes_written == (iters - 1) * 4);
  uint64_t want = conv.eH() * conv.eW() * conv.n * conv.f_h * conv.f_w * conv.c;
  CHECK(countTrace(r, "mac") == want);
}

TEST_CASE("cycles scale with the tile iteration count") {
  ConvConfig conv = smallConv();
  ArrayConfig arr{2, 2, Dataflow::WS};
  SimResult one = run(genSystolic(conv, arr));
  ConvConfig doubled = conv;
  doubled.n = conv.n * 2;  // doubles D2, hence the tile count, at fixed L
  SimResult two = run(genSystolic(doubled, arr));
  double ratio = static_cast<double>(two.total_cycles) / static_cast<double>(one.total_cycles);
  CHECK(ratio > 1.9);
  CHECK(ratio < 2.1);
}

TEST_CASE("degenerate 1x1 array reduces to a sequential MAC loop") {
  ConvConfig conv;
  conv.h = 3, conv.w = 3, conv.f_h = 3, conv.f_w = 3, conv.c = 1, conv.n = 1;
  ArrayConfig arr{1, 1, Dataflow::WS};
  SystolicDims d = systolicDims(conv, arr);
  CHECK(d.d1 == 9);
  CHECK(d.d2 == 1);
  CHECK(d.l == 1);
  SimResult r = run(genSystolic(conv, arr));
  CHECK(countTrace(r, "mac") == 9);
  // Per tile: 1 fill + 1 edge read + 1 mac + 1 drain write, lockstepped.
  CHECK(r.total_cycles == 9 * 4);
}

// ── Pipeline entry point ────────────────────────────────────────────────────

TEST_CASE("pipeline input verifies, simulates, and performs the same MAC work") {
  ConvConfig conv = smallConv();
  ArrayConfig arr{2, 2, Dataflow::WS};
  ir::Program p = genSystolicPipelineInput(conv, arr);
  SimResult r = run(p);
  uint64_t want = conv.eH() * conv.eW() * conv.n * conv.f_h * conv.f_w * conv.c;
  CHECK(countTrace(r, "mac") == want);
  // The unscheduled nest serializes on the host core: far slower than the
  // mapped program.
  SimResult mapped = run(genSystolic(conv, arr));
  CHECK(r.total_cycles > 2 * mapped.total_cycles);
}

TEST_CASE("coarse-grained pipeline input uses one opaque kernel") {
  ConvConfig conv = smallConv();
  ArrayConfig arr{2, 2, Dataflow::WS};
  ir::Program p = genSystolicPipelineInput(conv, arr, PipelineStage::Linalg);
  REQUIRE(ir::verify(p).empty());
  Registry reg = Registry::builtins();
  reg.registerOperation("conv", [](const sim::OpContext &) {
    return sim::OpOutcome{1000, false};
  });
  SimResult r = sim::simulate(p, reg);
  CHECK(countTrace(r, "conv") == 1);
  CHECK(r.total_cycles >= 1000);
}
