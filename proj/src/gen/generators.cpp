#include "gen/generators.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace eq::gen {

using ir::Builder;
using ir::ConnectionKind;
using ir::Value;

namespace {

uint64_t ceilDiv(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

}  // namespace

// ── Convolution configuration ───────────────────────────────────────────────

const char *dataflowName(Dataflow df) {
  switch (df) {
    case Dataflow::WS: return "WS";
    case Dataflow::IS: return "IS";
    case Dataflow::OS: return "OS";
  }
  return "WS";
}

Dataflow dataflowFromName(const std::string &name) {
  if (name == "WS" || name == "ws") return Dataflow::WS;
  if (name == "IS" || name == "is") return Dataflow::IS;
  if (name == "OS" || name == "os") return Dataflow::OS;
  throw GenError("unknown dataflow '" + name + "' (expected WS, IS, or OS)");
}

void ConvConfig::validate() const {
  if (h == 0 || w == 0 || f_h == 0 || f_w == 0 || c == 0 || n == 0)
    throw GenError("convolution dimensions must be positive");
  if (f_h > h || f_w > w) throw GenError("filter does not fit inside the input feature map");
}

void ArrayConfig::validate() const {
  if (a_h == 0 || a_w == 0) throw GenError("array dimensions must be positive");
}

SystolicDims systolicDims(const ConvConfig &conv, const ArrayConfig &arr) {
  conv.validate();
  arr.validate();
  uint64_t taps = conv.f_h * conv.f_w * conv.c;
  uint64_t out = conv.eH() * conv.eW();
  switch (arr.dataflow) {
    case Dataflow::WS: return {taps, conv.n, out};
    case Dataflow::IS: return {taps, out, conv.n};
    case Dataflow::OS: return {conv.n, taps, out};
  }
  return {};
}

uint64_t loopIterations(const ConvConfig &conv, const ArrayConfig &arr) {
  SystolicDims d = systolicDims(conv, arr);
  return ceilDiv(d.d1, arr.a_h) * ceilDiv(d.d2, arr.a_w);
}

// ── Systolic structure ──────────────────────────────────────────────────────

namespace {

struct PeParts {
  Value comp, proc, stat_mem, acc_mem, in_mem;
  Value stat_buf, acc_buf, in_buf;  // valid only when per-PE buffers requested
};

struct SystolicHw {
  Value root, cpu, dma;
  Value if_mem, stat_mem, of_mem, bcast_mem;
  Value if_buf, of_buf;
  Value stat_buf;                             // pipeline form: one a_h*a_w buffer
  std::vector<std::vector<Value>> stage_buf;  // scheduled form: 1-elem staging per PE
  std::vector<std::vector<PeParts>> pe;
};

// Shared hardware emitter. The scheduled generator allocates per-PE register
// buffers and per-PE SRAM staging slots; the pipeline entry leaves the PE
// register files empty (the mapping passes allocate into them) and exposes
// the stationary operands as one flat SRAM buffer. The `bcast` register file
// exists for the pipeline's bulk stationary copy.
SystolicHw buildSystolicHw(Builder &b, uint64_t a_h, uint64_t a_w, bool per_pe_bufs) {
  SystolicHw hw;
  hw.cpu = b.createProc("ARMr5");
  hw.dma = b.createDma();
  hw.if_mem = b.createMem({a_h}, 32, static_cast<uint32_t>(a_h), "SRAM");
  hw.stat_mem = b.createMem({a_h * a_w}, 32, 1, "SRAM");
  hw.of_mem = b.createMem({a_w}, 32, static_cast<uint32_t>(a_w), "SRAM");
  hw.bcast_mem = b.createMem({a_h * a_w}, 32, 1, "Register");

  std::vector<std::pair<std::string, Value>> children = {
      {"ctrl", hw.cpu},           {"dma", hw.dma},         {"ifmap_sram", hw.if_mem},
      {"stat_sram", hw.stat_mem}, {"ofmap_sram", hw.of_mem}, {"bcast", hw.bcast_mem}};
  hw.pe.resize(a_h);
  for (uint64_t h = 0; h < a_h; ++h) {
    for (uint64_t w = 0; w < a_w; ++w) {
      PeParts p;
      p.proc = b.createProc("PE");
      p.stat_mem = b.createMem({1}, 32, 1, "Register");
      p.acc_mem = b.createMem({1}, 32, 1, "Register");
      p.in_mem = b.createMem({1}, 32, 1, "Register");
      p.comp = b.createComp(
          {{"core", p.proc}, {"stat", p.stat_mem}, {"acc", p.acc_mem}, {"in", p.in_mem}}, "pe");
      children.push_back({"pe_" + std::to_string(h) + "_" + std::to_string(w), p.comp});
      hw.pe[h].push_back(p);
    }
  }
  hw.root = b.createComp(children, "acc");

  hw.if_buf = b.alloc(hw.if_mem, a_h, 32);
  b.setLabel("ifmap_buf");
  hw.of_buf = b.alloc(hw.of_mem, a_w, 32);
  b.setLabel("ofmap_buf");
  if (per_pe_bufs) {
    hw.stage_buf.resize(a_h);
    for (uint64_t h = 0; h < a_h; ++h)
      for (uint64_t w = 0; w < a_w; ++w) {
        hw.stage_buf[h].push_back(b.alloc(hw.stat_mem, 1, 32));
        PeParts &p = hw.pe[h][w];
        p.stat_buf = b.alloc(p.stat_mem, 1, 32);
        p.acc_buf = b.alloc(p.acc_mem, 1, 32);
        p.in_buf = b.alloc(p.in_mem, 1, 32);
      }
  } else {
    hw.stat_buf = b.alloc(hw.stat_mem, a_h * a_w, 32);
    b.setLabel("stat_buf");
  }
  return hw;
}

}  // namespace

// ── Scheduled systolic program ──────────────────────────────────────────────

ir::Program genSystolic(const ConvConfig &conv, const ArrayConfig &arr) {
  SystolicDims dims = systolicDims(conv, arr);
  uint64_t a_h = arr.a_h, a_w = arr.a_w;

  Builder b;
  SystolicHw hw = buildSystolicHw(b, a_h, a_w, /*per_pe_bufs=*/true);
  Value barrier = b.controlStart();

  uint64_t t1_count = ceilDiv(dims.d1, a_h), t2_count = ceilDiv(dims.d2, a_w);
  for (uint64_t t1 = 0; t1 < t1_count; ++t1) {
    for (uint64_t t2 = 0; t2 < t2_count; ++t2) {
      uint64_t rows = std::min(a_h, dims.d1 - t1 * a_h);
      uint64_t cols = std::min(a_w, dims.d2 - t2 * a_w);

      // Stationary fill: one DMA transfer per used PE, serialized on the DMA.
      std::vector<Value> fills;
      for (uint64_t h = 0; h < rows; ++h)
        for (uint64_t w = 0; w < cols; ++w) {
          fills.push_back(b.memcpy(barrier, hw.stage_buf[h][w], hw.pe[h][w].stat_buf, hw.dma));
          b.setLabel("fill");
        }
      barrier = b.controlAnd(fills);

      // Dense lockstep: every used PE works every step; the fill and drain
      // skews of a physical array are not modeled (boundary conditions
      // omitted, matching the pipeline-built programs).
      for (uint64_t s = 0; s < dims.l; ++s) {
        // Read stage: edge PEs pull from the ifmap SRAM, interior PEs from
        // their west neighbour's forwarded value; everyone MACs into acc.
        std::vector<Value> reads;
        for (uint64_t h = 0; h < rows; ++h)
          for (uint64_t w = 0; w < cols; ++w) {
            const PeParts &p = hw.pe[h][w];
            if (w == 0) {
              auto lh = b.beginLaunch(barrier, p.proc, {hw.if_buf, p.in_buf, p.stat_buf, p.acc_buf});
              Value d = b.read(lh.args[0], {}, 1, b.constant(static_cast<int64_t>(h)));
              b.write(d, lh.args[1]);
              Value sv = b.read(lh.args[2]);
              Value av = b.read(lh.args[3]);
              Value m = b.externOp("mac", {d, sv, av}, 1, 1, 32)[0];
              b.setLabel("mac");
              b.write(m, lh.args[3]);
              b.ret();
              b.endLaunch();
              reads.push_back(lh.done);
            } else {
              auto lh = b.beginLaunch(barrier, p.proc, {p.in_buf, p.stat_buf, p.acc_buf});
              Value d = b.read(lh.args[0]);
              Value sv = b.read(lh.args[1]);
              Value av = b.read(lh.args[2]);
              Value m = b.externOp("mac", {d, sv, av}, 1, 1, 32)[0];
              b.setLabel("mac");
              b.write(m, lh.args[2]);
              b.ret();
              b.endLaunch();
              reads.push_back(lh.done);
            }
          }
        Value rdbar = b.controlAnd(reads);

        // Write stage: forward the input east, pass the partial sum south,
        // and drain the bottom active row into the ofmap SRAM.
        std::vector<Value> writes;
        for (uint64_t h = 0; h < rows; ++h)
          for (uint64_t w = 0; w < cols; ++w) {
            const PeParts &p = hw.pe[h][w];
            bool east = w + 1 < cols;
            bool south = h + 1 < rows;
            std::vector<Value> caps = {p.in_buf, p.acc_buf};
            if (east) caps.push_back(hw.pe[h][w + 1].in_buf);
            caps.push_back(south ? hw.pe[h + 1][w].acc_buf : hw.of_buf);
            auto lh = b.beginLaunch(rdbar, p.proc, caps);
            Value v = b.read(lh.args[0]);
            Value pt = b.read(lh.args[1]);
            size_t i = 2;
            if (east) b.write(v, lh.args[i++]);
            if (south) {
              b.write(pt, lh.args[i]);
            } else {
              b.write(pt, lh.args[i], {}, b.constant(static_cast<int64_t>(w)));
              b.setLabel("drain");
            }
            b.ret();
            b.endLaunch();
            writes.push_back(lh.done);
          }
        barrier = b.controlAnd(writes);
      }
    }
  }
  b.await(barrier);
  return b.take();
}

// ── Pipeline entry point ────────────────────────────────────────────────────

ir::Program genSystolicPipelineInput(const ConvConfig &conv, const ArrayConfig &arr,
                                     PipelineStage stage) {
  SystolicDims dims = systolicDims(conv, arr);
  uint64_t a_h = arr.a_h, a_w = arr.a_w;

  Builder b;
  SystolicHw hw = buildSystolicHw(b, a_h, a_w, /*per_pe_bufs=*/false);
  Value start = b.controlStart();
  b.setLabel("go");
  b.setAttr("dataflow", std::string(dataflowName(arr.dataflow)));
  b.setAttr("a_h", static_cast<int64_t>(a_h));
  b.setAttr("a_w", static_cast<int64_t>(a_w));
  b.setAttr("d1", static_cast<int64_t>(dims.d1));
  b.setAttr("d2", static_cast<int64_t>(dims.d2));
  b.setAttr("l", static_cast<int64_t>(dims.l));

  if (stage == PipelineStage::Linalg) {
    auto lh = b.beginLaunch(start, hw.cpu, {hw.if_buf, hw.stat_buf, hw.of_buf});
    b.setLabel("conv_kernel");
    Value in = b.read(lh.args[0]);
    Value st = b.read(lh.args[1]);
    b.externOp("conv", {in, st}, 1, a_w, 32);
    b.setLabel("conv");
    b.setAttr("d1", static_cast<int64_t>(dims.d1));
    b.setAttr("d2", static_cast<int64_t>(dims.d2));
    b.setAttr("l", static_cast<int64_t>(dims.l));
    b.ret();
    b.endLaunch();
    b.await(lh.done);
    return b.take();
  }

  // Tiled software schedule at top level: one rolled step loop per tile with
  // a parallel_for over the used PE rectangle. Memory traffic is abstract
  // loads/stores on the SRAM buffers and PEs are comp_select references; the
  // body's second group is the per-step systolic hand-off, which the mapping
  // passes split off and retarget onto neighbour registers.
  (void)start;
  uint64_t t1_count = ceilDiv(dims.d1, a_h), t2_count = ceilDiv(dims.d2, a_w);
  for (uint64_t t1 = 0; t1 < t1_count; ++t1)
    for (uint64_t t2 = 0; t2 < t2_count; ++t2) {
      uint64_t rows = std::min(a_h, dims.d1 - t1 * a_h);
      uint64_t cols = std::min(a_w, dims.d2 - t2 * a_w);
      b.beginFor(0, static_cast<int64_t>(dims.l));
      b.setLabel("steps");
      b.setAttr("rows", static_cast<int64_t>(rows));
      b.setAttr("cols", static_cast<int64_t>(cols));
      b.setAttr("l", static_cast<int64_t>(dims.l));
      auto ivs =
          b.beginParallelFor({0, 0}, {static_cast<int64_t>(rows), static_cast<int64_t>(cols)});
      b.setLabel("grid");
      Value h = ivs[0], w = ivs[1];
      // Compute group.
      b.compSelect(hw.root, "pe", {h, w});
      b.setLabel("pe_sel");
      Value d = b.load(hw.if_buf, h);
      b.setLabel("in_load");
      Value idx = b.add(b.mul(h, b.constant(static_cast<int64_t>(a_w))), w);
      Value sv = b.load(hw.stat_buf, idx);
      b.setLabel("stat_load");
      Value av = b.load(hw.of_buf, w);
      b.setLabel("acc_load");
      Value m = b.externOp("mac", {d, sv, av}, 1, 1, 32)[0];
      b.setLabel("mac");
      b.store(m, hw.of_buf, w);
      b.setLabel("acc_store");
      // Hand-off group: forward the input east and the partial sum south.
      b.compSelect(hw.root, "pe", {h, w});
      b.setLabel("pe_sel");
      Value fv = b.load(hw.if_buf, h);
      b.setLabel("fwd_load");
      b.store(fv, hw.if_buf, h);
      b.setLabel("fwd_store");
      Value pv = b.load(hw.of_buf, w);
      b.setLabel("out_load");
      b.store(pv, hw.of_buf, w);
      b.setLabel("out_store");
      b.endParallelFor();
      b.endFor();
    }
  return b.take();
}

// ── FIR case study ──────────────────────────────────────────────────────────

uint64_t FirConfig::cores() const {
  switch (fir_case) {
    case 1: return 1;
    case 2:
    case 3: return taps / 2;
    case 4: return 4;
  }
  return 0;
}

void FirConfig::validate() const {
  if (fir_case < 1 || fir_case > 4) throw GenError("fir_case must be 1..4");
  if (samples == 0 || samples % 4 != 0) throw GenError("samples must be a positive multiple of 4");
  if (sample_bits == 0 || sample_bits % 8 != 0)
    throw GenError("sample_bits must be a positive multiple of 8");
  if (taps == 0 || taps % 2 != 0) throw GenError("taps must be a positive multiple of 2");
  if (fir_case == 1 && taps < 10) throw GenError("case 1 needs at least 10 taps");
  if (fir_case == 4 && taps % 16 != 0) throw GenError("case 4 needs taps divisible by 16");
  if ((fir_case == 3 || fir_case == 4) && stream_bw == 0)
    throw GenError("stream bandwidth must be positive");
}

namespace {

// One core, one launch: a rolled loop over 4-sample output groups. Every
// memory touch is a free register access, so each group costs exactly its
// taps/2 vector-op slots.
ir::Program genFir1(const FirConfig &cfg) {
  Builder b;
  uint32_t bits = cfg.sample_bits;
  Value proc = b.createProc("fir_core");
  Value rf = b.createMem({64}, bits, 1, "Register");
  Value win = b.alloc(rf, 4, bits);
  Value sin = b.alloc(rf, 4, bits);
  Value ifm = b.alloc(rf, 4, bits);
  Value ofm = b.alloc(rf, 4, bits);
  Value sout = b.alloc(rf, 4, bits);

  uint64_t tail = std::min<uint64_t>(4, cfg.taps / 2 - 1);
  uint64_t head = cfg.taps / 2 - 1 - tail;

  Value start = b.controlStart();
  auto lh = b.beginLaunch(start, proc, {win, sin, ifm, ofm, sout});
  b.setLabel("fir");
  b.beginFor(0, static_cast<int64_t>(cfg.groups()));
  Value s = b.read(lh.args[0]);
  Value m = b.externOp("mul4", {s}, 1, 4, bits)[0];
  for (uint64_t i = 0; i < head; ++i) m = b.externOp("mac4", {m}, 1, 4, bits)[0];
  Value x = b.read(lh.args[1]);
  b.write(x, lh.args[2]);
  for (uint64_t i = 0; i < tail; ++i) m = b.externOp("mac4", {m}, 1, 4, bits)[0];
  b.write(m, lh.args[3]);
  Value o = b.read(lh.args[3]);
  b.write(o, lh.args[4]);
  b.endFor();
  b.ret();
  b.endLaunch();
  b.await(lh.done);
  return b.take();
}

// Cases 2-4 share the shape: a chain of cores, one launch per (group, stage)
// with the stage dependent on the group's previous stage, plus (cases 3/4) a
// feeder core that streams the input groups over the first connection.
ir::Program genFirChain(const FirConfig &cfg) {
  Builder b;
  uint32_t bits = cfg.sample_bits;
  uint64_t k_count = cfg.cores();
  uint64_t groups = cfg.groups();
  bool streamed = cfg.fir_case >= 3;
  // Case 4 packs taps/8 vector ops per core, half before the forward hop.
  uint64_t ops_per_core = cfg.fir_case == 4 ? cfg.taps / (2 * k_count) : 1;

  std::vector<Value> proc(k_count), inbuf(k_count), scratch_a(k_count), scratch_b(k_count);
  for (uint64_t k = 0; k < k_count; ++k) {
    proc[k] = b.createProc("fir_core");
    Value rf = b.createMem({32}, bits, 1, "Register");
    // Case 4's head core holds the two-group coefficient warm-up window.
    uint64_t in_elems = (cfg.fir_case == 4 && k == 0) ? 8 : 4;
    inbuf[k] = b.alloc(rf, in_elems, bits, streamed);
    scratch_a[k] = b.alloc(rf, 8, bits);
    scratch_b[k] = b.alloc(rf, 4, bits);
  }
  Value sink_mem = b.createMem({16}, bits, 1, "Register");
  Value sink = b.alloc(sink_mem, 4, bits, streamed);

  std::vector<Value> conn(k_count + 1);
  Value feeder, src;
  if (streamed) {
    for (uint64_t k = 0; k <= k_count; ++k)
      conn[k] = b.createConnection(ConnectionKind::Streaming, cfg.stream_bw);
    feeder = b.createProc("shim");
    Value fmem = b.createMem({8}, bits, 1, "Register");
    src = b.alloc(fmem, 4, bits);
  }

  Value start = b.controlStart();

  if (streamed) {
    // Case 4 sends one extra group up front to cover the head core's window.
    uint64_t send = groups + (cfg.fir_case == 4 ? 1 : 0);
    auto lh = b.beginLaunch(start, feeder, {src, inbuf[0], conn[0]});
    b.setLabel("feed");
    b.beginFor(0, static_cast<int64_t>(send));
    Value d = b.read(lh.args[0]);
    b.write(d, lh.args[1], lh.args[2]);
    b.endFor();
    b.ret();
    b.endLaunch();
  }

  Value last;
  for (uint64_t i = 0; i < groups; ++i) {
    Value dep = start;
    for (uint64_t k = 0; k < k_count; ++k) {
      Value target = k + 1 < k_count ? inbuf[k + 1] : sink;
      std::vector<Value> caps = {inbuf[k], scratch_a[k], scratch_b[k], target};
      if (streamed) caps.push_back(conn[k + 1]);
      auto lh = b.beginLaunch(dep, proc[k], caps);
      Value d;
      if (streamed) {
        uint64_t elems = (cfg.fir_case == 4 && k == 0 && i == 0) ? 8 : 4;
        d = b.read(lh.args[0], {}, elems);
        b.write(d, lh.args[1]);
      } else {
        d = b.read(lh.args[0]);
      }
      Value m = d;
      for (uint64_t j = 0; j < ops_per_core / 2 + ops_per_core % 2; ++j)
        m = b.externOp(k == 0 && j == 0 ? "mul4" : "mac4", {m}, 1, 4, bits)[0];
      if (streamed) {
        Value o = b.read(lh.args[2]);
        b.write(o, lh.args[1]);
        b.write(m, lh.args[3], lh.args[4]);
      } else {
        b.write(m, lh.args[3]);
      }
      for (uint64_t j = 0; j < ops_per_core / 2; ++j)
        m = b.externOp("mac4", {m}, 1, 4, bits)[0];
      if (cfg.fir_case == 4) b.write(m, lh.args[2]);
      b.ret();
      b.endLaunch();
      dep = lh.done;
    }
    last = dep;
  }
  b.await(last);
  return b.take();
}

}  // namespace

ir::Program genFir(const FirConfig &config) {
  config.validate();
  return config.fir_case == 1 ? genFir1(config) : genFirChain(config);
}

}  // namespace eq::gen
