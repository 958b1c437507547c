#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gen/generators.hpp"
#include "ir/ir.hpp"
#include "ir/textio.hpp"
#include "passes/passes.hpp"
#include "sim/engine.hpp"

using namespace eq;
using ir::Builder;
using ir::Opcode;
using ir::Value;
using nlohmann::json;
using passes::PassError;
using passes::PassSpec;
using passes::Pipeline;
using sim::Registry;
using sim::SimResult;
using sim::TraceRecord;

namespace {

SimResult run(const ir::Program &p) {
  REQUIRE(ir::verify(p).empty());
  Registry reg = Registry::builtins();
  return sim::simulate(p, reg);
}

size_t countOps(const ir::Region &r, Opcode op) {
  size_t n = 0;
  for (const ir::Op &o : r.ops) {
    if (o.opcode == op) ++n;
    if (o.region) n += countOps(*o.region, op);
  }
  return n;
}

const ir::Op *findLabeled(const ir::Region &r, const std::string &label) {
  for (const ir::Op &o : r.ops) {
    if (o.strAttr("label") == label) return &o;
    if (o.region) {
      const ir::Op *hit = findLabeled(*o.region, label);
      if (hit) return hit;
    }
  }
  return nullptr;
}

size_t countTrace(const SimResult &r, const std::string &name) {
  size_t n = 0;
  for (const TraceRecord &t : r.trace)
    if (t.name == name) ++n;
  return n;
}

gen::ConvConfig smallConv() {
  gen::ConvConfig c;
  c.h = 6, c.w = 6, c.f_h = 3, c.f_w = 3, c.c = 2, c.n = 4;
  return c;
}

}  // namespace

// ── equeue_read_write ───────────────────────────────────────────────────────

TEST_CASE("equeue_read_write converts every load/store, nested ones included") {
  Builder b;
  Value m = b.createMem({8}, 32, 1, "SRAM");
  Value buf = b.alloc(m, 8, 32);
  Value d0 = b.load(buf, b.constant(0));
  b.store(d0, buf, b.constant(1));
  Value iv = b.beginFor(0, 3);
  Value d1 = b.load(buf, iv);
  Value d2 = b.load(buf, iv);
  b.store(d2, buf, iv);
  b.endFor();
  (void)d1;
  ir::Program p = b.take();
  size_t before = countOps(p.top, Opcode::Load) + countOps(p.top, Opcode::Store) +
                  countOps(p.top, Opcode::Read) + countOps(p.top, Opcode::Write);

  ir::Program out = passes::runPass(p, {"equeue_read_write", json::object()});
  CHECK(countOps(out.top, Opcode::Load) == 0);
  CHECK(countOps(out.top, Opcode::Store) == 0);
  CHECK(countOps(out.top, Opcode::Read) == 3);
  CHECK(countOps(out.top, Opcode::Write) == 2);
  CHECK(countOps(out.top, Opcode::Read) + countOps(out.top, Opcode::Write) == before);
  // A converted load still touches one element, not the whole buffer.
  run(out);
}

TEST_CASE("equeue_read_write is the identity on programs without loads") {
  Builder b;
  Value m = b.createMem({4}, 32, 1, "Register");
  Value buf = b.alloc(m, 4, 32);
  Value d = b.read(buf);
  b.write(d, buf);
  ir::Program p = b.take();
  ir::Program out = passes::runPass(p, {"equeue_read_write", json::object()});
  CHECK(ir::structurallyEqual(p, out));
}

// ── allocate_memory ─────────────────────────────────────────────────────────

TEST_CASE("allocate_memory creates buffers on every glob-matched memory") {
  gen::ConvConfig conv = smallConv();
  ir::Program p = gen::genSystolicPipelineInput(conv, {2, 2, gen::Dataflow::WS});
  size_t before = p.buffers.size();
  ir::Program out = passes::runPass(
      p, {"allocate_memory",
          {{"memory", "acc/pe_*_*/acc"}, {"buffers", json::array({{{"elems", 1}}})}}});
  CHECK(out.buffers.size() == before + 4);
  // 'like' copies the source buffer's geometry.
  out = passes::runPass(
      out, {"allocate_memory",
            {{"memory", "acc/bcast"},
             {"buffers", json::array({{{"label", "stat_reg"}, {"like", "stat_buf"}}})}}});
  const ir::Op *alloc = findLabeled(out.top, "stat_reg");
  REQUIRE(alloc != nullptr);
  const ir::BufferDecl &bd = out.buffers[out.values[alloc->results[0].id].sym];
  CHECK(bd.size_elems == 4);  // a_h * a_w
  CHECK(bd.elem_bits == 32);
}

TEST_CASE("allocate_memory errors name the pass") {
  Builder b;
  b.createMem({4}, 32, 1, "SRAM");
  ir::Program p = b.take();
  CHECK_THROWS_WITH_AS(
      passes::runPass(p, {"allocate_memory",
                          {{"memory", "nowhere/*"}, {"buffers", json::array({{{"elems", 1}}})}}}),
      doctest::Contains("allocate_memory"), PassError);
  CHECK_THROWS_AS(passes::runPass(p, {"allocate_memory", {{"memory", "SRAM"}}}), PassError);
  CHECK_THROWS_AS(
      passes::runPass(p, {"allocate_memory",
                          {{"memory", "SRAM"},
                           {"buffers", json::array({{{"elems", 1}}})},
                           {"bogus", 1}}}),
      PassError);
}

// ── launch ──────────────────────────────────────────────────────────────────

TEST_CASE("launch wraps a labeled range onto a processor, results cross out") {
  Builder b;
  Value proc = b.createProc("PE");
  (void)proc;
  Value m = b.createMem({4}, 32, 1, "Register");
  Value buf = b.alloc(m, 4, 32);
  Value d = b.read(buf);
  b.setLabel("first");
  Value d2 = b.externOp("mac", {d}, 1)[0];
  Value d3 = b.externOp("mac", {d2}, 1)[0];
  b.setLabel("last");
  b.write(d3, buf);  // uses a value defined inside the wrapped range
  ir::Program before = b.take();
  SimResult r0 = run(before);

  ir::Program out = passes::runPass(
      before, {"launch", {{"proc", "PE"}, {"from", "first"}, {"to", "last"}, {"label", "k"}}});
  CHECK(countOps(out.top, Opcode::Launch) == 1);
  CHECK(countOps(out.top, Opcode::Await) == 1);
  const ir::Op *l = findLabeled(out.top, "k");
  REQUIRE(l != nullptr);
  REQUIRE(l->opcode == Opcode::Launch);
  CHECK(l->results.size() == 2);  // done + the crossing mac result
  CHECK(l->region->ops.back().opcode == Opcode::Return);
  CHECK(l->region->ops.back().operands.size() == 1);
  SimResult r1 = run(out);
  CHECK(r1.total_cycles == r0.total_cycles);  // same 1-cycle mac, now on the PE
}

TEST_CASE("launch pass rejects a missing label and a reversed range") {
  Builder b;
  b.createProc("PE");
  Value m = b.createMem({4}, 32, 1, "Register");
  Value buf = b.alloc(m, 4, 32);
  Value d = b.read(buf);
  b.setLabel("first");
  b.write(d, buf);
  b.setLabel("last");
  ir::Program p = b.take();
  CHECK_THROWS_AS(
      passes::runPass(p, {"launch", {{"proc", "PE"}, {"from", "first"}, {"to", "nope"}}}),
      PassError);
  CHECK_THROWS_AS(
      passes::runPass(p, {"launch", {{"proc", "PE"}, {"from", "last"}, {"to", "first"}}}),
      PassError);
}

// ── memcpy ──────────────────────────────────────────────────────────────────

TEST_CASE("memcpy pass inserts a fenced transfer before every labeled site") {
  Builder b;
  b.createDma();
  Value m1 = b.createMem({8}, 32, 1, "SRAM");
  Value m2 = b.createMem({8}, 32, 1, "Register");
  b.alloc(m1, 8, 32);
  b.setLabel("a");
  b.alloc(m2, 8, 32);
  b.setLabel("b");
  b.beginFor(0, 2);
  b.setLabel("work");
  b.endFor();
  b.beginFor(0, 2);
  b.setLabel("work");
  b.endFor();
  ir::Program p = b.take();
  ir::Program out = passes::runPass(
      p, {"memcpy", {{"src", "a"}, {"dst", "b"}, {"dma", "DMA"}, {"before", "work"}, {"label", "cp"}}});
  CHECK(countOps(out.top, Opcode::Memcpy) == 2);
  CHECK(countOps(out.top, Opcode::Await) == 2);
  SimResult r = run(out);
  CHECK(r.total_cycles == 16);  // two serialized 8-element SRAM reads
  CHECK_THROWS_AS(
      passes::runPass(p, {"memcpy", {{"src", "a"}, {"dst", "b"}, {"dma", "DMA"},
                                     {"before", "nothing"}}}),
      PassError);
}

// ── memcpy_to_launch ────────────────────────────────────────────────────────

TEST_CASE("memcpy_to_launch is cycle-exact and reuses the done event") {
  Builder b;
  Value proc = b.createProc("ARMr5");
  Value dma = b.createDma();
  Value m1 = b.createMem({16}, 32, 1, "SRAM");
  Value m2 = b.createMem({16}, 32, 1, "SRAM");
  Value rf = b.createMem({4}, 32, 1, "Register");
  Value src = b.alloc(m1, 16, 32);
  Value dst = b.alloc(m2, 16, 32);
  Value kbuf = b.alloc(rf, 4, 32);
  Value start = b.controlStart();
  Value copied = b.memcpy(start, src, dst, dma);
  b.setLabel("cp");
  auto kernel = b.beginLaunch(start, proc, {kbuf});
  Value d = b.read(kernel.args[0]);
  for (int i = 0; i < 3; ++i) d = b.externOp("mac", {d}, 1)[0];
  b.ret();
  b.endLaunch();
  b.await(b.controlAnd({copied, kernel.done}));
  ir::Program before = b.take();
  SimResult r0 = run(before);

  ir::Program out = passes::runPass(before, {"memcpy_to_launch", {{"target", "cp"}}});
  CHECK(countOps(out.top, Opcode::Memcpy) == 0);
  const ir::Op *l = findLabeled(out.top, "cp");
  REQUIRE(l != nullptr);
  REQUIRE(l->opcode == Opcode::Launch);
  REQUIRE(l->region->ops.size() == 3);
  CHECK(l->region->ops[0].opcode == Opcode::Read);
  CHECK(l->region->ops[1].opcode == Opcode::Write);
  CHECK(l->region->ops[2].opcode == Opcode::Return);
  SimResult r1 = run(out);
  CHECK(r1.total_cycles == r0.total_cycles);
  CHECK(sim::completionOf(r1, "cp") == sim::completionOf(r0, "cp"));

  CHECK_THROWS_AS(passes::runPass(before, {"memcpy_to_launch", {{"target", "zz"}}}), PassError);
}

// ── merge_memcpy_launch ─────────────────────────────────────────────────────

TEST_CASE("merge_memcpy_launch folds the copy into the launch body") {
  Builder b;
  Value proc = b.createProc("PE");
  Value dma = b.createDma();
  Value m1 = b.createMem({4}, 32, 1, "SRAM");
  Value m2 = b.createMem({4}, 32, 1, "Register");
  Value src = b.alloc(m1, 4, 32);
  Value dst = b.alloc(m2, 4, 32);
  Value start = b.controlStart();
  Value copied = b.memcpy(start, src, dst, dma);
  b.setLabel("cp");
  auto lh = b.beginLaunch(copied, proc, {dst});
  b.setLabel("k");
  Value d = b.read(lh.args[0]);
  b.externOp("mac", {d}, 1);
  b.ret();
  b.endLaunch();
  b.await(lh.done);
  ir::Program p = b.take();

  ir::Program out =
      passes::runPass(p, {"merge_memcpy_launch", {{"memcpy", "cp"}, {"launch", "k"}}});
  CHECK(countOps(out.top, Opcode::Memcpy) == 0);
  const ir::Op *l = findLabeled(out.top, "k");
  REQUIRE(l != nullptr);
  CHECK(l->region->ops[0].opcode == Opcode::Read);
  CHECK(l->region->ops[1].opcode == Opcode::Write);
  // The launch now waits on what the memcpy waited on.
  CHECK(countOps(out.top, Opcode::ControlStart) == 1);
  SimResult r = run(out);
  CHECK(r.total_cycles == 5);  // 4-cycle SRAM pull + 1-cycle mac, serialized
}

TEST_CASE("merge_memcpy_launch reuses an existing read of the same buffer") {
  Builder b;
  Value proc = b.createProc("PE");
  Value dma = b.createDma();
  Value m1 = b.createMem({4}, 32, 1, "SRAM");
  Value m2 = b.createMem({4}, 32, 1, "Register");
  Value src = b.alloc(m1, 4, 32);
  Value dst = b.alloc(m2, 4, 32);
  Value start = b.controlStart();
  Value copied = b.memcpy(start, src, dst, dma);
  b.setLabel("cp");
  auto lh = b.beginLaunch(copied, proc, {src});
  b.setLabel("k");
  Value d = b.read(lh.args[0]);  // the launch already pulls the source
  b.externOp("mac", {d}, 1);
  b.ret();
  b.endLaunch();
  b.await(lh.done);
  ir::Program p = b.take();

  ir::Program out =
      passes::runPass(p, {"merge_memcpy_launch", {{"memcpy", "cp"}, {"launch", "k"}}});
  const ir::Op *l = findLabeled(out.top, "k");
  REQUIRE(l != nullptr);
  CHECK(countOps(*l->region, Opcode::Read) == 1);   // not repeated
  CHECK(countOps(*l->region, Opcode::Write) == 1);  // the copy's store remains
  run(out);
}

// ── split_launch ────────────────────────────────────────────────────────────

TEST_CASE("split_launch chains two launches and threads crossing values") {
  Builder b;
  Value proc = b.createProc("PE");
  Value rf = b.createMem({4}, 32, 1, "Register");
  Value buf = b.alloc(rf, 4, 32);
  Value start = b.controlStart();
  auto lh = b.beginLaunch(start, proc, {buf});
  b.setLabel("k");
  Value d = b.read(lh.args[0]);
  Value d2 = b.externOp("mac", {d}, 1)[0];
  Value d3 = b.externOp("mac", {d2}, 1)[0];
  b.write(d3, lh.args[0]);
  b.ret();
  b.endLaunch();
  b.await(lh.done);
  ir::Program before = b.take();
  SimResult r0 = run(before);

  ir::Program out = passes::runPass(before, {"split_launch", {{"target", "k"}, {"at", 2}}});
  CHECK(countOps(out.top, Opcode::Launch) == 2);
  const ir::Op *l1 = findLabeled(out.top, "k");
  const ir::Op *l2 = findLabeled(out.top, "k_2");
  REQUIRE(l1 != nullptr);
  REQUIRE(l2 != nullptr);
  CHECK(l2->operands[0] == l1->results[0]);  // chained by the first's done
  CHECK(l1->results.size() == 2);            // done + the crossing mac value
  CHECK(l1->region->ops.back().operands.size() == 1);
  SimResult r1 = run(out);
  CHECK(r1.total_cycles == r0.total_cycles);  // same serial work on one PE
}

TEST_CASE("split_launch on a parallel loop forbids crossing values") {
  gen::ConvConfig conv = smallConv();
  ir::Program p = gen::genSystolicPipelineInput(conv, {2, 2, gen::Dataflow::WS});
  p = passes::runPass(p, {"equeue_read_write", json::object()});
  // The generated body hands off through buffers: the split point is clean.
  ir::Program out = passes::runPass(p, {"split_launch", {{"target", "grid"}, {"at", 9}}});
  CHECK(countOps(out.top, Opcode::ParallelFor) == 2 * countOps(p.top, Opcode::ParallelFor));
  // Splitting mid-expression would make the mac result cross: rejected.
  CHECK_THROWS_WITH_AS(passes::runPass(p, {"split_launch", {{"target", "grid"}, {"at", 8}}}),
                       doctest::Contains("crosses"), PassError);
  CHECK_THROWS_AS(passes::runPass(p, {"split_launch", {{"target", "grid"}, {"at", 99}}}),
                  PassError);
}

// ── reassign_buffer ─────────────────────────────────────────────────────────

TEST_CASE("reassign_buffer swaps an SRAM read for a register read") {
  Builder b;
  Value m1 = b.createMem({4}, 32, 1, "SRAM");
  Value m2 = b.createMem({4}, 32, 1, "Register");
  Value s = b.alloc(m1, 4, 32);
  b.setLabel("s");
  Value r = b.alloc(m2, 4, 32);
  b.setLabel("r");
  (void)r;
  Value d = b.read(s);
  b.write(d, s);
  ir::Program p = b.take();
  CHECK(run(p).total_cycles == 8);

  ir::Program out = passes::runPass(p, {"reassign_buffer", {{"from", "s"}, {"to", "r"}}});
  CHECK(run(out).total_cycles == 0);  // register accesses are free

  ir::Program same = passes::runPass(p, {"reassign_buffer", {{"from", "s"}, {"to", "s"}}});
  CHECK(ir::structurallyEqual(p, same));
}

TEST_CASE("reassign_buffer rejects shape-incompatible targets") {
  Builder b;
  Value m1 = b.createMem({4}, 32, 1, "SRAM");
  Value m2 = b.createMem({8}, 32, 1, "Register");
  b.alloc(m1, 4, 32);
  b.setLabel("s");
  b.alloc(m2, 8, 32);
  b.setLabel("r");
  ir::Program p = b.take();
  CHECK_THROWS_WITH_AS(passes::runPass(p, {"reassign_buffer", {{"from", "s"}, {"to", "r"}}}),
                       doctest::Contains("differ"), PassError);
}

// ── parallel_to_equeue ──────────────────────────────────────────────────────

TEST_CASE("parallel_to_equeue emits the control_start / launch / and / await pattern") {
  Builder b;
  Value p0 = b.createProc("PE");
  Value p1 = b.createProc("PE");
  Value rf = b.createMem({8}, 32, 1, "Register");
  Value root = b.createComp({{"pe_0", p0}, {"pe_1", p1}, {"regs", rf}}, "acc");
  Value buf = b.alloc(rf, 8, 32);
  auto ivs = b.beginParallelFor({0}, {2});
  b.setLabel("grid");
  b.compSelect(root, "pe", {ivs[0]});
  b.setLabel("sel");
  Value d = b.read(buf, {}, 1, ivs[0]);
  b.externOp("mac", {d}, 1);
  b.endParallelFor();
  ir::Program p = b.take();

  ir::Program out = passes::runPass(p, {"parallel_to_equeue", json::object()});
  CHECK(countOps(out.top, Opcode::ParallelFor) == 0);
  CHECK(countOps(out.top, Opcode::Launch) == 2);
  CHECK(countOps(out.top, Opcode::ControlStart) == 1);
  CHECK(countOps(out.top, Opcode::ControlAnd) == 1);
  CHECK(countOps(out.top, Opcode::Await) == 1);
  REQUIRE(findLabeled(out.top, "grid_0") != nullptr);
  REQUIRE(findLabeled(out.top, "grid_1") != nullptr);

  // And-fold law: the barrier resolves exactly at the slowest launch.
  SimResult r = run(out);
  uint64_t slowest = std::max(sim::completionOf(r, "grid_0"), sim::completionOf(r, "grid_1"));
  CHECK(sim::completionOf(r, "grid_done") == slowest);
}

TEST_CASE("parallel_to_equeue needs a component selector in the body") {
  Builder b;
  Value rf = b.createMem({4}, 32, 1, "Register");
  Value buf = b.alloc(rf, 4, 32);
  b.beginParallelFor({0}, {2});
  Value d = b.read(buf);
  b.write(d, buf);
  b.endParallelFor();
  ir::Program p = b.take();
  CHECK_THROWS_WITH_AS(passes::runPass(p, {"parallel_to_equeue", json::object()}),
                       doctest::Contains("selects no component"), PassError);
}

// ── lower_extraction ────────────────────────────────────────────────────────

TEST_CASE("lower_extraction rewrites constant selectors and keeps timing") {
  Builder b;
  Value p0 = b.createProc("PE");
  Value p1 = b.createProc("PE");
  Value rf = b.createMem({4}, 32, 1, "Register");
  Value root = b.createComp({{"pe_0", p0}, {"pe_1", p1}}, "acc");
  Value buf = b.alloc(rf, 4, 32);
  Value sel = b.compSelect(root, "pe", {b.constant(1)});
  Value start = b.controlStart();
  auto lh = b.beginLaunch(start, sel, {buf});
  Value d = b.read(lh.args[0]);
  b.externOp("mac", {d}, 1);
  b.ret();
  b.endLaunch();
  b.await(lh.done);
  ir::Program before = b.take();
  SimResult r0 = run(before);

  ir::Program out = passes::runPass(before, {"lower_extraction", json::object()});
  CHECK(countOps(out.top, Opcode::CompSelect) == 0);
  CHECK(countOps(out.top, Opcode::GetComp) == 1);
  SimResult r1 = run(out);
  CHECK(r1.total_cycles == r0.total_cycles);
  for (const TraceRecord &t : r1.trace)
    if (t.name == "mac") CHECK(t.path == "acc/pe_1");
}

TEST_CASE("lower_extraction rejects selectors that stay dynamic") {
  Builder b;
  Value p0 = b.createProc("PE");
  Value root = b.createComp({{"pe_0", p0}}, "acc");
  Value iv = b.beginFor(0, 1);
  b.compSelect(root, "pe", {iv});
  b.endFor();
  ir::Program p = b.take();
  CHECK_THROWS_WITH_AS(passes::runPass(p, {"lower_extraction", json::object()}),
                       doctest::Contains("non-constant"), PassError);
}

// ── Driver ──────────────────────────────────────────────────────────────────

TEST_CASE("pipeline driver: identity, unknown passes, bad params") {
  ir::Program p = gen::genSystolicPipelineInput(smallConv(), {2, 2, gen::Dataflow::WS});
  ir::Program same = passes::runPipeline(p, {});
  CHECK(ir::structurallyEqual(p, same));

  CHECK_THROWS_WITH_AS(passes::runPass(p, {"frobnicate", json::object()}),
                       doctest::Contains("unknown pass 'frobnicate'"), PassError);
  CHECK_THROWS_WITH_AS(passes::runPass(p, {"split_launch", {{"target", "grid"}}}),
                       doctest::Contains("split_launch"), PassError);
  CHECK_THROWS_AS(passes::runPass(p, {"reassign_buffer", {{"from", "stat_buf"}}}), PassError);

  std::vector<passes::StageDump> dumps;
  passes::runPipeline(p, {{"equeue_read_write", json::object()}}, &dumps);
  REQUIRE(dumps.size() == 1);
  CHECK(dumps[0].pass == "equeue_read_write");
  CHECK(dumps[0].printed ==
        ir::print(passes::runPass(p, {"equeue_read_write", json::object()})));
}

TEST_CASE("pipeline configs on disk match the built-in sequence and share every stage") {
  auto slurp = [](const std::string &path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::string base = std::string(EQ_SOURCE_DIR) + "/configs/";
  std::string ws = slurp(base + "systolic_ws.json");
  Pipeline file = passes::parsePipeline(json::parse(ws));
  Pipeline builtin = passes::systolicMappingPipeline();
  CHECK(passes::pipelineToJson(file) == passes::pipelineToJson(builtin));
  // The dataflows differ only in the generator's dimension mapping, so the
  // three pipelines agree pass for pass (the shared-prefix property holds
  // over the whole sequence).
  CHECK(slurp(base + "systolic_is.json") == ws);
  CHECK(slurp(base + "systolic_os.json") == ws);
}

// ── End to end: loop nest to systolic program ───────────────────────────────

TEST_CASE("mapping pipeline reproduces the scheduled systolic program's timing") {
  gen::ConvConfig conv = smallConv();
  for (gen::Dataflow df : {gen::Dataflow::WS, gen::Dataflow::IS, gen::Dataflow::OS}) {
    CAPTURE(gen::dataflowName(df));
    gen::ArrayConfig arr{2, 2, df};  // every tile is full on this config
    ir::Program in = gen::genSystolicPipelineInput(conv, arr);
    ir::Program out = passes::runPipeline(in, passes::systolicMappingPipeline());

    CHECK(countOps(out.top, Opcode::ParallelFor) == 0);
    CHECK(countOps(out.top, Opcode::CompSelect) == 0);
    CHECK(countOps(out.top, Opcode::Load) == 0);
    CHECK(countOps(out.top, Opcode::Store) == 0);

    SimResult mapped = run(out);
    SimResult scheduled = run(gen::genSystolic(conv, arr));
    CHECK(mapped.total_cycles == scheduled.total_cycles);
    CHECK(countTrace(mapped, "mac") == countTrace(scheduled, "mac"));
  }
}

TEST_CASE("ragged tiles cost the pipeline only its coarser stationary fill") {
  gen::ConvConfig conv = smallConv();
  gen::ArrayConfig arr{4, 4, gen::Dataflow::WS};  // d1 = 18: ragged row tiles
  ir::Program out = passes::runPipeline(gen::genSystolicPipelineInput(conv, arr),
                                        passes::systolicMappingPipeline());
  SimResult mapped = run(out);
  SimResult scheduled = run(gen::genSystolic(conv, arr));
  CHECK(mapped.total_cycles >= scheduled.total_cycles);
  double rel = double(mapped.total_cycles - scheduled.total_cycles) /
               double(scheduled.total_cycles);
  CHECK(rel < 0.05);
  CHECK(countTrace(mapped, "mac") == countTrace(scheduled, "mac"));
}
