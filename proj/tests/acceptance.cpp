// Acceptance harness: executes the twelve gate criteria and prints exactly
// one PASS/FAIL line per criterion. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gen/generators.hpp"
#include "ir/ir.hpp"
#include "ir/textio.hpp"
#include "passes/passes.hpp"
#include "sim/components.hpp"
#include "sim/engine.hpp"
#include "sim/report.hpp"

using namespace eq;
using ir::Builder;
using ir::Value;
using sim::Registry;
using sim::SimResult;
using sim::TraceRecord;

namespace {

int g_failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void report(int index, const std::string &name, bool ok, const std::string &detail) {
  std::printf("%s  criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", index, name.c_str(),
              detail.empty() ? "" : " — ", detail.c_str());
  if (!ok) ++g_failures;
}

SimResult run(const ir::Program &p) {
  Registry reg = Registry::builtins();
  return sim::simulate(p, reg);
}

SimResult runFir(int fir_case) {
  gen::FirConfig cfg;
  cfg.fir_case = fir_case;
  return run(gen::genFir(cfg));
}

// ── criteria 1-4: FIR cycle targets ──────────────────────────────────────────

void firCriterion(int index, int fir_case, uint64_t want_total, uint64_t want_warm,
                  double total_tolerance) {
  Timer t;
  SimResult r = runFir(fir_case);
  double elapsed = t.seconds();
  double rel = want_total == 0 ? 0.0
                               : std::abs(double(r.total_cycles) - double(want_total)) /
                                     double(want_total);
  bool ok = rel <= total_tolerance && r.warm_up == want_warm && elapsed < 1.0;
  std::ostringstream d;
  d << "cycles " << r.total_cycles << " (target " << want_total << "), warm-up " << r.warm_up
    << " (target " << want_warm << "), " << elapsed << " s";
  report(index, "fir case " + std::to_string(fir_case) + " cycle count", ok, d.str());
}

// ── criterion 5: case-3 busy pattern ─────────────────────────────────────────

void criterion5() {
  SimResult r = runFir(3);
  std::map<std::string, std::vector<uint64_t>> starts;
  bool durations_ok = true;
  for (const TraceRecord &t : r.trace)
    if (t.name == "mul4" || t.name == "mac4") {
      starts[t.path].push_back(t.start);
      if (t.duration != 1) durations_ok = false;
    }
  bool ok = durations_ok && starts.size() == 16;
  for (auto &[path, s] : starts) {
    std::sort(s.begin(), s.end());
    std::vector<uint64_t> post;
    for (uint64_t c : s)
      if (c >= r.warm_up) post.push_back(c);
    if (post.size() < 2) ok = false;
    for (size_t i = 1; i < post.size(); ++i)
      if (post[i] - post[i - 1] != 4) ok = false;
  }
  std::ostringstream d;
  d << starts.size() << " compute processors, post-warm-up vector-op period 4";
  report(5, "fir case 3 busy 1-in-4 trace property", ok, d.str());
}

// ── criterion 6: loop-iteration law ──────────────────────────────────────────

void criterion6() {
  Timer t;
  bool ok = true;
  std::ostringstream d;
  for (gen::Dataflow df : {gen::Dataflow::WS, gen::Dataflow::IS, gen::Dataflow::OS}) {
    // The law is proportionality at a fixed stationary length L, so the
    // swept axes are the two tiled dimensions; L's source differs per
    // dataflow (E_h*E_w for WS/OS, N for IS).
    std::vector<double> xs, ys;
    for (uint64_t a_h : {2u, 4u, 8u}) {
      gen::ArrayConfig arr{a_h, 16 / a_h, df};
      for (uint64_t c : {2u, 4u, 6u, 8u, 10u}) {
        std::vector<std::pair<uint64_t, uint64_t>> hn;  // (h, n) pairs
        if (df == gen::Dataflow::IS)
          hn = {{5, 8}, {9, 8}, {13, 8}};
        else
          hn = {{7, 8}, {7, 16}, {7, 24}};
        for (auto [h, n] : hn) {
          gen::ConvConfig conv;
          conv.h = h, conv.w = h, conv.f_h = 2, conv.f_w = 2, conv.c = c, conv.n = n;
          SimResult r = run(gen::genSystolic(conv, arr));
          xs.push_back(double(gen::loopIterations(conv, arr)));
          ys.push_back(double(r.total_cycles));
        }
      }
    }
    size_t m = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < m; ++i) sx += xs[i], sy += ys[i], sxx += xs[i] * xs[i],
                                   sxy += xs[i] * ys[i];
    double slope = (double(m) * sxy - sx * sy) / (double(m) * sxx - sx * sx);
    double intercept = (sy - slope * sx) / double(m);
    double worst = 0;
    for (size_t i = 0; i < m; ++i)
      worst = std::max(worst, std::abs(slope * xs[i] + intercept - ys[i]) / ys[i]);
    if (m < 30 || worst > 0.05) ok = false;
    d << gen::dataflowName(df) << ": " << m << " configs, slope " << slope << ", worst residual "
      << worst * 100 << "%; ";
  }
  double elapsed = t.seconds();
  if (elapsed >= 120.0) ok = false;
  d << elapsed << " s";
  report(6, "systolic cycles linear in loop iterations", ok, d.str());
}

// ── criterion 7: generator-vs-pipeline agreement ─────────────────────────────

void criterion7() {
  Timer t;
  bool ok = true;
  std::ostringstream d;
  passes::Pipeline pipeline = passes::systolicMappingPipeline();
  for (uint64_t hw : {4u, 8u, 16u}) {
    gen::ConvConfig conv;
    conv.h = hw, conv.w = hw, conv.f_h = 3, conv.f_w = 3, conv.c = 4, conv.n = 4;
    for (gen::Dataflow df : {gen::Dataflow::WS, gen::Dataflow::IS, gen::Dataflow::OS}) {
      gen::ArrayConfig arr{4, 4, df};
      uint64_t direct = run(gen::genSystolic(conv, arr)).total_cycles;
      ir::Program mapped =
          passes::runPipeline(gen::genSystolicPipelineInput(conv, arr), pipeline);
      uint64_t piped = run(mapped).total_cycles;
      double rel = std::abs(double(piped) - double(direct)) / double(direct);
      if (rel > 0.02) ok = false;
      d << gen::dataflowName(df) << "/" << hw << ": " << piped << " vs " << direct << " ("
        << rel * 100 << "%); ";
    }
  }
  double elapsed = t.seconds();
  if (elapsed >= 120.0) ok = false;
  d << elapsed << " s";
  report(7, "pipeline-built programs match direct generator within 2%", ok, d.str());
}

// ── criterion 8: brute-force single-cycle reference ──────────────────────────

struct LaunchSpec {
  int proc = 0;
  int dep = -1;      // -1 = root control_start
  int awaited = -1;  // -1 = none
  int pre = 0;       // 1-cycle vector ops before the await
  int post = 0;      // after
};

struct Generated {
  ir::Program program;
  std::vector<LaunchSpec> specs;
  int n_procs = 1;
};

Generated randomLaunchProgram(std::mt19937 &rng) {
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };
  Generated g;
  Builder b;
  g.n_procs = 1 + pick(3);
  std::vector<Value> procs;
  for (int i = 0; i < g.n_procs; ++i) procs.push_back(b.createProc("P" + std::to_string(i)));
  Value mem = b.createMem({64}, 32, 1, "Register");
  Value buf = b.alloc(mem, 8, 32);
  Value start = b.controlStart();
  int n_launch = 1 + pick(50);
  std::vector<Value> dones;
  for (int j = 0; j < n_launch; ++j) {
    LaunchSpec s;
    s.proc = pick(g.n_procs);
    s.dep = j > 0 && pick(3) != 0 ? pick(j) : -1;
    s.awaited = j > 0 && pick(4) == 0 ? pick(j) : -1;
    s.pre = pick(4);
    s.post = pick(4);
    Value dep = s.dep < 0 ? start : dones[s.dep];
    std::vector<Value> captures = {buf};
    if (s.awaited >= 0) captures.push_back(dones[s.awaited]);
    auto h = b.beginLaunch(dep, procs[s.proc], captures);
    b.setLabel("L" + std::to_string(j));
    Value d = b.read(h.args[0]);
    for (int k = 0; k < s.pre; ++k) d = b.externOp("mac4", {d}, 1, 4, 32)[0];
    if (s.awaited >= 0) b.await(h.args[1]);
    for (int k = 0; k < s.post; ++k) d = b.externOp("mac4", {d}, 1, 4, 32)[0];
    b.ret();
    b.endLaunch();
    dones.push_back(h.done);
    g.specs.push_back(s);
  }
  b.await(b.controlAnd(dones));
  g.program = b.take();
  return g;
}

// Cycle-stepped reference: every processor holds a FIFO of its launches in
// program order; each cycle the head may start (dependency complete), burn
// one cycle of work, stall on its await, or retire. Within one cycle the
// whole system is iterated to a fixed point, since zero-work launches and
// event propagation are instantaneous.
std::vector<uint64_t> bruteForce(const Generated &g) {
  size_t n = g.specs.size();
  std::vector<bool> done(n, false);
  std::vector<uint64_t> completion(n, 0);
  std::vector<std::vector<size_t>> queue(static_cast<size_t>(g.n_procs));
  for (size_t j = 0; j < n; ++j) queue[static_cast<size_t>(g.specs[j].proc)].push_back(j);

  struct Active {
    size_t launch = 0;
    int pre_left = 0;
    int post_left = 0;
    bool has = false;
  };
  std::vector<Active> cur(static_cast<size_t>(g.n_procs));
  std::vector<size_t> head(static_cast<size_t>(g.n_procs), 0);

  size_t retired = 0;
  for (uint64_t t = 0; retired < n && t < 100000; ++t) {
    // Instantaneous transitions first, to a fixed point.
    bool changed = true;
    while (changed) {
      changed = false;
      for (int p = 0; p < g.n_procs; ++p) {
        Active &a = cur[static_cast<size_t>(p)];
        if (!a.has) {
          size_t &h = head[static_cast<size_t>(p)];
          if (h >= queue[static_cast<size_t>(p)].size()) continue;
          size_t j = queue[static_cast<size_t>(p)][h];
          int dep = g.specs[j].dep;
          if (dep >= 0 && !(done[static_cast<size_t>(dep)] &&
                            completion[static_cast<size_t>(dep)] <= t))
            continue;
          a = Active{j, g.specs[j].pre, g.specs[j].post, true};
          ++h;
          changed = true;
        }
        if (a.has && a.pre_left == 0 && a.post_left == 0) {
          // Ready to retire only once the mid-body await (if any) is open.
          int aw = g.specs[a.launch].awaited;
          if (aw >= 0 && !(done[static_cast<size_t>(aw)] &&
                           completion[static_cast<size_t>(aw)] <= t))
            continue;
          done[a.launch] = true;
          completion[a.launch] = t;
          a.has = false;
          ++retired;
          changed = true;
        }
      }
    }
    // Each still-active processor burns one cycle of pre or post work, or
    // stalls on its await.
    for (int p = 0; p < g.n_procs; ++p) {
      Active &a = cur[static_cast<size_t>(p)];
      if (!a.has) continue;
      if (a.pre_left > 0) {
        --a.pre_left;
      } else {
        int aw = g.specs[a.launch].awaited;
        bool await_open = aw >= 0 && !(done[static_cast<size_t>(aw)] &&
                                       completion[static_cast<size_t>(aw)] <= t);
        if (!await_open && a.post_left > 0) --a.post_left;
        // else: stalled this cycle
      }
    }
  }
  return completion;
}

void criterion8() {
  Timer timer;
  std::mt19937 rng(20260823);
  Registry reg = Registry::builtins();
  int trials = 200;
  int bad = 0;
  for (int trial = 0; trial < trials; ++trial) {
    Generated g = randomLaunchProgram(rng);
    if (!ir::verify(g.program).empty()) {
      ++bad;
      continue;
    }
    SimResult r = sim::simulate(g.program, reg);
    std::vector<uint64_t> expect = bruteForce(g);
    uint64_t expect_total = 0;
    for (size_t j = 0; j < expect.size(); ++j) {
      if (sim::completionOf(r, "L" + std::to_string(j)) != expect[j]) ++bad;
      expect_total = std::max(expect_total, expect[j]);
    }
    if (r.total_cycles != expect_total) ++bad;
  }
  double elapsed = timer.seconds();
  bool ok = bad == 0 && elapsed < 60.0;
  std::ostringstream d;
  d << trials << " programs, " << bad << " mismatches, " << elapsed << " s";
  report(8, "engine equals brute-force single-cycle reference", ok, d.str());
}

// ── criterion 9: control laws ────────────────────────────────────────────────

void criterion9() {
  std::mt19937 rng(7);
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };
  bool ok = true;
  for (int trial = 0; trial < 50 && ok; ++trial) {
    Builder b;
    Value proc = b.createProc("P0");
    Value mem = b.createMem({64}, 32, 1, "Register");
    Value buf = b.alloc(mem, 8, 32);
    Value start = b.controlStart();
    b.setLabel("start");

    int n_base = 2 + pick(5);
    std::vector<Value> events;
    std::vector<std::string> labels;
    for (int j = 0; j < n_base; ++j) {
      auto h = b.beginLaunch(start, proc, {buf});
      std::string label = "w" + std::to_string(j);
      b.setLabel(label);
      Value d = b.read(h.args[0]);
      int work = 1 + pick(4);
      for (int k = 0; k < work; ++k) d = b.externOp("mac", {d}, 1)[0];
      b.ret();
      b.endLaunch();
      events.push_back(h.done);
      labels.push_back(label);
    }
    struct Combo {
      bool is_and = false;
      std::string label;
      std::vector<std::string> deps;
    };
    std::vector<Combo> combos;
    for (int j = 0; j < 4; ++j) {
      Combo c;
      c.is_and = pick(2) == 0;
      c.label = (c.is_and ? "and" : "or") + std::to_string(j);
      int k = 2 + pick(3);
      std::vector<Value> deps;
      for (int i = 0; i < k; ++i) {
        int idx = pick(static_cast<int>(events.size()));
        deps.push_back(events[static_cast<size_t>(idx)]);
        c.deps.push_back(labels[static_cast<size_t>(idx)]);
      }
      Value e = c.is_and ? b.controlAnd(deps) : b.controlOr(deps);
      b.setLabel(c.label);
      events.push_back(e);
      labels.push_back(c.label);
      combos.push_back(c);
    }
    b.await(b.controlAnd(events));
    ir::Program p = b.take();
    if (!ir::verify(p).empty()) {
      ok = false;
      break;
    }
    SimResult r = run(p);
    if (sim::completionOf(r, "start") != 0) ok = false;
    for (const Combo &c : combos) {
      uint64_t want = c.is_and ? 0 : UINT64_MAX;
      for (const std::string &dep : c.deps) {
        uint64_t dc = sim::completionOf(r, dep);
        want = c.is_and ? std::max(want, dc) : std::min(want, dc);
      }
      if (sim::completionOf(r, c.label) != want) ok = false;
    }
  }
  report(9, "control_and = max, control_or = min, start at issue", ok,
         "50 randomized event DAGs");
}

// ── criterion 10: determinism ────────────────────────────────────────────────

std::vector<ir::Program> acceptancePrograms() {
  std::vector<ir::Program> out;
  for (int c = 1; c <= 4; ++c) {
    gen::FirConfig cfg;
    cfg.fir_case = c;
    out.push_back(gen::genFir(cfg));
  }
  gen::ConvConfig conv;
  conv.h = 6, conv.w = 6, conv.f_h = 3, conv.f_w = 3, conv.c = 2, conv.n = 4;
  for (gen::Dataflow df : {gen::Dataflow::WS, gen::Dataflow::IS, gen::Dataflow::OS}) {
    gen::ArrayConfig arr{2, 2, df};
    out.push_back(gen::genSystolic(conv, arr));
    out.push_back(passes::runPipeline(gen::genSystolicPipelineInput(conv, arr),
                                      passes::systolicMappingPipeline()));
  }
  return out;
}

void criterion10() {
  bool ok = true;
  std::vector<ir::Program> programs = acceptancePrograms();
  for (const ir::Program &p : programs) {
    SimResult a = run(p);
    SimResult b = run(p);
    if (sim::emitTrace(a) != sim::emitTrace(b)) ok = false;
    if (sim::emitProfileMachine(a) != sim::emitProfileMachine(b)) ok = false;
  }
  std::ostringstream d;
  d << programs.size() << " programs, trace and machine summary byte-compared";
  report(10, "byte-identical determinism", ok, d.str());
}

// ── criterion 11: bandwidth laws ─────────────────────────────────────────────

void criterion11() {
  bool ok = true;
  for (uint64_t bw : {1u, 4u, 32u})
    for (uint64_t n = 0; n <= 64; ++n)
      if (sim::connectionTransferCycles(bw, n) != (n + bw - 1) / bw) ok = false;
  if (sim::connectionTransferCycles(std::nullopt, 12345) != 0) ok = false;

  // Per-cycle bytes never exceed the configured max on the streaming cases,
  // and portions are well-formed fractions.
  for (int c = 3; c <= 4; ++c) {
    SimResult r = runFir(c);
    for (const auto &[name, stats] : r.connections) {
      if (stats.read_portion < 0.0 || stats.read_portion > 1.0) ok = false;
      if (stats.write_portion < 0.0 || stats.write_portion > 1.0) ok = false;
      if (!stats.max_bw) continue;
      for (const auto &[cycle, bytes] : stats.read_hist)
        if (bytes > *stats.max_bw) ok = false;
      for (const auto &[cycle, bytes] : stats.write_hist)
        if (bytes > *stats.max_bw) ok = false;
    }
  }

  // The case-3 feed connection is saturated end to end: portion exactly 1.
  SimResult r3 = runFir(3);
  if (r3.connections.at("conn0").write_portion != 1.0) ok = false;

  report(11, "bandwidth caps, ceil(N/B) law, saturation portion", ok,
         "N in 0..64, B in {1,4,32}; fir streaming connections");
}

// ── criterion 12: round-trip and parser robustness ───────────────────────────

ir::Program randomTextProgram(std::mt19937 &rng) {
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };
  Builder b;
  std::vector<Value> procs, bufs, events;
  int n_proc = 1 + pick(3);
  for (int i = 0; i < n_proc; ++i) procs.push_back(b.createProc("P" + std::to_string(i)));
  int n_mem = 1 + pick(2);
  for (int i = 0; i < n_mem; ++i) {
    Value m = b.createMem({1024}, 32, 1 + static_cast<uint32_t>(pick(4)),
                          pick(2) ? "SRAM" : "Register");
    bufs.push_back(b.alloc(m, 1 + static_cast<uint64_t>(pick(64)), 32));
  }
  events.push_back(b.controlStart());
  int n_ops = 1 + pick(8);
  for (int i = 0; i < n_ops; ++i) {
    switch (pick(3)) {
      case 0: {
        Value buf = bufs[static_cast<size_t>(pick(static_cast<int>(bufs.size())))];
        auto h = b.beginLaunch(events[static_cast<size_t>(pick(static_cast<int>(events.size())))],
                               procs[static_cast<size_t>(pick(static_cast<int>(procs.size())))],
                               {buf});
        Value d = b.read(h.args[0]);
        if (pick(2)) {
          Value iv = b.beginFor(0, 1 + pick(4));
          Value d2 = b.read(h.args[0], {}, 1, iv);
          b.write(d2, h.args[0], {}, iv);
          b.endFor();
        }
        b.write(d, h.args[0]);
        b.ret();
        b.endLaunch();
        events.push_back(h.done);
        break;
      }
      case 1:
        events.push_back(
            b.controlAnd({events[static_cast<size_t>(pick(static_cast<int>(events.size())))],
                          events[static_cast<size_t>(pick(static_cast<int>(events.size())))]}));
        break;
      default: {
        Value a = b.constant(pick(100));
        Value c = b.constant(pick(100));
        b.add(a, c);
        break;
      }
    }
  }
  b.await(events.back());
  return b.take();
}

void criterion12() {
  bool ok = true;
  int checked = 0;

  auto roundTrips = [&](const ir::Program &p) {
    std::string text = ir::print(p);
    ir::ParseResult pr = ir::parse(text, "rt.eq");
    if (!pr.ok()) return false;
    ++checked;
    return ir::structurallyEqual(p, *pr.program);
  };

  for (int c = 1; c <= 4; ++c) {
    gen::FirConfig cfg;
    cfg.fir_case = c;
    if (!roundTrips(gen::genFir(cfg))) ok = false;
  }
  gen::ConvConfig conv;
  conv.h = 6, conv.w = 6, conv.f_h = 3, conv.f_w = 3, conv.c = 2, conv.n = 4;
  for (gen::Dataflow df : {gen::Dataflow::WS, gen::Dataflow::IS, gen::Dataflow::OS}) {
    gen::ArrayConfig arr{2, 2, df};
    if (!roundTrips(gen::genSystolic(conv, arr))) ok = false;
    if (!roundTrips(gen::genSystolicPipelineInput(conv, arr, gen::PipelineStage::Affine)))
      ok = false;
    if (!roundTrips(gen::genSystolicPipelineInput(conv, arr, gen::PipelineStage::Linalg)))
      ok = false;
  }

  std::mt19937 rng(424242);
  for (int i = 0; i < 500; ++i) {
    ir::Program p = randomTextProgram(rng);
    if (!ir::verify(p).empty() || !roundTrips(p)) ok = false;
  }

  // Parser survival on random bytes: must neither crash nor throw.
  std::mt19937 fuzz(99);
  const std::string charset =
      "abcdefghijklmnopqrstuvwxyz0123456789 =(),.{}\"%\n\t equeue.readwritelaunch";
  int survived = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string text;
    size_t len = fuzz() % 200;
    for (size_t k = 0; k < len; ++k)
      text += (fuzz() % 8 == 0) ? static_cast<char>(fuzz() % 256)
                                : charset[fuzz() % charset.size()];
    ir::parse(text, "fuzz.eq");
    ++survived;
  }
  if (survived != 10000) ok = false;

  std::ostringstream d;
  d << checked << " programs round-tripped, " << survived << " fuzz inputs survived";
  report(12, "print/parse round-trip and parser robustness", ok, d.str());
}

}  // namespace

int main() {
  firCriterion(1, 1, 2048, 0, 0.0);
  firCriterion(2, 2, 143, 15, 0.0);
  firCriterion(3, 3, 588, 79, 0.01);
  firCriterion(4, 4, 538, 26, 0.0);
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  criterion11();
  criterion12();
  std::printf("%d of 12 criteria passed\n", 12 - g_failures);
  return g_failures;
}
