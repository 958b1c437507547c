#include "sim/engine.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <memory>
#include <unordered_map>

namespace eq::sim {

namespace ir = eq::ir;

std::string componentPath(const ir::Program &program, ir::ComponentId id) {
  std::vector<std::string> parts;
  ir::ComponentId cur = id;
  while (cur != ir::kInvalidId) {
    const ir::ComponentDecl &d = program.components[cur];
    if (d.parent == ir::kInvalidId) {
      // Root: tag alone when unambiguous among roots, else tag#id.
      bool dup = false;
      for (const auto &other : program.components)
        if (other.id != d.id && other.parent == ir::kInvalidId &&
            other.model_tag == d.model_tag)
          dup = true;
      parts.push_back(dup ? d.model_tag + "#" + std::to_string(d.id) : d.model_tag);
      break;
    }
    const ir::ComponentDecl &p = program.components[d.parent];
    std::string name = "?";
    for (const auto &[n, c] : p.children)
      if (c == cur) name = n;
    parts.push_back(name);
    cur = d.parent;
  }
  std::string path;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (!path.empty()) path += '/';
    path += *it;
  }
  return path;
}

uint64_t completionOf(const SimResult &result, const std::string &event_key) {
  auto it = result.event_completion.find(event_key);
  if (it == result.event_completion.end())
    throw SimError(SimErrorKind::Runtime, "unknown event key '" + event_key + "'");
  return it->second;
}

namespace {

constexpr size_t kNone = static_cast<size_t>(-1);
constexpr uint64_t kNever = static_cast<uint64_t>(-1);

struct RtVal {
  enum class K : uint8_t { None, Comp, Conn, Buf, Event, Data, Scalar };
  K k = K::None;
  uint64_t a = 0;      // comp/conn/buf/event index or data element count
  uint32_t bits = 32;  // data element width
  int64_t s = 0;       // scalar payload
};

struct RtBuffer {
  ir::BufferId decl = ir::kInvalidId;
  ir::ComponentId memory = ir::kInvalidId;
  uint64_t size_elems = 0;
  uint32_t elem_bits = 32;
  bool stream = false;
  bool live = true;
  uint64_t landed = 0;    // bytes deposited (stream accounting)
  uint64_t consumed = 0;  // bytes taken by reads
};

struct Event {
  enum class Kind { Launch, Memcpy, Control };
  enum class State { Pending, Queued, Running, Done };
  Kind kind = Kind::Control;
  State state = State::Pending;
  uint64_t seq = 0;
  const ir::Op *op = nullptr;
  ir::ComponentId target = ir::kInvalidId;
  std::vector<size_t> deps;
  bool is_or = false;
  uint64_t issue_cycle = 0;
  uint64_t completion = 0;
  size_t issuer_frame = kNone;
  std::vector<RtVal> returned;  // launch region return values
  size_t src_buf = kNone, dst_buf = kNone;  // memcpy
  std::string key;
};

struct Cursor {
  const ir::Region *region = nullptr;
  size_t idx = 0;
  const ir::Op *loop = nullptr;  // For / ParallelFor owning this cursor
  std::vector<int64_t> iter, lo, hi;
};

enum class BlockReason { None, MemPort, Stream, Conn, Extern, LaunchResult };

struct Frame {
  ir::ComponentId proc = ir::kInvalidId;  // kInvalidId = top-level block
  size_t event = kNone;                   // completing launch/memcpy event
  bool is_memcpy = false;
  std::vector<Cursor> stack;
  std::unordered_map<uint32_t, RtVal> env;
  enum class State { Ready, Busy, WaitEvent, Blocked, Done };
  State state = State::Ready;
  uint64_t busy_until = 0;
  uint64_t done_cycle = 0;
  size_t wait_event = kNone;
  BlockReason block = BlockReason::None;
  bool trying = false;
  uint64_t try_since = 0;
  std::string try_name;
  uint64_t first_work = kNever;
  // Byte credit applied when the current timed op completes.
  ir::ComponentId credit_mem = ir::kInvalidId;
  AccessKind credit_kind = AccessKind::Read;
  uint64_t credit_bytes = 0;
};

struct Deposit {
  uint64_t cycle = 0;
  uint64_t seq = 0;
  size_t buf = kNone;
  uint64_t bytes = 0;
};

struct ConnRt {
  uint64_t read_free = 0;
  uint64_t write_free = 0;
};

class Engine {
 public:
  Engine(const ir::Program &p, const Registry &r, const EngineConfig &c)
      : prog_(p), reg_(r), cfg_(c) {
    mem_states_.resize(prog_.components.size());
    mem_used_bits_.resize(prog_.components.size(), 0);
    for (const auto &d : prog_.components) {
      if (d.kind != ir::ComponentKind::Memory) continue;
      auto model = reg_.memoryModel(d.model_tag);
      if (!model)
        throw SimError(SimErrorKind::UnknownModel,
                       "no memory model registered for tag '" + d.model_tag + "'");
      MemoryState &s = mem_states_[d.id];
      s.model = *model;
      s.banks = d.banks;
      s.capacity_elems = 1;
      for (uint64_t dim : d.shape) s.capacity_elems *= dim;
      s.beginCycle();
    }
    conn_states_.resize(prog_.connections.size());
    conn_rt_.resize(prog_.connections.size());
    for (const auto &cd : prog_.connections) conn_states_[cd.id].max_bw = cd.bandwidth;
  }

  SimResult run() {
    auto t0 = std::chrono::steady_clock::now();
    auto root = std::make_unique<Frame>();
    root->stack.push_back(Cursor{&prog_.top, 0, nullptr, {}, {}, {}});
    frames_.push_back(std::move(root));
    live_.push_back(0);

    for (;;) {
      if (now_ > cfg_.cycle_limit)
        throw SimError(SimErrorKind::Timeout,
                       "cycle limit " + std::to_string(cfg_.cycle_limit) + " exceeded");
      for (auto &s : mem_states_) s.beginCycle();
      compactLive();
      applyDeposits();
      wakeBusy();
      do {
        changed_ = false;
        resolveControls();
        dispatchQueues();
        runFrames();
      } while (changed_);
      if (finished()) break;
      uint64_t next = nextTime();
      if (next == kNever) throwDeadlock();
      now_ = std::max(next, now_ + 1);
    }

    for (const Event &e : events_)
      if (e.state != Event::State::Done) throwDeadlock();

    SimResult res = std::move(res_);
    for (const Event &e : events_) {
      res.event_completion[e.key] = e.completion;
      res.total_cycles = std::max(res.total_cycles, e.completion);
    }
    // Work on the top-level block produces no completing event; count frame
    // retirement too (connection drains past the last event still do not).
    for (const auto &f : frames_) res.total_cycles = std::max(res.total_cycles, f->done_cycle);
    // Warm-up: latest first-timed-op start across components doing real work.
    std::map<ir::ComponentId, uint64_t> first;
    for (const auto &f : frames_) {
      if (f->proc == ir::kInvalidId || f->first_work == kNever) continue;
      auto it = first.find(f->proc);
      if (it == first.end() || f->first_work < it->second) first[f->proc] = f->first_work;
    }
    for (const auto &[proc, cycle] : first) res.warm_up = std::max(res.warm_up, cycle);
    for (const auto &d : prog_.components) {
      if (d.kind != ir::ComponentKind::Memory) continue;
      const MemoryState &s = mem_states_[d.id];
      if (s.bytes_read == 0 && s.bytes_written == 0) continue;
      MemoryStats &m = res.memories[componentPath(prog_, d.id)];
      m.bytes_read = s.bytes_read;
      m.bytes_written = s.bytes_written;
    }
    for (size_t i = 0; i < conn_states_.size(); ++i) {
      ConnectionStats cs;
      const ConnectionState &st = conn_states_[i];
      cs.max_bw = st.max_bw;
      cs.read_hist = st.read_hist;
      cs.write_hist = st.write_hist;
      cs.total_read = st.total_read;
      cs.total_write = st.total_write;
      cs.read_portion = st.maxBandwidthPortion(AccessKind::Read);
      cs.write_portion = st.maxBandwidthPortion(AccessKind::Write);
      res.connections["conn" + std::to_string(i)] = std::move(cs);
    }
    res.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  }

 private:
  // ── error helpers ──
  [[noreturn]] void rt(const std::string &msg) {
    throw SimError(SimErrorKind::Runtime, msg + " (cycle " + std::to_string(now_) + ")");
  }

  [[noreturn]] void throwDeadlock() {
    std::string msg = "deadlock at cycle " + std::to_string(now_) + "; blocked:";
    int listed = 0;
    for (const Event &e : events_)
      if (e.state != Event::State::Done && listed++ < 8) msg += " " + e.key;
    for (const auto &f : frames_)
      if (f->state == Frame::State::Blocked || f->state == Frame::State::WaitEvent)
        if (listed++ < 12) msg += " frame@" + std::to_string(f->proc);
    if (listed == 0) msg += " (internal)";
    throw SimError(SimErrorKind::Deadlock, msg);
  }

  // ── value plumbing ──
  RtVal &val(Frame &f, ir::Value v) {
    auto it = f.env.find(v.id);
    if (it == f.env.end()) rt("use of value %v" + std::to_string(v.id) + " before it is set");
    return it->second;
  }

  RtBuffer &buf(Frame &f, ir::Value v) {
    RtVal &rv = val(f, v);
    if (rv.k != RtVal::K::Buf) rt("expected a buffer value");
    RtBuffer &b = buffers_[rv.a];
    if (!b.live) rt("access to a deallocated buffer");
    return b;
  }

  static uint64_t bytesOf(uint64_t elems, uint32_t bits) { return (elems * bits + 7) / 8; }

  std::string opName(const ir::Op &op) {
    std::string label = op.strAttr("label");
    if (!label.empty()) return label;
    if (op.opcode == ir::Opcode::ExternOp) return op.strAttr("signature");
    return ir::opcodeName(op.opcode);
  }

  std::string framePath(const Frame &f) {
    return f.proc == ir::kInvalidId ? "top" : componentPath(prog_, f.proc);
  }

  void trace(const Frame &f, const std::string &name, const std::string &category,
             uint64_t start, uint64_t duration) {
    if (cfg_.trace_verbosity < 1) return;
    res_.trace.push_back(TraceRecord{framePath(f), name, category, start, duration});
  }

  // ── event lifecycle ──
  size_t newEvent(Event::Kind kind, const ir::Op *op) {
    Event e;
    e.kind = kind;
    e.seq = events_.size();
    e.op = op;
    e.issue_cycle = now_;
    if (kind == Event::Kind::Control) pending_controls_.push_back(events_.size());
    std::string base = op ? op->strAttr("label") : "";
    if (base.empty()) base = "e" + std::to_string(e.seq);
    int n = key_counts_[base]++;
    e.key = n == 0 ? base : base + "#" + std::to_string(n);
    events_.push_back(std::move(e));
    return events_.size() - 1;
  }

  void completeEvent(size_t ei, uint64_t cycle) {
    Event &e = events_[ei];
    e.state = Event::State::Done;
    e.completion = cycle;
    changed_ = true;
    // Launch results become visible to the issuing frame.
    if (e.kind == Event::Kind::Launch && e.issuer_frame != kNone && e.op) {
      Frame &issuer = *frames_[e.issuer_frame];
      for (size_t i = 1; i < e.op->results.size(); ++i) {
        RtVal v = i - 1 < e.returned.size() ? e.returned[i - 1] : RtVal{};
        issuer.env[e.op->results[i].id] = v;
      }
    }
  }

  // ── per-boundary bookkeeping ──
  void applyDeposits() {
    std::sort(deposits_.begin(), deposits_.end(), [](const Deposit &a, const Deposit &b) {
      return a.cycle != b.cycle ? a.cycle < b.cycle : a.seq < b.seq;
    });
    size_t i = 0;
    for (; i < deposits_.size() && deposits_[i].cycle <= now_; ++i) {
      RtBuffer &b = buffers_[deposits_[i].buf];
      if (b.stream) b.landed += deposits_[i].bytes;
      creditBytes(mem_states_[b.memory], AccessKind::Write, deposits_[i].bytes);
    }
    deposits_.erase(deposits_.begin(), deposits_.begin() + i);
  }

  // Retired frames and resolved controls drop out of the per-boundary scans,
  // keeping each boundary O(active) for programs with very many events.
  void compactLive() {
    live_.erase(std::remove_if(live_.begin(), live_.end(),
                               [&](size_t i) { return frames_[i]->state == Frame::State::Done; }),
                live_.end());
    pending_controls_.erase(
        std::remove_if(pending_controls_.begin(), pending_controls_.end(),
                       [&](size_t i) { return events_[i].state == Event::State::Done; }),
        pending_controls_.end());
  }

  void wakeBusy() {
    for (size_t i : live_) {
      Frame &f = *frames_[i];
      if (f.state == Frame::State::Busy && f.busy_until <= now_) {
        if (f.credit_mem != ir::kInvalidId) {
          creditBytes(mem_states_[f.credit_mem], f.credit_kind, f.credit_bytes);
          f.credit_mem = ir::kInvalidId;
        }
        f.state = Frame::State::Ready;
      }
    }
  }

  void resolveControls() {
    for (size_t i : pending_controls_) {
      Event &e = events_[i];
      if (e.state == Event::State::Done) continue;
      if (e.deps.empty()) {  // control_start
        completeEvent(i, e.issue_cycle);
        continue;
      }
      if (e.is_or) {
        uint64_t best = kNever;
        for (size_t d : e.deps)
          if (events_[d].state == Event::State::Done)
            best = std::min(best, events_[d].completion);
        if (best != kNever) completeEvent(i, best);
      } else {
        uint64_t worst = 0;
        bool all = true;
        for (size_t d : e.deps) {
          if (events_[d].state != Event::State::Done) {
            all = false;
            break;
          }
          worst = std::max(worst, events_[d].completion);
        }
        if (all) completeEvent(i, worst);
      }
    }
  }

  bool depsReady(const Event &e) const {
    for (size_t d : e.deps)
      if (events_[d].state != Event::State::Done || events_[d].completion > now_) return false;
    return true;
  }

  void dispatchQueues() {
    for (auto &[proc, q] : queues_) {
      if (q.empty()) continue;
      auto r = running_.find(proc);
      if (r != running_.end() && r->second != kNone) continue;
      size_t ei = q.front();
      Event &e = events_[ei];
      if (!depsReady(e)) continue;  // head-only dispatch
      q.pop_front();
      e.state = Event::State::Running;
      auto f = std::make_unique<Frame>();
      f->proc = proc;
      f->event = ei;
      if (e.kind == Event::Kind::Memcpy) {
        f->is_memcpy = true;
      } else {
        // Captures are snapshot when the kernel starts, not when it is
        // issued; values are SSA, so anything set earlier reads the same,
        // and results of the dependency event are visible by now.
        const ir::Region &region = *e.op->region;
        Frame &issuer = *frames_[e.issuer_frame];
        for (size_t i = 0; i < region.args.size(); ++i)
          f->env[region.args[i].id] = val(issuer, e.op->operands[i + 2]);
        f->stack.push_back(Cursor{&region, 0, nullptr, {}, {}, {}});
      }
      frames_.push_back(std::move(f));
      live_.push_back(frames_.size() - 1);
      running_[proc] = frames_.size() - 1;
      changed_ = true;
    }
  }

  void runFrames() {
    // Stalled frames re-arbitrate first, in arrival order, so a long-waiting
    // access is not starved by a freshly woken frame with a lower index.
    std::vector<size_t> blocked;
    for (size_t i : live_)
      if (frames_[i]->state == Frame::State::Blocked) blocked.push_back(i);
    std::stable_sort(blocked.begin(), blocked.end(), [&](size_t a, size_t b) {
      return frames_[a]->try_since < frames_[b]->try_since;
    });
    for (size_t i : blocked) {
      frames_[i]->state = Frame::State::Ready;
      stepFrame(i);
    }
    for (size_t idx = 0; idx < live_.size(); ++idx) {
      size_t i = live_[idx];
      Frame &f = *frames_[i];
      if (f.state == Frame::State::WaitEvent) {
        const Event &e = events_[f.wait_event];
        if (e.state == Event::State::Done && e.completion <= now_) {
          f.state = Frame::State::Ready;
          changed_ = true;
        }
      }
      if (f.state == Frame::State::Ready) stepFrame(i);
    }
  }

  bool finished() const {
    for (size_t i : live_)
      if (frames_[i]->state != Frame::State::Done) return false;
    for (const auto &[proc, q] : queues_)
      if (!q.empty()) return false;
    return deposits_.empty();
  }

  uint64_t nextTime() const {
    uint64_t next = kNever;
    for (size_t i : live_) {
      const auto &f = frames_[i];
      if (f->state == Frame::State::Busy) next = std::min(next, f->busy_until);
      if (f->state == Frame::State::Blocked &&
          (f->block == BlockReason::MemPort || f->block == BlockReason::Extern))
        next = std::min(next, now_ + 1);
      if (f->state == Frame::State::Blocked && f->block == BlockReason::Conn) {
        for (const auto &c : conn_rt_) {
          if (c.read_free > now_) next = std::min(next, c.read_free);
          if (c.write_free > now_) next = std::min(next, c.write_free);
        }
      }
    }
    for (const auto &d : deposits_) next = std::min(next, d.cycle);
    return next;
  }

  // ── frame execution ──
  void finishFrame(size_t fi) {
    Frame &f = *frames_[fi];
    f.state = Frame::State::Done;
    f.done_cycle = now_;
    changed_ = true;
    if (f.proc != ir::kInvalidId) running_[f.proc] = kNone;
    if (f.event != kNone) completeEvent(f.event, now_);
  }

  void stepFrame(size_t fi) {
    Frame &f = *frames_[fi];
    while (f.state == Frame::State::Ready) {
      if (f.is_memcpy) {
        execMemcpy(fi);
        return;
      }
      if (f.stack.empty()) {
        finishFrame(fi);
        return;
      }
      Cursor &c = f.stack.back();
      if (c.idx >= c.region->ops.size()) {
        if (c.loop) {
          // Advance the (multi-)index; rebind and restart, or pop.
          size_t d = c.iter.size();
          while (d > 0) {
            c.iter[d - 1]++;
            if (c.iter[d - 1] < c.hi[d - 1]) break;
            c.iter[d - 1] = c.lo[d - 1];
            d--;
          }
          if (d == 0) {
            f.stack.pop_back();
          } else {
            c.idx = 0;
            for (size_t i = 0; i < c.iter.size(); ++i) {
              RtVal v;
              v.k = RtVal::K::Scalar;
              v.s = c.iter[i];
              f.env[c.region->args[i].id] = v;
            }
          }
        } else {
          f.stack.pop_back();
        }
        changed_ = true;
        continue;
      }
      const ir::Op &op = c.region->ops[c.idx];
      if (!execOp(fi, op)) return;  // blocked, waiting, or busy
      changed_ = true;
    }
  }

  void endStall(Frame &f) {
    if (f.trying) {
      if (now_ > f.try_since)
        trace(f, f.try_name, "stall", f.try_since, now_ - f.try_since);
      f.trying = false;
    }
  }

  void blockFrame(Frame &f, BlockReason why, const std::string &name) {
    f.state = Frame::State::Blocked;
    f.block = why;
    if (!f.trying) {
      f.trying = true;
      f.try_since = now_;
      f.try_name = name;
    }
  }

  void beginBusy(Frame &f, uint64_t cycles, const std::string &name,
                 const std::string &category) {
    endStall(f);
    if (cycles == 0) return;
    trace(f, name, category, now_, cycles);
    if (f.first_work == kNever) f.first_work = now_;
    f.state = Frame::State::Busy;
    f.busy_until = now_ + cycles;
  }

  void execMemcpy(size_t fi) {
    Frame &f = *frames_[fi];
    Event &e = events_[f.event];
    RtBuffer &src = buffers_[e.src_buf];
    RtBuffer &dst = buffers_[e.dst_buf];
    if (!src.live || !dst.live) rt("memcpy on a deallocated buffer");
    std::string name = opName(*e.op);
    AccessResult rd =
        memoryAccess(mem_states_[src.memory], AccessKind::Read, src.size_elems,
                     src.elem_bits, std::nullopt);
    if (rd.stall) {
      blockFrame(f, BlockReason::MemPort, name);
      return;
    }
    AccessResult wr =
        memoryAccess(mem_states_[dst.memory], AccessKind::Write, dst.size_elems,
                     dst.elem_bits, std::nullopt);
    if (wr.stall) {
      blockFrame(f, BlockReason::MemPort, name);
      return;
    }
    uint64_t bytes = bytesOf(src.size_elems, src.elem_bits);
    uint64_t dur = rd.cycles + wr.cycles;  // read-then-write on the DMA
    creditBytesAfter(f, src.memory, AccessKind::Read, bytes, dur);
    beginBusy(f, dur, name, "memory");
    if (dur == 0) {
      RtBuffer &b = buffers_[e.dst_buf];
      if (b.stream) b.landed += bytes;
      creditBytes(mem_states_[b.memory], AccessKind::Write, bytes);
      finishFrame(fi);
      return;
    }
    deposits_.push_back(Deposit{now_ + dur, deposit_seq_++, e.dst_buf, bytes});
    f.is_memcpy = false;  // on wake, the empty stack finishes the frame
  }

  // Returns true when the op fully retired and the cursor advanced.
  bool execOp(size_t fi, const ir::Op &op) {
    Frame &f = *frames_[fi];
    Cursor &c = f.stack.back();
    std::string name = opName(op);

    auto setResult = [&](size_t i, RtVal v) { f.env[op.results[i].id] = v; };
    auto scalar = [&](ir::Value v) {
      RtVal &rv = val(f, v);
      if (rv.k != RtVal::K::Scalar) rt("expected a scalar value");
      return rv.s;
    };
    auto advance = [&]() {
      c.idx++;
      return true;
    };

    switch (op.opcode) {
      case ir::Opcode::CreateProc:
      case ir::Opcode::CreateMem:
      case ir::Opcode::CreateDma:
      case ir::Opcode::CreateComp: {
        RtVal v;
        v.k = RtVal::K::Comp;
        v.a = prog_.values[op.results[0].id].sym;
        setResult(0, v);
        return advance();
      }
      case ir::Opcode::AddComp:
        return advance();
      case ir::Opcode::GetComp: {
        RtVal v;
        v.k = RtVal::K::Comp;
        v.a = prog_.values[op.results[0].id].sym;
        setResult(0, v);
        return advance();
      }
      case ir::Opcode::CompSelect: {
        RtVal &comp = val(f, op.operands[0]);
        if (comp.k != RtVal::K::Comp) rt("comp_select on a non-component");
        std::string child = op.strAttr("prefix");
        for (size_t i = 1; i < op.operands.size(); ++i)
          child += "_" + std::to_string(scalar(op.operands[i]));
        const ir::ComponentDecl &parent = prog_.components[comp.a];
        ir::ComponentId found = ir::kInvalidId;
        for (const auto &[n, cid] : parent.children)
          if (n == child) found = cid;
        if (found == ir::kInvalidId)
          rt("comp_select: no child named '" + child + "' in '" + parent.model_tag + "'");
        RtVal v;
        v.k = RtVal::K::Comp;
        v.a = found;
        setResult(0, v);
        return advance();
      }
      case ir::Opcode::CreateConnection: {
        RtVal v;
        v.k = RtVal::K::Conn;
        v.a = prog_.values[op.results[0].id].sym;
        setResult(0, v);
        return advance();
      }
      case ir::Opcode::Alloc: {
        RtVal &mem = val(f, op.operands[0]);
        if (mem.k != RtVal::K::Comp) rt("alloc on a non-component");
        const ir::ComponentDecl &md = prog_.components[mem.a];
        if (md.kind != ir::ComponentKind::Memory) rt("alloc on a non-memory component");
        const ir::BufferDecl &bd = prog_.buffers[prog_.values[op.results[0].id].sym];
        uint64_t want = bd.size_elems * bd.elem_bits;
        if (mem_used_bits_[mem.a] + want > md.capacityBits())
          rt("alloc exceeds capacity of '" + md.model_tag + "'");
        mem_used_bits_[mem.a] += want;
        RtBuffer b;
        b.decl = bd.id;
        b.memory = static_cast<ir::ComponentId>(mem.a);
        b.size_elems = bd.size_elems;
        b.elem_bits = bd.elem_bits;
        b.stream = bd.stream;
        buffers_.push_back(b);
        RtVal v;
        v.k = RtVal::K::Buf;
        v.a = buffers_.size() - 1;
        setResult(0, v);
        return advance();
      }
      case ir::Opcode::Dealloc: {
        RtBuffer &b = buf(f, op.operands[0]);
        b.live = false;
        mem_used_bits_[b.memory] -= b.size_elems * b.elem_bits;
        return advance();
      }
      case ir::Opcode::GetBuf: {
        RtVal &mem = val(f, op.operands[0]);
        if (mem.k != RtVal::K::Comp) rt("get_buf on a non-component");
        size_t found = kNone;
        for (size_t i = 0; i < buffers_.size(); ++i)
          if (buffers_[i].live && buffers_[i].memory == mem.a) {
            if (found != kNone) rt("get_buf: memory holds more than one live buffer");
            found = i;
          }
        if (found == kNone) rt("get_buf: memory holds no live buffer");
        RtVal v;
        v.k = RtVal::K::Buf;
        v.a = found;
        setResult(0, v);
        return advance();
      }
      case ir::Opcode::Read:
      case ir::Opcode::Load: {
        RtBuffer &b = buf(f, op.operands[0]);
        size_t i = 1;
        std::optional<uint64_t> addr;
        size_t conn = kNone;
        if (op.intAttr("addr", 0)) addr = static_cast<uint64_t>(scalar(op.operands[i++]));
        if (op.opcode == ir::Opcode::Read && op.intAttr("conn", 0)) {
          RtVal &cv = val(f, op.operands[i++]);
          if (cv.k != RtVal::K::Conn) rt("read over a non-connection");
          conn = cv.a;
        }
        uint64_t elems = op.hasAttr("elems")
                             ? static_cast<uint64_t>(op.intAttr("elems"))
                             : (op.opcode == ir::Opcode::Load ? 1 : b.size_elems);
        uint64_t bytes = bytesOf(elems, b.elem_bits);
        RtVal result;
        result.k = RtVal::K::Data;
        result.a = elems;
        result.bits = b.elem_bits;

        if (b.stream) {
          // Mailbox: wait for enough landed bytes, then consume.
          if (b.landed < b.consumed + bytes) {
            blockFrame(f, BlockReason::Stream, name);
            return false;
          }
          b.consumed += bytes;
          AccessResult r =
              memoryAccess(mem_states_[b.memory], AccessKind::Read, elems, b.elem_bits, addr);
          if (r.stall) {
            b.consumed -= bytes;
            blockFrame(f, BlockReason::MemPort, name);
            return false;
          }
          creditBytesAfter(f, b.memory, AccessKind::Read, bytes, r.cycles);
          setResult(0, result);
          beginBusy(f, r.cycles, name, "memory");
          return r.cycles == 0 ? advance() : (advance(), false);
        }
        if (conn != kNone) {
          // Pull-read: the processor is occupied for the transfer duration,
          // serialized FIFO on the connection's read direction.
          ConnRt &crt = conn_rt_[conn];
          const ir::ConnectionDecl &cd = prog_.connections[conn];
          uint64_t free_at =
              cd.kind == ir::ConnectionKind::Window ? std::max(crt.read_free, crt.write_free)
                                                    : crt.read_free;
          if (free_at > now_) {
            blockFrame(f, BlockReason::Conn, name);
            return false;
          }
          uint64_t dur = connectionTransferCycles(cd.bandwidth, bytes);
          uint64_t end = now_ + dur;
          crt.read_free = end;
          if (cd.kind == ir::ConnectionKind::Window) crt.write_free = end;
          conn_states_[conn].credit(AccessKind::Read, end, dur, bytes);
          creditBytesAfter(f, b.memory, AccessKind::Read, bytes, dur);
          setResult(0, result);
          beginBusy(f, dur, name, "memory");
          return dur == 0 ? advance() : (advance(), false);
        }
        AccessResult r =
            memoryAccess(mem_states_[b.memory], AccessKind::Read, elems, b.elem_bits, addr);
        if (r.stall) {
          blockFrame(f, BlockReason::MemPort, name);
          return false;
        }
        creditBytesAfter(f, b.memory, AccessKind::Read, bytes, r.cycles);
        setResult(0, result);
        beginBusy(f, r.cycles, name, "memory");
        return r.cycles == 0 ? advance() : (advance(), false);
      }
      case ir::Opcode::Write:
      case ir::Opcode::Store: {
        RtVal &data = val(f, op.operands[0]);
        if (data.k != RtVal::K::Data) rt("write of a non-data value");
        RtBuffer &b = buf(f, op.operands[1]);
        size_t i = 2;
        std::optional<uint64_t> addr;
        size_t conn = kNone;
        if (op.intAttr("addr", 0)) addr = static_cast<uint64_t>(scalar(op.operands[i++]));
        if (op.opcode == ir::Opcode::Write && op.intAttr("conn", 0)) {
          RtVal &cv = val(f, op.operands[i++]);
          if (cv.k != RtVal::K::Conn) rt("write over a non-connection");
          conn = cv.a;
        }
        uint64_t bytes = bytesOf(data.a, data.bits);
        if (conn != kNone) {
          // Asynchronous transfer: zero processor cycles; FIFO per direction.
          ConnRt &crt = conn_rt_[conn];
          const ir::ConnectionDecl &cd = prog_.connections[conn];
          uint64_t start =
              std::max(now_, cd.kind == ir::ConnectionKind::Window
                                 ? std::max(crt.read_free, crt.write_free)
                                 : crt.write_free);
          uint64_t dur = connectionTransferCycles(cd.bandwidth, bytes);
          uint64_t end = start + dur;
          crt.write_free = end;
          if (cd.kind == ir::ConnectionKind::Window) crt.read_free = end;
          conn_states_[conn].credit(AccessKind::Write, end, dur, bytes);
          if (end <= now_) {
            if (b.stream) b.landed += bytes;
            creditBytes(mem_states_[b.memory], AccessKind::Write, bytes);
          } else {
            deposits_.push_back(
                Deposit{end, deposit_seq_++, static_cast<size_t>(&b - buffers_.data()), bytes});
          }
          endStall(f);
          return advance();
        }
        uint64_t elems = data.a;
        AccessResult r =
            memoryAccess(mem_states_[b.memory], AccessKind::Write, elems, b.elem_bits, addr);
        if (r.stall) {
          blockFrame(f, BlockReason::MemPort, name);
          return false;
        }
        if (b.stream) b.landed += bytes;
        creditBytesAfter(f, b.memory, AccessKind::Write, bytes, r.cycles);
        beginBusy(f, r.cycles, name, "memory");
        return r.cycles == 0 ? advance() : (advance(), false);
      }
      case ir::Opcode::Launch: {
        RtVal &dep = val(f, op.operands[0]);
        if (dep.k != RtVal::K::Event) rt("launch dependency is not an event");
        RtVal &proc = val(f, op.operands[1]);
        if (proc.k != RtVal::K::Comp) rt("launch target is not a component");
        const ir::ComponentDecl &pd = prog_.components[proc.a];
        if (pd.kind != ir::ComponentKind::Processor && pd.kind != ir::ComponentKind::Dma)
          rt("launch target '" + pd.model_tag + "' is not a processor");
        size_t ei = newEvent(Event::Kind::Launch, &op);
        Event &e = events_[ei];
        e.target = static_cast<ir::ComponentId>(proc.a);
        e.deps = {dep.a};
        e.issuer_frame = fi;
        e.state = Event::State::Queued;
        RtVal v;
        v.k = RtVal::K::Event;
        v.a = ei;
        setResult(0, v);
        queues_[e.target].push_back(ei);
        running_.try_emplace(e.target, kNone);
        return advance();
      }
      case ir::Opcode::Memcpy: {
        RtVal &dep = val(f, op.operands[0]);
        if (dep.k != RtVal::K::Event) rt("memcpy dependency is not an event");
        RtBuffer &src = buf(f, op.operands[1]);
        RtBuffer &dst = buf(f, op.operands[2]);
        RtVal &dma = val(f, op.operands[3]);
        if (dma.k != RtVal::K::Comp ||
            prog_.components[dma.a].kind != ir::ComponentKind::Dma)
          rt("memcpy engine is not a dma component");
        if (src.size_elems != dst.size_elems) rt("memcpy between different-sized buffers");
        size_t ei = newEvent(Event::Kind::Memcpy, &op);
        Event &e = events_[ei];
        e.target = static_cast<ir::ComponentId>(dma.a);
        e.deps = {dep.a};
        e.issuer_frame = fi;
        e.state = Event::State::Queued;
        e.src_buf = static_cast<size_t>(&src - buffers_.data());
        e.dst_buf = static_cast<size_t>(&dst - buffers_.data());
        RtVal v;
        v.k = RtVal::K::Event;
        v.a = ei;
        setResult(0, v);
        queues_[e.target].push_back(ei);
        running_.try_emplace(e.target, kNone);
        return advance();
      }
      case ir::Opcode::ControlStart: {
        size_t ei = newEvent(Event::Kind::Control, &op);
        RtVal v;
        v.k = RtVal::K::Event;
        v.a = ei;
        setResult(0, v);
        return advance();
      }
      case ir::Opcode::ControlAnd:
      case ir::Opcode::ControlOr: {
        size_t ei = newEvent(Event::Kind::Control, &op);
        Event &e = events_[ei];
        e.is_or = op.opcode == ir::Opcode::ControlOr;
        for (ir::Value d : op.operands) {
          RtVal &dv = val(f, d);
          if (dv.k != RtVal::K::Event) rt("control dependency is not an event");
          e.deps.push_back(dv.a);
        }
        RtVal v;
        v.k = RtVal::K::Event;
        v.a = ei;
        setResult(0, v);
        return advance();
      }
      case ir::Opcode::Await: {
        RtVal &ev = val(f, op.operands[0]);
        if (ev.k != RtVal::K::Event) rt("await on a non-event");
        const Event &e = events_[ev.a];
        if (e.state == Event::State::Done && e.completion <= now_) {
          endStall(f);
          return advance();
        }
        f.state = Frame::State::WaitEvent;
        f.wait_event = ev.a;
        return false;
      }
      case ir::Opcode::Return: {
        if (f.event != kNone) {
          Event &e = events_[f.event];
          e.returned.clear();
          for (ir::Value v : op.operands) e.returned.push_back(val(f, v));
        }
        return advance();
      }
      case ir::Opcode::ExternOp: {
        std::string sig = op.strAttr("signature");
        const OperationFunction *fn = reg_.findOperation(sig);
        if (!fn)
          throw SimError(SimErrorKind::UnresolvedSignature,
                         "no operation function registered for signature '" + sig + "'");
        OpContext ctx;
        for (ir::Value v : op.operands) {
          RtVal &rv = val(f, v);
          ctx.operand_elems.push_back(rv.k == RtVal::K::Scalar ? static_cast<uint64_t>(rv.s)
                                                               : rv.a);
        }
        ctx.result_elems = static_cast<uint64_t>(op.intAttr("elems", 1));
        OpOutcome out = (*fn)(ctx);
        if (out.stall) {
          blockFrame(f, BlockReason::Extern, name);
          return false;
        }
        for (size_t i = 0; i < op.results.size(); ++i) {
          RtVal v;
          v.k = RtVal::K::Data;
          v.a = ctx.result_elems;
          v.bits = static_cast<uint32_t>(op.intAttr("elem_bits", 32));
          setResult(i, v);
        }
        beginBusy(f, out.cycles, name, "compute");
        return out.cycles == 0 ? advance() : (advance(), false);
      }
      case ir::Opcode::Const: {
        RtVal v;
        v.k = RtVal::K::Scalar;
        v.s = op.intAttr("value");
        setResult(0, v);
        return advance();
      }
      case ir::Opcode::Add:
      case ir::Opcode::Mul: {
        int64_t a = scalar(op.operands[0]);
        int64_t b = scalar(op.operands[1]);
        RtVal v;
        v.k = RtVal::K::Scalar;
        v.s = op.opcode == ir::Opcode::Add ? a + b : a * b;
        setResult(0, v);
        const OperationFunction *fn =
            reg_.findOperation(op.opcode == ir::Opcode::Add ? "add" : "mul");
        OpContext ctx;
        uint64_t cycles = fn ? (*fn)(ctx).cycles : 1;
        beginBusy(f, cycles, name, "compute");
        return cycles == 0 ? advance() : (advance(), false);
      }
      case ir::Opcode::For:
      case ir::Opcode::ParallelFor: {
        Cursor nc;
        nc.region = op.region.get();
        nc.loop = &op;
        if (op.opcode == ir::Opcode::For) {
          nc.lo = {op.intAttr("lower")};
          nc.hi = {op.intAttr("upper")};
        } else {
          for (int64_t v : std::get<std::vector<int64_t>>(op.attrs.at("lowers")))
            nc.lo.push_back(v);
          for (int64_t v : std::get<std::vector<int64_t>>(op.attrs.at("uppers")))
            nc.hi.push_back(v);
        }
        nc.iter = nc.lo;
        c.idx++;  // parent resumes after the loop
        bool empty = false;
        for (size_t i = 0; i < nc.lo.size(); ++i)
          if (nc.lo[i] >= nc.hi[i]) empty = true;
        if (!empty) {
          for (size_t i = 0; i < nc.iter.size(); ++i) {
            RtVal v;
            v.k = RtVal::K::Scalar;
            v.s = nc.iter[i];
            f.env[nc.region->args[i].id] = v;
          }
          f.stack.push_back(std::move(nc));
        }
        return true;
      }
    }
    rt("unhandled opcode");
  }

  void creditBytesAfter(Frame &f, ir::ComponentId mem, AccessKind kind, uint64_t bytes,
                        uint64_t cycles) {
    if (cycles == 0) {
      creditBytes(mem_states_[mem], kind, bytes);
    } else {
      f.credit_mem = mem;
      f.credit_kind = kind;
      f.credit_bytes = bytes;
    }
  }

  const ir::Program &prog_;
  const Registry &reg_;
  EngineConfig cfg_;

  std::vector<MemoryState> mem_states_;
  std::vector<uint64_t> mem_used_bits_;
  std::vector<ConnectionState> conn_states_;
  std::vector<ConnRt> conn_rt_;
  std::vector<RtBuffer> buffers_;
  std::vector<std::unique_ptr<Frame>> frames_;
  std::vector<size_t> live_;              // frames not yet Done
  std::vector<size_t> pending_controls_;  // control events not yet resolved
  std::vector<Event> events_;
  std::map<ir::ComponentId, std::deque<size_t>> queues_;
  std::map<ir::ComponentId, size_t> running_;
  std::vector<Deposit> deposits_;
  uint64_t deposit_seq_ = 0;
  std::map<std::string, int> key_counts_;
  uint64_t now_ = 0;
  bool changed_ = false;
  SimResult res_;
};

}  // namespace

SimResult simulate(const ir::Program &program, const Registry &registry,
                   const EngineConfig &config) {
  auto diags = ir::verify(program);
  for (const auto &d : diags)
    if (d.severity == ir::Severity::Error)
      throw SimError(SimErrorKind::Runtime, "program failed verification: " + d.message);
  return Engine(program, registry, config).run();
}

}  // namespace eq::sim
