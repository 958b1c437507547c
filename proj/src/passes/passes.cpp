#include "passes/passes.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ir/textio.hpp"

namespace eq::passes {

using ir::AttrValue;
using ir::BufferDecl;
using ir::ComponentDecl;
using ir::ComponentId;
using ir::ComponentKind;
using ir::kInvalidId;
using ir::Op;
using ir::Opcode;
using ir::Region;
using ir::Value;
using ir::ValueKind;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string &pass, const std::string &msg) {
  throw PassError("pass '" + pass + "': " + msg);
}

// ── Program helpers ─────────────────────────────────────────────────────────

// Pre-order walk in op order, recursing into a region at the op that owns it,
// so definitions are always visited before uses.
void forEachRegion(Region &r, const std::function<void(Region &)> &fn) {
  fn(r);
  for (Op &op : r.ops)
    if (op.region) forEachRegion(*op.region, fn);
}

void forEachRegionConst(const Region &r, const std::function<void(const Region &)> &fn) {
  fn(r);
  for (const Op &op : r.ops)
    if (op.region) forEachRegionConst(*op.region, fn);
}

std::string pathOf(const ir::Program &p, ComponentId cid) {
  std::vector<std::string> segs;
  ComponentId cur = cid;
  while (true) {
    ComponentId par = p.components[cur].parent;
    if (par == kInvalidId) {
      segs.push_back(p.components[cur].model_tag);
      break;
    }
    for (const auto &[n, id] : p.components[par].children)
      if (id == cur) {
        segs.push_back(n);
        break;
      }
    cur = par;
  }
  std::string out;
  for (auto it = segs.rbegin(); it != segs.rend(); ++it) {
    if (!out.empty()) out += "/";
    out += *it;
  }
  return out;
}

bool globSeg(const char *pat, const char *s) {
  for (; *pat; ++pat, ++s) {
    if (*pat == '*') {
      while (*pat == '*') ++pat;
      if (!*pat) return true;
      for (; *s; ++s)
        if (globSeg(pat, s)) return true;
      return false;
    }
    if (*s != *pat) return false;
  }
  return *s == 0;
}

std::vector<std::string> splitPath(const std::string &path) {
  std::vector<std::string> segs;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      segs.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  segs.push_back(cur);
  return segs;
}

bool globPath(const std::string &pattern, const std::string &path) {
  std::vector<std::string> ps = splitPath(pattern), ss = splitPath(path);
  if (ps.size() != ss.size()) return false;
  for (size_t i = 0; i < ps.size(); ++i)
    if (!globSeg(ps[i].c_str(), ss[i].c_str())) return false;
  return true;
}

std::vector<ComponentId> matchComponents(const ir::Program &p, const std::string &glob) {
  std::vector<ComponentId> out;
  for (const ComponentDecl &c : p.components)
    if (globPath(glob, pathOf(p, c.id))) out.push_back(c.id);
  return out;
}

struct Ctx {
  ir::Program &p;
  std::string pass;

  [[noreturn]] void die(const std::string &msg) const { fail(pass, msg); }

  ComponentId resolvePath(const std::string &path) const {
    std::vector<ComponentId> hits = matchComponents(p, path);
    if (hits.empty()) die("no component matches path '" + path + "'");
    if (hits.size() > 1) die("path '" + path + "' is ambiguous");
    return hits[0];
  }

  // The SSA value bound to a statically declared component. All create ops
  // live in the top-level block, so the value always exists there.
  Value componentValue(ComponentId cid) const {
    for (const Op &op : p.top.ops)
      for (Value r : op.results) {
        const ir::ValueInfo &vi = p.values[r.id];
        if (vi.kind == ValueKind::Component && vi.sym == cid) return r;
      }
    die("component '" + pathOf(p, cid) + "' has no top-level value");
  }

  // Unique op carrying the given label; dies on zero or many.
  struct OpRef {
    Region *region = nullptr;
    size_t index = 0;
    Op *op() const { return &region->ops[index]; }
  };
  std::vector<OpRef> opsByLabel(const std::string &label) {
    std::vector<OpRef> out;
    forEachRegion(p.top, [&](Region &r) {
      for (size_t i = 0; i < r.ops.size(); ++i)
        if (r.ops[i].strAttr("label") == label) out.push_back(OpRef{&r, i});
    });
    return out;
  }
  OpRef uniqueOpByLabel(const std::string &label) {
    std::vector<OpRef> hits = opsByLabel(label);
    if (hits.empty()) die("no op labeled '" + label + "'");
    if (hits.size() > 1) die("label '" + label + "' is ambiguous");
    return hits[0];
  }

  Value allocByLabel(const std::string &label) {
    OpRef ref = uniqueOpByLabel(label);
    if (ref.op()->opcode != Opcode::Alloc)
      die("op labeled '" + label + "' is not an alloc");
    return ref.op()->results[0];
  }

  // The unique buffer allocated on a memory component (get_buf semantics).
  // Resolved through the buffer table, so it stays valid while a pass is
  // mid-way through rebuilding an op list.
  Value uniqueAllocOf(ComponentId mem) {
    ir::BufferId found = ir::kInvalidId;
    for (const BufferDecl &bd : p.buffers)
      if (bd.memory == mem) {
        if (found != ir::kInvalidId) die("memory '" + pathOf(p, mem) + "' holds several buffers");
        found = bd.id;
      }
    if (found == ir::kInvalidId) die("no buffer allocated on '" + pathOf(p, mem) + "'");
    // The lowest-numbered value with this symbol is the alloc's own result.
    for (uint32_t i = 0; i < p.values.size(); ++i)
      if (p.values[i].kind == ValueKind::Buffer && p.values[i].sym == found) return Value{i};
    die("buffer on '" + pathOf(p, mem) + "' has no defining value");
  }

  ComponentId childOf(ComponentId parent, const std::string &name) const {
    for (const auto &[n, id] : p.components[parent].children)
      if (n == name) return id;
    die("component '" + pathOf(p, parent) + "' has no child '" + name + "'");
  }

  Value cloneValue(Value v) {
    ir::ValueInfo info = p.values[v.id];
    Value nv = p.newValue(info.kind);
    p.values[nv.id] = info;
    return nv;
  }
};

// Operand uses across an op list, recursing into nested regions. Region args
// and op results count as local definitions.
void collectFree(const std::vector<Op> &ops, std::set<uint32_t> &defined,
                 std::vector<Value> &free, std::set<uint32_t> &seen) {
  for (const Op &op : ops) {
    for (Value v : op.operands)
      if (!defined.count(v.id) && seen.insert(v.id).second) free.push_back(v);
    for (Value r : op.results) defined.insert(r.id);
    if (op.region) {
      for (Value a : op.region->args) defined.insert(a.id);
      collectFree(op.region->ops, defined, free, seen);
    }
  }
}

std::vector<Value> freeValues(const std::vector<Op> &ops) {
  std::set<uint32_t> defined, seen;
  std::vector<Value> free;
  collectFree(ops, defined, free, seen);
  return free;
}

void rewriteUses(std::vector<Op> &ops, const std::map<uint32_t, Value> &remap) {
  for (Op &op : ops) {
    for (Value &v : op.operands) {
      auto it = remap.find(v.id);
      if (it != remap.end()) v = it->second;
    }
    if (op.region) rewriteUses(op.region->ops, remap);
  }
}

bool usesValue(const std::vector<Op> &ops, uint32_t id) {
  for (const Op &op : ops) {
    for (Value v : op.operands)
      if (v.id == id) return true;
    if (op.region && usesValue(op.region->ops, id)) return true;
  }
  return false;
}

// Every statically known scalar in the program: const results plus add/mul
// chains over them, in dominance order.
std::map<uint32_t, int64_t> constMap(const ir::Program &p) {
  std::map<uint32_t, int64_t> m;
  forEachRegionConst(p.top, [&](const Region &r) {
    for (const Op &op : r.ops) {
      if (op.opcode == Opcode::Const) {
        m[op.results[0].id] = op.intAttr("value");
      } else if (op.opcode == Opcode::Add || op.opcode == Opcode::Mul) {
        auto a = m.find(op.operands[0].id), b = m.find(op.operands[1].id);
        if (a != m.end() && b != m.end())
          m[op.results[0].id] =
              op.opcode == Opcode::Add ? a->second + b->second : a->second * b->second;
      }
    }
  });
  return m;
}

Op makeConst(Ctx &c, int64_t value, Value *out) {
  Op op;
  op.opcode = Opcode::Const;
  op.attrs["value"] = value;
  Value v = c.p.newValue(ValueKind::Scalar);
  op.results = {v};
  *out = v;
  return op;
}

Op makeControlStart(Ctx &c, Value *out, const std::string &label = "") {
  Op op;
  op.opcode = Opcode::ControlStart;
  Value v = c.p.newValue(ValueKind::Event);
  op.results = {v};
  if (!label.empty()) op.attrs["label"] = label;
  *out = v;
  return op;
}

Op makeAwait(Value ev) {
  Op op;
  op.opcode = Opcode::Await;
  op.operands = {ev};
  return op;
}

// ── Param schemas ───────────────────────────────────────────────────────────

enum class PT { Str, Int, Bool, Arr };

struct ParamField {
  const char *key;
  PT type;
  bool required;
};

void checkParams(const std::string &pass, const json &params,
                 const std::vector<ParamField> &schema) {
  if (!params.is_object()) fail(pass, "params must be an object");
  for (const auto &f : schema)
    if (f.required && !params.contains(f.key))
      fail(pass, std::string("missing required param '") + f.key + "'");
  for (const auto &[key, val] : params.items()) {
    const ParamField *field = nullptr;
    for (const auto &f : schema)
      if (key == f.key) field = &f;
    if (!field) fail(pass, "unknown param '" + key + "'");
    bool ok = false;
    switch (field->type) {
      case PT::Str: ok = val.is_string(); break;
      case PT::Int: ok = val.is_number_integer(); break;
      case PT::Bool: ok = val.is_boolean(); break;
      case PT::Arr: ok = val.is_array(); break;
    }
    if (!ok) fail(pass, "param '" + key + "' has the wrong type");
  }
}

// ── equeue_read_write ───────────────────────────────────────────────────────

// Abstract load/store become the event-queue read/write ops. A load touches a
// single element, so the converted read pins elems = 1 rather than defaulting
// to the whole buffer.
void passReadWrite(Ctx &c, const json &) {
  forEachRegion(c.p.top, [&](Region &r) {
    for (Op &op : r.ops) {
      if (op.opcode == Opcode::Load) {
        if (op.operands.empty() ||
            c.p.values[op.operands[0].id].kind != ValueKind::Buffer)
          c.die("load on a non-buffer value");
        op.opcode = Opcode::Read;
        op.attrs["elems"] = int64_t{1};
      } else if (op.opcode == Opcode::Store) {
        op.opcode = Opcode::Write;
      }
    }
  });
}

// ── allocate_memory ─────────────────────────────────────────────────────────

void passAllocateMemory(Ctx &c, const json &params) {
  std::string glob = params.at("memory").get<std::string>();
  std::vector<ComponentId> mems = matchComponents(c.p, glob);
  if (mems.empty()) c.die("no memory component matches '" + glob + "'");
  for (ComponentId m : mems)
    if (c.p.components[m].kind != ComponentKind::Memory)
      c.die("component '" + pathOf(c.p, m) + "' is not a memory");

  // New allocs go right after the last structural op so every later op can
  // refer to them.
  size_t ins = 0;
  for (size_t i = 0; i < c.p.top.ops.size(); ++i) {
    switch (c.p.top.ops[i].opcode) {
      case Opcode::CreateProc:
      case Opcode::CreateMem:
      case Opcode::CreateDma:
      case Opcode::CreateComp:
      case Opcode::AddComp:
      case Opcode::CreateConnection:
      case Opcode::Alloc:
        ins = i + 1;
        break;
      default:
        break;
    }
  }

  std::vector<Op> adds;
  for (ComponentId m : mems) {
    for (const json &spec : params.at("buffers")) {
      if (!spec.is_object()) c.die("each buffer spec must be an object");
      for (const auto &[k, v] : spec.items())
        if (k != "label" && k != "elems" && k != "like" && k != "elem_bits" && k != "stream")
          c.die("unknown buffer spec key '" + k + "'");
      uint64_t elems = 0;
      uint32_t bits = 32;
      bool stream = false;
      if (spec.contains("like")) {
        Value like = c.allocByLabel(spec.at("like").get<std::string>());
        const BufferDecl &bd = c.p.buffers[c.p.values[like.id].sym];
        elems = bd.size_elems;
        bits = bd.elem_bits;
        stream = bd.stream;
      }
      if (spec.contains("elems")) elems = spec.at("elems").get<uint64_t>();
      if (spec.contains("elem_bits")) bits = spec.at("elem_bits").get<uint32_t>();
      if (spec.contains("stream")) stream = spec.at("stream").get<bool>();
      if (elems == 0) c.die("buffer spec needs 'elems' or 'like'");

      BufferDecl d;
      d.id = static_cast<ir::BufferId>(c.p.buffers.size());
      d.memory = m;
      d.size_elems = elems;
      d.elem_bits = bits;
      d.stream = stream;
      c.p.buffers.push_back(d);
      Value v = c.p.newValue(ValueKind::Buffer);
      c.p.values[v.id].sym = d.id;
      c.p.values[v.id].elems = elems;
      c.p.values[v.id].elem_bits = bits;
      Op op;
      op.opcode = Opcode::Alloc;
      op.results = {v};
      op.operands = {c.componentValue(m)};
      op.attrs["elems"] = static_cast<int64_t>(elems);
      op.attrs["elem_bits"] = static_cast<int64_t>(bits);
      if (stream) op.attrs["stream"] = int64_t{1};
      if (spec.contains("label")) op.attrs["label"] = spec.at("label").get<std::string>();
      adds.push_back(std::move(op));
    }
  }
  c.p.top.ops.insert(c.p.top.ops.begin() + static_cast<long>(ins),
                     std::make_move_iterator(adds.begin()),
                     std::make_move_iterator(adds.end()));
}

// ── launch ──────────────────────────────────────────────────────────────────

// Wraps the top-level op range [from..to] into a launch on the given
// processor, fenced by a fresh control_start and an await so program order is
// preserved. Values crossing out of the range become launch results.
void passLaunch(Ctx &c, const json &params) {
  std::string from = params.at("from").get<std::string>();
  std::string to = params.at("to").get<std::string>();
  ComponentId proc = c.resolvePath(params.at("proc").get<std::string>());
  if (c.p.components[proc].kind != ComponentKind::Processor &&
      c.p.components[proc].kind != ComponentKind::Dma)
    c.die("launch target '" + pathOf(c.p, proc) + "' is not a processor");
  Value procV = c.componentValue(proc);

  auto topIndex = [&](const std::string &label) -> size_t {
    size_t found = c.p.top.ops.size();
    for (size_t i = 0; i < c.p.top.ops.size(); ++i)
      if (c.p.top.ops[i].strAttr("label") == label) {
        if (found != c.p.top.ops.size()) c.die("label '" + label + "' is ambiguous");
        found = i;
      }
    if (found == c.p.top.ops.size()) c.die("no top-level op labeled '" + label + "'");
    return found;
  };
  size_t i_from = topIndex(from), i_to = topIndex(to);
  if (i_from > i_to) c.die("'from' op comes after 'to' op");

  std::vector<Op> moved(std::make_move_iterator(c.p.top.ops.begin() + static_cast<long>(i_from)),
                        std::make_move_iterator(c.p.top.ops.begin() + static_cast<long>(i_to) + 1));
  c.p.top.ops.erase(c.p.top.ops.begin() + static_cast<long>(i_from),
                    c.p.top.ops.begin() + static_cast<long>(i_to) + 1);

  std::set<uint32_t> definedIn;
  for (const Op &op : moved)
    for (Value r : op.results) definedIn.insert(r.id);

  // Values defined in the range and still used afterwards become results.
  std::vector<Value> crossing;
  {
    std::vector<Op> rest(c.p.top.ops.begin() + static_cast<long>(i_from), c.p.top.ops.end());
    std::set<uint32_t> seen;
    std::vector<Value> uses;
    std::set<uint32_t> defs;
    collectFree(rest, defs, uses, seen);
    for (const Op &op : moved)
      for (Value r : op.results)
        if (seen.count(r.id)) {
          if (c.p.values[r.id].kind != ValueKind::Data)
            c.die("non-data value escapes the launched range");
          crossing.push_back(r);
        }
  }

  std::vector<Value> caps = freeValues(moved);
  std::map<uint32_t, Value> remap;
  Op launch;
  launch.opcode = Opcode::Launch;
  launch.region = std::make_unique<Region>();
  Value csV;
  Op cs = makeControlStart(c, &csV);
  launch.operands = {csV, procV};
  for (Value cap : caps) {
    launch.operands.push_back(cap);
    Value arg = c.cloneValue(cap);
    launch.region->args.push_back(arg);
    remap[cap.id] = arg;
  }
  Value done = c.p.newValue(ValueKind::Event);
  launch.results = {done};
  std::map<uint32_t, Value> outerRemap;
  for (Value x : crossing) {
    Value res = c.cloneValue(x);
    launch.results.push_back(res);
    outerRemap[x.id] = res;
  }
  rewriteUses(moved, remap);
  launch.region->ops = std::move(moved);
  Op ret;
  ret.opcode = Opcode::Return;
  ret.operands = crossing;
  launch.region->ops.push_back(std::move(ret));
  if (params.contains("label")) launch.attrs["label"] = params.at("label").get<std::string>();

  std::vector<Op> repl;
  repl.push_back(std::move(cs));
  repl.push_back(std::move(launch));
  repl.push_back(makeAwait(done));
  c.p.top.ops.insert(c.p.top.ops.begin() + static_cast<long>(i_from),
                     std::make_move_iterator(repl.begin()), std::make_move_iterator(repl.end()));
  if (!outerRemap.empty()) {
    std::vector<Op> tail(std::make_move_iterator(c.p.top.ops.begin() + static_cast<long>(i_from) + 3),
                         std::make_move_iterator(c.p.top.ops.end()));
    rewriteUses(tail, outerRemap);
    c.p.top.ops.erase(c.p.top.ops.begin() + static_cast<long>(i_from) + 3, c.p.top.ops.end());
    for (Op &op : tail) c.p.top.ops.push_back(std::move(op));
  }
}

// ── memcpy ──────────────────────────────────────────────────────────────────

// Inserts control_start + memcpy + await in front of every op carrying the
// `before` label.
void passMemcpy(Ctx &c, const json &params) {
  Value src = c.allocByLabel(params.at("src").get<std::string>());
  Value dst = c.allocByLabel(params.at("dst").get<std::string>());
  const BufferDecl &sb = c.p.buffers[c.p.values[src.id].sym];
  const BufferDecl &db = c.p.buffers[c.p.values[dst.id].sym];
  if (sb.size_elems != db.size_elems)
    c.die("source and destination buffer element counts differ");
  ComponentId dma = c.resolvePath(params.at("dma").get<std::string>());
  if (c.p.components[dma].kind != ComponentKind::Dma)
    c.die("component '" + pathOf(c.p, dma) + "' is not a dma engine");
  Value dmaV = c.componentValue(dma);
  std::string before = params.at("before").get<std::string>();
  std::string label = params.contains("label") ? params.at("label").get<std::string>() : "";

  size_t sites = 0;
  forEachRegion(c.p.top, [&](Region &r) {
    std::vector<Op> out;
    for (Op &op : r.ops) {
      if (op.strAttr("label") == before) {
        ++sites;
        Value csV;
        out.push_back(makeControlStart(c, &csV));
        Op m;
        m.opcode = Opcode::Memcpy;
        m.operands = {csV, src, dst, dmaV};
        Value ev = c.p.newValue(ValueKind::Event);
        m.results = {ev};
        if (!label.empty()) m.attrs["label"] = label;
        out.push_back(std::move(m));
        out.push_back(makeAwait(ev));
      }
      out.push_back(std::move(op));
    }
    r.ops = std::move(out);
  });
  if (sites == 0) c.die("no op labeled '" + before + "'");
}

// ── memcpy_to_launch ────────────────────────────────────────────────────────

// The sugar made explicit: a launch on the DMA engine whose body reads the
// source and writes the destination. The done event value is reused, so
// downstream dependencies are untouched; with the read-then-write DMA cost
// model the replacement is cycle-exact.
void passMemcpyToLaunch(Ctx &c, const json &params) {
  std::string target = params.at("target").get<std::string>();
  size_t count = 0;
  forEachRegion(c.p.top, [&](Region &r) {
    for (Op &op : r.ops) {
      if (op.opcode != Opcode::Memcpy || op.strAttr("label") != target) continue;
      ++count;
      Value dep = op.operands[0], src = op.operands[1], dst = op.operands[2],
            dma = op.operands[3];
      auto region = std::make_unique<Region>();
      Value aSrc = c.cloneValue(src), aDst = c.cloneValue(dst);
      region->args = {aSrc, aDst};
      Op rd;
      rd.opcode = Opcode::Read;
      rd.operands = {aSrc};
      Value d = c.p.newValue(ValueKind::Data);
      c.p.values[d.id].elems = c.p.values[src.id].elems;
      c.p.values[d.id].elem_bits = c.p.values[src.id].elem_bits;
      rd.results = {d};
      region->ops.push_back(std::move(rd));
      Op wr;
      wr.opcode = Opcode::Write;
      wr.operands = {d, aDst};
      region->ops.push_back(std::move(wr));
      Op ret;
      ret.opcode = Opcode::Return;
      region->ops.push_back(std::move(ret));
      op.opcode = Opcode::Launch;
      op.operands = {dep, dma, src, dst};
      op.region = std::move(region);
    }
  });
  if (count == 0) c.die("no memcpy labeled '" + target + "'");
}

// ── merge_memcpy_launch ─────────────────────────────────────────────────────

void passMergeMemcpyLaunch(Ctx &c, const json &params) {
  Ctx::OpRef mref = c.uniqueOpByLabel(params.at("memcpy").get<std::string>());
  Ctx::OpRef lref = c.uniqueOpByLabel(params.at("launch").get<std::string>());
  if (mref.op()->opcode != Opcode::Memcpy) c.die("'memcpy' param does not name a memcpy op");
  if (lref.op()->opcode != Opcode::Launch) c.die("'launch' param does not name a launch op");
  if (mref.region != lref.region) c.die("memcpy and launch live in different regions");

  Op &m = *mref.op();
  Value mDep = m.operands[0], src = m.operands[1], dst = m.operands[2];
  Value mEv = m.results[0];
  Op &l = *lref.op();

  // Reuse an existing capture of the same buffer; add one otherwise.
  auto argFor = [&](Value buf) -> Value {
    for (size_t i = 2; i < l.operands.size(); ++i)
      if (l.operands[i] == buf) return l.region->args[i - 2];
    l.operands.push_back(buf);
    Value arg = c.cloneValue(buf);
    l.region->args.push_back(arg);
    return arg;
  };
  Value srcArg = argFor(src), dstArg = argFor(dst);

  // If the body already reads the source buffer, reuse that read's data
  // instead of repeating the transfer.
  std::vector<Op> &body = l.region->ops;
  size_t existing = body.size();
  for (size_t i = 0; i < body.size(); ++i)
    if (body[i].opcode == Opcode::Read && body[i].operands[0] == srcArg) {
      existing = i;
      break;
    }
  if (existing < body.size()) {
    Op wr;
    wr.opcode = Opcode::Write;
    wr.operands = {body[existing].results[0], dstArg};
    body.insert(body.begin() + static_cast<long>(existing) + 1, std::move(wr));
  } else {
    Op rd;
    rd.opcode = Opcode::Read;
    rd.operands = {srcArg};
    Value d = c.p.newValue(ValueKind::Data);
    c.p.values[d.id].elems = c.p.values[src.id].elems;
    c.p.values[d.id].elem_bits = c.p.values[src.id].elem_bits;
    rd.results = {d};
    Op wr;
    wr.opcode = Opcode::Write;
    wr.operands = {d, dstArg};
    body.insert(body.begin(), std::move(wr));
    body.insert(body.begin(), std::move(rd));
  }

  if (l.operands[0] == mEv) l.operands[0] = mDep;
  std::map<uint32_t, Value> remap{{mEv.id, l.results[0]}};
  forEachRegion(c.p.top, [&](Region &r) { rewriteUses(r.ops, remap); });
  mref.region->ops.erase(mref.region->ops.begin() + static_cast<long>(mref.index));
}

// ── split_launch ────────────────────────────────────────────────────────────

void splitLaunchOp(Ctx &c, Region &outer, size_t index, size_t at) {
  Op orig = std::move(outer.ops[index]);
  Region &reg = *orig.region;
  size_t n = reg.ops.size();
  if (at == 0 || at >= n) c.die("split point is outside the region body");

  std::vector<Op> part1(std::make_move_iterator(reg.ops.begin()),
                        std::make_move_iterator(reg.ops.begin() + static_cast<long>(at)));
  std::vector<Op> part2(std::make_move_iterator(reg.ops.begin() + static_cast<long>(at)),
                        std::make_move_iterator(reg.ops.end()));

  std::set<uint32_t> defined1;
  for (const Op &op : part1)
    for (Value r : op.results) defined1.insert(r.id);
  std::vector<Value> crossing;
  for (const Op &op : part1)
    for (Value r : op.results)
      if (usesValue(part2, r.id)) {
        if (c.p.values[r.id].kind != ValueKind::Data)
          c.die("a non-data value crosses the split point");
        crossing.push_back(r);
      }

  Value dep = orig.operands[0], proc = orig.operands[1];
  std::vector<Value> origCaps(orig.operands.begin() + 2, orig.operands.end());
  std::vector<Value> &origArgs = reg.args;

  // First half keeps the original region args it still uses.
  Op l1;
  l1.opcode = Opcode::Launch;
  l1.region = std::make_unique<Region>();
  l1.operands = {dep, proc};
  for (size_t i = 0; i < origArgs.size(); ++i)
    if (usesValue(part1, origArgs[i].id)) {
      l1.operands.push_back(origCaps[i]);
      l1.region->args.push_back(origArgs[i]);
    }
  Value done1 = c.p.newValue(ValueKind::Event);
  l1.results = {done1};
  std::vector<Value> crossRes;
  for (Value x : crossing) {
    Value res = c.cloneValue(x);
    l1.results.push_back(res);
    crossRes.push_back(res);
  }
  l1.region->ops = std::move(part1);
  Op ret1;
  ret1.opcode = Opcode::Return;
  ret1.operands = crossing;
  l1.region->ops.push_back(std::move(ret1));
  std::string label = orig.strAttr("label");
  if (!label.empty()) l1.attrs["label"] = label;

  // Second half is chained on the first's done event; crossing values and
  // surviving captures come in as fresh args.
  Op l2;
  l2.opcode = Opcode::Launch;
  l2.region = std::make_unique<Region>();
  l2.operands = {done1, proc};
  l2.results = orig.results;
  std::map<uint32_t, Value> remap;
  for (size_t i = 0; i < origArgs.size(); ++i)
    if (usesValue(part2, origArgs[i].id)) {
      l2.operands.push_back(origCaps[i]);
      Value arg = c.cloneValue(origArgs[i]);
      l2.region->args.push_back(arg);
      remap[origArgs[i].id] = arg;
    }
  for (size_t i = 0; i < crossing.size(); ++i) {
    l2.operands.push_back(crossRes[i]);
    Value arg = c.cloneValue(crossing[i]);
    l2.region->args.push_back(arg);
    remap[crossing[i].id] = arg;
  }
  rewriteUses(part2, remap);
  l2.region->ops = std::move(part2);
  if (!label.empty()) l2.attrs["label"] = label + "_2";

  outer.ops[index] = std::move(l1);
  outer.ops.insert(outer.ops.begin() + static_cast<long>(index) + 1, std::move(l2));
}

void splitParallelOp(Ctx &c, Region &outer, size_t index, size_t at) {
  Op &orig = outer.ops[index];
  Region &reg = *orig.region;
  size_t n = reg.ops.size();
  if (at == 0 || at >= n) c.die("split point is outside the region body");

  std::vector<Op> part2(std::make_move_iterator(reg.ops.begin() + static_cast<long>(at)),
                        std::make_move_iterator(reg.ops.end()));
  reg.ops.erase(reg.ops.begin() + static_cast<long>(at), reg.ops.end());
  for (const Op &op : reg.ops)
    for (Value r : op.results)
      if (usesValue(part2, r.id))
        c.die("a value crosses the parallel split point; stage the hand-off "
              "through a buffer instead");

  Op p2;
  p2.opcode = Opcode::ParallelFor;
  p2.attrs = orig.attrs;
  std::string label = orig.strAttr("label");
  if (!label.empty()) p2.attrs["label"] = label + "_2";
  p2.region = std::make_unique<Region>();
  std::map<uint32_t, Value> remap;
  for (Value a : reg.args) {
    Value na = c.cloneValue(a);
    p2.region->args.push_back(na);
    remap[a.id] = na;
  }
  rewriteUses(part2, remap);
  p2.region->ops = std::move(part2);
  outer.ops.insert(outer.ops.begin() + static_cast<long>(index) + 1, std::move(p2));
}

void passSplitLaunch(Ctx &c, const json &params) {
  std::string target = params.at("target").get<std::string>();
  std::vector<Ctx::OpRef> refs = c.opsByLabel(target);
  if (refs.empty()) c.die("no op labeled '" + target + "'");
  int64_t at = params.at("at").get<int64_t>();
  if (at < 0) c.die("split point must be non-negative");
  // Splitting inserts a sibling op, shifting later indices in the same
  // region; processing in reverse keeps every collected index valid.
  for (auto it = refs.rbegin(); it != refs.rend(); ++it) {
    Op *op = it->op();
    if (op->opcode == Opcode::Launch)
      splitLaunchOp(c, *it->region, it->index, static_cast<size_t>(at));
    else if (op->opcode == Opcode::ParallelFor)
      splitParallelOp(c, *it->region, it->index, static_cast<size_t>(at));
    else
      c.die("target is neither a launch nor a parallel loop");
  }
}

// ── reassign_buffer ─────────────────────────────────────────────────────────

// Two forms. The plain form rewrites every use of one buffer to another of
// identical shape. The scoped form annotates labeled accesses inside a
// parallel body with a PE-relative retarget (child memory, neighbour offset,
// out-of-range rule); parallel_to_equeue resolves the annotations when it
// unrolls, since only then are the iteration coordinates known.
void passReassignBuffer(Ctx &c, const json &params) {
  if (params.contains("from")) {
    Value from = c.allocByLabel(params.at("from").get<std::string>());
    Value to = c.allocByLabel(params.at("to").get<std::string>());
    if (from == to) return;
    const BufferDecl &fb = c.p.buffers[c.p.values[from.id].sym];
    const BufferDecl &tb = c.p.buffers[c.p.values[to.id].sym];
    if (fb.size_elems != tb.size_elems || fb.elem_bits != tb.elem_bits)
      c.die("buffer element shapes differ");
    std::map<uint32_t, Value> remap{{from.id, to}};
    forEachRegion(c.p.top, [&](Region &r) { rewriteUses(r.ops, remap); });
    return;
  }
  std::string target = params.at("target").get<std::string>();
  std::string mem = params.at("pe_mem").get<std::string>();
  int64_t dh = params.contains("dh") ? params.at("dh").get<int64_t>() : 0;
  int64_t dw = params.contains("dw") ? params.at("dw").get<int64_t>() : 0;
  std::string oob = params.contains("oob") ? params.at("oob").get<std::string>() : "error";
  if (oob != "error" && oob != "skip" && oob != "sram")
    c.die("'oob' must be one of error, skip, sram");
  bool keep_col0 = params.contains("keep_col0") && params.at("keep_col0").get<bool>();

  std::vector<Ctx::OpRef> hits = c.opsByLabel(target);
  if (hits.empty()) c.die("no op labeled '" + target + "'");
  for (const Ctx::OpRef &h : hits) {
    Op &op = *h.op();
    if (op.opcode != Opcode::Read && op.opcode != Opcode::Write &&
        op.opcode != Opcode::Load && op.opcode != Opcode::Store)
      c.die("op labeled '" + target + "' is not a memory access");
    op.attrs["rt_mem"] = mem;
    op.attrs["rt_dh"] = dh;
    op.attrs["rt_dw"] = dw;
    op.attrs["rt_oob"] = oob;
    if (keep_col0) op.attrs["rt_col0"] = int64_t{1};
  }
}

// ── parallel_to_equeue ──────────────────────────────────────────────────────

struct ParallelExpander {
  Ctx &c;
  std::string coreName;
  std::map<uint32_t, int64_t> gconsts;

  ParallelExpander(Ctx &ctx, std::string core)
      : c(ctx), coreName(std::move(core)), gconsts(constMap(ctx.p)) {}

  static bool hasNestedParallel(const Region &r) {
    for (const Op &op : r.ops) {
      if (op.opcode == Opcode::ParallelFor) return true;
      if (op.region && hasNestedParallel(*op.region)) return true;
    }
    return false;
  }

  void processRegion(Region &r) {
    std::vector<Op> out;
    for (Op &op : r.ops) {
      if (op.opcode == Opcode::ParallelFor) {
        if (hasNestedParallel(*op.region))
          c.die("nested parallel loops are not supported");
        expand(std::move(op), out);
      } else {
        if (op.region) processRegion(*op.region);
        out.push_back(std::move(op));
      }
    }
    r.ops = std::move(out);
  }

  // The par_for pattern: one control_start gates a launch per iteration, and
  // a control_and over the done events feeds the trailing await.
  void expand(Op P, std::vector<Op> &out) {
    std::vector<int64_t> lo, hi;
    for (int64_t v : std::get<std::vector<int64_t>>(P.attrs.at("lowers"))) lo.push_back(v);
    for (int64_t v : std::get<std::vector<int64_t>>(P.attrs.at("uppers"))) hi.push_back(v);
    for (size_t i = 0; i < lo.size(); ++i)
      if (lo[i] >= hi[i]) return;  // empty space: the loop vanishes
    std::string label = P.strAttr("label");

    // The PE selector: the body's first comp_select names the composite grid
    // that iterations are mapped onto.
    const Op *selector = nullptr;
    for (const Op &b : P.region->ops)
      if (b.opcode == Opcode::CompSelect) {
        selector = &b;
        break;
      }

    Value csV;
    out.push_back(makeControlStart(c, &csV, label.empty() ? "" : label + "_start"));
    std::vector<Value> dones;

    std::vector<int64_t> I = lo;
    while (true) {
      expandIteration(P, I, lo, hi, selector, csV, label, out, dones);
      size_t k = I.size();
      while (k > 0) {
        if (++I[k - 1] < hi[k - 1]) break;
        I[k - 1] = lo[k - 1];
        --k;
      }
      if (k == 0) break;
    }

    Op andOp;
    andOp.opcode = Opcode::ControlAnd;
    andOp.operands = dones;
    Value bv = c.p.newValue(ValueKind::Event);
    andOp.results = {bv};
    if (!label.empty()) andOp.attrs["label"] = label + "_done";
    out.push_back(std::move(andOp));
    out.push_back(makeAwait(bv));
  }

  void expandIteration(const Op &P, const std::vector<int64_t> &I,
                       const std::vector<int64_t> &lo, const std::vector<int64_t> &hi,
                       const Op *selector, Value csV, const std::string &label,
                       std::vector<Op> &out, std::vector<Value> &dones) {
    std::map<uint32_t, int64_t> env = gconsts;
    for (size_t k = 0; k < I.size(); ++k) env[P.region->args[k].id] = I[k];
    std::map<uint32_t, Value> remap;        // old value -> clone (body or hoisted)
    std::map<uint32_t, Value> constInBody;  // folded scalar -> const emitted in body
    std::map<uint32_t, ComponentId> compEnv;
    std::set<uint32_t> dropped;
    Value peSel{};
    ComponentId peCid = kInvalidId;
    std::vector<Op> body;

    auto mapOperand = [&](Value v) -> Value {
      if (dropped.count(v.id)) c.die("a value produced by a skipped access is still used");
      auto r = remap.find(v.id);
      if (r != remap.end()) return r->second;
      auto e = env.find(v.id);
      if (e != env.end() && c.p.values[v.id].kind == ValueKind::Scalar) {
        auto cached = constInBody.find(v.id);
        if (cached != constInBody.end()) return cached->second;
        Value cv;
        body.push_back(makeConst(c, e->second, &cv));
        constInBody[v.id] = cv;
        return cv;
      }
      return v;  // outer value: becomes a capture
    };
    auto scalarOf = [&](Value v, const char *what) -> int64_t {
      auto e = env.find(v.id);
      if (e == env.end()) c.die(std::string(what) + " is not constant after unrolling");
      return e->second;
    };
    auto compOf = [&](Value v, const char *what) -> ComponentId {
      auto ce = compEnv.find(remap.count(v.id) ? remap[v.id].id : v.id);
      if (ce != compEnv.end()) return ce->second;
      ComponentId cid = c.p.values[v.id].sym;
      if (cid == kInvalidId || c.p.values[v.id].kind != ValueKind::Component)
        c.die(std::string(what) + " does not name a statically known component");
      return cid;
    };

    for (const Op &b : P.region->ops) {
      switch (b.opcode) {
        case Opcode::Const:
          env[b.results[0].id] = b.intAttr("value");
          break;
        case Opcode::Add:
        case Opcode::Mul: {
          int64_t x = scalarOf(b.operands[0], "scalar operand");
          int64_t y = scalarOf(b.operands[1], "scalar operand");
          env[b.results[0].id] = b.opcode == Opcode::Add ? x + y : x * y;
          break;
        }
        case Opcode::CompSelect: {
          ComponentId parent = compOf(b.operands[0], "comp_select composite");
          std::string child = b.strAttr("prefix");
          Op sel;
          sel.opcode = Opcode::CompSelect;
          sel.attrs = b.attrs;
          sel.operands.push_back(remap.count(b.operands[0].id) ? remap[b.operands[0].id]
                                                               : b.operands[0]);
          for (size_t i = 1; i < b.operands.size(); ++i) {
            int64_t idx = scalarOf(b.operands[i], "comp_select index");
            child += "_" + std::to_string(idx);
            Value cv;
            out.push_back(makeConst(c, idx, &cv));
            sel.operands.push_back(cv);
          }
          ComponentId cid = c.childOf(parent, child);
          Value res = c.p.newValue(ValueKind::Component);
          sel.results = {res};
          out.push_back(std::move(sel));
          remap[b.results[0].id] = res;
          compEnv[res.id] = cid;
          if (!peSel.valid()) {
            peSel = res;
            peCid = cid;
          }
          break;
        }
        case Opcode::GetComp: {
          ComponentId parent = compOf(b.operands[0], "get_comp composite");
          ComponentId cid = c.childOf(parent, b.strAttr("name"));
          Op gc;
          gc.opcode = Opcode::GetComp;
          gc.attrs = b.attrs;
          gc.operands.push_back(remap.count(b.operands[0].id) ? remap[b.operands[0].id]
                                                              : b.operands[0]);
          Value res = c.p.newValue(ValueKind::Component);
          c.p.values[res.id].sym = cid;
          gc.results = {res};
          out.push_back(std::move(gc));
          remap[b.results[0].id] = res;
          compEnv[res.id] = cid;
          break;
        }
        case Opcode::Return:
          c.die("unexpected return inside a parallel body");
        default: {
          Op nb = b;
          if (nb.region) c.die("structured ops inside parallel bodies are not supported");
          if (nb.hasAttr("rt_mem") && !resolveRetarget(nb, b, I, lo, hi, selector, dropped))
            continue;  // access skipped for this iteration
          for (Value &v : nb.operands) v = mapOperand(v);
          for (Value &r : nb.results) {
            Value nr = c.cloneValue(r);
            remap[r.id] = nr;
            r = nr;
          }
          body.push_back(std::move(nb));
        }
      }
    }

    if (!peSel.valid())
      c.die("parallel body selects no component to launch onto");
    Value procV = peSel;
    if (c.p.components[peCid].kind == ComponentKind::Composite) {
      ComponentId core = c.childOf(peCid, coreName);
      Op gc;
      gc.opcode = Opcode::GetComp;
      gc.operands = {peSel};
      gc.attrs["name"] = coreName;
      Value res = c.p.newValue(ValueKind::Component);
      c.p.values[res.id].sym = core;
      gc.results = {res};
      out.push_back(std::move(gc));
      procV = res;
    }

    // Everything the body still references from outside is captured.
    std::vector<Value> caps = freeValues(body);
    Op launch;
    launch.opcode = Opcode::Launch;
    launch.region = std::make_unique<Region>();
    launch.operands = {csV, procV};
    std::map<uint32_t, Value> argMap;
    for (Value cap : caps) {
      launch.operands.push_back(cap);
      Value arg = c.cloneValue(cap);
      launch.region->args.push_back(arg);
      argMap[cap.id] = arg;
    }
    rewriteUses(body, argMap);
    launch.region->ops = std::move(body);
    Op ret;
    ret.opcode = Opcode::Return;
    launch.region->ops.push_back(std::move(ret));
    Value done = c.p.newValue(ValueKind::Event);
    launch.results = {done};
    if (!label.empty()) {
      std::string suffix;
      for (int64_t v : I) suffix += "_" + std::to_string(v);
      launch.attrs["label"] = label + suffix;
    }
    out.push_back(std::move(launch));
    dones.push_back(done);
  }

  // Applies a scoped-reassign annotation for one iteration. Returns false if
  // the access is skipped; otherwise nb is rewritten in place.
  bool resolveRetarget(Op &nb, const Op &orig, const std::vector<int64_t> &I,
                       const std::vector<int64_t> &lo, const std::vector<int64_t> &hi,
                       const Op *selector, std::set<uint32_t> &dropped) {
    if (I.size() != 2) c.die("retarget annotations need a 2-D parallel loop");
    if (nb.intAttr("conn", 0)) c.die("retargeting a connection access is not supported");
    int64_t h = I[0], w = I[1];
    bool keep = false;
    ComponentId peTarget = kInvalidId;
    if (nb.intAttr("rt_col0", 0) && w == lo[1]) {
      keep = true;
    } else {
      int64_t th = h + nb.intAttr("rt_dh", 0);
      int64_t tw = w + nb.intAttr("rt_dw", 0);
      if (th < lo[0] || th >= hi[0] || tw < lo[1] || tw >= hi[1]) {
        std::string oob = nb.strAttr("rt_oob", "error");
        if (oob == "skip") {
          for (Value r : orig.results) dropped.insert(r.id);
          return false;
        }
        if (oob == "sram") {
          keep = true;
        } else {
          c.die("neighbour offset leaves the iteration space (set 'oob')");
        }
      } else {
        if (!selector) c.die("retarget needs a comp_select in the parallel body");
        ComponentId root = c.p.values[selector->operands[0].id].sym;
        if (root == kInvalidId) c.die("retarget grid composite is not statically known");
        std::string pe = selector->strAttr("prefix") + "_" + std::to_string(th) + "_" +
                         std::to_string(tw);
        ComponentId mem = c.childOf(c.childOf(root, pe), nb.strAttr("rt_mem"));
        if (c.p.components[mem].kind != ComponentKind::Memory)
          c.die("retarget child '" + nb.strAttr("rt_mem") + "' is not a memory");
        peTarget = mem;
      }
    }
    nb.attrs.erase("rt_mem");
    nb.attrs.erase("rt_dh");
    nb.attrs.erase("rt_dw");
    nb.attrs.erase("rt_oob");
    nb.attrs.erase("rt_col0");
    if (keep) return true;
    // Swap the buffer operand for the PE-local one and drop the address: the
    // register holds exactly the one element this access means.
    Value buf = c.uniqueAllocOf(peTarget);
    size_t bufIdx = (nb.opcode == Opcode::Read || nb.opcode == Opcode::Load) ? 0 : 1;
    nb.operands[bufIdx] = buf;
    if (nb.intAttr("addr", 0)) {
      nb.operands.erase(nb.operands.begin() + static_cast<long>(bufIdx) + 1);
      nb.attrs.erase("addr");
    }
    return true;
  }
};

void passParallelToEqueue(Ctx &c, const json &params) {
  std::string core = params.contains("core") ? params.at("core").get<std::string>() : "core";
  ParallelExpander ex(c, core);
  ex.processRegion(c.p.top);
}

// ── lower_extraction ────────────────────────────────────────────────────────

// Indexed component-vector references become concrete child lookups. All
// rewritten ops are structural (zero-cycle), so timing is untouched.
void passLowerExtraction(Ctx &c, const json &) {
  std::map<uint32_t, int64_t> consts = constMap(c.p);
  forEachRegion(c.p.top, [&](Region &r) {
    for (Op &op : r.ops) {
      if (op.opcode != Opcode::CompSelect) continue;
      ComponentId parent = c.p.values[op.operands[0].id].sym;
      if (parent == kInvalidId)
        c.die("component selector on a dynamically computed composite");
      std::string child = op.strAttr("prefix");
      for (size_t i = 1; i < op.operands.size(); ++i) {
        auto it = consts.find(op.operands[i].id);
        if (it == consts.end())
          c.die("non-constant component selector cannot be lowered");
        child += "_" + std::to_string(it->second);
      }
      ComponentId cid = c.childOf(parent, child);
      op.opcode = Opcode::GetComp;
      op.operands.resize(1);
      op.attrs.erase("prefix");
      op.attrs["name"] = child;
      c.p.values[op.results[0].id].sym = cid;
    }
  });
}

// ── Registry and driver ─────────────────────────────────────────────────────

using PassFn = void (*)(Ctx &, const json &);

struct PassDef {
  const char *name;
  PassFn fn;
  std::vector<ParamField> schema;
};

const std::vector<PassDef> &registry() {
  static const std::vector<PassDef> defs = {
      {"equeue_read_write", passReadWrite, {}},
      {"allocate_memory",
       passAllocateMemory,
       {{"memory", PT::Str, true}, {"buffers", PT::Arr, true}}},
      {"launch",
       passLaunch,
       {{"proc", PT::Str, true},
        {"from", PT::Str, true},
        {"to", PT::Str, true},
        {"label", PT::Str, false}}},
      {"memcpy",
       passMemcpy,
       {{"src", PT::Str, true},
        {"dst", PT::Str, true},
        {"dma", PT::Str, true},
        {"before", PT::Str, true},
        {"label", PT::Str, false}}},
      {"memcpy_to_launch", passMemcpyToLaunch, {{"target", PT::Str, true}}},
      {"split_launch",
       passSplitLaunch,
       {{"target", PT::Str, true}, {"at", PT::Int, true}}},
      {"merge_memcpy_launch",
       passMergeMemcpyLaunch,
       {{"memcpy", PT::Str, true}, {"launch", PT::Str, true}}},
      {"reassign_buffer",
       passReassignBuffer,
       {{"from", PT::Str, false},
        {"to", PT::Str, false},
        {"target", PT::Str, false},
        {"pe_mem", PT::Str, false},
        {"dh", PT::Int, false},
        {"dw", PT::Int, false},
        {"oob", PT::Str, false},
        {"keep_col0", PT::Bool, false}}},
      {"parallel_to_equeue", passParallelToEqueue, {{"core", PT::Str, false}}},
      {"lower_extraction", passLowerExtraction, {}},
  };
  return defs;
}

}  // namespace

std::vector<std::string> passNames() {
  std::vector<std::string> names;
  for (const PassDef &d : registry()) names.push_back(d.name);
  return names;
}

ir::Program runPass(const ir::Program &program, const PassSpec &spec) {
  const PassDef *def = nullptr;
  for (const PassDef &d : registry())
    if (spec.name == d.name) def = &d;
  if (!def) throw PassError("unknown pass '" + spec.name + "'");
  json params = spec.params.is_null() ? json::object() : spec.params;
  checkParams(spec.name, params, def->schema);
  if (spec.name == "reassign_buffer") {
    bool plain = params.contains("from") || params.contains("to");
    bool scoped = params.contains("target");
    if (plain == scoped)
      fail(spec.name, "give either from/to or target/pe_mem params");
    if (plain && (!params.contains("from") || !params.contains("to")))
      fail(spec.name, "plain form needs both 'from' and 'to'");
    if (scoped && !params.contains("pe_mem"))
      fail(spec.name, "scoped form needs 'pe_mem'");
  }

  ir::Program out = program;
  Ctx ctx{out, spec.name};
  try {
    def->fn(ctx, params);
  } catch (const PassError &) {
    throw;
  } catch (const std::exception &e) {
    fail(spec.name, e.what());
  }
  std::vector<ir::Diag> diags = ir::verify(out);
  for (const ir::Diag &d : diags)
    if (d.severity == ir::Severity::Error)
      fail(spec.name, "output fails verification: " + d.message);
  return out;
}

ir::Program runPipeline(const ir::Program &program, const Pipeline &pipeline,
                        std::vector<StageDump> *dumps) {
  ir::Program cur = program;
  for (const PassSpec &spec : pipeline) {
    cur = runPass(cur, spec);
    if (dumps) dumps->push_back(StageDump{spec.name, ir::print(cur)});
  }
  return cur;
}

Pipeline parsePipeline(const json &config) {
  const json *list = &config;
  if (config.is_object()) {
    if (!config.contains("passes") || !config.at("passes").is_array())
      throw PassError("pipeline config object needs a 'passes' array");
    list = &config.at("passes");
  } else if (!config.is_array()) {
    throw PassError("pipeline config must be an array or a {passes: [...]} object");
  }
  Pipeline out;
  for (const json &item : *list) {
    if (!item.is_object() || !item.contains("name") || !item.at("name").is_string())
      throw PassError("each pipeline entry needs a string 'name'");
    for (const auto &[k, v] : item.items())
      if (k != "name" && k != "params")
        throw PassError("unknown pipeline entry key '" + k + "'");
    PassSpec spec;
    spec.name = item.at("name").get<std::string>();
    if (item.contains("params")) {
      if (!item.at("params").is_object())
        throw PassError("pipeline entry 'params' must be an object");
      spec.params = item.at("params");
    }
    out.push_back(std::move(spec));
  }
  return out;
}

json pipelineToJson(const Pipeline &pipeline) {
  json out = json::array();
  for (const PassSpec &spec : pipeline)
    out.push_back(json{{"name", spec.name}, {"params", spec.params}});
  return out;
}

Pipeline systolicMappingPipeline() {
  auto spec = [](const char *name, json params) {
    return PassSpec{name, std::move(params)};
  };
  return Pipeline{
      spec("equeue_read_write", json::object()),
      spec("allocate_memory",
           {{"memory", "acc/bcast"},
            {"buffers", json::array({{{"label", "stat_reg"}, {"like", "stat_buf"}}})}}),
      spec("allocate_memory",
           {{"memory", "acc/pe_*_*/acc"},
            {"buffers", json::array({{{"elems", 1}, {"elem_bits", 32}}})}}),
      spec("allocate_memory",
           {{"memory", "acc/pe_*_*/in"},
            {"buffers", json::array({{{"elems", 1}, {"elem_bits", 32}}})}}),
      spec("reassign_buffer", {{"from", "stat_buf"}, {"to", "stat_reg"}}),
      spec("memcpy", {{"src", "stat_buf"},
                      {"dst", "stat_reg"},
                      {"dma", "acc/dma"},
                      {"before", "steps"},
                      {"label", "fill"}}),
      spec("split_launch", {{"target", "grid"}, {"at", 9}}),
      spec("reassign_buffer", {{"target", "in_load"}, {"pe_mem", "in"}, {"keep_col0", true}}),
      spec("reassign_buffer", {{"target", "acc_load"}, {"pe_mem", "acc"}}),
      spec("reassign_buffer", {{"target", "acc_store"}, {"pe_mem", "acc"}}),
      spec("reassign_buffer", {{"target", "fwd_load"}, {"pe_mem", "in"}}),
      spec("reassign_buffer",
           {{"target", "fwd_store"}, {"pe_mem", "in"}, {"dw", 1}, {"oob", "skip"}}),
      spec("reassign_buffer", {{"target", "out_load"}, {"pe_mem", "acc"}}),
      spec("reassign_buffer",
           {{"target", "out_store"}, {"pe_mem", "acc"}, {"dh", 1}, {"oob", "sram"}}),
      spec("parallel_to_equeue", json::object()),
      spec("lower_extraction", json::object()),
  };
}

}  // namespace eq::passes
