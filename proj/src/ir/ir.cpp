#include "ir/ir.hpp"

#include <algorithm>
#include <cassert>
#include <unordered_map>
#include <unordered_set>

namespace eq::ir {

uint64_t ComponentDecl::capacityBits() const {
  uint64_t elems = 1;
  for (uint64_t d : shape) elems *= d;
  return elems * elem_bits;
}

const char *valueKindName(ValueKind k) {
  switch (k) {
    case ValueKind::None: return "none";
    case ValueKind::Component: return "component";
    case ValueKind::Connection: return "connection";
    case ValueKind::Buffer: return "buffer";
    case ValueKind::Event: return "event";
    case ValueKind::Data: return "data";
    case ValueKind::Scalar: return "scalar";
  }
  return "?";
}

namespace {
struct OpcodeNameEntry {
  Opcode op;
  const char *name;
};
constexpr OpcodeNameEntry kOpcodeNames[] = {
    {Opcode::CreateProc, "create_proc"},
    {Opcode::CreateMem, "create_mem"},
    {Opcode::CreateDma, "create_dma"},
    {Opcode::CreateComp, "create_comp"},
    {Opcode::AddComp, "add_comp"},
    {Opcode::GetComp, "get_comp"},
    {Opcode::CompSelect, "comp_select"},
    {Opcode::CreateConnection, "create_connection"},
    {Opcode::Alloc, "alloc"},
    {Opcode::Dealloc, "dealloc"},
    {Opcode::GetBuf, "get_buf"},
    {Opcode::Read, "read"},
    {Opcode::Write, "write"},
    {Opcode::Load, "load"},
    {Opcode::Store, "store"},
    {Opcode::Launch, "launch"},
    {Opcode::Memcpy, "memcpy"},
    {Opcode::ControlStart, "control_start"},
    {Opcode::ControlAnd, "control_and"},
    {Opcode::ControlOr, "control_or"},
    {Opcode::Await, "await"},
    {Opcode::Return, "return"},
    {Opcode::ExternOp, "op"},
    {Opcode::Const, "const"},
    {Opcode::Add, "add"},
    {Opcode::Mul, "mul"},
    {Opcode::For, "for"},
    {Opcode::ParallelFor, "parallel_for"},
};
}  // namespace

const char *opcodeName(Opcode op) {
  for (const auto &e : kOpcodeNames)
    if (e.op == op) return e.name;
  return "?";
}

std::optional<Opcode> opcodeFromName(const std::string &name) {
  for (const auto &e : kOpcodeNames)
    if (name == e.name) return e.op;
  return std::nullopt;
}

Op::Op(const Op &other)
    : opcode(other.opcode),
      operands(other.operands),
      results(other.results),
      attrs(other.attrs),
      span(other.span) {
  if (other.region) region = std::make_unique<Region>(*other.region);
}

Op &Op::operator=(const Op &other) {
  if (this == &other) return *this;
  opcode = other.opcode;
  operands = other.operands;
  results = other.results;
  attrs = other.attrs;
  span = other.span;
  region = other.region ? std::make_unique<Region>(*other.region) : nullptr;
  return *this;
}

int64_t Op::intAttr(const std::string &name, int64_t dflt) const {
  auto it = attrs.find(name);
  if (it == attrs.end()) return dflt;
  if (const auto *v = std::get_if<int64_t>(&it->second)) return *v;
  return dflt;
}

std::string Op::strAttr(const std::string &name, const std::string &dflt) const {
  auto it = attrs.find(name);
  if (it == attrs.end()) return dflt;
  if (const auto *v = std::get_if<std::string>(&it->second)) return *v;
  return dflt;
}

bool Op::hasAttr(const std::string &name) const { return attrs.count(name) != 0; }

Value Program::newValue(ValueKind kind) {
  Value v{static_cast<uint32_t>(values.size())};
  values.push_back(ValueInfo{kind, kInvalidId, 1, 32});
  return v;
}

// ── Builder ─────────────────────────────────────────────────────────────────

Builder::Builder() { stack_.push_back(&prog_.top); }

Program Builder::take() {
  if (stack_.size() != 1)
    throw BuildError("unterminated region at end of program construction");
  Program p = std::move(prog_);
  prog_ = Program{};
  stack_.clear();
  stack_.push_back(&prog_.top);
  return p;
}

ValueKind Builder::kindOf(Value v) const {
  if (!v.valid() || v.id >= prog_.values.size()) return ValueKind::None;
  return prog_.values[v.id].kind;
}

void Builder::expect(Value v, ValueKind k, const char *what) const {
  if (kindOf(v) != k)
    throw BuildError(std::string(what) + ": expected " + valueKindName(k) + " value, got " +
                     valueKindName(kindOf(v)));
}

Op &Builder::emit(Op op) {
  cur().ops.push_back(std::move(op));
  return cur().ops.back();
}

Value Builder::createProc(const std::string &model_tag) {
  ComponentDecl d;
  d.id = static_cast<ComponentId>(prog_.components.size());
  d.kind = ComponentKind::Processor;
  d.model_tag = model_tag;
  prog_.components.push_back(d);
  Value v = prog_.newValue(ValueKind::Component);
  prog_.values[v.id].sym = d.id;
  Op op;
  op.opcode = Opcode::CreateProc;
  op.results = {v};
  op.attrs["tag"] = model_tag;
  emit(std::move(op));
  return v;
}

Value Builder::createMem(std::vector<uint64_t> shape, uint32_t elem_bits, uint32_t banks,
                         const std::string &model_tag) {
  if (banks < 1) throw BuildError("create_mem: banks must be >= 1");
  if (elem_bits < 1) throw BuildError("create_mem: elem_bits must be >= 1");
  if (shape.empty()) throw BuildError("create_mem: shape must be non-empty");
  for (uint64_t d : shape)
    if (d < 1) throw BuildError("create_mem: shape entries must be >= 1");
  ComponentDecl d;
  d.id = static_cast<ComponentId>(prog_.components.size());
  d.kind = ComponentKind::Memory;
  d.model_tag = model_tag;
  d.shape = std::move(shape);
  d.elem_bits = elem_bits;
  d.banks = banks;
  prog_.components.push_back(d);
  Value v = prog_.newValue(ValueKind::Component);
  prog_.values[v.id].sym = d.id;
  Op op;
  op.opcode = Opcode::CreateMem;
  op.results = {v};
  op.attrs["tag"] = model_tag;
  op.attrs["shape"] = std::vector<int64_t>(prog_.components.back().shape.begin(),
                                           prog_.components.back().shape.end());
  op.attrs["elem_bits"] = static_cast<int64_t>(elem_bits);
  op.attrs["banks"] = static_cast<int64_t>(banks);
  emit(std::move(op));
  return v;
}

Value Builder::createDma(const std::string &model_tag) {
  ComponentDecl d;
  d.id = static_cast<ComponentId>(prog_.components.size());
  d.kind = ComponentKind::Dma;
  d.model_tag = model_tag;
  prog_.components.push_back(d);
  Value v = prog_.newValue(ValueKind::Component);
  prog_.values[v.id].sym = d.id;
  Op op;
  op.opcode = Opcode::CreateDma;
  op.results = {v};
  op.attrs["tag"] = model_tag;
  emit(std::move(op));
  return v;
}

Value Builder::createComp(const std::vector<std::pair<std::string, Value>> &children,
                          const std::string &model_tag) {
  ComponentDecl d;
  d.id = static_cast<ComponentId>(prog_.components.size());
  d.kind = ComponentKind::Composite;
  d.model_tag = model_tag;
  prog_.components.push_back(d);
  Value v = prog_.newValue(ValueKind::Component);
  prog_.values[v.id].sym = d.id;
  Op op;
  op.opcode = Opcode::CreateComp;
  op.results = {v};
  op.attrs["tag"] = model_tag;
  std::string names;
  for (const auto &[name, child] : children) {
    op.operands.push_back(child);
    if (!names.empty()) names += " ";
    names += name;
  }
  op.attrs["names"] = names;
  emit(std::move(op));
  for (const auto &[name, child] : children) attachChild(d.id, name, child);
  return v;
}

void Builder::attachChild(ComponentId composite, const std::string &name, Value child) {
  expect(child, ValueKind::Component, "compose child");
  ComponentId cid = prog_.values[child.id].sym;
  ComponentDecl &parent = prog_.components[composite];
  if (prog_.components[cid].parent != kInvalidId)
    throw BuildError("compose: component already has a parent (forest invariant)");
  for (const auto &[n, c] : parent.children)
    if (n == name) throw BuildError("compose: duplicate child name '" + name + "'");
  prog_.components[cid].parent = composite;
  parent.children.emplace_back(name, cid);
}

void Builder::addComp(Value composite, const std::string &name, Value child) {
  expect(composite, ValueKind::Component, "add_comp");
  ComponentId pid = prog_.values[composite.id].sym;
  if (prog_.components[pid].kind != ComponentKind::Composite)
    throw BuildError("add_comp: parent is not a composite");
  Op op;
  op.opcode = Opcode::AddComp;
  op.operands = {composite, child};
  op.attrs["name"] = name;
  emit(std::move(op));
  attachChild(pid, name, child);
}

Value Builder::getComp(Value composite, const std::string &name) {
  expect(composite, ValueKind::Component, "get_comp");
  ComponentId pid = prog_.values[composite.id].sym;
  const ComponentDecl &parent = prog_.components[pid];
  if (parent.kind != ComponentKind::Composite)
    throw BuildError("get_comp: parent is not a composite");
  ComponentId found = kInvalidId;
  for (const auto &[n, c] : parent.children)
    if (n == name) found = c;
  if (found == kInvalidId)
    throw BuildError("get_comp: no child named '" + name + "' in composite");
  Value v = prog_.newValue(ValueKind::Component);
  prog_.values[v.id].sym = found;
  Op op;
  op.opcode = Opcode::GetComp;
  op.results = {v};
  op.operands = {composite};
  op.attrs["name"] = name;
  emit(std::move(op));
  return v;
}

Value Builder::compSelect(Value composite, const std::string &prefix,
                          const std::vector<Value> &indices) {
  expect(composite, ValueKind::Component, "comp_select");
  for (Value i : indices) expect(i, ValueKind::Scalar, "comp_select index");
  Value v = prog_.newValue(ValueKind::Component);  // sym resolved at run time
  Op op;
  op.opcode = Opcode::CompSelect;
  op.results = {v};
  op.operands.push_back(composite);
  for (Value i : indices) op.operands.push_back(i);
  op.attrs["prefix"] = prefix;
  emit(std::move(op));
  return v;
}

Value Builder::createConnection(ConnectionKind kind, std::optional<uint64_t> bandwidth) {
  if (bandwidth && *bandwidth < 1)
    throw BuildError("create_connection: bandwidth must be >= 1 byte/cycle");
  ConnectionDecl d;
  d.id = static_cast<ConnectionId>(prog_.connections.size());
  d.kind = kind;
  d.bandwidth = bandwidth;
  prog_.connections.push_back(d);
  Value v = prog_.newValue(ValueKind::Connection);
  prog_.values[v.id].sym = d.id;
  Op op;
  op.opcode = Opcode::CreateConnection;
  op.results = {v};
  op.attrs["kind"] = std::string(kind == ConnectionKind::Streaming ? "Streaming" : "Window");
  if (bandwidth) op.attrs["bandwidth"] = static_cast<int64_t>(*bandwidth);
  emit(std::move(op));
  return v;
}

Value Builder::alloc(Value mem, uint64_t size_elems, uint32_t elem_bits, bool stream) {
  expect(mem, ValueKind::Component, "alloc");
  if (size_elems < 1 || elem_bits < 1) throw BuildError("alloc: size must be positive");
  BufferDecl d;
  d.id = static_cast<BufferId>(prog_.buffers.size());
  d.memory = prog_.values[mem.id].sym;
  d.size_elems = size_elems;
  d.elem_bits = elem_bits;
  d.stream = stream;
  prog_.buffers.push_back(d);
  Value v = prog_.newValue(ValueKind::Buffer);
  prog_.values[v.id].sym = d.id;
  prog_.values[v.id].elems = size_elems;
  prog_.values[v.id].elem_bits = elem_bits;
  Op op;
  op.opcode = Opcode::Alloc;
  op.results = {v};
  op.operands = {mem};
  op.attrs["elems"] = static_cast<int64_t>(size_elems);
  op.attrs["elem_bits"] = static_cast<int64_t>(elem_bits);
  if (stream) op.attrs["stream"] = int64_t{1};
  emit(std::move(op));
  return v;
}

void Builder::dealloc(Value buffer) {
  expect(buffer, ValueKind::Buffer, "dealloc");
  Op op;
  op.opcode = Opcode::Dealloc;
  op.operands = {buffer};
  emit(std::move(op));
}

Value Builder::getBuf(Value mem) {
  expect(mem, ValueKind::Component, "get_buf");
  Value v = prog_.newValue(ValueKind::Buffer);  // sym resolved at run time
  Op op;
  op.opcode = Opcode::GetBuf;
  op.results = {v};
  op.operands = {mem};
  emit(std::move(op));
  return v;
}

Value Builder::read(Value buffer, Value conn, std::optional<uint64_t> elems, Value addr) {
  expect(buffer, ValueKind::Buffer, "read");
  Value v = prog_.newValue(ValueKind::Data);
  const ValueInfo &bi = prog_.values[buffer.id];
  prog_.values[v.id].elems = elems.value_or(bi.elems);
  prog_.values[v.id].elem_bits = bi.elem_bits;
  Op op;
  op.opcode = Opcode::Read;
  op.results = {v};
  op.operands = {buffer};
  if (addr.valid()) {
    expect(addr, ValueKind::Scalar, "read addr");
    op.operands.push_back(addr);
    op.attrs["addr"] = int64_t{1};
  }
  if (conn.valid()) {
    expect(conn, ValueKind::Connection, "read conn");
    op.operands.push_back(conn);
    op.attrs["conn"] = int64_t{1};
  }
  if (elems) op.attrs["elems"] = static_cast<int64_t>(*elems);
  emit(std::move(op));
  return v;
}

void Builder::write(Value data, Value buffer, Value conn, Value addr) {
  expect(data, ValueKind::Data, "write");
  expect(buffer, ValueKind::Buffer, "write");
  Op op;
  op.opcode = Opcode::Write;
  op.operands = {data, buffer};
  if (addr.valid()) {
    expect(addr, ValueKind::Scalar, "write addr");
    op.operands.push_back(addr);
    op.attrs["addr"] = int64_t{1};
  }
  if (conn.valid()) {
    expect(conn, ValueKind::Connection, "write conn");
    op.operands.push_back(conn);
    op.attrs["conn"] = int64_t{1};
  }
  emit(std::move(op));
}

Value Builder::load(Value buffer, Value addr) {
  expect(buffer, ValueKind::Buffer, "load");
  Value v = prog_.newValue(ValueKind::Data);
  prog_.values[v.id].elems = 1;
  prog_.values[v.id].elem_bits = prog_.values[buffer.id].elem_bits;
  Op op;
  op.opcode = Opcode::Load;
  op.results = {v};
  op.operands = {buffer};
  if (addr.valid()) {
    expect(addr, ValueKind::Scalar, "load addr");
    op.operands.push_back(addr);
    op.attrs["addr"] = int64_t{1};
  }
  emit(std::move(op));
  return v;
}

void Builder::store(Value data, Value buffer, Value addr) {
  expect(data, ValueKind::Data, "store");
  expect(buffer, ValueKind::Buffer, "store");
  Op op;
  op.opcode = Opcode::Store;
  op.operands = {data, buffer};
  if (addr.valid()) {
    expect(addr, ValueKind::Scalar, "store addr");
    op.operands.push_back(addr);
    op.attrs["addr"] = int64_t{1};
  }
  emit(std::move(op));
}

Builder::LaunchHandle Builder::beginLaunch(Value dep, Value proc,
                                           const std::vector<Value> &captures,
                                           size_t result_count) {
  expect(dep, ValueKind::Event, "launch dep");
  expect(proc, ValueKind::Component, "launch proc");
  Op op;
  op.opcode = Opcode::Launch;
  op.operands = {dep, proc};
  op.region = std::make_unique<Region>();
  LaunchHandle h;
  h.done = prog_.newValue(ValueKind::Event);
  op.results.push_back(h.done);
  for (size_t i = 0; i < result_count; ++i) {
    Value r = prog_.newValue(ValueKind::Data);
    op.results.push_back(r);
    h.results.push_back(r);
  }
  for (Value c : captures) {
    op.operands.push_back(c);
    Value arg = prog_.newValue(kindOf(c));
    prog_.values[arg.id].sym = prog_.values[c.id].sym;
    prog_.values[arg.id].elems = prog_.values[c.id].elems;
    prog_.values[arg.id].elem_bits = prog_.values[c.id].elem_bits;
    op.region->args.push_back(arg);
    h.args.push_back(arg);
  }
  Op &placed = emit(std::move(op));
  stack_.push_back(placed.region.get());
  open_ops_.push_back(&placed);
  return h;
}

void Builder::endLaunch() {
  if (stack_.size() < 2 || open_ops_.empty() || open_ops_.back()->opcode != Opcode::Launch)
    throw BuildError("endLaunch without matching beginLaunch");
  Op *op = open_ops_.back();
  Region &r = *op->region;
  if (r.ops.empty() || r.ops.back().opcode != Opcode::Return)
    throw BuildError("launch region must end with return");
  size_t want = op->results.size() - 1;
  if (r.ops.back().operands.size() != want)
    throw BuildError("launch return value count does not match declared results");
  stack_.pop_back();
  open_ops_.pop_back();
}

Value Builder::memcpy(Value dep, Value src, Value dst, Value dma) {
  expect(dep, ValueKind::Event, "memcpy dep");
  expect(src, ValueKind::Buffer, "memcpy src");
  expect(dst, ValueKind::Buffer, "memcpy dst");
  expect(dma, ValueKind::Component, "memcpy dma");
  Value v = prog_.newValue(ValueKind::Event);
  Op op;
  op.opcode = Opcode::Memcpy;
  op.results = {v};
  op.operands = {dep, src, dst, dma};
  emit(std::move(op));
  return v;
}

Value Builder::controlStart() {
  Value v = prog_.newValue(ValueKind::Event);
  Op op;
  op.opcode = Opcode::ControlStart;
  op.results = {v};
  emit(std::move(op));
  return v;
}

Value Builder::controlAnd(const std::vector<Value> &deps) {
  if (deps.empty()) throw BuildError("control_and: needs at least one dependency");
  for (Value d : deps) expect(d, ValueKind::Event, "control_and dep");
  Value v = prog_.newValue(ValueKind::Event);
  Op op;
  op.opcode = Opcode::ControlAnd;
  op.results = {v};
  op.operands = deps;
  emit(std::move(op));
  return v;
}

Value Builder::controlOr(const std::vector<Value> &deps) {
  if (deps.empty()) throw BuildError("control_or: needs at least one dependency");
  for (Value d : deps) expect(d, ValueKind::Event, "control_or dep");
  Value v = prog_.newValue(ValueKind::Event);
  Op op;
  op.opcode = Opcode::ControlOr;
  op.results = {v};
  op.operands = deps;
  emit(std::move(op));
  return v;
}

void Builder::await(Value event) {
  expect(event, ValueKind::Event, "await");
  Op op;
  op.opcode = Opcode::Await;
  op.operands = {event};
  emit(std::move(op));
}

void Builder::ret(const std::vector<Value> &values) {
  Op op;
  op.opcode = Opcode::Return;
  op.operands = values;
  emit(std::move(op));
}

std::vector<Value> Builder::externOp(const std::string &signature,
                                     const std::vector<Value> &operands, size_t result_count,
                                     uint64_t result_elems, uint32_t result_bits) {
  Op op;
  op.opcode = Opcode::ExternOp;
  op.operands = operands;
  op.attrs["signature"] = signature;
  if (result_count > 0) {
    op.attrs["elems"] = static_cast<int64_t>(result_elems);
    op.attrs["elem_bits"] = static_cast<int64_t>(result_bits);
  }
  std::vector<Value> results;
  for (size_t i = 0; i < result_count; ++i) {
    Value v = prog_.newValue(ValueKind::Data);
    prog_.values[v.id].elems = result_elems;
    prog_.values[v.id].elem_bits = result_bits;
    op.results.push_back(v);
    results.push_back(v);
  }
  emit(std::move(op));
  return results;
}

Value Builder::constant(int64_t value) {
  Value v = prog_.newValue(ValueKind::Scalar);
  Op op;
  op.opcode = Opcode::Const;
  op.results = {v};
  op.attrs["value"] = value;
  emit(std::move(op));
  return v;
}

Value Builder::add(Value a, Value b) {
  expect(a, ValueKind::Scalar, "add");
  expect(b, ValueKind::Scalar, "add");
  Value v = prog_.newValue(ValueKind::Scalar);
  Op op;
  op.opcode = Opcode::Add;
  op.results = {v};
  op.operands = {a, b};
  emit(std::move(op));
  return v;
}

Value Builder::mul(Value a, Value b) {
  expect(a, ValueKind::Scalar, "mul");
  expect(b, ValueKind::Scalar, "mul");
  Value v = prog_.newValue(ValueKind::Scalar);
  Op op;
  op.opcode = Opcode::Mul;
  op.results = {v};
  op.operands = {a, b};
  emit(std::move(op));
  return v;
}

Value Builder::beginFor(int64_t lower, int64_t upper) {
  Op op;
  op.opcode = Opcode::For;
  op.attrs["lower"] = lower;
  op.attrs["upper"] = upper;
  op.region = std::make_unique<Region>();
  Value iv = prog_.newValue(ValueKind::Scalar);
  op.region->args.push_back(iv);
  Op &placed = emit(std::move(op));
  stack_.push_back(placed.region.get());
  open_ops_.push_back(&placed);
  return iv;
}

void Builder::endFor() {
  if (open_ops_.empty() || open_ops_.back()->opcode != Opcode::For)
    throw BuildError("endFor without matching beginFor");
  stack_.pop_back();
  open_ops_.pop_back();
}

std::vector<Value> Builder::beginParallelFor(const std::vector<int64_t> &lowers,
                                             const std::vector<int64_t> &uppers) {
  if (lowers.size() != uppers.size() || lowers.empty())
    throw BuildError("parallel_for: bound arity mismatch");
  Op op;
  op.opcode = Opcode::ParallelFor;
  op.attrs["lowers"] = lowers;
  op.attrs["uppers"] = uppers;
  op.region = std::make_unique<Region>();
  std::vector<Value> ivs;
  for (size_t i = 0; i < lowers.size(); ++i) {
    Value iv = prog_.newValue(ValueKind::Scalar);
    op.region->args.push_back(iv);
    ivs.push_back(iv);
  }
  Op &placed = emit(std::move(op));
  stack_.push_back(placed.region.get());
  open_ops_.push_back(&placed);
  return ivs;
}

void Builder::endParallelFor() {
  if (open_ops_.empty() || open_ops_.back()->opcode != Opcode::ParallelFor)
    throw BuildError("endParallelFor without matching beginParallelFor");
  stack_.pop_back();
  open_ops_.pop_back();
}

void Builder::setLabel(const std::string &label) { setAttr("label", label); }

Op &Builder::lastOp() {
  if (!cur().ops.empty()) return cur().ops.back();
  if (!open_ops_.empty()) return *open_ops_.back();
  throw BuildError("no op emitted yet");
}

void Builder::setAttr(const std::string &name, AttrValue value) {
  lastOp().attrs[name] = std::move(value);
}

void Builder::setSpan(const SourceSpan &span) { lastOp().span = span; }

// ── Verifier ────────────────────────────────────────────────────────────────

namespace {

class Verifier {
 public:
  explicit Verifier(const Program &p) : prog_(p) {}

  std::vector<Diag> run() {
    checkDecls();
    Scope top;
    walkRegion(prog_.top, top, /*top_level=*/true, /*in_launch=*/false);
    checkTopLevelCapacity();
    return std::move(diags_);
  }

 private:
  struct Scope {
    const Scope *parent = nullptr;
    std::unordered_set<uint32_t> defined;
    bool isolated = false;  // launch regions cannot see enclosing values

    bool known(uint32_t id) const {
      for (const Scope *s = this; s; s = s->isolated ? nullptr : s->parent)
        if (s->defined.count(id)) return true;
      return false;
    }
  };

  void error(const Op &op, const std::string &msg) {
    diags_.push_back(Diag{op.span, msg, Severity::Error});
  }

  void checkDecls() {
    for (const auto &c : prog_.components) {
      if (c.kind == ComponentKind::Memory) {
        if (c.banks < 1)
          diags_.push_back({{}, "memory component has banks = 0", Severity::Error});
        if (c.elem_bits < 1)
          diags_.push_back({{}, "memory component has elem_bits = 0", Severity::Error});
        for (uint64_t d : c.shape)
          if (d < 1)
            diags_.push_back({{}, "memory component has a zero shape entry", Severity::Error});
      }
      if (c.kind == ComponentKind::Composite) {
        std::unordered_set<std::string> names;
        for (const auto &[n, child] : c.children) {
          if (!names.insert(n).second)
            diags_.push_back({{}, "composite has duplicate child name '" + n + "'",
                              Severity::Error});
          if (child >= prog_.components.size() || prog_.components[child].parent != c.id)
            diags_.push_back({{}, "composite child link is inconsistent", Severity::Error});
        }
      }
    }
    // Forest: each component appears as a child at most once.
    std::unordered_map<ComponentId, int> child_count;
    for (const auto &c : prog_.components)
      for (const auto &[n, child] : c.children) child_count[child]++;
    for (const auto &[id, n] : child_count)
      if (n > 1)
        diags_.push_back({{}, "component appears under more than one parent", Severity::Error});
    for (const auto &conn : prog_.connections)
      if (conn.bandwidth && *conn.bandwidth < 1)
        diags_.push_back({{}, "connection bandwidth must be >= 1 byte/cycle", Severity::Error});
    for (const auto &b : prog_.buffers) {
      if (b.size_elems < 1 || b.elem_bits < 1)
        diags_.push_back({{}, "buffer has zero size", Severity::Error});
      if (b.memory >= prog_.components.size() ||
          prog_.components[b.memory].kind != ComponentKind::Memory)
        diags_.push_back({{}, "buffer is not allocated on a memory component", Severity::Error});
    }
  }

  bool checkUse(const Op &op, Value v, const Scope &scope, const char *what) {
    if (!v.valid() || v.id >= prog_.values.size()) {
      error(op, std::string(what) + ": invalid value reference");
      return false;
    }
    if (!scope.known(v.id)) {
      error(op, std::string(what) + ": use of value not defined in scope (use-before-def or "
                                    "escaping a launch region)");
      return false;
    }
    return true;
  }

  bool expectKind(const Op &op, Value v, ValueKind k, const char *what) {
    if (v.id >= prog_.values.size() || prog_.values[v.id].kind != k) {
      error(op, std::string(what) + ": expected a " + std::string(valueKindName(k)) + " value");
      return false;
    }
    return true;
  }

  void walkRegion(const Region &region, Scope &scope, bool top_level, bool in_launch) {
    for (Value a : region.args) scope.defined.insert(a.id);
    for (size_t i = 0; i < region.ops.size(); ++i) {
      const Op &op = region.ops[i];
      // Structure declarations appear only in the top-level block.
      switch (op.opcode) {
        case Opcode::CreateProc:
        case Opcode::CreateMem:
        case Opcode::CreateDma:
        case Opcode::CreateComp:
        case Opcode::AddComp:
        case Opcode::CreateConnection:
          if (!top_level) error(op, "structure declarations must appear at top level");
          break;
        default:
          break;
      }
      for (Value v : op.operands) checkUse(op, v, scope, opcodeName(op.opcode));
      for (Value r : op.results) {
        if (scope.known(r.id)) error(op, "value redefinition (SSA violation)");
        scope.defined.insert(r.id);
      }
      checkOp(op, in_launch);
      if (op.region) {
        if (op.opcode == Opcode::Launch) {
          size_t captures = op.operands.size() - 2;
          if (op.region->args.size() != captures)
            error(op, "launch region arguments do not correspond 1:1 with captured operands");
          if (op.region->ops.empty() || op.region->ops.back().opcode != Opcode::Return)
            error(op, "launch region must terminate with exactly one return");
          else {
            size_t rets = 0;
            for (const Op &b : op.region->ops)
              if (b.opcode == Opcode::Return) rets++;
            if (rets != 1) error(op, "launch region must contain exactly one return");
            if (op.region->ops.back().operands.size() + 1 != op.results.size())
              error(op, "launch return value count does not match declared results");
          }
          Scope inner;
          inner.parent = &scope;
          inner.isolated = true;
          walkRegion(*op.region, inner, false, true);
        } else {
          Scope inner;
          inner.parent = &scope;
          walkRegion(*op.region, inner, false, in_launch);
        }
      }
    }
  }

  void checkOp(const Op &op, bool in_launch) {
    auto operandKind = [&](size_t i) {
      return i < op.operands.size() && op.operands[i].id < prog_.values.size()
                 ? prog_.values[op.operands[i].id].kind
                 : ValueKind::None;
    };
    switch (op.opcode) {
      case Opcode::Launch: {
        if (op.operands.size() < 2) {
          error(op, "launch needs a dependency and a processor");
          break;
        }
        expectKind(op, op.operands[0], ValueKind::Event, "launch dependency");
        if (operandKind(1) == ValueKind::Component) {
          const ValueInfo &vi = prog_.values[op.operands[1].id];
          if (vi.sym != kInvalidId) {
            ComponentKind k = prog_.components[vi.sym].kind;
            if (k != ComponentKind::Processor && k != ComponentKind::Dma)
              error(op, "launch target must be a processor or dma component");
          }
        } else {
          error(op, "launch target must be a component");
        }
        if (!op.region) error(op, "launch requires a region");
        break;
      }
      case Opcode::Memcpy: {
        if (op.operands.size() != 4) {
          error(op, "memcpy takes (dep, src, dst, dma)");
          break;
        }
        expectKind(op, op.operands[0], ValueKind::Event, "memcpy dependency");
        expectKind(op, op.operands[1], ValueKind::Buffer, "memcpy src");
        expectKind(op, op.operands[2], ValueKind::Buffer, "memcpy dst");
        if (operandKind(3) == ValueKind::Component) {
          const ValueInfo &vi = prog_.values[op.operands[3].id];
          if (vi.sym != kInvalidId && prog_.components[vi.sym].kind != ComponentKind::Dma)
            error(op, "memcpy engine must be a dma component");
        } else {
          error(op, "memcpy engine must be a component");
        }
        // Element-count equality where both buffers are statically known.
        const ValueInfo &src = prog_.values[op.operands[1].id];
        const ValueInfo &dst = prog_.values[op.operands[2].id];
        if (src.sym != kInvalidId && dst.sym != kInvalidId &&
            prog_.buffers[src.sym].size_elems != prog_.buffers[dst.sym].size_elems)
          error(op, "memcpy src and dst buffer element counts differ");
        break;
      }
      case Opcode::ControlAnd:
      case Opcode::ControlOr:
        if (op.operands.empty())
          error(op, std::string(opcodeName(op.opcode)) + " needs at least one dependency");
        for (Value v : op.operands) expectKind(op, v, ValueKind::Event, "control dependency");
        break;
      case Opcode::ControlStart:
        if (!op.operands.empty()) error(op, "control_start takes no dependencies");
        break;
      case Opcode::Await:
        if (op.operands.size() != 1 || operandKind(0) != ValueKind::Event)
          error(op, "await takes a single event operand");
        break;
      case Opcode::Read:
      case Opcode::Load:
        if (op.operands.empty() || operandKind(0) != ValueKind::Buffer)
          error(op, std::string(opcodeName(op.opcode)) + " requires a buffer operand");
        break;
      case Opcode::Write:
      case Opcode::Store:
        if (op.operands.size() < 2 || operandKind(0) != ValueKind::Data ||
            operandKind(1) != ValueKind::Buffer)
          error(op, std::string(opcodeName(op.opcode)) + " requires (data, buffer) operands");
        break;
      case Opcode::Return:
        if (!in_launch) error(op, "return outside of a launch region");
        break;
      case Opcode::ExternOp:
        if (op.strAttr("signature").empty()) error(op, "op requires a signature attribute");
        break;
      case Opcode::Add:
      case Opcode::Mul:
        if (op.operands.size() != 2 || operandKind(0) != ValueKind::Scalar ||
            operandKind(1) != ValueKind::Scalar)
          error(op, "scalar arithmetic takes two scalar operands");
        break;
      case Opcode::For:
        if (op.intAttr("upper") < op.intAttr("lower")) error(op, "for: upper < lower");
        break;
      default:
        break;
    }
  }

  // Replays top-level alloc/dealloc ordering against each memory's capacity
  // and flags top-level uses of dead buffers.
  void checkTopLevelCapacity() {
    std::unordered_map<ComponentId, uint64_t> used_bits;
    std::unordered_map<uint32_t, bool> live;  // buffer sym -> live
    for (const Op &op : prog_.top.ops) {
      if (op.opcode == Opcode::Alloc) {
        const ValueInfo &vi = prog_.values[op.results[0].id];
        const BufferDecl &b = prog_.buffers[vi.sym];
        if (b.memory < prog_.components.size()) {
          uint64_t cap = prog_.components[b.memory].capacityBits();
          uint64_t want = b.size_elems * b.elem_bits;
          if (used_bits[b.memory] + want > cap)
            diags_.push_back({op.span,
                              "alloc exceeds memory capacity (" +
                                  std::to_string(used_bits[b.memory] + want) + " > " +
                                  std::to_string(cap) + " bits)",
                              Severity::Error});
          used_bits[b.memory] += want;
          live[vi.sym] = true;
        }
      } else if (op.opcode == Opcode::Dealloc) {
        const ValueInfo &vi = prog_.values[op.operands[0].id];
        if (vi.sym != kInvalidId) {
          if (!live.count(vi.sym) || !live[vi.sym])
            diags_.push_back({op.span, "dealloc of a buffer that is not live", Severity::Error});
          else {
            live[vi.sym] = false;
            const BufferDecl &b = prog_.buffers[vi.sym];
            used_bits[b.memory] -= b.size_elems * b.elem_bits;
          }
        }
      } else if (op.opcode == Opcode::Read || op.opcode == Opcode::Write) {
        size_t buf_idx = op.opcode == Opcode::Read ? 0 : 1;
        if (buf_idx < op.operands.size()) {
          const ValueInfo &vi = prog_.values[op.operands[buf_idx].id];
          if (vi.sym != kInvalidId && live.count(vi.sym) && !live[vi.sym])
            diags_.push_back({op.span, "access to a deallocated buffer", Severity::Error});
        }
      }
    }
  }

  const Program &prog_;
  std::vector<Diag> diags_;
};

}  // namespace

std::vector<Diag> verify(const Program &program) { return Verifier(program).run(); }

// ── Structural equality ─────────────────────────────────────────────────────

namespace {

bool regionsEqual(const Program &pa, const Program &pb, const Region &a, const Region &b,
                  std::unordered_map<uint32_t, uint32_t> &map) {
  if (a.args.size() != b.args.size() || a.ops.size() != b.ops.size()) return false;
  for (size_t i = 0; i < a.args.size(); ++i) map[a.args[i].id] = b.args[i].id;
  for (size_t i = 0; i < a.ops.size(); ++i) {
    const Op &x = a.ops[i];
    const Op &y = b.ops[i];
    if (x.opcode != y.opcode || x.operands.size() != y.operands.size() ||
        x.results.size() != y.results.size() || x.attrs != y.attrs)
      return false;
    for (size_t j = 0; j < x.operands.size(); ++j) {
      auto it = map.find(x.operands[j].id);
      if (it == map.end() || it->second != y.operands[j].id) return false;
    }
    for (size_t j = 0; j < x.results.size(); ++j) map[x.results[j].id] = y.results[j].id;
    if ((x.region == nullptr) != (y.region == nullptr)) return false;
    if (x.region && !regionsEqual(pa, pb, *x.region, *y.region, map)) return false;
  }
  return true;
}

}  // namespace

bool structurallyEqual(const Program &a, const Program &b) {
  if (a.components.size() != b.components.size() ||
      a.connections.size() != b.connections.size() || a.buffers.size() != b.buffers.size())
    return false;
  for (size_t i = 0; i < a.components.size(); ++i) {
    const ComponentDecl &x = a.components[i];
    const ComponentDecl &y = b.components[i];
    if (x.kind != y.kind || x.model_tag != y.model_tag || x.shape != y.shape ||
        x.elem_bits != y.elem_bits || x.banks != y.banks || x.children != y.children ||
        x.parent != y.parent)
      return false;
  }
  for (size_t i = 0; i < a.connections.size(); ++i) {
    const ConnectionDecl &x = a.connections[i];
    const ConnectionDecl &y = b.connections[i];
    if (x.kind != y.kind || x.bandwidth != y.bandwidth) return false;
  }
  for (size_t i = 0; i < a.buffers.size(); ++i) {
    const BufferDecl &x = a.buffers[i];
    const BufferDecl &y = b.buffers[i];
    if (x.memory != y.memory || x.size_elems != y.size_elems || x.elem_bits != y.elem_bits ||
        x.stream != y.stream)
      return false;
  }
  std::unordered_map<uint32_t, uint32_t> map;
  return regionsEqual(a, b, a.top, b.top, map);
}

}  // namespace eq::ir
