#ifndef EQ_IR_IR_HPP
#define EQ_IR_IR_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace eq::ir {

// ── Identifiers ─────────────────────────────────────────────────────────────

using ComponentId = uint32_t;
using ConnectionId = uint32_t;
using BufferId = uint32_t;
inline constexpr uint32_t kInvalidId = ~0u;

// SSA value. Ids are unique within one Program.
struct Value {
  uint32_t id = kInvalidId;
  bool valid() const { return id != kInvalidId; }
  bool operator==(const Value &o) const { return id == o.id; }
};

enum class ValueKind {
  None,
  Component,
  Connection,
  Buffer,
  Event,
  Data,    // symbolic tensor/sample payload: element count x element bits
  Scalar,  // i64, used for loop indices and addressing
};

const char *valueKindName(ValueKind k);

// ── Structure declarations ──────────────────────────────────────────────────

enum class ComponentKind { Processor, Memory, Dma, Composite };

struct ComponentDecl {
  ComponentId id = kInvalidId;
  ComponentKind kind = ComponentKind::Processor;
  std::string model_tag;  // "ARMr5", "SRAM", "Register", ...
  // Memory parameters (kind == Memory only).
  std::vector<uint64_t> shape;
  uint32_t elem_bits = 0;
  uint32_t banks = 0;
  // Composite children, in insertion order (kind == Composite only).
  std::vector<std::pair<std::string, ComponentId>> children;
  ComponentId parent = kInvalidId;

  uint64_t capacityBits() const;
};

enum class ConnectionKind { Streaming, Window };

struct ConnectionDecl {
  ConnectionId id = kInvalidId;
  ConnectionKind kind = ConnectionKind::Streaming;
  std::optional<uint64_t> bandwidth;  // bytes/cycle; absent = unlimited
};

// Static record for a buffer created by an `alloc` op. Liveness is tracked by
// the verifier for top-level allocs and by the engine at run time.
struct BufferDecl {
  BufferId id = kInvalidId;
  ComponentId memory = kInvalidId;
  uint64_t size_elems = 0;
  uint32_t elem_bits = 0;
  bool stream = false;  // FIFO mailbox: reads wait for deposited bytes
};

// ── Operations ──────────────────────────────────────────────────────────────

enum class Opcode {
  CreateProc,
  CreateMem,
  CreateDma,
  CreateComp,
  AddComp,
  GetComp,
  CompSelect,  // dynamic child lookup: (composite, index...) -> component
  CreateConnection,
  Alloc,
  Dealloc,
  GetBuf,  // unique live buffer of a memory component -> buffer
  Read,
  Write,
  Load,   // abstract memory access, lowered by the read/write pass
  Store,
  Launch,
  Memcpy,
  ControlStart,
  ControlAnd,
  ControlOr,
  Await,
  Return,
  ExternOp,
  Const,
  Add,
  Mul,
  For,
  ParallelFor,
};

const char *opcodeName(Opcode op);
std::optional<Opcode> opcodeFromName(const std::string &name);

using AttrValue = std::variant<int64_t, std::string, std::vector<int64_t>>;
using Attrs = std::map<std::string, AttrValue>;

struct SourceSpan {
  std::string file;
  uint32_t line = 1;
  uint32_t column = 1;
};

struct Region;

struct Op {
  Opcode opcode = Opcode::ControlStart;
  std::vector<Value> operands;
  std::vector<Value> results;
  Attrs attrs;
  std::unique_ptr<Region> region;  // Launch, For, ParallelFor
  SourceSpan span;

  Op() = default;
  Op(const Op &other);
  Op &operator=(const Op &other);
  Op(Op &&) = default;
  Op &operator=(Op &&) = default;

  int64_t intAttr(const std::string &name, int64_t dflt = 0) const;
  std::string strAttr(const std::string &name, const std::string &dflt = "") const;
  bool hasAttr(const std::string &name) const;
};

// Single-block region. Launch regions are isolated: their ops may only use
// region arguments and locally defined values. For/ParallelFor bodies may
// also use values from enclosing scopes.
struct Region {
  std::vector<Value> args;
  std::vector<Op> ops;
};

struct ValueInfo {
  ValueKind kind = ValueKind::None;
  uint32_t sym = kInvalidId;  // decl index for Component/Connection/Buffer values
  // Data payload geometry, where statically known.
  uint64_t elems = 1;
  uint32_t elem_bits = 32;
};

struct Program {
  Region top;
  std::vector<ValueInfo> values;
  std::vector<ComponentDecl> components;
  std::vector<ConnectionDecl> connections;
  std::vector<BufferDecl> buffers;

  const ValueInfo &info(Value v) const { return values[v.id]; }
  Value newValue(ValueKind kind);
  bool isRoot(ComponentId c) const { return components[c].parent == kInvalidId; }
};

// ── Diagnostics ─────────────────────────────────────────────────────────────

enum class Severity { Error, Warning };

struct Diag {
  SourceSpan span;
  std::string message;
  Severity severity = Severity::Error;
};

// Structural verification. Returns an empty list iff the program is clean.
std::vector<Diag> verify(const Program &program);

// ── Builder ─────────────────────────────────────────────────────────────────

// Programmatic construction. Programs built through the builder pass verify()
// by construction; invariant violations throw BuildError.
struct BuildError : std::runtime_error {
  explicit BuildError(const std::string &msg) : std::runtime_error(msg) {}
};

class Builder {
 public:
  Builder();

  Program take();
  Program &program() { return prog_; }

  // Structure.
  Value createProc(const std::string &model_tag);
  Value createMem(std::vector<uint64_t> shape, uint32_t elem_bits, uint32_t banks,
                  const std::string &model_tag);
  Value createDma(const std::string &model_tag = "DMA");
  Value createComp(const std::vector<std::pair<std::string, Value>> &children,
                   const std::string &model_tag = "comp");
  void addComp(Value composite, const std::string &name, Value child);
  Value getComp(Value composite, const std::string &name);
  Value compSelect(Value composite, const std::string &prefix,
                   const std::vector<Value> &indices);
  Value createConnection(ConnectionKind kind,
                         std::optional<uint64_t> bandwidth = std::nullopt);

  // Data movement.
  Value alloc(Value mem, uint64_t size_elems, uint32_t elem_bits, bool stream = false);
  void dealloc(Value buffer);
  Value getBuf(Value mem);
  Value read(Value buffer, Value conn = {}, std::optional<uint64_t> elems = std::nullopt,
             Value addr = {});
  void write(Value data, Value buffer, Value conn = {}, Value addr = {});
  Value load(Value buffer, Value addr = {});
  void store(Value data, Value buffer, Value addr = {});

  // Events and control.
  struct LaunchHandle {
    Value done;
    std::vector<Value> results;  // bound after endLaunch
    std::vector<Value> args;     // region arguments for the body
  };
  // Opens a launch region; captured outer values are rebound as region args.
  LaunchHandle beginLaunch(Value dep, Value proc, const std::vector<Value> &captures,
                           size_t result_count = 0);
  void endLaunch();  // region must have been terminated with ret()
  Value memcpy(Value dep, Value src, Value dst, Value dma);
  Value controlStart();
  Value controlAnd(const std::vector<Value> &deps);
  Value controlOr(const std::vector<Value> &deps);
  void await(Value event);
  void ret(const std::vector<Value> &values = {});

  // Extern operations and scalars.
  std::vector<Value> externOp(const std::string &signature,
                              const std::vector<Value> &operands, size_t result_count = 0,
                              uint64_t result_elems = 1, uint32_t result_bits = 32);
  Value constant(int64_t value);
  Value add(Value a, Value b);
  Value mul(Value a, Value b);

  // Structured loops. Bodies nest; endFor/endParallelFor pops.
  Value beginFor(int64_t lower, int64_t upper);  // returns induction variable
  void endFor();
  std::vector<Value> beginParallelFor(const std::vector<int64_t> &lowers,
                                      const std::vector<int64_t> &uppers);
  void endParallelFor();

  // Attaches metadata to the most recently emitted op: the last op of the
  // current block, or the op whose region is currently open if the block is
  // still empty.
  void setLabel(const std::string &label);
  void setAttr(const std::string &name, AttrValue value);
  void setSpan(const SourceSpan &span);

 private:
  Op &emit(Op op);
  Op &lastOp();
  void attachChild(ComponentId composite, const std::string &name, Value child);
  Region &cur() { return *stack_.back(); }
  ValueKind kindOf(Value v) const;
  void expect(Value v, ValueKind k, const char *what) const;

  Program prog_;
  std::vector<Region *> stack_;
  std::vector<Op *> open_ops_;  // launch/for ops whose region is being built
};

// Deep structural equality ignoring value numbering and spans. Used by the
// round-trip tests.
bool structurallyEqual(const Program &a, const Program &b);

}  // namespace eq::ir

#endif  // EQ_IR_IR_HPP
