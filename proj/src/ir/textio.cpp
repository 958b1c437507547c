#include "ir/textio.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_map>

namespace eq::ir {

namespace {

// ── Lexer ───────────────────────────────────────────────────────────────────

enum class Tok {
  Ident,    // equeue, in, attribute keys, bare value names
  Percent,  // %name
  Number,
  String,
  LParen,
  RParen,
  LBrace,
  RBrace,
  LBracket,
  RBracket,
  Comma,
  Equal,
  Caret,
  Colon,
  Dot,
  Newline,
  End,
  Bad,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int64_t num = 0;
  uint32_t line = 1;
  uint32_t col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    for (;;) {
      if (pos_ >= src_.size()) return make(Tok::End, "");
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      if (c == '\n') {
        Token t = make(Tok::Newline, "\\n");
        advance();
        return t;
      }
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
        continue;
      }
      break;
    }
    char c = src_[pos_];
    if (c == '%') {
      Token t = make(Tok::Percent, "");
      advance();
      t.text = lexIdentBody();
      if (t.text.empty()) t.kind = Tok::Bad;
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      Token t = make(Tok::Ident, "");
      t.text = lexIdentBody();
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      Token t = make(Tok::Number, "");
      bool neg = c == '-';
      if (neg) advance();
      uint64_t mag = 0;
      bool overflow = false;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        if (mag > (UINT64_MAX - 9) / 10) overflow = true;
        mag = mag * 10 + static_cast<uint64_t>(src_[pos_] - '0');
        t.text += src_[pos_];
        advance();
      }
      if (overflow || mag > static_cast<uint64_t>(INT64_MAX)) {
        t.kind = Tok::Bad;
        t.text = "integer literal out of range";
        return t;
      }
      t.num = neg ? -static_cast<int64_t>(mag) : static_cast<int64_t>(mag);
      return t;
    }
    if (c == '"') {
      Token t = make(Tok::String, "");
      advance();
      while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n') {
        if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) {
          advance();
          char e = src_[pos_];
          t.text += e == 'n' ? '\n' : e == 't' ? '\t' : e;
        } else {
          t.text += src_[pos_];
        }
        advance();
      }
      if (pos_ >= src_.size() || src_[pos_] != '"') {
        t.kind = Tok::Bad;
        t.text = "unterminated string literal";
        return t;
      }
      advance();
      return t;
    }
    Tok k;
    switch (c) {
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      case '{': k = Tok::LBrace; break;
      case '}': k = Tok::RBrace; break;
      case '[': k = Tok::LBracket; break;
      case ']': k = Tok::RBracket; break;
      case ',': k = Tok::Comma; break;
      case '=': k = Tok::Equal; break;
      case '^': k = Tok::Caret; break;
      case ':': k = Tok::Colon; break;
      case '.': k = Tok::Dot; break;
      default: {
        Token t = make(Tok::Bad, std::string("unexpected character '") + c + "'");
        advance();
        return t;
      }
    }
    Token t = make(k, std::string(1, c));
    advance();
    return t;
  }

 private:
  Token make(Tok k, std::string text) {
    Token t;
    t.kind = k;
    t.text = std::move(text);
    t.line = line_;
    t.col = col_;
    return t;
  }

  std::string lexIdentBody() {
    std::string s;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        s += c;
        advance();
      } else {
        break;
      }
    }
    return s;
  }

  void advance() {
    if (src_[pos_] == '\n') {
      line_++;
      col_ = 1;
    } else {
      col_++;
    }
    pos_++;
  }

  std::string_view src_;
  size_t pos_ = 0;
  uint32_t line_ = 1;
  uint32_t col_ = 1;
};

// ── Parser ──────────────────────────────────────────────────────────────────

struct ParseAbort {};  // unwinds to parse() after a fatal diagnostic

class Parser {
 public:
  Parser(std::string_view text, std::string filename)
      : lexer_(text), file_(std::move(filename)) {
    tok_ = lexer_.next();
    scopes_.push_back({});
  }

  ParseResult run() {
    try {
      while (tok_.kind != Tok::End) parseLine();
      if (!open_.empty()) fail(tok_, "unclosed region at end of input");
      Program p = builder_.take();
      auto verify_diags = verify(p);
      for (auto &d : verify_diags) {
        if (d.span.file.empty()) d.span.file = file_;
        diags_.push_back(std::move(d));
      }
      ParseResult r;
      r.diagnostics = std::move(diags_);
      for (const Diag &d : r.diagnostics)
        if (d.severity == Severity::Error) return r;
      r.program = std::move(p);
      return r;
    } catch (const ParseAbort &) {
    } catch (const BuildError &e) {
      diag(tok_, e.what());
    } catch (const std::exception &e) {
      diag(tok_, std::string("internal parse failure: ") + e.what());
    }
    ParseResult r;
    r.diagnostics = std::move(diags_);
    return r;
  }

 private:
  struct Scope {
    std::unordered_map<std::string, Value> names;
    bool isolated = false;
  };
  struct OpenRegion {
    Opcode opcode;
    std::vector<Value> args;  // bound by a ^(...) line
    bool args_bound = false;
    Token at;
  };

  SourceSpan span(const Token &t) const { return SourceSpan{file_, t.line, t.col}; }

  void diag(const Token &t, const std::string &msg) {
    diags_.push_back(Diag{span(t), msg, Severity::Error});
  }

  [[noreturn]] void fail(const Token &t, const std::string &msg) {
    diag(t, msg);
    throw ParseAbort{};
  }

  void bump() { tok_ = lexer_.next(); }

  Token expect(Tok k, const char *what) {
    if (tok_.kind != k) fail(tok_, std::string("expected ") + what);
    Token t = tok_;
    bump();
    return t;
  }

  bool accept(Tok k) {
    if (tok_.kind != k) return false;
    bump();
    return true;
  }

  void skipNewlines() {
    while (tok_.kind == Tok::Newline) bump();
  }

  // Value-name handling. Lookup respects launch isolation.
  Value lookup(const Token &t) {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto f = it->names.find(t.text);
      if (f != it->names.end()) return f->second;
      if (it->isolated) break;
    }
    fail(t, "unknown value '%" + t.text + "'");
  }

  void define(const Token &t, Value v) {
    auto &names = scopes_.back().names;
    if (names.count(t.text)) fail(t, "redefinition of value '%" + t.text + "'");
    names[t.text] = v;
  }

  bool atValueToken() const {
    return tok_.kind == Tok::Percent ||
           (tok_.kind == Tok::Ident && tok_.text != "equeue" && tok_.text != "in" &&
            tok_.text != "inf");
  }

  Token valueToken() {
    if (!atValueToken()) fail(tok_, "expected a value name");
    Token t = tok_;
    bump();
    return t;
  }

  void parseLine() {
    skipNewlines();
    if (tok_.kind == Tok::End) return;
    if (tok_.kind == Tok::Bad) fail(tok_, tok_.text);

    if (tok_.kind == Tok::RBrace) {
      closeRegion();
      return;
    }
    if (tok_.kind == Tok::Caret) {
      parseArgBinding();
      return;
    }

    // Optional result list.
    std::vector<Token> results;
    if (atValueToken()) {
      results.push_back(valueToken());
      while (accept(Tok::Comma)) results.push_back(valueToken());
      expect(Tok::Equal, "'=' after result list");
    }

    Token eq = expect(Tok::Ident, "'equeue.<opcode>'");
    if (eq.text != "equeue") fail(eq, "expected 'equeue.<opcode>'");
    expect(Tok::Dot, "'.' after 'equeue'");
    Token opname = expect(Tok::Ident, "opcode name");
    auto opcode = opcodeFromName(opname.text);
    if (!opcode) fail(opname, "unknown opcode 'equeue." + opname.text + "'");

    Token lparen = expect(Tok::LParen, "'(' after opcode");
    std::vector<Token> operands;
    if (tok_.kind != Tok::RParen) {
      for (;;) {
        if (tok_.kind == Tok::Newline || tok_.kind == Tok::End)
          fail(lparen, "unterminated operand list");
        operands.push_back(valueToken());
        if (!accept(Tok::Comma)) break;
      }
    }
    expect(Tok::RParen, "')' after operands");

    // Optional `in (dep, proc)` clause.
    std::optional<std::pair<Token, Token>> in_clause;
    if (tok_.kind == Tok::Ident && tok_.text == "in") {
      bump();
      expect(Tok::LParen, "'(' after 'in'");
      Token a = valueToken();
      expect(Tok::Comma, "',' in 'in' clause");
      Token b = valueToken();
      expect(Tok::RParen, "')' after 'in' clause");
      in_clause = {a, b};
    }

    // Optional attribute block, then optional region opener.
    Attrs attrs;
    bool has_inf_bandwidth = false;
    bool opens_region = false;
    if (tok_.kind == Tok::LBrace) {
      Token brace = tok_;
      bump();
      if (tok_.kind == Tok::Newline) {
        opens_region = true;
      } else {
        parseAttrs(attrs, has_inf_bandwidth);
        (void)brace;
        if (accept(Tok::LBrace)) opens_region = true;
      }
    }
    if (tok_.kind != Tok::Newline && tok_.kind != Tok::End)
      fail(tok_, "trailing tokens after operation");

    try {
      dispatch(*opcode, opname, results, operands, in_clause, attrs, has_inf_bandwidth,
               opens_region);
    } catch (const BuildError &e) {
      fail(opname, e.what());
    }
  }

  void parseAttrs(Attrs &attrs, bool &has_inf_bandwidth) {
    if (tok_.kind != Tok::RBrace) {
      for (;;) {
        Token key = expect(Tok::Ident, "attribute name");
        expect(Tok::Equal, "'=' in attribute");
        if (tok_.kind == Tok::Number) {
          attrs[key.text] = tok_.num;
          bump();
        } else if (tok_.kind == Tok::String) {
          attrs[key.text] = tok_.text;
          bump();
        } else if (tok_.kind == Tok::Ident && tok_.text == "inf") {
          if (key.text == "bandwidth") has_inf_bandwidth = true;
          bump();
        } else if (tok_.kind == Tok::LBracket) {
          bump();
          std::vector<int64_t> list;
          if (tok_.kind != Tok::RBracket) {
            for (;;) {
              Token n = expect(Tok::Number, "integer in list attribute");
              list.push_back(n.num);
              if (!accept(Tok::Comma)) break;
            }
          }
          expect(Tok::RBracket, "']' after list attribute");
          attrs[key.text] = std::move(list);
        } else {
          fail(tok_, "expected attribute value");
        }
        if (!accept(Tok::Comma)) break;
      }
    }
    expect(Tok::RBrace, "'}' after attributes");
  }

  void parseArgBinding() {
    Token caret = tok_;
    bump();
    if (open_.empty()) fail(caret, "argument binding outside a region");
    OpenRegion &r = open_.back();
    if (r.args_bound) fail(caret, "duplicate argument binding in region");
    expect(Tok::LParen, "'(' after '^'");
    std::vector<Token> names;
    if (tok_.kind != Tok::RParen) {
      for (;;) {
        names.push_back(valueToken());
        if (!accept(Tok::Comma)) break;
      }
    }
    expect(Tok::RParen, "')' after region arguments");
    expect(Tok::Colon, "':' after region argument list");
    if (names.size() != r.args.size())
      fail(caret, "region declares " + std::to_string(names.size()) + " arguments but " +
                      std::to_string(r.args.size()) + " were captured");
    for (size_t i = 0; i < names.size(); ++i) define(names[i], r.args[i]);
    r.args_bound = true;
  }

  void closeRegion() {
    Token brace = tok_;
    bump();
    if (open_.empty()) fail(brace, "'}' with no open region");
    try {
      switch (open_.back().opcode) {
        case Opcode::Launch: builder_.endLaunch(); break;
        case Opcode::For: builder_.endFor(); break;
        case Opcode::ParallelFor: builder_.endParallelFor(); break;
        default: fail(brace, "internal: unexpected open region kind");
      }
    } catch (const BuildError &e) {
      fail(brace, e.what());
    }
    open_.pop_back();
    scopes_.pop_back();
  }

  // Attribute accessors with diagnostics.
  int64_t intAttr(const Attrs &a, const Token &at, const char *key) {
    auto it = a.find(key);
    if (it == a.end() || !std::holds_alternative<int64_t>(it->second))
      fail(at, std::string("missing integer attribute '") + key + "'");
    return std::get<int64_t>(it->second);
  }
  int64_t intAttrOr(const Attrs &a, const char *key, int64_t dflt) {
    auto it = a.find(key);
    if (it == a.end() || !std::holds_alternative<int64_t>(it->second)) return dflt;
    return std::get<int64_t>(it->second);
  }
  std::string strAttr(const Attrs &a, const Token &at, const char *key) {
    auto it = a.find(key);
    if (it == a.end() || !std::holds_alternative<std::string>(it->second))
      fail(at, std::string("missing string attribute '") + key + "'");
    return std::get<std::string>(it->second);
  }
  std::vector<int64_t> listAttr(const Attrs &a, const Token &at, const char *key) {
    auto it = a.find(key);
    if (it == a.end() || !std::holds_alternative<std::vector<int64_t>>(it->second))
      fail(at, std::string("missing list attribute '") + key + "'");
    return std::get<std::vector<int64_t>>(it->second);
  }

  void bindResults(const std::vector<Token> &names, const std::vector<Value> &values,
                   const Token &at) {
    if (names.size() != values.size())
      fail(at, "operation produces " + std::to_string(values.size()) + " results, " +
                   std::to_string(names.size()) + " bound");
    for (size_t i = 0; i < names.size(); ++i) define(names[i], values[i]);
  }

  void dispatch(Opcode opcode, const Token &at, const std::vector<Token> &results,
                const std::vector<Token> &operand_toks,
                const std::optional<std::pair<Token, Token>> &in_clause, const Attrs &attrs,
                bool has_inf_bandwidth, bool opens_region) {
    std::vector<Value> operands;
    operands.reserve(operand_toks.size());
    for (const Token &t : operand_toks) operands.push_back(lookup(t));

    bool region_expected = opcode == Opcode::Launch || opcode == Opcode::For ||
                           opcode == Opcode::ParallelFor;
    if (opens_region != region_expected)
      fail(at, region_expected ? "operation requires a region" : "operation takes no region");
    if (in_clause && opcode != Opcode::Launch && opcode != Opcode::Memcpy)
      fail(at, "'in' clause is only valid on launch and memcpy");

    auto flagged = [&](const char *key) { return intAttrOr(attrs, key, 0) != 0; };

    std::vector<Value> bound;  // values to bind to the printed result names
    std::vector<Value> region_args;

    switch (opcode) {
      case Opcode::CreateProc:
        bound = {builder_.createProc(strAttr(attrs, at, "tag"))};
        break;
      case Opcode::CreateMem: {
        auto shape_i = listAttr(attrs, at, "shape");
        std::vector<uint64_t> shape;
        for (int64_t d : shape_i) {
          if (d < 1) fail(at, "shape entries must be >= 1");
          shape.push_back(static_cast<uint64_t>(d));
        }
        int64_t bits = intAttr(attrs, at, "elem_bits");
        int64_t banks = intAttr(attrs, at, "banks");
        if (bits < 1 || banks < 1) fail(at, "elem_bits and banks must be >= 1");
        bound = {builder_.createMem(std::move(shape), static_cast<uint32_t>(bits),
                                    static_cast<uint32_t>(banks), strAttr(attrs, at, "tag"))};
        break;
      }
      case Opcode::CreateDma:
        bound = {builder_.createDma(strAttr(attrs, at, "tag"))};
        break;
      case Opcode::CreateComp: {
        std::string names = strAttr(attrs, at, "names");
        std::vector<std::pair<std::string, Value>> children;
        std::istringstream ss(names);
        std::string n;
        size_t i = 0;
        while (ss >> n) {
          if (i >= operands.size()) fail(at, "more child names than child operands");
          children.emplace_back(n, operands[i++]);
        }
        if (i != operands.size()) fail(at, "more child operands than child names");
        bound = {builder_.createComp(children, strAttr(attrs, at, "tag"))};
        break;
      }
      case Opcode::AddComp:
        if (operands.size() != 2) fail(at, "add_comp takes (composite, child)");
        builder_.addComp(operands[0], strAttr(attrs, at, "name"), operands[1]);
        break;
      case Opcode::GetComp:
        if (operands.size() != 1) fail(at, "get_comp takes (composite)");
        bound = {builder_.getComp(operands[0], strAttr(attrs, at, "name"))};
        break;
      case Opcode::CompSelect: {
        if (operands.empty()) fail(at, "comp_select takes (composite, indices...)");
        std::vector<Value> idx(operands.begin() + 1, operands.end());
        bound = {builder_.compSelect(operands[0], strAttr(attrs, at, "prefix"), idx)};
        break;
      }
      case Opcode::CreateConnection: {
        std::string kind = strAttr(attrs, at, "kind");
        ConnectionKind k;
        if (kind == "Streaming")
          k = ConnectionKind::Streaming;
        else if (kind == "Window")
          k = ConnectionKind::Window;
        else
          fail(at, "connection kind must be \"Streaming\" or \"Window\"");
        std::optional<uint64_t> bw;
        if (!has_inf_bandwidth) {
          int64_t b = intAttrOr(attrs, "bandwidth", 0);
          if (attrs.count("bandwidth")) {
            if (b < 1) fail(at, "bandwidth must be >= 1 byte/cycle");
            bw = static_cast<uint64_t>(b);
          }
        }
        bound = {builder_.createConnection(k, bw)};
        break;
      }
      case Opcode::Alloc: {
        if (operands.size() != 1) fail(at, "alloc takes (memory)");
        int64_t elems = intAttr(attrs, at, "elems");
        int64_t bits = intAttr(attrs, at, "elem_bits");
        if (elems < 1 || bits < 1) fail(at, "alloc size must be positive");
        bound = {builder_.alloc(operands[0], static_cast<uint64_t>(elems),
                                static_cast<uint32_t>(bits), flagged("stream"))};
        break;
      }
      case Opcode::Dealloc:
        if (operands.size() != 1) fail(at, "dealloc takes (buffer)");
        builder_.dealloc(operands[0]);
        break;
      case Opcode::GetBuf:
        if (operands.size() != 1) fail(at, "get_buf takes (memory)");
        bound = {builder_.getBuf(operands[0])};
        break;
      case Opcode::Read: {
        size_t i = 1;
        Value addr, conn;
        if (flagged("addr")) {
          if (i >= operands.size()) fail(at, "read: addr flagged but operand missing");
          addr = operands[i++];
        }
        if (flagged("conn")) {
          if (i >= operands.size()) fail(at, "read: conn flagged but operand missing");
          conn = operands[i++];
        }
        if (operands.empty() || i != operands.size()) fail(at, "read operand count mismatch");
        std::optional<uint64_t> elems;
        if (attrs.count("elems")) elems = static_cast<uint64_t>(intAttr(attrs, at, "elems"));
        bound = {builder_.read(operands[0], conn, elems, addr)};
        break;
      }
      case Opcode::Write: {
        size_t i = 2;
        Value addr, conn;
        if (flagged("addr")) {
          if (i >= operands.size()) fail(at, "write: addr flagged but operand missing");
          addr = operands[i++];
        }
        if (flagged("conn")) {
          if (i >= operands.size()) fail(at, "write: conn flagged but operand missing");
          conn = operands[i++];
        }
        if (operands.size() < 2 || i != operands.size())
          fail(at, "write operand count mismatch");
        builder_.write(operands[0], operands[1], conn, addr);
        break;
      }
      case Opcode::Load: {
        Value addr;
        if (flagged("addr")) {
          if (operands.size() != 2) fail(at, "load operand count mismatch");
          addr = operands[1];
        } else if (operands.size() != 1) {
          fail(at, "load operand count mismatch");
        }
        bound = {builder_.load(operands[0], addr)};
        break;
      }
      case Opcode::Store: {
        Value addr;
        if (flagged("addr")) {
          if (operands.size() != 3) fail(at, "store operand count mismatch");
          addr = operands[2];
        } else if (operands.size() != 2) {
          fail(at, "store operand count mismatch");
        }
        builder_.store(operands[0], operands[1], addr);
        break;
      }
      case Opcode::Launch: {
        if (!in_clause) fail(at, "launch requires an 'in (dep, proc)' clause");
        if (results.empty()) fail(at, "launch must bind its done event");
        Value dep = lookup(in_clause->first);
        Value proc = lookup(in_clause->second);
        auto h = builder_.beginLaunch(dep, proc, operands, results.size() - 1);
        bound.push_back(h.done);
        for (Value r : h.results) bound.push_back(r);
        region_args = h.args;
        break;
      }
      case Opcode::Memcpy: {
        if (!in_clause) fail(at, "memcpy requires an 'in (dep, dma)' clause");
        if (operands.size() != 2) fail(at, "memcpy takes (src, dst)");
        Value dep = lookup(in_clause->first);
        Value dma = lookup(in_clause->second);
        bound = {builder_.memcpy(dep, operands[0], operands[1], dma)};
        break;
      }
      case Opcode::ControlStart:
        bound = {builder_.controlStart()};
        break;
      case Opcode::ControlAnd:
        bound = {builder_.controlAnd(operands)};
        break;
      case Opcode::ControlOr:
        bound = {builder_.controlOr(operands)};
        break;
      case Opcode::Await:
        if (operands.size() != 1) fail(at, "await takes (event)");
        builder_.await(operands[0]);
        break;
      case Opcode::Return:
        builder_.ret(operands);
        break;
      case Opcode::ExternOp: {
        uint64_t elems = static_cast<uint64_t>(intAttrOr(attrs, "elems", 1));
        uint32_t bits = static_cast<uint32_t>(intAttrOr(attrs, "elem_bits", 32));
        bound = builder_.externOp(strAttr(attrs, at, "signature"), operands, results.size(),
                                  elems, bits);
        break;
      }
      case Opcode::Const:
        bound = {builder_.constant(intAttr(attrs, at, "value"))};
        break;
      case Opcode::Add:
        if (operands.size() != 2) fail(at, "add takes two operands");
        bound = {builder_.add(operands[0], operands[1])};
        break;
      case Opcode::Mul:
        if (operands.size() != 2) fail(at, "mul takes two operands");
        bound = {builder_.mul(operands[0], operands[1])};
        break;
      case Opcode::For: {
        int64_t lo = intAttr(attrs, at, "lower");
        int64_t hi = intAttr(attrs, at, "upper");
        region_args = {builder_.beginFor(lo, hi)};
        break;
      }
      case Opcode::ParallelFor: {
        auto lowers = listAttr(attrs, at, "lowers");
        auto uppers = listAttr(attrs, at, "uppers");
        region_args = builder_.beginParallelFor(lowers, uppers);
        break;
      }
    }

    // Preserve every parsed attribute (labels and layout flags included).
    for (const auto &[k, v] : attrs) builder_.setAttr(k, v);
    builder_.setSpan(span(at));

    if (opens_region) {
      open_.push_back(OpenRegion{opcode, region_args, false, at});
      Scope s;
      s.isolated = opcode == Opcode::Launch;
      scopes_.push_back(std::move(s));
      // Result names of a launch live in the enclosing scope.
      Scope inner = std::move(scopes_.back());
      scopes_.pop_back();
      bindResults(results, bound, at);
      scopes_.push_back(std::move(inner));
    } else {
      bindResults(results, bound, at);
    }
  }

  Lexer lexer_;
  std::string file_;
  Token tok_;
  Builder builder_;
  std::vector<Scope> scopes_;
  std::vector<OpenRegion> open_;
  std::vector<Diag> diags_;
};

// ── Printer ─────────────────────────────────────────────────────────────────

class Printer {
 public:
  explicit Printer(const Program &p) : prog_(p) {}

  std::string run() {
    printRegion(prog_.top, 0, {});
    return std::move(out_);
  }

 private:
  void indent(int n) {
    for (int i = 0; i < n; ++i) out_ += "  ";
  }

  static std::string valueName(Value v) { return "%v" + std::to_string(v.id); }

  static std::string renderAttrValue(const AttrValue &v) {
    std::string out;
    if (const auto *i = std::get_if<int64_t>(&v)) {
      out = std::to_string(*i);
    } else if (const auto *s = std::get_if<std::string>(&v)) {
      out += '"';
      for (char c : *s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
          out += "\\n";
          continue;
        }
        out += c;
      }
      out += '"';
    } else {
      const auto &list = std::get<std::vector<int64_t>>(v);
      out += '[';
      for (size_t i = 0; i < list.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(list[i]);
      }
      out += ']';
    }
    return out;
  }

  void printAttrs(const Op &op) {
    std::vector<std::pair<std::string, std::string>> items;
    for (const auto &[k, v] : op.attrs) items.emplace_back(k, renderAttrValue(v));
    if (op.opcode == Opcode::CreateConnection && !op.attrs.count("bandwidth")) {
      items.emplace_back("bandwidth", "inf");
      std::sort(items.begin(), items.end());
    }
    if (items.empty()) return;
    out_ += " {";
    for (size_t i = 0; i < items.size(); ++i) {
      if (i) out_ += ", ";
      out_ += items[i].first;
      out_ += " = ";
      out_ += items[i].second;
    }
    out_ += '}';
  }

  void printOperandList(const std::vector<Value> &vals, size_t begin, size_t end) {
    out_ += '(';
    for (size_t i = begin; i < end; ++i) {
      if (i > begin) out_ += ", ";
      out_ += valueName(vals[i]);
    }
    out_ += ')';
  }

  void printOp(const Op &op, int depth) {
    indent(depth);
    for (size_t i = 0; i < op.results.size(); ++i) {
      if (i) out_ += ", ";
      out_ += valueName(op.results[i]);
    }
    if (!op.results.empty()) out_ += " = ";
    out_ += "equeue.";
    out_ += opcodeName(op.opcode);
    if (op.opcode == Opcode::Launch) {
      printOperandList(op.operands, 2, op.operands.size());
      out_ += " in (";
      out_ += valueName(op.operands[0]);
      out_ += ", ";
      out_ += valueName(op.operands[1]);
      out_ += ')';
    } else if (op.opcode == Opcode::Memcpy) {
      printOperandList(op.operands, 1, 3);
      out_ += " in (";
      out_ += valueName(op.operands[0]);
      out_ += ", ";
      out_ += valueName(op.operands[3]);
      out_ += ')';
    } else {
      printOperandList(op.operands, 0, op.operands.size());
    }
    printAttrs(op);
    if (op.region) {
      out_ += " {\n";
      printRegion(*op.region, depth + 1, op.region->args);
      indent(depth);
      out_ += "}\n";
    } else {
      out_ += '\n';
    }
  }

  void printRegion(const Region &region, int depth, const std::vector<Value> &args) {
    if (!args.empty()) {
      indent(depth);
      out_ += "^(";
      for (size_t i = 0; i < args.size(); ++i) {
        if (i) out_ += ", ";
        out_ += valueName(args[i]);
      }
      out_ += "):\n";
    }
    for (const Op &op : region.ops) printOp(op, depth);
  }

  const Program &prog_;
  std::string out_;
};

}  // namespace

ParseResult parse(std::string_view text, const std::string &filename) {
  return Parser(text, filename).run();
}

std::string print(const Program &program) { return Printer(program).run(); }

}  // namespace eq::ir
