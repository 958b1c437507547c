#ifndef EQ_IR_TEXTIO_HPP
#define EQ_IR_TEXTIO_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ir/ir.hpp"

namespace eq::ir {

struct ParseResult {
  std::optional<Program> program;  // present iff diagnostics has no errors
  std::vector<Diag> diagnostics;

  bool ok() const { return program.has_value(); }
};

// Parses .eq text. Never throws on malformed input; errors land in
// diagnostics with source spans.
ParseResult parse(std::string_view text, const std::string &filename = "<input>");

// Prints a verifier-clean program. parse(print(p)) is structurally equal to p.
std::string print(const Program &program);

}  // namespace eq::ir

#endif  // EQ_IR_TEXTIO_HPP
