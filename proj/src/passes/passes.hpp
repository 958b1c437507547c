#ifndef EQ_PASSES_PASSES_HPP
#define EQ_PASSES_PASSES_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ir/ir.hpp"

namespace eq::passes {

struct PassError : std::runtime_error {
  explicit PassError(const std::string &msg) : std::runtime_error(msg) {}
};

// One pipeline step: a pass name plus its parameters. Params are checked
// against the pass's declared schema before the pass runs; ops are addressed
// by the stable labels attached at generation time.
struct PassSpec {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
};

using Pipeline = std::vector<PassSpec>;

// Registered pass names, in documentation order.
std::vector<std::string> passNames();

// Applies one pass. Throws PassError (always naming the pass) on unknown
// names, malformed params, missing components/buffers/labels, or when the
// result fails verification.
ir::Program runPass(const ir::Program &program, const PassSpec &spec);

// Printed program after each pass, for golden tests and `--dump-stages`.
struct StageDump {
  std::string pass;
  std::string printed;
};

// Applies the passes in order; every intermediate program re-verifies.
ir::Program runPipeline(const ir::Program &program, const Pipeline &pipeline,
                        std::vector<StageDump> *dumps = nullptr);

// Pipeline config form: either a JSON array of {name, params} objects or an
// object with a "passes" array. Throws PassError on malformed configs.
Pipeline parsePipeline(const nlohmann::json &config);
nlohmann::json pipelineToJson(const Pipeline &pipeline);

// The mapping pipeline used by the convolution case study: lowers the tiled
// loop-nest program onto the PE array. The same sequence serves WS, IS, and
// OS, since the dataflow only changes the generator-side dimension mapping.
Pipeline systolicMappingPipeline();

}  // namespace eq::passes

#endif  // EQ_PASSES_PASSES_HPP
