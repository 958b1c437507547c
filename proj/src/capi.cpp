#include "equeue/equeue.h"

#include <cstring>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gen/generators.hpp"
#include "ir/ir.hpp"
#include "ir/textio.hpp"
#include "passes/passes.hpp"
#include "sim/engine.hpp"
#include "sim/report.hpp"

using nlohmann::json;

struct eq_program {
  eq::ir::Program p;
};

struct eq_result {
  eq::sim::SimResult r;
};

namespace {

thread_local std::string g_last_error = "no error";

eq_status fail(eq_status code, const std::string &msg) {
  g_last_error = msg;
  return code;
}

eq_status badArg(const std::string &msg) { return fail(EQ_ERR_INVALID, msg); }

char *dupString(const std::string &s) {
  char *out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string formatDiags(const std::vector<eq::ir::Diag> &diags) {
  std::ostringstream ss;
  for (size_t i = 0; i < diags.size(); ++i) {
    const eq::ir::Diag &d = diags[i];
    if (i) ss << '\n';
    ss << d.span.file << ':' << d.span.line << ':' << d.span.column << ": "
       << (d.severity == eq::ir::Severity::Error ? "error: " : "warning: ") << d.message;
  }
  return ss.str();
}

// ── Generator specs ──
// "<kind>:key=value,key=value"; keys are generator-specific.

std::map<std::string, std::string> splitSpec(const std::string &spec, std::string &kind) {
  size_t colon = spec.find(':');
  kind = spec.substr(0, colon);
  std::map<std::string, std::string> kv;
  if (colon == std::string::npos) return kv;
  std::string rest = spec.substr(colon + 1);
  std::istringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("malformed spec entry '" + item + "' (expected key=value)");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return kv;
}

uint64_t takeInt(std::map<std::string, std::string> &kv, const std::string &key,
                 std::optional<uint64_t> dflt = std::nullopt) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    if (dflt) return *dflt;
    throw std::invalid_argument("generator spec is missing '" + key + "'");
  }
  uint64_t v = std::stoull(it->second);
  kv.erase(it);
  return v;
}

std::string takeStr(std::map<std::string, std::string> &kv, const std::string &key,
                    std::optional<std::string> dflt = std::nullopt) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    if (dflt) return *dflt;
    throw std::invalid_argument("generator spec is missing '" + key + "'");
  }
  std::string v = it->second;
  kv.erase(it);
  return v;
}

void rejectLeftovers(const std::map<std::string, std::string> &kv) {
  if (!kv.empty()) throw std::invalid_argument("unknown spec key '" + kv.begin()->first + "'");
}

void parseConvArray(std::map<std::string, std::string> &kv, eq::gen::ConvConfig &conv,
                    eq::gen::ArrayConfig &arr) {
  arr.dataflow = eq::gen::dataflowFromName(takeStr(kv, "df"));
  arr.a_h = takeInt(kv, "ah");
  arr.a_w = takeInt(kv, "aw");
  conv.h = takeInt(kv, "h");
  conv.w = takeInt(kv, "w");
  conv.f_h = takeInt(kv, "fh");
  conv.f_w = takeInt(kv, "fw");
  conv.c = takeInt(kv, "c");
  conv.n = takeInt(kv, "n");
}

eq::ir::Program generateFromSpec(const std::string &spec) {
  std::string kind;
  std::map<std::string, std::string> kv = splitSpec(spec, kind);
  if (kind == "fir") {
    eq::gen::FirConfig fc;
    fc.fir_case = static_cast<int>(takeInt(kv, "case"));
    fc.taps = takeInt(kv, "taps", fc.taps);
    fc.samples = takeInt(kv, "samples", fc.samples);
    fc.stream_bw = takeInt(kv, "bw", fc.stream_bw);
    rejectLeftovers(kv);
    return eq::gen::genFir(fc);
  }
  if (kind == "systolic" || kind == "systolic_input") {
    eq::gen::ConvConfig conv;
    eq::gen::ArrayConfig arr;
    parseConvArray(kv, conv, arr);
    if (kind == "systolic") {
      rejectLeftovers(kv);
      return eq::gen::genSystolic(conv, arr);
    }
    std::string stage = takeStr(kv, "stage", "affine");
    rejectLeftovers(kv);
    if (stage == "affine")
      return eq::gen::genSystolicPipelineInput(conv, arr, eq::gen::PipelineStage::Affine);
    if (stage == "linalg")
      return eq::gen::genSystolicPipelineInput(conv, arr, eq::gen::PipelineStage::Linalg);
    throw std::invalid_argument("unknown stage '" + stage + "' (expected affine or linalg)");
  }
  throw std::invalid_argument("unknown generator '" + kind +
                              "' (expected fir, systolic, or systolic_input)");
}

// ── Simulation options ──

struct SimOptions {
  eq::sim::EngineConfig config;
  eq::sim::Registry registry = eq::sim::Registry::builtins();
};

SimOptions parseOptions(const char *options_json) {
  SimOptions opt;
  if (!options_json || !*options_json) return opt;
  json j = json::parse(options_json);
  if (!j.is_object()) throw std::invalid_argument("simulation options must be a JSON object");
  for (auto &[key, value] : j.items()) {
    if (key == "cycle_limit") {
      opt.config.cycle_limit = value.get<uint64_t>();
    } else if (key == "registry") {
      for (auto &[rkey, rval] : value.items()) {
        if (rkey == "ops") {
          for (auto &[name, cycles] : rval.items()) {
            uint64_t c = cycles.get<uint64_t>();
            opt.registry.setOperation(
                name, [c](const eq::sim::OpContext &) { return eq::sim::OpOutcome{c, false}; });
          }
        } else if (rkey == "memories") {
          for (auto &[tag, m] : rval.items()) {
            eq::sim::MemoryModel model;
            model.cycles_per_access = m.value("cycles_per_access", model.cycles_per_access);
            model.read_ports = m.value("read_ports", model.read_ports);
            model.write_ports = m.value("write_ports", model.write_ports);
            model.warm_up = m.value("warm_up", model.warm_up);
            opt.registry.setMemoryModel(tag, model);
          }
        } else {
          throw std::invalid_argument("unknown registry section '" + rkey + "'");
        }
      }
    } else {
      throw std::invalid_argument("unknown simulation option '" + key + "'");
    }
  }
  return opt;
}

}  // namespace

// ── C surface ────────────────────────────────────────────────────────────────

extern "C" {

const char *eq_last_error(void) { return g_last_error.c_str(); }

void eq_string_free(char *s) { delete[] s; }
void eq_program_free(eq_program *p) { delete p; }
void eq_result_free(eq_result *r) { delete r; }

eq_status eq_parse(const char *text, const char *filename, eq_program **out) {
  if (!text || !out) return badArg("eq_parse: text and out must be non-null");
  *out = nullptr;
  eq::ir::ParseResult pr = eq::ir::parse(text, filename ? filename : "<input>");
  if (!pr.ok()) return fail(EQ_ERR_PARSE, formatDiags(pr.diagnostics));
  std::vector<eq::ir::Diag> diags = eq::ir::verify(*pr.program);
  if (!diags.empty()) return fail(EQ_ERR_VERIFY, formatDiags(diags));
  *out = new eq_program{std::move(*pr.program)};
  return EQ_OK;
}

eq_status eq_generate(const char *spec, eq_program **out) {
  if (!spec || !out) return badArg("eq_generate: spec and out must be non-null");
  *out = nullptr;
  try {
    *out = new eq_program{generateFromSpec(spec)};
    return EQ_OK;
  } catch (const std::exception &e) {
    return badArg(std::string("eq_generate: ") + e.what());
  }
}

eq_status eq_verify(const eq_program *p) {
  if (!p) return badArg("eq_verify: program must be non-null");
  std::vector<eq::ir::Diag> diags = eq::ir::verify(p->p);
  if (!diags.empty()) return fail(EQ_ERR_VERIFY, formatDiags(diags));
  return EQ_OK;
}

eq_status eq_print(const eq_program *p, char **out_text) {
  if (!p || !out_text) return badArg("eq_print: program and out must be non-null");
  *out_text = dupString(eq::ir::print(p->p));
  return EQ_OK;
}

eq_status eq_apply_pipeline(eq_program *p, const char *pipeline_json) {
  if (!p || !pipeline_json) return badArg("eq_apply_pipeline: arguments must be non-null");
  try {
    eq::passes::Pipeline pipeline = eq::passes::parsePipeline(json::parse(pipeline_json));
    p->p = eq::passes::runPipeline(p->p, pipeline);
    return EQ_OK;
  } catch (const json::exception &e) {
    return badArg(std::string("eq_apply_pipeline: ") + e.what());
  } catch (const eq::passes::PassError &e) {
    return fail(EQ_ERR_PASS, e.what());
  } catch (const std::exception &e) {
    return fail(EQ_ERR_PASS, std::string("eq_apply_pipeline: ") + e.what());
  }
}

eq_status eq_pass_names(char **out_text) {
  if (!out_text) return badArg("eq_pass_names: out must be non-null");
  std::ostringstream ss;
  for (const std::string &name : eq::passes::passNames()) ss << name << '\n';
  *out_text = dupString(ss.str());
  return EQ_OK;
}

eq_status eq_simulate(const eq_program *p, const char *options_json, eq_result **out) {
  if (!p || !out) return badArg("eq_simulate: program and out must be non-null");
  *out = nullptr;
  SimOptions opt;
  try {
    opt = parseOptions(options_json);
  } catch (const std::exception &e) {
    return badArg(std::string("eq_simulate: ") + e.what());
  }
  std::vector<eq::ir::Diag> diags = eq::ir::verify(p->p);
  if (!diags.empty()) return fail(EQ_ERR_VERIFY, formatDiags(diags));
  try {
    *out = new eq_result{eq::sim::simulate(p->p, opt.registry, opt.config)};
    return EQ_OK;
  } catch (const std::exception &e) {
    return fail(EQ_ERR_SIM, e.what());
  }
}

uint64_t eq_result_total_cycles(const eq_result *r) { return r ? r->r.total_cycles : 0; }
uint64_t eq_result_warm_up(const eq_result *r) { return r ? r->r.warm_up : 0; }

eq_status eq_result_trace_json(const eq_result *r, char **out_text) {
  if (!r || !out_text) return badArg("eq_result_trace_json: arguments must be non-null");
  *out_text = dupString(eq::sim::emitTrace(r->r));
  return EQ_OK;
}

eq_status eq_result_summary(const eq_result *r, int machine, char **out_text) {
  if (!r || !out_text) return badArg("eq_result_summary: arguments must be non-null");
  *out_text =
      dupString(machine ? eq::sim::emitProfileMachine(r->r) : eq::sim::emitProfileText(r->r));
  return EQ_OK;
}

eq_status eq_systolic_iterations(const char *spec, uint64_t *out) {
  if (!spec || !out) return badArg("eq_systolic_iterations: arguments must be non-null");
  try {
    std::string kind;
    std::map<std::string, std::string> kv = splitSpec(spec, kind);
    if (kind != "systolic" && kind != "systolic_input")
      throw std::invalid_argument("expected a systolic spec, got '" + kind + "'");
    eq::gen::ConvConfig conv;
    eq::gen::ArrayConfig arr;
    parseConvArray(kv, conv, arr);
    conv.validate();
    arr.validate();
    *out = eq::gen::loopIterations(conv, arr);
    return EQ_OK;
  } catch (const std::exception &e) {
    return badArg(std::string("eq_systolic_iterations: ") + e.what());
  }
}

}  // extern "C"
