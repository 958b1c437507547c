// eqsim: command-line front end over the C API (equeue.h).
//
// Exit codes: 0 success, 1 usage/configuration error, 2 parse/verify/pass
// error, 3 simulation error (deadlock or cycle-limit timeout).

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <equeue/equeue.h>

using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitSim = 3;

struct StrDeleter {
  void operator()(char *s) const { eq_string_free(s); }
};
using CStr = std::unique_ptr<char, StrDeleter>;

struct ProgDeleter {
  void operator()(eq_program *p) const { eq_program_free(p); }
};
using Prog = std::unique_ptr<eq_program, ProgDeleter>;

struct ResDeleter {
  void operator()(eq_result *r) const { eq_result_free(r); }
};
using Res = std::unique_ptr<eq_result, ResDeleter>;

struct Fatal {
  int code;
  std::string message;
};

[[noreturn]] void die(int code, const std::string &msg) { throw Fatal{code, msg}; }

std::string readFile(const std::string &path, int fail_code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die(fail_code, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void writeFile(const std::string &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) die(kExitUsage, "cannot write '" + path + "'");
  out << content;
}

// ── Shared run configuration ──
// A config file (--config or $EQSIM_CONFIG) holds registry overrides, a
// default pipeline, and a cycle limit; flags override file values.

struct RunSettings {
  json registry;                   // {"ops": {...}, "memories": {...}}
  std::optional<json> pipeline;    // pass list
  std::optional<uint64_t> cycle_limit;
};

RunSettings loadSettings(const std::string &config_flag) {
  std::string path = config_flag;
  if (path.empty()) {
    const char *env = std::getenv("EQSIM_CONFIG");
    if (env && *env) path = env;
  }
  RunSettings s;
  if (path.empty()) return s;
  json doc;
  try {
    doc = json::parse(readFile(path, kExitUsage));
  } catch (const json::exception &e) {
    die(kExitUsage, "config '" + path + "': " + e.what());
  }
  if (!doc.is_object()) die(kExitUsage, "config '" + path + "' must be a JSON object");
  for (auto &[key, value] : doc.items()) {
    if (key == "registry")
      s.registry = value;
    else if (key == "pipeline" || key == "passes")
      s.pipeline = value;
    else if (key == "cycle_limit")
      s.cycle_limit = value.get<uint64_t>();
    else
      die(kExitUsage, "config '" + path + "': unknown key '" + key + "'");
  }
  return s;
}

std::string simOptions(const RunSettings &s) {
  json opt = json::object();
  if (!s.registry.is_null()) opt["registry"] = s.registry;
  if (s.cycle_limit) opt["cycle_limit"] = *s.cycle_limit;
  return opt.dump();
}

Prog loadProgram(const std::string &input_path, const std::string &generate_spec) {
  if (input_path.empty() == generate_spec.empty())
    die(kExitUsage, "provide exactly one input: a program file or --generate <spec>");
  eq_program *raw = nullptr;
  if (!generate_spec.empty()) {
    if (eq_generate(generate_spec.c_str(), &raw) != EQ_OK) die(kExitUsage, eq_last_error());
  } else {
    std::string text = readFile(input_path, kExitUsage);
    if (eq_parse(text.c_str(), input_path.c_str(), &raw) != EQ_OK)
      die(kExitParse, eq_last_error());
  }
  return Prog(raw);
}

void applyPipeline(eq_program *p, const std::string &pipeline_flag, const RunSettings &s) {
  json pipeline;
  if (!pipeline_flag.empty()) {
    try {
      pipeline = json::parse(readFile(pipeline_flag, kExitUsage));
    } catch (const json::exception &e) {
      die(kExitUsage, "pipeline '" + pipeline_flag + "': " + e.what());
    }
  } else if (s.pipeline) {
    pipeline = *s.pipeline;
  } else {
    return;
  }
  if (eq_apply_pipeline(p, pipeline.dump().c_str()) != EQ_OK) die(kExitParse, eq_last_error());
}

Res simulate(const eq_program *p, const RunSettings &s) {
  eq_result *raw = nullptr;
  eq_status st = eq_simulate(p, simOptions(s).c_str(), &raw);
  if (st == EQ_ERR_SIM) die(kExitSim, eq_last_error());
  if (st != EQ_OK) die(kExitParse, eq_last_error());
  return Res(raw);
}

void writeOutputs(const eq_result *r, const std::string &trace_path,
                  const std::string &summary_path, const std::string &format) {
  if (!trace_path.empty()) {
    CStr trace;
    char *raw = nullptr;
    eq_result_trace_json(r, &raw);
    trace.reset(raw);
    writeFile(trace_path, trace.get());
  }
  int machine = format == "machine" ? 1 : 0;
  CStr summary;
  char *raw = nullptr;
  eq_result_summary(r, machine, &raw);
  summary.reset(raw);
  if (!summary_path.empty())
    writeFile(summary_path, summary.get());
  else if (format == "text")
    std::cout << summary.get();
}

// ── sweep ──
// The sweep file lists generator specs, either literally
//   {"configs": ["systolic:df=ws,ah=2,...", ...]}
// or as a template with cartesian axes
//   {"template": "systolic:df={df},ah={ah},...", "axes": {"df": ["ws"], ...}}
// plus optional "pipeline" / "registry" / "cycle_limit" applied to every row.

std::vector<std::string> expandSweep(const json &doc) {
  std::vector<std::string> specs;
  if (doc.contains("configs"))
    for (const json &c : doc.at("configs")) specs.push_back(c.get<std::string>());
  if (doc.contains("template")) {
    std::vector<std::string> expanded{doc.at("template").get<std::string>()};
    for (auto &[axis, values] : doc.at("axes").items()) {
      std::vector<std::string> next;
      for (const std::string &base : expanded)
        for (const json &v : values) {
          std::string text = v.is_string() ? v.get<std::string>() : v.dump();
          std::string key = "{" + axis + "}";
          std::string expandedOne = base;
          for (size_t pos; (pos = expandedOne.find(key)) != std::string::npos;)
            expandedOne.replace(pos, key.size(), text);
          next.push_back(expandedOne);
        }
      expanded = std::move(next);
    }
    specs.insert(specs.end(), expanded.begin(), expanded.end());
  }
  if (specs.empty()) die(kExitUsage, "sweep file names no configurations");
  return specs;
}

// Peak single-cycle read rate over the connections; when the program has no
// bandwidth-modeled connections, the average memory read rate instead.
double peakReadBw(const eq_result *r) {
  CStr summary;
  char *raw = nullptr;
  eq_result_summary(r, 1, &raw);
  summary.reset(raw);
  json doc = json::parse(summary.get());
  if (!doc.at("connections").empty()) {
    double best = 0.0;
    for (auto &[name, conn] : doc.at("connections").items())
      best = std::max(best, conn.at("max_read_bw").get<double>());
    return best;
  }
  uint64_t bytes = 0;
  for (auto &[path, mem] : doc.at("memories").items())
    bytes += mem.at("bytes_read").get<uint64_t>();
  uint64_t cycles = doc.at("total_cycles").get<uint64_t>();
  return cycles == 0 ? 0.0 : static_cast<double>(bytes) / static_cast<double>(cycles);
}

int cmdSweep(const std::string &sweep_path, const std::string &out_path,
             const std::string &config_flag) {
  RunSettings base = loadSettings(config_flag);
  json doc;
  try {
    doc = json::parse(readFile(sweep_path, kExitUsage));
  } catch (const json::exception &e) {
    die(kExitUsage, "sweep '" + sweep_path + "': " + e.what());
  }
  RunSettings s = base;
  if (doc.contains("registry")) s.registry = doc.at("registry");
  if (doc.contains("pipeline")) s.pipeline = doc.at("pipeline");
  if (doc.contains("cycle_limit")) s.cycle_limit = doc.at("cycle_limit").get<uint64_t>();

  std::vector<std::string> specs = expandSweep(doc);
  std::ostringstream table;
  table << "index,spec,cycles,iterations,peak_read_bw\n";
  for (size_t i = 0; i < specs.size(); ++i) {
    const std::string &spec = specs[i];
    try {
      eq_program *praw = nullptr;
      if (eq_generate(spec.c_str(), &praw) != EQ_OK) throw Fatal{kExitUsage, eq_last_error()};
      Prog p(praw);
      if (s.pipeline && eq_apply_pipeline(p.get(), s.pipeline->dump().c_str()) != EQ_OK)
        throw Fatal{kExitParse, eq_last_error()};
      Res r = simulate(p.get(), s);
      uint64_t iters = 0;
      std::string iters_text;
      if (eq_systolic_iterations(spec.c_str(), &iters) == EQ_OK)
        iters_text = std::to_string(iters);
      table << i << "," << spec << "," << eq_result_total_cycles(r.get()) << "," << iters_text
            << "," << peakReadBw(r.get()) << "\n";
    } catch (const Fatal &f) {
      std::cerr << "eqsim: sweep config " << i << " (" << spec << "): " << f.message << "\n";
      table << i << "," << spec << ",error,,\n";
    }
  }
  if (out_path.empty())
    std::cout << table.str();
  else
    writeFile(out_path, table.str());
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"event-queue accelerator model simulator"};
  app.require_subcommand(1);

  std::string input, generate_spec, pipeline_flag, config_flag;
  std::string trace_path, summary_path, format = "text";
  std::optional<uint64_t> cycle_limit_flag;

  CLI::App *run = app.add_subcommand("run", "simulate a program and report cycles");
  run->add_option("program", input, "program file (.eq)");
  run->add_option("--generate", generate_spec, "generator spec instead of a file");
  run->add_option("--pipeline", pipeline_flag, "pass pipeline JSON file");
  run->add_option("--config", config_flag, "config file (default: $EQSIM_CONFIG)");
  run->add_option("--cycle-limit", cycle_limit_flag, "abort after this many cycles");
  run->add_option("--trace", trace_path, "write a Chrome-loadable event trace");
  run->add_option("--summary", summary_path, "write the profile summary to a file");
  run->add_option("--format", format, "summary format: text|machine")
      ->check(CLI::IsMember({"text", "machine"}));

  std::string gen_spec, gen_out;
  CLI::App *gen = app.add_subcommand("generate", "emit a case-study program as text");
  gen->add_option("spec", gen_spec, "generator spec")->required();
  gen->add_option("-o,--output", gen_out, "output file (default: stdout)");

  std::string sweep_path, sweep_out, sweep_config;
  CLI::App *sweep = app.add_subcommand("sweep", "run a table of configurations");
  sweep->add_option("spec-file", sweep_path, "sweep description JSON")->required();
  sweep->add_option("-o,--output", sweep_out, "CSV output file (default: stdout)");
  sweep->add_option("--config", sweep_config, "config file (default: $EQSIM_CONFIG)");

  CLI::App *passes = app.add_subcommand("passes", "pass utilities");
  passes->require_subcommand(1);
  CLI::App *passes_list = passes->add_subcommand("list", "list available passes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (run->parsed()) {
      RunSettings s = loadSettings(config_flag);
      if (cycle_limit_flag) s.cycle_limit = cycle_limit_flag;
      Prog p = loadProgram(input, generate_spec);
      applyPipeline(p.get(), pipeline_flag, s);
      Res r = simulate(p.get(), s);
      std::cout << "cycles: " << eq_result_total_cycles(r.get()) << "\n";
      writeOutputs(r.get(), trace_path, summary_path, format);
      return 0;
    }
    if (gen->parsed()) {
      eq_program *raw = nullptr;
      if (eq_generate(gen_spec.c_str(), &raw) != EQ_OK) die(kExitUsage, eq_last_error());
      Prog p(raw);
      char *text_raw = nullptr;
      eq_print(p.get(), &text_raw);
      CStr text(text_raw);
      if (gen_out.empty())
        std::cout << text.get();
      else
        writeFile(gen_out, text.get());
      return 0;
    }
    if (sweep->parsed()) return cmdSweep(sweep_path, sweep_out, sweep_config);
    if (passes_list->parsed()) {
      char *raw = nullptr;
      eq_pass_names(&raw);
      CStr names(raw);
      std::cout << names.get();
      return 0;
    }
  } catch (const Fatal &f) {
    std::cerr << "eqsim: " << f.message << "\n";
    return f.code;
  }
  return kExitUsage;
}
