#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <string>

#include <equeue/equeue.h>

namespace {

struct Str {
  char *s = nullptr;
  ~Str() { eq_string_free(s); }
  std::string get() const { return s ? s : ""; }
};

struct Prog {
  eq_program *p = nullptr;
  ~Prog() { eq_program_free(p); }
};

struct Res {
  eq_result *r = nullptr;
  ~Res() { eq_result_free(r); }
};

}  // namespace

TEST_CASE("generate, simulate, and read cycles through the C surface") {
  Prog p;
  REQUIRE(eq_generate("fir:case=1", &p.p) == EQ_OK);
  REQUIRE(eq_verify(p.p) == EQ_OK);
  Res r;
  REQUIRE(eq_simulate(p.p, nullptr, &r.r) == EQ_OK);
  CHECK(eq_result_total_cycles(r.r) == 2048);
  CHECK(eq_result_warm_up(r.r) == 0);

  Str trace, text_summary, machine_summary;
  REQUIRE(eq_result_trace_json(r.r, &trace.s) == EQ_OK);
  CHECK(trace.get().find("\"traceEvents\"") != std::string::npos);
  REQUIRE(eq_result_summary(r.r, 0, &text_summary.s) == EQ_OK);
  CHECK(text_summary.get().find("2048") != std::string::npos);
  REQUIRE(eq_result_summary(r.r, 1, &machine_summary.s) == EQ_OK);
  CHECK(machine_summary.get().find("\"total_cycles\": 2048") != std::string::npos);
}

TEST_CASE("print and parse round-trip through the C surface") {
  Prog p;
  REQUIRE(eq_generate("fir:case=2", &p.p) == EQ_OK);
  Str text;
  REQUIRE(eq_print(p.p, &text.s) == EQ_OK);
  Prog back;
  REQUIRE(eq_parse(text.s, "fir2.eq", &back.p) == EQ_OK);
  Str text2;
  REQUIRE(eq_print(back.p, &text2.s) == EQ_OK);
  CHECK(text.get() == text2.get());

  Res r;
  REQUIRE(eq_simulate(back.p, nullptr, &r.r) == EQ_OK);
  CHECK(eq_result_total_cycles(r.r) == 143);
}

TEST_CASE("pipelines apply through the C surface") {
  const char *spec = "systolic_input:df=ws,ah=2,aw=2,h=6,w=6,fh=3,fw=3,c=2,n=4";
  Prog p;
  REQUIRE(eq_generate(spec, &p.p) == EQ_OK);
  // Single no-op-adjacent pass: abstract accesses become event-queue ones.
  REQUIRE(eq_apply_pipeline(p.p, R"([{"name": "equeue_read_write"}])") == EQ_OK);
  Str text;
  REQUIRE(eq_print(p.p, &text.s) == EQ_OK);
  CHECK(text.get().find("equeue.load(") == std::string::npos);
  CHECK(text.get().find("equeue.read(") != std::string::npos);

  CHECK(eq_apply_pipeline(p.p, R"([{"name": "frobnicate"}])") == EQ_ERR_PASS);
  CHECK(std::string(eq_last_error()).find("frobnicate") != std::string::npos);
  CHECK(eq_apply_pipeline(p.p, "not json at all") == EQ_ERR_INVALID);
}

TEST_CASE("pass names are listed") {
  Str names;
  REQUIRE(eq_pass_names(&names.s) == EQ_OK);
  CHECK(names.get().find("parallel_to_equeue\n") != std::string::npos);
  CHECK(names.get().find("split_launch\n") != std::string::npos);
}

TEST_CASE("error paths set codes and messages") {
  eq_program *p = nullptr;
  CHECK(eq_parse("x = equeue.read(", "bad.eq", &p) == EQ_ERR_PARSE);
  CHECK(p == nullptr);
  CHECK(std::string(eq_last_error()).find("bad.eq:1") != std::string::npos);

  CHECK(eq_generate("warp_drive:speed=9", &p) == EQ_ERR_INVALID);
  CHECK(std::string(eq_last_error()).find("warp_drive") != std::string::npos);
  CHECK(eq_generate("fir:case=1,wat=2", &p) == EQ_ERR_INVALID);
  CHECK(eq_generate("fir:case=7", &p) == EQ_ERR_INVALID);

  Prog ok;
  REQUIRE(eq_generate("fir:case=1", &ok.p) == EQ_OK);
  eq_result *r = nullptr;
  CHECK(eq_simulate(ok.p, R"({"cycle_limit": 10})", &r) == EQ_ERR_SIM);
  CHECK(r == nullptr);
  CHECK(eq_simulate(ok.p, R"({"wat": 1})", &r) == EQ_ERR_INVALID);
}

TEST_CASE("registry overrides change extern op timing") {
  Prog p;
  REQUIRE(eq_generate("fir:case=1", &p.p) == EQ_OK);
  Res slow;
  REQUIRE(eq_simulate(p.p, R"({"registry": {"ops": {"mul4": 2, "mac4": 2}}})", &slow.r) == EQ_OK);
  CHECK(eq_result_total_cycles(slow.r) == 2 * 2048);
}

TEST_CASE("loop iteration helper matches the tiling formula") {
  uint64_t iters = 0;
  REQUIRE(eq_systolic_iterations("systolic:df=ws,ah=4,aw=4,h=6,w=6,fh=3,fw=3,c=2,n=4",
                                 &iters) == EQ_OK);
  CHECK(iters == 5 * 1);  // ceil(18/4) * ceil(4/4)
  CHECK(eq_systolic_iterations("fir:case=1", &iters) == EQ_ERR_INVALID);
}
