#ifndef EQUEUE_H
#define EQUEUE_H

/* C interface to the event-queue modeling toolkit. All objects are opaque;
 * every fallible call returns an eq_status, with a description of the most
 * recent failure available from eq_last_error() (thread-local). Strings
 * returned through out-parameters are heap-allocated and must be released
 * with eq_string_free. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct eq_program eq_program;
typedef struct eq_result eq_result;

typedef enum eq_status {
  EQ_OK = 0,
  EQ_ERR_INVALID = 1, /* bad argument, unknown spec, malformed options */
  EQ_ERR_PARSE = 2,   /* text does not parse */
  EQ_ERR_VERIFY = 3,  /* structural verification failed */
  EQ_ERR_PASS = 4,    /* a transformation pass rejected the program */
  EQ_ERR_SIM = 5      /* deadlock, cycle-limit timeout, or runtime fault */
} eq_status;

/* Message for the most recent failure on this thread; never NULL. */
const char *eq_last_error(void);

void eq_string_free(char *s);
void eq_program_free(eq_program *p);
void eq_result_free(eq_result *r);

/* ── Programs ── */

/* Parses textual IR. filename is used in diagnostics and may be NULL. */
eq_status eq_parse(const char *text, const char *filename, eq_program **out);

/* Builds a case-study program from a generator spec:
 *   "fir:case=<1..4>[,taps=N,samples=N,bw=N]"
 *   "systolic:df=<ws|is|os>,ah=N,aw=N,h=N,w=N,fh=N,fw=N,c=N,n=N"
 *   "systolic_input:<same keys>[,stage=<affine|linalg>]"  (pre-lowering form)
 */
eq_status eq_generate(const char *spec, eq_program **out);

eq_status eq_verify(const eq_program *p);
eq_status eq_print(const eq_program *p, char **out_text);

/* Applies a pass pipeline described as JSON: either an array of
 * {"name": ..., "params": {...}} entries or {"passes": [...]}. The program
 * is replaced only if the whole pipeline succeeds. */
eq_status eq_apply_pipeline(eq_program *p, const char *pipeline_json);

/* Newline-separated names of the available passes. */
eq_status eq_pass_names(char **out_text);

/* ── Simulation ── */

/* options_json may be NULL or a JSON object:
 *   {"cycle_limit": N,
 *    "registry": {"ops": {"name": cycles, ...},
 *                 "memories": {"TAG": {"cycles_per_access": N,
 *                                      "read_ports": N, "write_ports": N,
 *                                      "warm_up": N}, ...}}} */
eq_status eq_simulate(const eq_program *p, const char *options_json, eq_result **out);

uint64_t eq_result_total_cycles(const eq_result *r);
uint64_t eq_result_warm_up(const eq_result *r);

/* Chrome-loadable event trace ({"traceEvents": [...]}); byte-deterministic. */
eq_status eq_result_trace_json(const eq_result *r, char **out_text);

/* Profile summary: human-readable text (machine = 0) or stable-keyed JSON
 * (machine = 1; byte-deterministic). */
eq_status eq_result_summary(const eq_result *r, int machine, char **out_text);

/* ── Case-study helpers ── */

/* ceil(D1/A_h) * ceil(D2/A_w) for a "systolic:..." / "systolic_input:..."
 * spec; the loop-iteration count the cycle count scales with. */
eq_status eq_systolic_iterations(const char *spec, uint64_t *out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* EQUEUE_H */
