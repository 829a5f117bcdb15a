#ifndef PLANCEGIS_H
#define PLANCEGIS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PlcStatus {
  PLC_STATUS_OK = 0,
  PLC_STATUS_NULL_ARGUMENT = 1,
  PLC_STATUS_INVALID_UTF8 = 2,
  PLC_STATUS_PARSE_ERROR = 3,
  PLC_STATUS_INCONSISTENT_INIT = 4,
  // The plan is valid, so there is no counterexample to return.
  PLC_STATUS_NO_COUNTEREXAMPLE = 5,
  PLC_STATUS_SOLVE_ERROR = 6,
  PLC_STATUS_INTERNAL = 7,
} PlcStatus;

typedef enum PlcSemantics {
  PLC_SEMANTICS_STRICT = 0,
  PLC_SEMANTICS_APPENDIX = 1,
} PlcSemantics;

typedef enum PlcFrame {
  PLC_FRAME_CORRECTED = 0,
  PLC_FRAME_LITERAL_APPENDIX = 1,
} PlcFrame;

// A parsed plan.
typedef struct PlcPlan PlcPlan;

// A parsed problem.
typedef struct PlcProblem PlcProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses a problem file's text.
//
// # Safety
// `text` must be a valid NUL-terminated string; `out` must be writable.
enum PlcStatus plc_problem_parse(const char *text, struct PlcProblem **out);

// # Safety
// `problem` must come from [`plc_problem_parse`] and not be freed twice.
void plc_problem_free(struct PlcProblem *problem);

// Number of objects in the problem; 0 for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
size_t plc_problem_block_count(const struct PlcProblem *problem);

// Parses `START-PLAN`/`END-PLAN` text against the problem's objects.
//
// # Safety
// `problem` must be a live handle, `text` a NUL-terminated string, `out` writable.
enum PlcStatus plc_plan_parse(const struct PlcProblem *problem,
                              const char *text,
                              struct PlcPlan **out);

// # Safety
// `plan` must come from this library and not be freed twice.
void plc_plan_free(struct PlcPlan *plan);

// Number of actions; 0 for a null handle.
//
// # Safety
// `plan` must be null or a live handle.
size_t plc_plan_len(const struct PlcPlan *plan);

// The plan in `START-PLAN` format.
//
// # Safety
// `plan` must be a live handle; `out` writable.
enum PlcStatus plc_plan_to_string(const struct PlcPlan *plan, char **out);

// Verifies `plan`. Sets `*out_valid` to 1 or 0 and, when `out_json` is not
// null, stores the verdict as JSON
// (`{status, failing_step, violated, missing_atoms, prefix}`).
//
// # Safety
// Handles must be live; `out_valid` writable; `out_json` null or writable.
enum PlcStatus plc_verify(const struct PlcProblem *problem,
                          const struct PlcPlan *plan,
                          enum PlcSemantics semantics,
                          int32_t *out_valid,
                          char **out_json);

// The rendered counterexample: the minimal infeasible prefix in plan
// format, or the missing goal atoms. Returns `NoCounterexample` for a
// valid plan.
//
// # Safety
// Handles must be live; `out` writable.
enum PlcStatus plc_minimal_prefix(const struct PlcProblem *problem,
                                  const struct PlcPlan *plan,
                                  enum PlcSemantics semantics,
                                  char **out);

// SMT-LIB2 verification query under strict semantics.
//
// # Safety
// Handles must be live; `out` writable.
enum PlcStatus plc_emit_smtlib(const struct PlcProblem *problem,
                               const struct PlcPlan *plan,
                               enum PlcFrame frame,
                               char **out);

// A valid plan from the built-in unstack-and-rebuild solver.
//
// # Safety
// `problem` must be live; `out` writable.
enum PlcStatus plc_reference_solve(const struct PlcProblem *problem, struct PlcPlan **out);

// # Safety
// `s` must be null or a string returned by this library, freed once.
void plc_string_free(char *s);

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next library call on the same thread.
const char *plc_last_error_message(void);

// Library version as a static string.
const char *plc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLANCEGIS_H */
