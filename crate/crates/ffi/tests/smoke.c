#include <stdio.h>
#include <string.h>
#include "plancegis.h"

static const char *PROBLEM =
    "(define (problem p)(:domain blocksworld-4ops)(:objects b1 b2)"
    "(:init (arm-empty)(on b1 b2)(on-table b2)(clear b1))"
    "(:goal (and (on b2 b1))))";

int main(void) {
    PlcProblem *problem = NULL;
    PlcPlan *plan = NULL;
    char *json = NULL;
    int32_t valid = -1;

    if (plc_problem_parse(PROBLEM, &problem) != PLC_STATUS_OK) return 1;
    if (plc_reference_solve(problem, &plan) != PLC_STATUS_OK) return 2;
    if (plc_verify(problem, plan, PLC_SEMANTICS_STRICT, &valid, &json) != PLC_STATUS_OK) return 3;
    if (valid != 1 || strstr(json, "\"valid\"") == NULL) return 4;
    plc_string_free(json);
    plc_plan_free(plan);

    if (plc_plan_parse(problem, "START-PLAN\n1. pick-up b2\nEND-PLAN", &plan) != PLC_STATUS_OK) return 5;
    char *prefix = NULL;
    if (plc_minimal_prefix(problem, plan, PLC_SEMANTICS_STRICT, &prefix) != PLC_STATUS_OK) return 6;
    printf("%s\n", prefix);
    plc_string_free(prefix);
    plc_plan_free(plan);

    if (plc_problem_parse("(define", &problem) != PLC_STATUS_PARSE_ERROR) return 7;
    if (plc_last_error_message() == NULL) return 8;
    plc_problem_free(NULL);
    printf("ok %s\n", plc_version());
    return 0;
}
