#ifndef PREHEAT_FFI_H
#define PREHEAT_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a fallible call. Codes 2 to 4 match the command-line exit codes.
 */
typedef enum PreheatStatus {
  PREHEAT_STATUS_OK = 0,
  /**
   * A required pointer was NULL or a string was not valid UTF-8.
   */
  PREHEAT_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Unreadable, malformed or out-of-domain input.
   */
  PREHEAT_STATUS_INPUT = 2,
  /**
   * No control meets the arrival targets.
   */
  PREHEAT_STATUS_INFEASIBLE = 3,
  /**
   * Numerical failure: grid too coarse, power infeasible, broken trajectory.
   */
  PREHEAT_STATUS_NUMERICAL = 4,
  /**
   * Unexpected internal failure.
   */
  PREHEAT_STATUS_INTERNAL = 5,
} PreheatStatus;

/**
 * Vehicle parameters, DP grid, cycle column defaults and scenario.
 */
typedef struct PreheatConfig PreheatConfig;

typedef struct PreheatCycle PreheatCycle;

typedef struct PreheatDp PreheatDp;

typedef struct PreheatPlan PreheatPlan;

/**
 * Initial state and arrival targets used by `preheat_plan` and `preheat_dp_solve`.
 */
typedef struct PreheatScenario {
  double soc0;
  double tb0_c;
  double soc_target;
  double tb_target_c;
} PreheatScenario;

typedef struct PreheatGrid {
  size_t n_soc;
  size_t n_tb;
  size_t n_u;
} PreheatGrid;

typedef struct PreheatState {
  double soc;
  double tb_c;
} PreheatState;

typedef struct PreheatBreakdown {
  double p_terminal_w;
  double p_battery_w;
  double current_a;
  double q_joule_w;
  double q_ed_w;
  double q_leak_w;
  bool limit_violation;
} PreheatBreakdown;

/**
 * Energy totals over a trajectory, watt-hours.
 */
typedef struct PreheatEnergy {
  double joule_heating_wh;
  double ed_heating_wh;
  double hvch_battery_heating_wh;
  double ambient_leakage_wh;
  double hvch_cabin_wh;
  double aux_wh;
  double prop_wh;
  double total_battery_wh;
} PreheatEnergy;

typedef struct PreheatPlanSummary {
  /**
   * Step at which the heater switches on, 0-based; equal to the step count when it never does.
   */
  size_t splice_index;
  double switch_time_s;
  bool feasible;
  struct PreheatState terminal;
  struct PreheatEnergy energy;
} PreheatPlanSummary;

typedef struct PreheatDpSummary {
  double cost_wh;
  double predicted_cost_wh;
  double bellman_max_residual_wh;
  size_t best_effort_steps;
  size_t switch_index;
  struct PreheatState terminal;
  struct PreheatEnergy energy;
} PreheatDpSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Kind tag of the last failure on this thread (for example `"grid_too_coarse"`), or NULL.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *preheat_last_error_kind(void);

/**
 * Message of the last failure on this thread, or NULL.
 */
const char *preheat_last_error_message(void);

const char *preheat_version(void);

/**
 * Shipped defaults.
 */
enum PreheatStatus preheat_config_default(struct PreheatConfig **out);

/**
 * Load a TOML config file.
 */
enum PreheatStatus preheat_config_load(const char *path, struct PreheatConfig **out);

/**
 * Parse TOML config text. Relative limit CSV paths resolve against
 * `base_dir`, or the working directory when it is NULL.
 */
enum PreheatStatus preheat_config_parse(const char *toml,
                                        const char *base_dir,
                                        struct PreheatConfig **out);

void preheat_config_free(struct PreheatConfig *config);

enum PreheatStatus preheat_config_get_scenario(const struct PreheatConfig *config,
                                               struct PreheatScenario *out);

enum PreheatStatus preheat_config_set_scenario(struct PreheatConfig *config,
                                               struct PreheatScenario scenario);

enum PreheatStatus preheat_config_get_grid(const struct PreheatConfig *config,
                                           struct PreheatGrid *out);

enum PreheatStatus preheat_config_set_grid(struct PreheatConfig *config, struct PreheatGrid grid);

/**
 * Load a cycle CSV; missing optional columns take the config's cycle defaults.
 */
enum PreheatStatus preheat_cycle_load(const struct PreheatConfig *config,
                                      const char *path,
                                      struct PreheatCycle **out);

/**
 * The seeded one-hour synthetic cycle; seed 7 is the preset.
 */
enum PreheatStatus preheat_cycle_synth(const struct PreheatConfig *config,
                                       uint64_t seed,
                                       struct PreheatCycle **out);

/**
 * Number of steps, or 0 for NULL.
 */
size_t preheat_cycle_steps(const struct PreheatCycle *cycle);

/**
 * Sample interval in seconds, or NaN for NULL.
 */
double preheat_cycle_dt(const struct PreheatCycle *cycle);

void preheat_cycle_free(struct PreheatCycle *cycle);

/**
 * One forward step over cycle sample `k`. `out_breakdown` may be NULL.
 */
enum PreheatStatus preheat_step_forward(const struct PreheatConfig *config,
                                        const struct PreheatCycle *cycle,
                                        struct PreheatState state,
                                        double p_hvch_batt_w,
                                        size_t k,
                                        struct PreheatState *out_state,
                                        struct PreheatBreakdown *out_breakdown);

/**
 * One reverse step over cycle sample `k`, from the state after it.
 */
enum PreheatStatus preheat_step_backward(const struct PreheatConfig *config,
                                         const struct PreheatCycle *cycle,
                                         struct PreheatState state_next,
                                         double p_hvch_batt_w,
                                         size_t k,
                                         struct PreheatState *out_state,
                                         struct PreheatBreakdown *out_breakdown);

/**
 * Sweep planner on the config's scenario. An unreachable target still
 * succeeds with `feasible == false` in the summary.
 */
enum PreheatStatus preheat_plan(const struct PreheatConfig *config,
                                const struct PreheatCycle *cycle,
                                struct PreheatPlan **out);

enum PreheatStatus preheat_plan_summary(const struct PreheatPlan *plan,
                                        struct PreheatPlanSummary *out);

/**
 * Copies up to `cap` states into `buf` (which may be NULL) and returns the
 * number of states, one more than the step count. Returns 0 for a NULL plan.
 */
size_t preheat_plan_states(const struct PreheatPlan *plan, struct PreheatState *buf, size_t cap);

/**
 * Heater power to the battery per step, watts. Same buffer rules as the states.
 */
size_t preheat_plan_controls(const struct PreheatPlan *plan, double *buf, size_t cap);

void preheat_plan_free(struct PreheatPlan *plan);

/**
 * Dynamic-programming reference solution on the config's scenario and grid.
 */
enum PreheatStatus preheat_dp_solve(const struct PreheatConfig *config,
                                    const struct PreheatCycle *cycle,
                                    struct PreheatDp **out);

enum PreheatStatus preheat_dp_summary(const struct PreheatDp *dp, struct PreheatDpSummary *out);

size_t preheat_dp_states(const struct PreheatDp *dp, struct PreheatState *buf, size_t cap);

size_t preheat_dp_controls(const struct PreheatDp *dp, double *buf, size_t cap);

void preheat_dp_free(struct PreheatDp *dp);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PREHEAT_FFI_H */
