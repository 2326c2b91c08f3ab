#ifndef MAPFCAP_H
#define MAPFCAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MapfStatus {
  MAPF_STATUS_OK = 0,
  MAPF_STATUS_NULL_POINTER = 1,
  MAPF_STATUS_INVALID_UTF8 = 2,
  MAPF_STATUS_PARSE_ERROR = 3,
  MAPF_STATUS_INVALID_INSTANCE = 4,
  MAPF_STATUS_IO = 5,
  MAPF_STATUS_OUT_OF_RANGE = 6,
  /**
   * The timeout expired before an optimal plan was found.
   */
  MAPF_STATUS_TIMEOUT = 7,
  /**
   * No plan exists up to the cost ceiling.
   */
  MAPF_STATUS_NO_SOLUTION = 8,
  /**
   * Some agent cannot reach its goal.
   */
  MAPF_STATUS_UNREACHABLE = 9,
  MAPF_STATUS_INTERNAL = 10,
  MAPF_STATUS_PANIC = 11,
} MapfStatus;

typedef enum MapfSolver {
  MAPF_SOLVER_EAGER = 0,
  MAPF_SOLVER_LAZY = 1,
} MapfSolver;

/**
 * Opaque instance handle.
 */
typedef struct MapfInstance MapfInstance;

/**
 * Opaque result of a successful solve.
 */
typedef struct MapfReport MapfReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *mapf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mapf_version(void);

/**
 * Builds an instance from movingai map and scenario text. `capacity_text`
 * may be null, in which case every vertex gets `uniform_capacity`.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum MapfStatus mapf_instance_from_text(const char *map_text,
                                        const char *scen_text,
                                        const char *capacity_text,
                                        uint32_t uniform_capacity,
                                        size_t agents,
                                        struct MapfInstance **out);

/**
 * Same as [`mapf_instance_from_text`] with file paths. `capacity_path` may be null.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum MapfStatus mapf_instance_from_files(const char *map_path,
                                         const char *scen_path,
                                         const char *capacity_path,
                                         uint32_t uniform_capacity,
                                         size_t agents,
                                         struct MapfInstance **out);

/**
 * Random instance on an open grid with uniform capacity; a pure function of its arguments.
 *
 * # Safety
 * `out` must be writable.
 */
enum MapfStatus mapf_instance_generate(size_t width,
                                       size_t height,
                                       size_t agents,
                                       uint32_t capacity,
                                       uint64_t seed,
                                       struct MapfInstance **out);

/**
 * # Safety
 * `instance` must be null or a handle from this library not yet freed.
 */
void mapf_instance_free(struct MapfInstance *instance);

/**
 * Number of agents, or 0 for a null handle.
 *
 * # Safety
 * `instance` must be null or a live handle.
 */
size_t mapf_instance_agent_count(const struct MapfInstance *instance);

/**
 * Number of vertices, or 0 for a null handle.
 *
 * # Safety
 * `instance` must be null or a live handle.
 */
size_t mapf_instance_vertex_count(const struct MapfInstance *instance);

/**
 * Computes a sum-of-costs optimal plan. A non-positive `timeout_seconds`
 * means no limit. On success `*out` receives a report handle.
 *
 * # Safety
 * `instance` must be a live handle; `out` must be writable.
 */
enum MapfStatus mapf_solve(const struct MapfInstance *instance,
                           enum MapfSolver solver,
                           double timeout_seconds,
                           bool no_follow,
                           struct MapfReport **out);

/**
 * # Safety
 * `report` must be null or a handle from this library not yet freed.
 */
void mapf_report_free(struct MapfReport *report);

/**
 * Optimal sum-of-costs, or 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
uint64_t mapf_report_cost(const struct MapfReport *report);

/**
 * Number of configurations in the plan (makespan + 1), or 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t mapf_report_steps(const struct MapfReport *report);

/**
 * Conflict clauses added by the lazy solver (0 for the eager solver).
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t mapf_report_refinements(const struct MapfReport *report);

/**
 * Writes the vertex of `agent` at time `t` to `*vertex`.
 *
 * # Safety
 * `report` must be a live handle; `vertex` must be writable.
 */
enum MapfStatus mapf_report_position(const struct MapfReport *report,
                                     size_t agent,
                                     size_t t,
                                     size_t *vertex);

/**
 * Plan in the text format of the command-line tool. Release with [`mapf_string_free`].
 *
 * # Safety
 * `report` must be null or a live handle.
 */
char *mapf_report_plan_text(const struct MapfReport *report);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void mapf_string_free(char *s);

/**
 * Checks a plan in text format; `*violations` receives the number of rule violations.
 *
 * # Safety
 * `instance` must be a live handle; `plan_text` NUL-terminated; `violations` writable.
 */
enum MapfStatus mapf_validate_plan(const struct MapfInstance *instance,
                                   const char *plan_text,
                                   bool no_follow,
                                   size_t *violations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAPFCAP_H */
