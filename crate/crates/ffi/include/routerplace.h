#ifndef ROUTERPLACE_H
#define ROUTERPLACE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum RpStatus {
  RP_STATUS_OK = 0,
  RP_STATUS_NULL_POINTER = 1,
  RP_STATUS_INVALID_UTF8 = 2,
  RP_STATUS_PARSE = 3,
  RP_STATUS_VALIDATION = 4,
  RP_STATUS_RUNTIME = 5,
  RP_STATUS_BUFFER_TOO_SMALL = 6,
  RP_STATUS_PANIC = 7,
} RpStatus;

/**
 * Node role as reported by [`rp_scenario_node_role`].
 */
typedef enum RpRole {
  RP_ROLE_TRANSMITTER = 0,
  RP_ROLE_RECEIVER = 1,
  RP_ROLE_ROBOT = 2,
} RpRole;

/**
 * Opaque scenario handle.
 */
typedef struct RpScenario RpScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *rp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rp_version(void);

/**
 * Parses a scenario from TOML text. `*out` is set to a new handle on
 * success and to null otherwise.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RpStatus rp_scenario_from_toml(const char *toml, struct RpScenario **out);

/**
 * Loads a scenario from a file path or shipped scenario name.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RpStatus rp_scenario_load(const char *source, struct RpScenario **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void rp_scenario_free(struct RpScenario *s);

/**
 * Number of nodes; ids run from 1 to this count.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum RpStatus rp_scenario_node_count(const struct RpScenario *s, size_t *out);

/**
 * Number of flows.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum RpStatus rp_scenario_flow_count(const struct RpScenario *s, size_t *out);

/**
 * Total number of links over all flows.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum RpStatus rp_scenario_link_count(const struct RpScenario *s, size_t *out);

/**
 * Role of a node.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum RpStatus rp_scenario_node_role(const struct RpScenario *s, uint32_t node, enum RpRole *out);

/**
 * Current position of a node.
 *
 * # Safety
 * `s` must be a live handle; `x` and `y` must be valid pointers.
 */
enum RpStatus rp_scenario_get_position(const struct RpScenario *s,
                                       uint32_t node,
                                       double *x,
                                       double *y);

/**
 * Moves a node in the current state.
 *
 * # Safety
 * `s` must be a live handle.
 */
enum RpStatus rp_scenario_set_position(struct RpScenario *s, uint32_t node, double x, double y);

/**
 * Restores the scenario's initial positions.
 *
 * # Safety
 * `s` must be a live handle.
 */
enum RpStatus rp_scenario_reset(struct RpScenario *s);

/**
 * Minimum link SINR over all flows in the current state.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum RpStatus rp_scenario_global_cost(const struct RpScenario *s, double *out);

/**
 * Writes every link SINR, flow by flow in link order, into `buf`.
 * `*written` receives the link count; if `cap` is smaller nothing is
 * written and `BufferTooSmall` is returned.
 *
 * # Safety
 * `s` must be a live handle, `buf` must hold `cap` doubles (or be null when
 * `cap` is 0) and `written` must be a valid pointer.
 */
enum RpStatus rp_scenario_link_sinrs(const struct RpScenario *s,
                                     double *buf,
                                     size_t cap,
                                     size_t *written);

/**
 * Anneals from the current state and replaces it with the best state found.
 * `iterations` of 0 keeps the scenario's schedule length.
 *
 * # Safety
 * `s` must be a live handle; `cost` may be null.
 */
enum RpStatus rp_scenario_anneal(struct RpScenario *s,
                                 uint64_t seed,
                                 uint64_t iterations,
                                 double *cost);

/**
 * Runs the distributed controller from the current state and replaces it
 * with the final state. `max_iterations` of 0 keeps the scenario's cap.
 *
 * # Safety
 * `s` must be a live handle; `cost` may be null.
 */
enum RpStatus rp_scenario_run_distributed(struct RpScenario *s,
                                          uint64_t seed,
                                          uint64_t max_iterations,
                                          double *cost);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROUTERPLACE_H */
