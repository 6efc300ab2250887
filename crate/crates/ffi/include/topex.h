#ifndef TOPEX_H
#define TOPEX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  TPX_STATUS_OK = 0,
  TPX_STATUS_NULL_ARGUMENT = 1,
  TPX_STATUS_INVALID_UTF8 = 2,
  TPX_STATUS_INVALID_CONFIG = 3,
  TPX_STATUS_IO = 4,
  TPX_STATUS_GEOMETRY = 5,
  TPX_STATUS_BUFFER_TOO_SMALL = 6,
  TPX_STATUS_PANIC = 7,
} TpxStatus;

/**
 * Terminal state of a mission.
 */
typedef enum {
  TPX_MISSION_STATUS_COMPLETE = 0,
  TPX_MISSION_STATUS_BUDGET = 1,
  TPX_MISSION_STATUS_STUCK = 2,
  TPX_MISSION_STATUS_BLOCKED = 3,
  TPX_MISSION_STATUS_EXHAUSTED = 4,
} TpxMissionStatus;

/**
 * Scenario under construction.
 */
typedef struct TpxConfig TpxConfig;

typedef struct TpxMission TpxMission;

typedef struct TpxWorld TpxWorld;

/**
 * Scalar results of a finished mission.
 */
typedef struct {
  TpxMissionStatus status;
  uint64_t ticks;
  double sim_time;
  double final_volume;
  double median_rate;
  double trajectory_length;
  double completion_fraction;
} TpxSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message.
 *
 * # Safety
 * As for any copy-out call: `buf` null or valid for `cap` bytes, `needed`
 * null or writable.
 */
TpxStatus tpx_last_error(char *buf, size_t cap, size_t *needed);

/**
 * New scenario with every key at its default.
 *
 * # Safety
 * `out` must be writable.
 */
TpxStatus tpx_config_new(TpxConfig **out);

/**
 * Scenario parsed from TOML text.
 *
 * # Safety
 * `toml` NUL-terminated; `out` writable.
 */
TpxStatus tpx_config_from_toml(const char *toml, TpxConfig **out);

/**
 * Sets `section.key` to `value`, read as a TOML literal or a bare string.
 *
 * # Safety
 * `cfg` a live handle; `key` and `value` NUL-terminated.
 */
TpxStatus tpx_config_set(TpxConfig *cfg, const char *key, const char *value);

/**
 * Copies the resolved scenario as TOML.
 *
 * # Safety
 * `cfg` a live handle; buffer rules as for [`tpx_last_error`].
 */
TpxStatus tpx_config_to_toml(const TpxConfig *cfg, char *buf, size_t cap, size_t *needed);

/**
 * # Safety
 * `cfg` null or a handle not yet freed.
 */
void tpx_config_free(TpxConfig *cfg);

/**
 * Generates the world described by the scenario's `[world]` table.
 *
 * # Safety
 * `cfg` a live handle; `out` writable.
 */
TpxStatus tpx_world_generate(const TpxConfig *cfg, TpxWorld **out);

/**
 * # Safety
 * `path` NUL-terminated; `out` writable.
 */
TpxStatus tpx_world_load(const char *path, TpxWorld **out);

/**
 * # Safety
 * `world` a live handle; `path` NUL-terminated.
 */
TpxStatus tpx_world_save(const TpxWorld *world, const char *path);

/**
 * Voxel counts per axis and the free-voxel total.
 *
 * # Safety
 * `world` a live handle; `dims` valid for 3 writes; `free` writable.
 */
TpxStatus tpx_world_info(const TpxWorld *world, size_t *dims, size_t *free);

/**
 * # Safety
 * `world` null or a handle not yet freed.
 */
void tpx_world_free(TpxWorld *world);

/**
 * Runs a mission to completion in `world` with the scenario's parameters.
 *
 * # Safety
 * `world` and `cfg` live handles; `out` writable.
 */
TpxStatus tpx_mission_run(const TpxWorld *world, const TpxConfig *cfg, TpxMission **out);

/**
 * # Safety
 * `mission` a live handle; `out` writable.
 */
TpxStatus tpx_mission_summary(const TpxMission *mission, TpxSummary *out);

/**
 * Copies the per-tick CSV log.
 *
 * # Safety
 * `mission` a live handle; buffer rules as for [`tpx_last_error`].
 */
TpxStatus tpx_mission_ticks_csv(const TpxMission *mission, char *buf, size_t cap, size_t *needed);

/**
 * # Safety
 * `mission` null or a handle not yet freed.
 */
void tpx_mission_free(TpxMission *mission);

/**
 * Convex hull volume and centroid of `n` points stored as xyz triples.
 *
 * # Safety
 * `xyz` valid for `3 * n` reads; `volume` writable; `centroid` valid for 3
 * writes.
 */
TpxStatus tpx_hull_volume(const double *xyz, size_t n, double *volume, double *centroid);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPEX_H */
