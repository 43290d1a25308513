#ifndef SLABSUM_H
#define SLABSUM_H

#include <stddef.h>
#include <stdint.h>

// Result of every call.
typedef enum SlabsumStatus {
  SLABSUM_STATUS_OK = 0,
  // A required pointer was null.
  SLABSUM_STATUS_NULL_POINTER = 1,
  // Malformed text or an argument out of range.
  SLABSUM_STATUS_INVALID_ARGUMENT = 2,
  // Instance data violated an invariant.
  SLABSUM_STATUS_INVALID_INSTANCE = 3,
  // A configured cap would be exceeded.
  SLABSUM_STATUS_RESOURCE = 4,
  // The output buffer is too small; the required length was written.
  SLABSUM_STATUS_BUFFER_TOO_SMALL = 5,
  // Internal failure (a caught panic).
  SLABSUM_STATUS_INTERNAL = 6,
} SlabsumStatus;

// Which alternative a verdict holds.
typedef enum SlabsumVerdictKind {
  SLABSUM_VERDICT_KIND_EMPTY_INNER = 0,
  SLABSUM_VERDICT_KIND_VERTEX_FOUND = 1,
} SlabsumVerdictKind;

// Opaque partition instance.
typedef struct SlabsumInstance SlabsumInstance;

// Opaque slab verdict.
typedef struct SlabsumVerdict SlabsumVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *slabsum_last_error(void);

// Parses a partition instance file.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SlabsumStatus slabsum_instance_from_json(const char *json, struct SlabsumInstance **out);

// Builds a partition instance from `len` machine-word weights.
//
// # Safety
// `weights` must point to `len` readable values; `out` must be writable.
enum SlabsumStatus slabsum_instance_from_weights(const uint64_t *weights,
                                                 size_t len,
                                                 struct SlabsumInstance **out);

// Number of weights, or 0 for a null handle.
//
// # Safety
// `inst` must be null or a live handle.
size_t slabsum_instance_len(const struct SlabsumInstance *inst);

// # Safety
// `inst` must be null or a handle not yet freed.
void slabsum_instance_free(struct SlabsumInstance *inst);

// Slab decision at `N = n^c`.
//
// # Safety
// `inst` must be a live handle; `out` must be writable.
enum SlabsumStatus slabsum_decide(const struct SlabsumInstance *inst,
                                  uint32_t c,
                                  struct SlabsumVerdict **out);

// Slab decision at accuracy `epsilon ∈ (0, 1)`.
//
// # Safety
// `inst` must be a live handle; `out` must be writable.
enum SlabsumStatus slabsum_solve_epsilon(const struct SlabsumInstance *inst,
                                         double epsilon,
                                         struct SlabsumVerdict **out);

// # Safety
// `v` must be a live handle.
enum SlabsumVerdictKind slabsum_verdict_kind(const struct SlabsumVerdict *v);

// 1 when the certificate check failed, else 0.
//
// # Safety
// `v` must be null or a live handle.
int32_t slabsum_verdict_anomaly(const struct SlabsumVerdict *v);

// Relative error of the found vertex, or NaN for an empty-inner verdict.
//
// # Safety
// `v` must be null or a live handle.
double slabsum_verdict_rel_error(const struct SlabsumVerdict *v);

// Copies the found vertex into `buf`. `len` receives the vertex length
// (0 for an empty-inner verdict) even when `cap` is too small.
//
// # Safety
// `v` must be a live handle, `buf` writable for `cap` bytes, `len` writable.
enum SlabsumStatus slabsum_verdict_vertex(const struct SlabsumVerdict *v,
                                          uint8_t *buf,
                                          size_t cap,
                                          size_t *len);

// Verdict as JSON; release with [`slabsum_string_free`].
//
// # Safety
// `v` must be a live handle; `out` must be writable.
enum SlabsumStatus slabsum_verdict_to_json(const struct SlabsumVerdict *v, char **out);

// # Safety
// `v` must be null or a handle not yet freed.
void slabsum_verdict_free(struct SlabsumVerdict *v);

// Runs the simultaneous subset-sum search on an instance file with
// default options and writes the result JSON to `out`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SlabsumStatus slabsum_solve_sssp_json(const char *json, char **out);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void slabsum_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLABSUM_H */
