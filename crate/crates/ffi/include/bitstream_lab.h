#ifndef BITSTREAM_LAB_H
#define BITSTREAM_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum BslStatus {
  BSL_STATUS_OK = 0,
  BSL_STATUS_NULL_POINTER = 1,
  BSL_STATUS_INVALID_ARGUMENT = 2,
  BSL_STATUS_BUFFER_TOO_SMALL = 3,
  BSL_STATUS_CONSTRUCTION_INFEASIBLE = 4,
  BSL_STATUS_CORRUPT_INSTANCE = 5,
  BSL_STATUS_DECODE_FAILURE = 6,
  BSL_STATUS_OVERFLOW = 7,
  BSL_STATUS_PANIC = 8,
} BslStatus;

typedef enum BslMode {
  BSL_MODE_CONV = 0,
  BSL_MODE_L2 = 1,
} BslMode;

/*
 Opaque streaming engine.
 */
typedef struct BslStream BslStream;

/*
 One engine output. `finite` is false only for an L2 distance between
 strings with different numbers of ones; `value` is then 0.
 */
typedef struct BslOutput {
  uint64_t value;
  bool finite;
} BslOutput;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 NUL-terminated crate version. Static; do not free.
 */
const char *bsl_version(void);

/*
 Description of the last failure on this thread, or an empty string.
 Valid until the next `bsl_` call on this thread; do not free.
 */
const char *bsl_last_error(void);

/*
 Creates an engine for `pattern` (length `len`). The window starts as all
 zeros. Free with `bsl_stream_free`.
 */
enum BslStatus bsl_stream_new(const uint8_t *pattern,
                              size_t len,
                              enum BslMode mode,
                              struct BslStream **out);

/*
 Feeds one bit (0 or 1) and writes the resulting output.
 */
enum BslStatus bsl_stream_push(struct BslStream *stream, uint8_t bit, struct BslOutput *out);

/*
 Number of bits pushed so far; 0 for a null handle.
 */
uint64_t bsl_stream_arrivals(const struct BslStream *stream);

/*
 Whether the window still holds part of the initial zero fill.
 */
bool bsl_stream_in_warmup(const struct BslStream *stream);

/*
 Releases an engine. Null is ignored.
 */
void bsl_stream_free(struct BslStream *stream);

/*
 L2-rearrangement distance between two bit arrays of length `len`.
 */
enum BslStatus bsl_l2_distance(const uint8_t *a,
                               const uint8_t *b,
                               size_t len,
                               struct BslOutput *out);

/*
 Writes the interval lengths for `n = 2^log_n` into `out` (capacity
 `cap`) and their number into `count`. When `cap` is too small, `count`
 still receives the required size.
 */
enum BslStatus bsl_lengths(uint32_t log_n, uint64_t *out, size_t cap, size_t *count);

/*
 Runs `trials` seeded encode/decode round trips at length `ell` and
 writes how many recovered every even block.
 */
enum BslStatus bsl_recovery_round_trips(size_t ell,
                                        size_t trials,
                                        uint64_t seed,
                                        size_t *successes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BITSTREAM_LAB_H */
