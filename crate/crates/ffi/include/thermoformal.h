#ifndef THERMOFORMAL_H
#define THERMOFORMAL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TfPotential {
  TF_POTENTIAL_ZERO = 0,
  TF_POTENTIAL_HOLDER = 1,
  TF_POTENTIAL_GEOMETRIC = 2,
} TfPotential;

// Result codes.
typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_ARGUMENT = 2,
  TF_STATUS_CONFIG = 3,
  TF_STATUS_INVALID_MAP = 4,
  TF_STATUS_NUMERICAL = 5,
  TF_STATUS_IO = 6,
  TF_STATUS_PANIC = 7,
} TfStatus;

// A discretized transfer operator and its leading eigendata.
typedef struct TfOperator TfOperator;

// A skew-product system together with its expansion profile.
typedef struct TfSystem TfSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the message of the last failure on this thread into `buf`
// (NUL-terminated, truncated to `len`). Returns the full message length,
// or 0 if there is none.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t tf_last_error(char *buf, size_t len);

// Builds one of the shipped systems: `"linear"` or `"pitchfork"`.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum TfStatus tf_system_new_preset(const char *name, struct TfSystem **out);

// Builds the system described by an INI experiment file's text.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum TfStatus tf_system_from_config(const char *text, struct TfSystem **out);

// # Safety
// `sys` must be null or a pointer from a `tf_system_*` constructor, freed once.
void tf_system_free(struct TfSystem *sys);

// Base dimension, or 0 for a null handle.
//
// # Safety
// `sys` must be null or a live system handle.
size_t tf_system_dim(const struct TfSystem *sys);

// Topological degree of the base map, or 0 for a null handle.
//
// # Safety
// `sys` must be null or a live system handle.
size_t tf_system_degree(const struct TfSystem *sys);

// Fiber contraction rate, or NaN for a null handle.
//
// # Safety
// `sys` must be null or a live system handle.
double tf_system_lambda_s(const struct TfSystem *sys);

// Applies the map once in place. Each array has `dim` entries: base
// coordinates in `[0, 1)` and the real and imaginary fiber parts.
//
// # Safety
// `sys` must be a live handle and each array must hold `dim` doubles.
enum TfStatus tf_system_step(const struct TfSystem *sys,
                             size_t dim,
                             double *base,
                             double *fiber_re,
                             double *fiber_im);

// Discretizes the transfer operator of `kind` on about `n_cells` cells.
//
// # Safety
// `sys` must be a live handle and `out` a valid pointer.
enum TfStatus tf_operator_new(const struct TfSystem *sys,
                              enum TfPotential kind,
                              size_t n_cells,
                              size_t quadrature,
                              uint64_t seed,
                              struct TfOperator **out);

// # Safety
// `op` must be null or a pointer from [`tf_operator_new`], freed once.
void tf_operator_free(struct TfOperator *op);

// Number of cells actually used, or 0 for a null handle.
//
// # Safety
// `op` must be null or a live operator handle.
size_t tf_operator_cells(const struct TfOperator *op);

// Log of the leading eigenvalue.
//
// # Safety
// `op` must be null or a live operator handle.
double tf_operator_pressure(const struct TfOperator *op);

// One minus the ratio of the second to the first eigenvalue modulus.
//
// # Safety
// `op` must be null or a live operator handle.
double tf_operator_spectral_gap(const struct TfOperator *op);

// Runs a subcommand (`verify`, `classify`, `pressure`, `entropy`, `spec`,
// `curve`, `srb`) on INI text, writing artifacts to `out_dir`. On success
// `exit_code` receives 0 (checks pass) or 1 (a check failed).
//
// # Safety
// String arguments must be NUL-terminated and `exit_code` a valid pointer.
enum TfStatus tf_run_command(const char *command,
                             const char *config_text,
                             const char *out_dir,
                             int32_t *exit_code);

// Library version as a static NUL-terminated string.
const char *tf_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THERMOFORMAL_H */
