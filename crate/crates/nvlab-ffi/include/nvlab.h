#ifndef NVLAB_H
#define NVLAB_H

/* Generated by cbindgen from crates/nvlab-ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NvRegion {
  NV_REGION_INTERIOR = 0,
  NV_REGION_BOUNDARY_REGULAR = 1,
  NV_REGION_BOUNDARY_CUSP = 2,
  NV_REGION_EXTERIOR = 3,
} NvRegion;

typedef enum NvStatus {
  NV_STATUS_OK = 0,
  NV_STATUS_NULL_POINTER = 1,
  NV_STATUS_INVALID_ARGUMENT = 2,
  NV_STATUS_CONFIG = 3,
  NV_STATUS_NO_CONVERGENCE = 4,
  NV_STATUS_NUMERICAL = 5,
  NV_STATUS_PANIC = 6,
} NvStatus;

/**
 * Opaque handle holding scattering data and numerical settings.
 */
typedef struct NvLab NvLab;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; valid until the next call.
 */
const char *nv_last_error(void);

const char *nv_version(void);

/**
 * Bump-family data with amplitude c and width w; null on invalid input.
 */
struct NvLab *nv_lab_new(double c, double width);

/**
 * Handle from a JSON run configuration; null on error.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string.
 */
struct NvLab *nv_lab_from_json(const char *json);

/**
 * # Safety
 * `lab` must come from `nv_lab_new`/`nv_lab_from_json` and not be freed twice.
 */
void nv_lab_free(struct NvLab *lab);

/**
 * Roots ξ₀..ξ₂ as (re, im) pairs into `roots[6]`, multiplicities into `mult[3]`.
 *
 * # Safety
 * `roots` must hold 6 doubles and `mult` 3 bytes.
 */
enum NvStatus nv_solve_cubic(double u_re, double u_im, double *roots, uint8_t *mult);

/**
 * Region class of u. `param[2]` receives (φ, 0) on the regular boundary,
 * (k, 0) at a cusp and (ω, φ) outside.
 *
 * # Safety
 * `region` must be valid and `param` must hold 2 doubles.
 */
enum NvStatus nv_classify(double u_re, double u_im, enum NvRegion *region, double *param);

/**
 * S(u, ζ).
 *
 * # Safety
 * `out` must be valid.
 */
enum NvStatus nv_phase(double u_re, double u_im, double zeta_re, double zeta_im, double *out);

/**
 * I(t, z) and J(t, z) for f = b, written as (re, im) pairs into `out[4]`.
 *
 * # Safety
 * `lab` must be a live handle and `out` must hold 4 doubles.
 */
enum NvStatus nv_lab_linear(const struct NvLab *lab,
                            double t,
                            double z_re,
                            double z_im,
                            double *out);

/**
 * Reconstructed v(z, t) into `out[2]`; `iterations` may be null.
 *
 * # Safety
 * `lab` must be a live handle and `out` must hold 2 doubles.
 */
enum NvStatus nv_lab_reconstruct_v(const struct NvLab *lab,
                                   double z_re,
                                   double z_im,
                                   double t,
                                   double *out,
                                   uint32_t *iterations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NVLAB_H */
