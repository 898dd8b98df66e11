#ifndef CRITMETRO_H
#define CRITMETRO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Axis bits for parameter selection.
 */
#define CM_AXIS_X 1

#define CM_AXIS_Y 2

#define CM_AXIS_Z 4

typedef enum {
  CM_OK = 0,
  CM_NULL_POINTER = 1,
  CM_INVALID_ARGUMENT = 2,
  CM_SIZE_CAP = 3,
  /**
   * Solver, fit or loop failure.
   */
  CM_NUMERICAL = 4,
  /**
   * The requested quantity is undefined here (e.g. singular F).
   */
  CM_UNDEFINED = 5,
  CM_BUFFER_TOO_SMALL = 6,
  CM_PANIC = 7,
} CmStatus;

typedef enum {
  CM_FERRO_ISING = 0,
  CM_ANTIFERRO_ISING = 1,
  CM_XY_CHAIN = 2,
} CmModelKind;

typedef enum {
  CM_FIDELITY_BARGMANN = 0,
  CM_EXACT_ROTATION = 1,
} CmMethod;

typedef struct CmModel CmModel;

typedef struct CmTensors CmTensors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on this thread.
 */
const char *cm_last_error(void);

/**
 * Create a model. `h` (three reals) is read for the Ising kinds and may be
 * null for the XY chain; `gamma` and `lambda` are read for the XY chain.
 *
 * # Safety
 * `h` is null or points to 3 readable doubles; `out` is a valid pointer.
 */
CmStatus cm_model_new(CmModelKind kind,
                      size_t n,
                      const double *h,
                      double gamma,
                      double lambda,
                      CmModel **out);

/**
 * # Safety
 * `model` is null or was returned by `cm_model_new` and not yet freed.
 */
void cm_model_free(CmModel *model);

/**
 * Ground-state energy and gap by exact diagonalization.
 *
 * # Safety
 * `model` is a live handle; `e0` and `gap` are valid pointers.
 */
CmStatus cm_ground_energy(const CmModel *model, double *e0, double *gap);

/**
 * F, U and quantumness at `point` for the axes in `axis_mask`. For Ising
 * chains `point` is the field; for the XY chain it is the rotation angle.
 *
 * # Safety
 * `model` is a live handle; `point` points to 3 readable doubles; `out` is valid.
 */
CmStatus cm_metro_point(const CmModel *model,
                        const double *point,
                        uint32_t axis_mask,
                        CmMethod method,
                        CmTensors **out);

/**
 * XY-chain rotation tensors for all three angles by free fermions.
 *
 * # Safety
 * `out` is a valid pointer.
 */
CmStatus cm_xy_rotation(size_t n, double gamma, double lambda, CmTensors **out);

/**
 * # Safety
 * `t` is null or was returned by this library and not yet freed.
 */
void cm_tensors_free(CmTensors *t);

/**
 * Number of parameters p; F and U are p×p.
 *
 * # Safety
 * `t` is a live handle or null (yielding 0).
 */
size_t cm_tensors_dim(const CmTensors *t);

/**
 * Copy F, row-major, into `buf` (at least p² doubles).
 *
 * # Safety
 * `t` is a live handle; `buf` points to `len` writable doubles.
 */
CmStatus cm_tensors_f(const CmTensors *t, double *buf, size_t len);

/**
 * Copy U, row-major, into `buf` (at least p² doubles).
 *
 * # Safety
 * `t` is a live handle; `buf` points to `len` writable doubles.
 */
CmStatus cm_tensors_u(const CmTensors *t, double *buf, size_t len);

/**
 * Quantumness over all parameters of the handle; `CM_UNDEFINED` when F is
 * singular or too ill-conditioned.
 *
 * # Safety
 * `t` is a live handle; `r` is a valid pointer.
 */
CmStatus cm_tensors_r_full(const CmTensors *t, double *r);

/**
 * Quantumness of the parameter pair (i, j), indices into the handle's axes.
 *
 * # Safety
 * `t` is a live handle; `r` is a valid pointer.
 */
CmStatus cm_tensors_r_pair(const CmTensors *t, size_t i, size_t j, double *r);

/**
 * R = ‖2iF⁻¹U‖ for caller-supplied row-major p×p tensors.
 *
 * # Safety
 * `f` and `u` point to p² readable doubles; `r` is a valid pointer.
 */
CmStatus cm_quantumness(size_t p, const double *f, const double *u, double *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRITMETRO_H */
