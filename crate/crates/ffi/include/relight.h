#ifndef RELIGHT_H
#define RELIGHT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call.
 */
typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  /*
   Bad parameters or malformed input data.
   */
  RL_STATUS_INVALID_ARGUMENT = 2,
  /*
   Reading or writing a file failed.
   */
  RL_STATUS_IO = 3,
  /*
   Any other engine failure.
   */
  RL_STATUS_RUNTIME = 4,
  /*
   A bug: the engine panicked. The handle arguments are still valid.
   */
  RL_STATUS_PANIC = 5,
} RlStatus;

/*
 Relighting path for [`rl_relight_hdri`].
 */
typedef enum RlMode {
  /*
   Per-panel OLAT weights.
   */
  RL_MODE_OLAT = 0,
  /*
   Spherical Gaussian fit, K = 15.
   */
  RL_MODE_SG = 1,
} RlMode;

/*
 Lat-long HDR environment.
 */
typedef struct RlEnv RlEnv;

/*
 Linear RGB float image.
 */
typedef struct RlImage RlImage;

/*
 Loaded OLAT stack.
 */
typedef struct RlStack RlStack;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL after a
 successful one. Valid until the next call on the same thread.
 */
const char *rl_last_error(void);

/*
 Engine error class of the last failure (0 when not applicable).
 */
uint32_t rl_last_error_code(void);

/*
 SG sharpness for area-light size code `a` in [0, 1].
 */
enum RlStatus rl_sg_sharpness(double a, double *out);

/*
 Size code whose sharpness is `lambda`, clamped to [0, 1].
 */
enum RlStatus rl_size_from_sharpness(double lambda, double *out);

/*
 Degree-3 real SH coefficients of the normalised direction into `out[16]`.
 */
enum RlStatus rl_sh_encode(double x, double y, double z, double *out);

/*
 Copies `width * height * 3` interleaved RGB floats into a new image.
 */
enum RlStatus rl_image_new(size_t width, size_t height, const float *data, struct RlImage **out);

enum RlStatus rl_image_read_pfm(const char *path, struct RlImage **out);

/*
 Little-endian PFM, written atomically.
 */
enum RlStatus rl_image_write_pfm(const struct RlImage *img, const char *path);

/*
 8-bit sRGB PNG, written atomically.
 */
enum RlStatus rl_image_write_png(const struct RlImage *img, const char *path);

/*
 Width in pixels; 0 for NULL.
 */
size_t rl_image_width(const struct RlImage *img);

size_t rl_image_height(const struct RlImage *img);

/*
 Borrowed pointer to `width * height * 3` floats, row 0 first. Valid
 until the image is freed.
 */
const float *rl_image_data(const struct RlImage *img);

void rl_image_free(struct RlImage *img);

/*
 Loads a stack manifest; relative frame paths resolve against its folder.
 */
enum RlStatus rl_stack_load(const char *manifest, struct RlStack **out);

/*
 Frame count; 0 for NULL.
 */
size_t rl_stack_len(const struct RlStack *stack);

void rl_stack_free(struct RlStack *stack);

/*
 Reads a lat-long PFM (width = 2 × height).
 */
enum RlStatus rl_env_read_pfm(const char *path, struct RlEnv **out);

void rl_env_free(struct RlEnv *env);

/*
 Weighted sum of frames. `weights` holds `3 * n_frames` values, RGB per
 frame in stack order.
 */
enum RlStatus rl_composite(const struct RlStack *stack,
                           const double *weights,
                           size_t n_weights,
                           struct RlImage **out);

/*
 Relights under a light from direction `(x, y, z)` (normalised here) with
 size code `size` in [0, 1]; 0 is a point light, 1 is flat lighting.
 */
enum RlStatus rl_area_light(const struct RlStack *stack,
                            double x,
                            double y,
                            double z,
                            double size,
                            struct RlImage **out);

/*
 Relights under `env` rotated by `rotation` radians about +z.
 */
enum RlStatus rl_relight_hdri(const struct RlStack *stack,
                              const struct RlEnv *env,
                              double rotation,
                              enum RlMode mode,
                              struct RlImage **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELIGHT_H */
