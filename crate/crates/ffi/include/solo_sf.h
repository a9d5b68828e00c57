/* Generated by cbindgen; do not edit. */

#ifndef SOLO_SF_H
#define SOLO_SF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsfWindow {
  SSF_WINDOW_HANN = 0,
  SSF_WINDOW_HAMMING = 1,
  SSF_WINDOW_RECTANGULAR = 2,
} SsfWindow;

typedef enum SsfStatus {
  SSF_STATUS_OK = 0,
  SSF_STATUS_NULL_POINTER = 1,
  SSF_STATUS_INVALID_ARGUMENT = 2,
  SSF_STATUS_SHAPE_MISMATCH = 3,
  SSF_STATUS_INPUT_TOO_SHORT = 4,
  SSF_STATUS_DEGENERATE = 5,
  SSF_STATUS_IO = 6,
  SSF_STATUS_PANIC = 7,
} SsfStatus;

typedef enum SsfStrategy {
  SSF_STRATEGY_RANDOM = 0,
  SSF_STRATEGY_MAX = 1,
  SSF_STRATEGY_COMPOSE = 2,
} SsfStrategy;

typedef enum SsfAggregation {
  SSF_AGGREGATION_MEAN = 0,
  SSF_AGGREGATION_SUM = 1,
} SsfAggregation;

typedef struct SsfFeatureMap SsfFeatureMap;

typedef struct SsfKernel SsfKernel;

typedef struct SsfSpectrogram SsfSpectrogram;

typedef struct SsfStftConfig {
  uintptr_t window_len;
  uintptr_t hop;
  uintptr_t fft_size;
  enum SsfWindow window;
  uint32_t sample_rate;
  double sound_speed;
} SsfStftConfig;

/*
 Microphone pairs reduced by spatial features. `pairs` holds `count`
 `(m1, m2)` index pairs; a null `pairs` selects every pair.
 */
typedef struct SsfPairs {
  const uintptr_t *pairs;
  uintptr_t count;
  enum SsfAggregation aggregation;
} SsfPairs;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Last error message on this thread; empty after a successful call. The
 pointer stays valid until the next `ssf_*` call on the same thread.
 */
const char *ssf_last_error(void);

/*
 400-sample Hann window, 160 hop, 512-point FFT at 16 kHz, c = 343 m/s.
 */
struct SsfStftConfig ssf_stft_config_default(void);

/*
 STFT of `channels x len` samples.

 # Safety
 `samples` must hold `channels * len` doubles; `config` and `out` must be
 valid pointers.
 */
enum SsfStatus ssf_stft(const double *samples,
                        uintptr_t channels,
                        uintptr_t len,
                        const struct SsfStftConfig *config,
                        struct SsfSpectrogram **out);

/*
 # Safety
 `spec` must be a live spectrogram handle; output pointers may be null.
 */
enum SsfStatus ssf_spectrogram_shape(const struct SsfSpectrogram *spec,
                                     uintptr_t *frames,
                                     uintptr_t *bins,
                                     uintptr_t *channels);

/*
 Copies `[T x F x M]` complex values as interleaved `(re, im)` into `out`,
 which must hold `len >= 2 * T * F * M` doubles.

 # Safety
 `spec` must be a live handle and `out` must hold `len` doubles.
 */
enum SsfStatus ssf_spectrogram_copy(const struct SsfSpectrogram *spec, double *out, uintptr_t len);

/*
 # Safety
 `spec` must be null or a handle not yet freed.
 */
void ssf_spectrogram_free(struct SsfSpectrogram *spec);

/*
 Selects a `k`-frame kernel from the STFT of a solo recording.

 # Safety
 `solo` must be a live handle and `out` a valid pointer.
 */
enum SsfStatus ssf_select_kernel(const struct SsfSpectrogram *solo,
                                 uintptr_t k,
                                 enum SsfStrategy strategy,
                                 uint64_t seed,
                                 uintptr_t ref_channel,
                                 struct SsfKernel **out);

/*
 Kernel from the first `k` STFT frames of a `mics x len` impulse response.

 # Safety
 `taps` must hold `mics * len` doubles; `config` and `out` must be valid.
 */
enum SsfStatus ssf_kernel_from_rir(const double *taps,
                                   uintptr_t mics,
                                   uintptr_t len,
                                   const struct SsfStftConfig *config,
                                   uintptr_t k,
                                   struct SsfKernel **out);

/*
 # Safety
 `kernel` must be a live handle; output pointers may be null.
 */
enum SsfStatus ssf_kernel_shape(const struct SsfKernel *kernel,
                                uintptr_t *frames,
                                uintptr_t *bins,
                                uintptr_t *channels);

/*
 Copies `[K x F x M]` complex values as interleaved `(re, im)`.

 # Safety
 `kernel` must be a live handle and `out` must hold `len` doubles.
 */
enum SsfStatus ssf_kernel_copy(const struct SsfKernel *kernel, double *out, uintptr_t len);

/*
 # Safety
 `kernel` must be null or a handle not yet freed.
 */
void ssf_kernel_free(struct SsfKernel *kernel);

/*
 Solo-SF of mixture `y` against a kernel selected from a solo part.

 # Safety
 Handles must be live; `pairs` and `out` must be valid pointers.
 */
enum SsfStatus ssf_solo_sf(const struct SsfSpectrogram *y,
                           const struct SsfKernel *kernel,
                           const struct SsfPairs *pairs,
                           struct SsfFeatureMap **out);

/*
 RIR-SF of mixture `y` against a kernel from [`ssf_kernel_from_rir`].

 # Safety
 Handles must be live; `pairs` and `out` must be valid pointers.
 */
enum SsfStatus ssf_rir_sf(const struct SsfSpectrogram *y,
                          const struct SsfKernel *kernel,
                          const struct SsfPairs *pairs,
                          struct SsfFeatureMap **out);

/*
 Log power spectrum of one channel.

 # Safety
 `y` must be a live handle and `out` a valid pointer.
 */
enum SsfStatus ssf_lps(const struct SsfSpectrogram *y,
                       uintptr_t ref_channel,
                       struct SsfFeatureMap **out);

/*
 `[LPS | SF]` side by side, `[T x 2F]`.

 # Safety
 Handles must be live and `out` a valid pointer.
 */
enum SsfStatus ssf_composite(const struct SsfFeatureMap *lps_map,
                             const struct SsfFeatureMap *sf_map,
                             struct SsfFeatureMap **out);

/*
 # Safety
 `map` must be a live handle; output pointers may be null.
 */
enum SsfStatus ssf_feature_shape(const struct SsfFeatureMap *map, uintptr_t *rows, uintptr_t *cols);

/*
 Copies the row-major `[rows x cols]` map into `out`.

 # Safety
 `map` must be a live handle and `out` must hold `len` doubles.
 */
enum SsfStatus ssf_feature_copy(const struct SsfFeatureMap *map, double *out, uintptr_t len);

/*
 Writes the map as a binary tensor file.

 # Safety
 `map` must be a live handle and `path` a NUL-terminated UTF-8 string.
 */
enum SsfStatus ssf_feature_save(const struct SsfFeatureMap *map, const char *path);

/*
 # Safety
 `map` must be null or a handle not yet freed.
 */
void ssf_feature_free(struct SsfFeatureMap *map);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOLO_SF_H */
