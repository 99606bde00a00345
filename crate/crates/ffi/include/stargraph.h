#ifndef STARGRAPH_H
#define STARGRAPH_H

/* Generated by cbindgen; edit the Rust source instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every FFI call.
typedef enum SgStatus {
  SgOk = 0,
  // A required pointer argument was null.
  SgNullPointer = 1,
  // A string argument was not valid UTF-8.
  SgInvalidUtf8 = 2,
  // An argument was out of range (index, class count, ...).
  SgInvalidArgument = 3,
  // The file could not be read or parsed.
  SgDataError = 4,
  // The operation itself failed.
  SgRuntimeError = 5,
} SgStatus;

// Opaque dataset handle.
typedef struct SgDataset SgDataset;

// Opaque model handle; keeps the graph recipe recorded in the checkpoint.
typedef struct SgModel SgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. The pointer stays
// valid until the next FFI call from the same thread; never free it.
const char *sg_last_error_message(void);

// Loads a `.jsonl` / `.jsonl.gz` dataset from disk.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SgStatus sg_dataset_load(const char *path, struct SgDataset **out);

// Generates the builtin synthetic 4-class dataset.
//
// # Safety
// `out` must be a valid pointer.
enum SgStatus sg_dataset_generate_synth4(uint64_t seed, size_t n_per_class, struct SgDataset **out);

// Number of sequences.
//
// # Safety
// `ds` must be a live handle from this library, `out` a valid pointer.
enum SgStatus sg_dataset_len(const struct SgDataset *ds, size_t *out);

// Number of classes.
//
// # Safety
// `ds` must be a live handle from this library, `out` a valid pointer.
enum SgStatus sg_dataset_classes(const struct SgDataset *ds, size_t *out);

// Label of the sequence at `index`.
//
// # Safety
// `ds` must be a live handle from this library, `out` a valid pointer.
enum SgStatus sg_dataset_label(const struct SgDataset *ds, size_t index, size_t *out);

// Releases a dataset handle; a null pointer is a no-op.
//
// # Safety
// `ds` must be a handle from this library, not yet freed.
void sg_dataset_free(struct SgDataset *ds);

// Loads a checkpoint written by `stargraph train`. The graph recipe
// recorded inside is used for every prediction.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SgStatus sg_model_load(const char *path, struct SgModel **out);

// Number of output classes of a loaded model.
//
// # Safety
// `model` must be a live handle from this library, `out` a valid pointer.
enum SgStatus sg_model_classes(const struct SgModel *model, size_t *out);

// Classifies the dataset sequence at `index`. Writes the argmax class to
// `out_class` and, if `out_probs` is non-null, the full softmax
// distribution to `out_probs[0..classes]`.
//
// # Safety
// `model` and `ds` must be live handles from this library; `out_class`
// must be valid; `out_probs`, when non-null, must have room for one f64
// per class.
enum SgStatus sg_model_predict(const struct SgModel *model,
                               const struct SgDataset *ds,
                               size_t index,
                               size_t *out_class,
                               double *out_probs);

// Overall accuracy of the model over an entire dataset.
//
// # Safety
// `model` and `ds` must be live handles from this library, `out_accuracy`
// a valid pointer.
enum SgStatus sg_model_evaluate(const struct SgModel *model,
                                const struct SgDataset *ds,
                                double *out_accuracy);

// Releases a model handle; a null pointer is a no-op.
//
// # Safety
// `model` must be a handle from this library, not yet freed.
void sg_model_free(struct SgModel *model);

// ABI version of this header/library pair.
int sg_abi_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STARGRAPH_H */
