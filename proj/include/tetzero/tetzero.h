#ifndef TETZERO_H
#define TETZERO_H

/* C interface to the tetzero library: training of tetrahedral-grid SDF
 * networks, exact zero-set extraction, the Marching Cubes baseline and mesh
 * metrics. Objects are opaque handles released with the matching _free call.
 * Every function returning tz_status leaves a message for tz_last_error() on
 * failure (per thread). Strings returned through char** are released with
 * tz_string_free. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define TZ_API __declspec(dllexport)
#else
#define TZ_API __attribute__((visibility("default")))
#endif

typedef enum tz_status {
  TZ_OK = 0,
  TZ_INVALID_ARGUMENT = 1,
  TZ_DOMAIN = 2,
  TZ_SINGULAR = 3,
  TZ_NON_FINITE = 4,
  TZ_IO = 5,
  TZ_BLOW_UP = 6,
  TZ_INTERNAL = 7
} tz_status;

typedef struct tz_config tz_config;
typedef struct tz_model tz_model;
typedef struct tz_mesh tz_mesh;

TZ_API const char* tz_version(void);
TZ_API const char* tz_last_error(void);
TZ_API const char* tz_status_name(tz_status s);
TZ_API void tz_string_free(char* s);

/* ---- run configuration ---- */
TZ_API tz_status tz_config_default(tz_config** out);
TZ_API tz_status tz_config_load(const char* path, tz_config** out);
TZ_API tz_status tz_config_from_json(const char* text, tz_config** out);
/* Keys: preset, shape, precondition (true/false), seed, epochs, samples,
 * widths (comma list), out_dir, lambda_eik, batch. */
TZ_API tz_status tz_config_set(tz_config* c, const char* key, const char* value);
TZ_API tz_status tz_config_to_json(const tz_config* c, char** out);
TZ_API void tz_config_free(tz_config* c);

/* ---- model ---- */
TZ_API tz_status tz_model_create(const tz_config* c, tz_model** out);
TZ_API tz_status tz_model_load(const char* path, tz_model** out);
/* Writes path and the sidecar path + ".json". */
TZ_API tz_status tz_model_save(const tz_model* m, const char* path);
TZ_API tz_status tz_model_eval(const tz_model* m, const double* xyz, size_t n, double* out);
/* losses[3] = final epoch L1, eikonal, total. log_csv may be NULL. */
TZ_API tz_status tz_model_train(tz_model* m, const tz_config* c, const char* log_csv, double* losses);
TZ_API void tz_model_free(tz_model* m);

/* ---- meshes ---- */
/* Exact extraction. cache_dir may be NULL; report_json may be NULL. */
TZ_API tz_status tz_extract(const tz_model* m, const tz_config* c, const char* cache_dir, tz_mesh** out,
                            char** report_json);
/* Marching Cubes of the network over its scene box, `resolution` cells per axis. */
TZ_API tz_status tz_mc_model(const tz_model* m, int resolution, tz_mesh** out);
/* Marching Cubes of the configured analytic shape over the configured box. */
TZ_API tz_status tz_mc_shape(const tz_config* c, int resolution, tz_mesh** out);
TZ_API tz_status tz_mesh_load(const char* path, tz_mesh** out);
/* Format from the extension: .obj or .ply. */
TZ_API tz_status tz_mesh_save(const tz_mesh* m, const char* path);
TZ_API size_t tz_mesh_vertex_count(const tz_mesh* m);
TZ_API size_t tz_mesh_triangle_count(const tz_mesh* m);
/* xyz triples into out (3 * vertex_count doubles). */
TZ_API tz_status tz_mesh_vertices(const tz_mesh* m, double* out);
/* Index triples into out (3 * triangle_count). */
TZ_API tz_status tz_mesh_triangles(const tz_mesh* m, uint32_t* out);
/* counts[4] = edges, boundary, non-manifold, misoriented. */
TZ_API tz_status tz_mesh_topology(const tz_mesh* m, size_t* counts);
TZ_API void tz_mesh_free(tz_mesh* m);

/* ---- metrics ---- */
TZ_API tz_status tz_chamfer(const tz_mesh* a, const tz_mesh* b, size_t samples, uint64_t seed, double* cd);
/* out[3] = SSDF, VSDF, AD (degrees). */
TZ_API tz_status tz_self_consistency(const tz_mesh* mesh, const tz_model* m, size_t samples, uint64_t seed,
                                     double* out);

/* ---- reports ---- */
/* One CSV row (with header) for the configured grid. */
TZ_API tz_status tz_skeleton_report(const tz_config* c, const char* cache_dir, char** csv);
TZ_API tz_status tz_precond_report(char** csv);

#ifdef __cplusplus
}
#endif

#endif
