#ifndef QTUBE_QTUBE_H
#define QTUBE_QTUBE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(QTUBE_BUILDING)
#    define QTUBE_API __declspec(dllexport)
#  else
#    define QTUBE_API __declspec(dllimport)
#  endif
#else
#  define QTUBE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qtube_status {
  QTUBE_OK = 0,
  QTUBE_E_INVALID_INPUT = 1,
  QTUBE_E_DEGENERATE_SPECTRUM = 2,
  QTUBE_E_NUMERICAL = 3,
  QTUBE_E_CONTRACT = 4,
  QTUBE_E_RESOLUTION = 5,
  QTUBE_E_MUST_PROJECT = 6,
  QTUBE_E_INCONCLUSIVE = 7,
  QTUBE_E_FREE_LINE = 8,
  QTUBE_E_IO = 9,
  QTUBE_E_INTERNAL = 100
} qtube_status;

/* Opaque handles; every *_free accepts NULL. */
typedef struct qtube_config qtube_config;
typedef struct qtube_section qtube_section;
typedef struct qtube_potential qtube_potential;

QTUBE_API const char* qtube_version(void);
/* Message of the last failure on the calling thread; "" after success. */
QTUBE_API const char* qtube_last_error(void);
/* 0 for QTUBE_OK, 2 for numerical failures, 1 for everything else. */
QTUBE_API int qtube_exit_code(qtube_status status);

/* Study configuration and runs. */
QTUBE_API qtube_status qtube_config_from_text(const char* text, qtube_config** out);
QTUBE_API qtube_status qtube_config_from_file(const char* path, qtube_config** out);
QTUBE_API qtube_status qtube_config_from_preset(const char* name, qtube_config** out);
QTUBE_API qtube_status qtube_config_set(qtube_config* cfg, const char* key, const char* value);
/* Copies the canonical text (NUL-terminated, truncated to cap) and stores its full length. */
QTUBE_API qtube_status qtube_config_canonical(const qtube_config* cfg, char* buf, size_t cap,
                                              size_t* length);
QTUBE_API qtube_status qtube_config_hash(const qtube_config* cfg, uint64_t* hash);
QTUBE_API void qtube_config_free(qtube_config* cfg);

QTUBE_API size_t qtube_preset_count(void);
QTUBE_API const char* qtube_preset_name(size_t index);

/* command NULL or "" takes study.command from the config. Nothing is written on failure.
   summary (may be NULL) receives a one-line description, truncated to cap. */
QTUBE_API qtube_status qtube_run(const char* command, const qtube_config* cfg, const char* out_dir,
                                 char* summary, size_t cap);

/* Cross section: plain numeric shape text such as "disc 1" or "rectangle 3 2". */
QTUBE_API qtube_status qtube_section_build(const char* shape, double h, int modes,
                                           qtube_section** out);
QTUBE_API qtube_status qtube_section_size(const qtube_section* s, size_t* nodes);
QTUBE_API qtube_status qtube_section_eigenvalue(const qtube_section* s, int k, double* lambda);
QTUBE_API qtube_status qtube_section_twist_coefficient(const qtube_section* s, int k, double* c_n);
QTUBE_API qtube_status qtube_section_is_simple(const qtube_section* s, int k, int* simple);
QTUBE_API void qtube_section_free(qtube_section* s);

/* Piecewise-constant potential on [s0, s0 + cells h]. */
QTUBE_API qtube_status qtube_potential_from_cells(const double* values, size_t cells, double s0,
                                                  double h, qtube_potential** out);
QTUBE_API qtube_status qtube_potential_square_well(double depth, double halfwidth, int cells,
                                                   qtube_potential** out);
QTUBE_API qtube_status qtube_potential_scale(const qtube_potential* base, double delta,
                                             qtube_potential** out);
QTUBE_API qtube_status qtube_resonance(const qtube_potential* v, int* resonant, double* exit_slope);

typedef enum qtube_vertex_kind {
  QTUBE_VERTEX_DIRICHLET = 0,
  QTUBE_VERTEX_SCALED_COUPLING = 1,
  QTUBE_VERTEX_FREE = 2
} qtube_vertex_kind;

/* c1, c2 are set to 0 unless the kind is QTUBE_VERTEX_SCALED_COUPLING. */
QTUBE_API qtube_status qtube_limit_operator(const qtube_potential* v, qtube_vertex_kind* kind,
                                            double* c1, double* c2);
/* r and t as {re, im}. */
QTUBE_API qtube_status qtube_scattering(const qtube_potential* v, double k, double r[2],
                                        double t[2]);
QTUBE_API void qtube_potential_free(qtube_potential* v);

#ifdef __cplusplus
}
#endif

#endif
