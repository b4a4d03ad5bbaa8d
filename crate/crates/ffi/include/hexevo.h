#ifndef HEXEVO_H
#define HEXEVO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HexevoStatus {
  HEXEVO_STATUS_OK = 0,
  HEXEVO_STATUS_NULL_POINTER = 1,
  HEXEVO_STATUS_INVALID_ARGUMENT = 2,
  HEXEVO_STATUS_PARSE = 3,
  HEXEVO_STATUS_BUFFER_TOO_SMALL = 4,
  HEXEVO_STATUS_SIMULATION = 5,
  HEXEVO_STATUS_INTERNAL = 6,
} HexevoStatus;

/*
 Opaque genotype.
 */
typedef struct HexevoGenotype HexevoGenotype;

/*
 Opaque decoded body.
 */
typedef struct HexevoPhenotype HexevoPhenotype;

/*
 Rigid-body state, world frame, ZYX Euler angles.
 */
typedef struct HexevoState {
  double position[3];
  double velocity[3];
  double attitude[3];
  double body_rates[3];
  double rotor_speeds[6];
} HexevoState;

/*
 Learning-curve descriptors; `speed` is NaN when undefined.
 */
typedef struct HexevoDescriptors {
  uint64_t t_b;
  uint64_t t_c;
  double speed;
  double r_max;
  double volatility;
} HexevoDescriptors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. Valid until the next
 failing call on the same thread.
 */
const char *hexevo_last_error(void);

/*
 Library version as a static string.
 */
const char *hexevo_version(void);

/*
 The regular hexacopter.
 */
enum HexevoStatus hexevo_genotype_baseline(struct HexevoGenotype **out);

/*
 Random repaired genotype drawn from `seed`.
 */
enum HexevoStatus hexevo_genotype_random(uint64_t seed, struct HexevoGenotype **out);

/*
 Parses a genotype record (JSON, NUL-terminated UTF-8).
 */
enum HexevoStatus hexevo_genotype_from_json(const char *json, struct HexevoGenotype **out);

/*
 Writes the genotype record into `buf` with a terminating NUL. `needed`
 receives the size including the NUL; when `len` is smaller nothing is
 written and `BufferTooSmall` returned. `buf` may be null to query.
 */
enum HexevoStatus hexevo_genotype_to_json(const struct HexevoGenotype *g,
                                          char *buf,
                                          size_t len,
                                          size_t *needed);

/*
 The six parameters of one arm: length, arm polar, arm azimuth, motor
 polar, motor azimuth, spin.
 */
enum HexevoStatus hexevo_genotype_arm(const struct HexevoGenotype *g, size_t arm, double *out);

/*
 One point mutation followed by repair, drawn from `seed`.
 */
enum HexevoStatus hexevo_genotype_mutate(const struct HexevoGenotype *g,
                                         uint64_t seed,
                                         struct HexevoGenotype **out);

void hexevo_genotype_free(struct HexevoGenotype *g);

/*
 Minimum-cost arm matching distance between two genotypes.
 */
enum HexevoStatus hexevo_edit_distance(const struct HexevoGenotype *a,
                                       const struct HexevoGenotype *b,
                                       double *out);

/*
 Central and bilateral symmetry residuals of the motor layout.
 */
enum HexevoStatus hexevo_symmetry(const struct HexevoGenotype *g, double *ces, double *bis);

enum HexevoStatus hexevo_phenotype_decode(const struct HexevoGenotype *g,
                                          struct HexevoPhenotype **out);

void hexevo_phenotype_free(struct HexevoPhenotype *p);

/*
 Force and moment effectiveness, each 3×6 row-major (18 doubles).
 */
enum HexevoStatus hexevo_phenotype_effectiveness(const struct HexevoPhenotype *p,
                                                 double *force,
                                                 double *moment);

/*
 Total mass and the 3×3 inertia tensor, row-major.
 */
enum HexevoStatus hexevo_phenotype_mass(const struct HexevoPhenotype *p,
                                        double *mass,
                                        double *inertia);

/*
 Static hover test with commands in [0, 1]. `u_hat` (6 doubles) receives
 the minimum-effort hover command, zeros when infeasible.
 */
enum HexevoStatus hexevo_hover_check(const struct HexevoPhenotype *p,
                                     double tolerance,
                                     bool *feasible,
                                     double *u_hat);

/*
 Advances `state` in place by one step under `command` (6 doubles).
 */
enum HexevoStatus hexevo_sim_step(const struct HexevoPhenotype *p,
                                  struct HexevoState *state,
                                  const double *command);

/*
 Descriptors of `n` episode rewards smoothed with a median window.
 */
enum HexevoStatus hexevo_learning_descriptors(const double *rewards,
                                              size_t n,
                                              size_t window,
                                              struct HexevoDescriptors *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEXEVO_H */
