/* C interface to the peergrid network-game solver. */

#ifndef PEERGRID_H
#define PEERGRID_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum PgStatus {
  PgOk = 0,
  PgNullPointer = 1,
  PgInvalidArgument = 2,
  PgAssumptionViolated = 3,
  PgNotSymmetric = 4,
  PgTooLarge = 5,
  PgConfigInvalid = 6,
  PgNumericFailure = 7,
} PgStatus;

/**
 * Standard topologies accepted by `pg_instance_create`.
 */
typedef enum PgTopology {
  PgFullyConnected = 0,
  PgStar = 1,
  PgRing = 2,
} PgTopology;

/**
 * Opaque model instance: network, user parameters, and entity costs.
 */
typedef struct PgInstance PgInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent error on this thread. Valid until the next
 * failing call; never null.
 */
const char *pg_last_error(void);

/**
 * Creates an instance on a standard topology. Arrays `a`, `b`, `gamma`, `c`
 * must each hold `n` values.
 *
 * # Safety
 * All pointers must be valid for `n` reads; `out` must be writable.
 */
enum PgStatus pg_instance_create(enum PgTopology topology,
                                 uintptr_t n,
                                 const double *a,
                                 const double *b,
                                 const double *gamma,
                                 const double *c,
                                 struct PgInstance **out);

/**
 * Creates an instance from a row-major `n x n` interaction matrix.
 *
 * # Safety
 * `weights` must be valid for `n*n` reads; the other pointers for `n` reads;
 * `out` must be writable.
 */
enum PgStatus pg_instance_create_custom(const double *weights,
                                        uintptr_t n,
                                        const double *a,
                                        const double *b,
                                        const double *gamma,
                                        const double *c,
                                        struct PgInstance **out);

/**
 * Frees an instance. Passing null is a no-op.
 *
 * # Safety
 * `instance` must come from a `pg_instance_create*` call and not be freed twice.
 */
void pg_instance_free(struct PgInstance *instance);

/**
 * Number of users in the instance; 0 if `instance` is null.
 *
 * # Safety
 * `instance` must be a live handle or null.
 */
uintptr_t pg_instance_n(const struct PgInstance *instance);

/**
 * Nash equilibrium consumption at the given per-user prices.
 *
 * # Safety
 * `prices` and `out_x` must be valid for `n` reads/writes.
 */
enum PgStatus pg_nash_equilibrium(const struct PgInstance *instance,
                                  const double *prices,
                                  double *out_x);

/**
 * Profit-maximizing individual prices, the resulting consumption, and the
 * entity profit. Any of the out pointers may be null to skip that output.
 *
 * # Safety
 * Non-null out pointers must be valid for `n` writes (`out_profit` for one).
 */
enum PgStatus pg_ppd_prices(const struct PgInstance *instance,
                            double *out_prices,
                            double *out_x,
                            double *out_profit);

/**
 * Profit-maximizing single price under complete information.
 *
 * # Safety
 * Non-null out pointers must be valid for one write (`out_x` for `n`).
 */
enum PgStatus pg_uniform_price(const struct PgInstance *instance,
                               double *out_price,
                               double *out_x,
                               double *out_profit);

/**
 * Socially optimal consumption and the per-user subsidies that restore it.
 *
 * # Safety
 * Non-null out pointers must be valid for `n` writes.
 */
enum PgStatus pg_social_optimum(const struct PgInstance *instance,
                                double *out_x,
                                double *out_subsidies);

/**
 * Exhaustive best size-`m` treatment at a uniform `price`. `out_flags[i]` is
 * 1 when user `i` is treated.
 *
 * # Safety
 * `out_flags` must be valid for `n` writes; `out_profit` for one.
 */
enum PgStatus pg_exact_selection(const struct PgInstance *instance,
                                 double price,
                                 uintptr_t m,
                                 uint64_t cap,
                                 uint8_t *out_flags,
                                 double *out_profit);

/**
 * Deviation-ranking heuristic counterpart of `pg_exact_selection`.
 *
 * # Safety
 * `out_flags` must be valid for `n` writes; `out_profit` for one.
 */
enum PgStatus pg_heuristic_selection(const struct PgInstance *instance,
                                     double price,
                                     uintptr_t m,
                                     double expected_consumption,
                                     uint8_t *out_flags,
                                     double *out_profit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEERGRID_H */
