#ifndef IFYOT_H
#define IFYOT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Error codes returned by every fallible call. */
#define IFYOT_OK 0
#define IFYOT_ERR_CONFIG 2  /* invalid configuration or arguments */
#define IFYOT_ERR_IO 3      /* filesystem failure */
#define IFYOT_ERR_RUNTIME 4 /* numerical failure (diverged solve) */
#define IFYOT_ERR_HANDLE 5  /* null handle, or accessor before a solve */

/* Message for the most recent failure on the calling thread; never NULL. */
const char* ifyot_last_error(void);

/* Config-driven experiment pipeline; the CLI is a thin shell over these.
   run writes results.csv, summary.json and (optionally) plots/ under the
   config's output_dir. Returns IFYOT_OK, IFYOT_ERR_CONFIG or IFYOT_ERR_IO. */
int ifyot_run_config(const char* config_path);
int ifyot_validate_config(const char* config_path);
int ifyot_plot(const char* csv_path, const char* plot_spec_path);

/* Entropic unbalanced transport between weighted point clouds, solved by
   the alternating dual fixed point. Arrays are row-major: points are
   n x dim, the cost is n x m. Divergence specs are strings: "balanced",
   "kl:RHO", "range:LO,HI". */
typedef struct ifyot_uot ifyot_uot;

ifyot_uot* ifyot_uot_create(size_t n, size_t m, size_t dim,
                            const double* alpha_points,
                            const double* alpha_weights, double alpha_mass,
                            const double* beta_points,
                            const double* beta_weights, double beta_mass,
                            const double* cost, double eta, const char* div1,
                            const char* div2);
void ifyot_uot_free(ifyot_uot* handle);

/* Iterates until the fixed-point residual falls below tol;
   IFYOT_ERR_RUNTIME when max_iter is exhausted first. */
int ifyot_uot_solve(ifyot_uot* handle, double tol, int max_iter);

/* Valid after a successful solve. value is the primal optimum, mass the
   total coupling mass; f and g receive n and m dual entries; density
   receives the n x m coupling density (row-major) with respect to the
   product of the marginals. */
int ifyot_uot_value(const ifyot_uot* handle, double* value);
int ifyot_uot_mass(const ifyot_uot* handle, double* mass);
int ifyot_uot_residual(const ifyot_uot* handle, double* residual);
int ifyot_uot_iterations(const ifyot_uot* handle, int* iterations);
int ifyot_uot_potentials(const ifyot_uot* handle, double* f, double* g);
int ifyot_uot_coupling(const ifyot_uot* handle, double* density);

#ifdef __cplusplus
}
#endif

#endif
