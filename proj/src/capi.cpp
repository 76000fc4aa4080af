#include "ifyot.h"

#include <functional>
#include <string>

#include "ifyot/divergences.h"
#include "ifyot/experiments.h"
#include "ifyot/forward_uot.h"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& message) { g_last_error = message; }

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ifyot::ConfigError& e) {
    set_error(e.what());
    return IFYOT_ERR_CONFIG;
  } catch (const ifyot::InvalidInput& e) {
    set_error(e.what());
    return IFYOT_ERR_CONFIG;
  } catch (const ifyot::IoError& e) {
    set_error(e.what());
    return IFYOT_ERR_IO;
  } catch (const std::exception& e) {
    set_error(e.what());
    return IFYOT_ERR_RUNTIME;
  }
}

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

struct ifyot_uot {
  ifyot::UotProblem prob;
  ifyot::SinkhornResult result;
  double value = 0.0;
  double mass = 0.0;
  bool solved = false;
};

extern "C" {

const char* ifyot_last_error(void) { return g_last_error.c_str(); }

int ifyot_run_config(const char* config_path) {
  if (!config_path) {
    set_error("config_path is null");
    return IFYOT_ERR_CONFIG;
  }
  std::string message;
  int code = ifyot::run_config_file(config_path, &message);
  if (code != 0) set_error(message);
  return code;
}

int ifyot_validate_config(const char* config_path) {
  if (!config_path) {
    set_error("config_path is null");
    return IFYOT_ERR_CONFIG;
  }
  std::string message;
  int code = ifyot::validate_config_file(config_path, &message);
  if (code != 0) set_error(message);
  return code;
}

int ifyot_plot(const char* csv_path, const char* plot_spec_path) {
  if (!csv_path || !plot_spec_path) {
    set_error("plot paths must be non-null");
    return IFYOT_ERR_CONFIG;
  }
  std::string message;
  int code = ifyot::plot_file(csv_path, plot_spec_path, &message);
  if (code != 0) set_error(message);
  return code;
}

ifyot_uot* ifyot_uot_create(size_t n, size_t m, size_t dim,
                            const double* alpha_points,
                            const double* alpha_weights, double alpha_mass,
                            const double* beta_points,
                            const double* beta_weights, double beta_mass,
                            const double* cost, double eta, const char* div1,
                            const char* div2) {
  ifyot_uot* handle = nullptr;
  int code = guarded([&]() {
    if (n == 0 || m == 0 || dim == 0)
      throw ifyot::InvalidInput("ifyot_uot_create: n, m, dim must be >= 1");
    if (!alpha_points || !alpha_weights || !beta_points || !beta_weights ||
        !cost || !div1 || !div2)
      throw ifyot::InvalidInput("ifyot_uot_create: null array or spec");
    const auto ni = static_cast<ifyot::Index>(n);
    const auto mi = static_cast<ifyot::Index>(m);
    const auto di = static_cast<ifyot::Index>(dim);
    ifyot::UotProblem prob;
    prob.alpha = ifyot::DiscreteMeasure(
        Eigen::Map<const RowMajor>(alpha_points, ni, di),
        Eigen::Map<const ifyot::Vector>(alpha_weights, ni), alpha_mass);
    prob.beta = ifyot::DiscreteMeasure(
        Eigen::Map<const RowMajor>(beta_points, mi, di),
        Eigen::Map<const ifyot::Vector>(beta_weights, mi), beta_mass);
    prob.cost = Eigen::Map<const RowMajor>(cost, ni, mi);
    prob.eta = eta;
    prob.div1 = ifyot::PhiDivergence::parse(div1);
    prob.div2 = ifyot::PhiDivergence::parse(div2);
    prob.validate();
    handle = new ifyot_uot{std::move(prob), {}, 0.0, 0.0, false};
    return IFYOT_OK;
  });
  (void)code;
  return handle;
}

void ifyot_uot_free(ifyot_uot* handle) { delete handle; }

int ifyot_uot_solve(ifyot_uot* handle, double tol, int max_iter) {
  if (!handle) {
    set_error("ifyot_uot_solve: null handle");
    return IFYOT_ERR_HANDLE;
  }
  return guarded([&]() {
    if (!(tol > 0.0) || max_iter < 1)
      throw ifyot::InvalidInput("ifyot_uot_solve: need tol > 0, max_iter >= 1");
    ifyot::SinkhornOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    handle->result = ifyot::solve_sinkhorn(handle->prob, opts);
    if (handle->result.status != ifyot::SinkhornStatus::Converged) {
      handle->solved = false;
      set_error("ifyot_uot_solve: residual " +
                std::to_string(handle->result.residual) + " after " +
                std::to_string(handle->result.iterations) + " iterations");
      return IFYOT_ERR_RUNTIME;
    }
    ifyot::Coupling coup =
        ifyot::primal_from_dual(handle->prob, handle->result.potentials);
    handle->value =
        -ifyot::dual_objective(handle->prob, handle->result.potentials) +
        handle->prob.eta * handle->prob.alpha.mass * handle->prob.beta.mass;
    handle->mass = coup.mass;
    handle->solved = true;
    return IFYOT_OK;
  });
}

namespace {

int solved_or_error(const ifyot_uot* handle) {
  if (!handle) {
    set_error("null handle");
    return IFYOT_ERR_HANDLE;
  }
  if (!handle->solved) {
    set_error("handle has no successful solve");
    return IFYOT_ERR_HANDLE;
  }
  return IFYOT_OK;
}

}  // namespace

int ifyot_uot_value(const ifyot_uot* handle, double* value) {
  int code = solved_or_error(handle);
  if (code != IFYOT_OK) return code;
  if (!value) {
    set_error("ifyot_uot_value: null output");
    return IFYOT_ERR_CONFIG;
  }
  *value = handle->value;
  return IFYOT_OK;
}

int ifyot_uot_mass(const ifyot_uot* handle, double* mass) {
  int code = solved_or_error(handle);
  if (code != IFYOT_OK) return code;
  if (!mass) {
    set_error("ifyot_uot_mass: null output");
    return IFYOT_ERR_CONFIG;
  }
  *mass = handle->mass;
  return IFYOT_OK;
}

int ifyot_uot_residual(const ifyot_uot* handle, double* residual) {
  int code = solved_or_error(handle);
  if (code != IFYOT_OK) return code;
  if (!residual) {
    set_error("ifyot_uot_residual: null output");
    return IFYOT_ERR_CONFIG;
  }
  *residual = handle->result.residual;
  return IFYOT_OK;
}

int ifyot_uot_iterations(const ifyot_uot* handle, int* iterations) {
  int code = solved_or_error(handle);
  if (code != IFYOT_OK) return code;
  if (!iterations) {
    set_error("ifyot_uot_iterations: null output");
    return IFYOT_ERR_CONFIG;
  }
  *iterations = handle->result.iterations;
  return IFYOT_OK;
}

int ifyot_uot_potentials(const ifyot_uot* handle, double* f, double* g) {
  int code = solved_or_error(handle);
  if (code != IFYOT_OK) return code;
  if (!f || !g) {
    set_error("ifyot_uot_potentials: null output");
    return IFYOT_ERR_CONFIG;
  }
  Eigen::Map<ifyot::Vector>(f, handle->prob.n()) = handle->result.potentials.f;
  Eigen::Map<ifyot::Vector>(g, handle->prob.m()) = handle->result.potentials.g;
  return IFYOT_OK;
}

int ifyot_uot_coupling(const ifyot_uot* handle, double* density) {
  int code = solved_or_error(handle);
  if (code != IFYOT_OK) return code;
  if (!density) {
    set_error("ifyot_uot_coupling: null output");
    return IFYOT_ERR_CONFIG;
  }
  return guarded([&]() {
    ifyot::Coupling coup =
        ifyot::primal_from_dual(handle->prob, handle->result.potentials);
    Eigen::Map<RowMajor>(density, handle->prob.n(), handle->prob.m()) =
        coup.density;
    return IFYOT_OK;
  });
}

}  // extern "C"
