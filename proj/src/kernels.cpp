#include "wcto/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace wcto::kernels {

namespace scalar_impl {

void law_inverse_eval(const double* delta, std::size_t n, double a, double b,
                      double* E, double* dE, double* d2E) {
  for (std::size_t i = 0; i < n; ++i) {
    const double e = 1.0 / (a + b * delta[i]);
    if (E) E[i] = e;
    if (dE) dE[i] = -b * e * e;
    if (d2E) d2E[i] = 2.0 * b * b * e * e * e;
  }
}

void law_ramp_eval(const double* delta, std::size_t n, double E0, double ED,
                   double q, double* E, double* dE, double* d2E) {
  const double s = E0 - ED;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = 1.0 / (1.0 + q * delta[i]);
    if (E) E[i] = ED + (1.0 - delta[i]) * s * r;
    if (dE) dE[i] = -s * (1.0 + q) * r * r;
    if (d2E) d2E[i] = 2.0 * s * q * (1.0 + q) * r * r * r;
  }
}

void barrier_terms(const double* delta, std::size_t n, double* b1, double* b2) {
  for (std::size_t i = 0; i < n; ++i) {
    const double inv_lo = 1.0 / delta[i];
    const double inv_hi = 1.0 / (1.0 - delta[i]);
    if (b1) b1[i] = inv_lo - inv_hi;
    if (b2) b2[i] = inv_lo * inv_lo + inv_hi * inv_hi;
  }
}

inline void kmul(const double* Khat, const double* uloc, double* w) {
  for (int i = 0; i < 8; ++i) {
    double acc = 0.0;
    const double* row = Khat + 8 * i;
    for (int j = 0; j < 8; ++j) acc += row[j] * uloc[j];
    w[i] = acc;
  }
}

void element_energies(const double* u, const std::int32_t* dofs, std::size_t n,
                      const double* Khat, double* energy) {
  double uloc[8], w[8];
  for (std::size_t e = 0; e < n; ++e) {
    const std::int32_t* d = dofs + 8 * e;
    for (int i = 0; i < 8; ++i) uloc[i] = u[d[i]];
    kmul(Khat, uloc, w);
    double acc = 0.0;
    for (int i = 0; i < 8; ++i) acc += uloc[i] * w[i];
    energy[e] = acc;
  }
}

void element_apply_dot(const double* u, const double* y, const std::int32_t* dofs,
                       std::size_t n, const double* Khat, double* out) {
  double uloc[8], w[8];
  for (std::size_t e = 0; e < n; ++e) {
    const std::int32_t* d = dofs + 8 * e;
    for (int i = 0; i < 8; ++i) uloc[i] = u[d[i]];
    kmul(Khat, uloc, w);
    double acc = 0.0;
    for (int i = 0; i < 8; ++i) acc += w[i] * y[d[i]];
    out[e] = acc;
  }
}

void element_scatter_add(const double* u, const std::int32_t* dofs, std::size_t n,
                         const double* Khat, const double* c, double* out) {
  double uloc[8], w[8];
  for (std::size_t e = 0; e < n; ++e) {
    const std::int32_t* d = dofs + 8 * e;
    for (int i = 0; i < 8; ++i) uloc[i] = u[d[i]];
    kmul(Khat, uloc, w);
    const double ce = c[e];
    for (int i = 0; i < 8; ++i) out[d[i]] += ce * w[i];
  }
}

}  // namespace scalar_impl

#ifdef WCTO_BUILD_AVX2
namespace avx2_impl {
void law_inverse_eval(const double*, std::size_t, double, double, double*, double*, double*);
void law_ramp_eval(const double*, std::size_t, double, double, double, double*, double*, double*);
void barrier_terms(const double*, std::size_t, double*, double*);
void element_energies(const double*, const std::int32_t*, std::size_t, const double*, double*);
void element_apply_dot(const double*, const double*, const std::int32_t*, std::size_t,
                       const double*, double*);
void element_scatter_add(const double*, const std::int32_t*, std::size_t, const double*,
                         const double*, double*);
}  // namespace avx2_impl
#endif

namespace {

struct Dispatch {
  void (*law_inverse)(const double*, std::size_t, double, double, double*, double*, double*);
  void (*law_ramp)(const double*, std::size_t, double, double, double, double*, double*, double*);
  void (*barrier)(const double*, std::size_t, double*, double*);
  void (*energies)(const double*, const std::int32_t*, std::size_t, const double*, double*);
  void (*apply_dot)(const double*, const double*, const std::int32_t*, std::size_t,
                    const double*, double*);
  void (*scatter_add)(const double*, const std::int32_t*, std::size_t, const double*,
                      const double*, double*);
};

constexpr Dispatch kScalar{scalar_impl::law_inverse_eval, scalar_impl::law_ramp_eval,
                           scalar_impl::barrier_terms,    scalar_impl::element_energies,
                           scalar_impl::element_apply_dot, scalar_impl::element_scatter_add};
#ifdef WCTO_BUILD_AVX2
constexpr Dispatch kAvx2{avx2_impl::law_inverse_eval, avx2_impl::law_ramp_eval,
                         avx2_impl::barrier_terms,    avx2_impl::element_energies,
                         avx2_impl::element_apply_dot, avx2_impl::element_scatter_add};
#endif

struct State {
  Backend backend;
  const Dispatch* table;
  State() {
    backend = Backend::scalar;
    table = &kScalar;
    if (backend_available(Backend::avx2)) {
      backend = Backend::avx2;
#ifdef WCTO_BUILD_AVX2
      table = &kAvx2;
#endif
    }
    if (const char* env = std::getenv("WCTO_BACKEND")) {
      // Env override loses to nothing; a bad value should fail loudly.
      Backend b = backend_from_name(env);
      if (!backend_available(b))
        throw std::runtime_error("WCTO_BACKEND requests unavailable backend: " +
                                 std::string(env));
      backend = b;
#ifdef WCTO_BUILD_AVX2
      table = (b == Backend::avx2) ? &kAvx2 : &kScalar;
#else
      table = &kScalar;
#endif
    }
  }
};

State& state() {
  static State s;
  return s;
}

}  // namespace

Backend active_backend() { return state().backend; }

bool backend_available(Backend b) {
  if (b == Backend::scalar) return true;
#ifdef WCTO_BUILD_AVX2
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

void set_backend(Backend b) {
  if (!backend_available(b))
    throw std::runtime_error(std::string("backend unavailable on this machine: ") +
                             backend_name(b));
  state().backend = b;
#ifdef WCTO_BUILD_AVX2
  state().table = (b == Backend::avx2) ? &kAvx2 : &kScalar;
#else
  state().table = &kScalar;
#endif
}

const char* backend_name(Backend b) {
  return b == Backend::scalar ? "scalar" : "avx2";
}

Backend backend_from_name(const std::string& name) {
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  throw std::runtime_error("unknown kernel backend: '" + name +
                           "' (expected scalar or avx2)");
}

void law_inverse_eval(const double* delta, std::size_t n, double a, double b,
                      double* E, double* dE, double* d2E) {
  state().table->law_inverse(delta, n, a, b, E, dE, d2E);
}

void law_ramp_eval(const double* delta, std::size_t n, double E0, double ED,
                   double q, double* E, double* dE, double* d2E) {
  state().table->law_ramp(delta, n, E0, ED, q, E, dE, d2E);
}

void barrier_terms(const double* delta, std::size_t n, double* b1, double* b2) {
  state().table->barrier(delta, n, b1, b2);
}

void element_energies(const double* u, const std::int32_t* dofs, std::size_t n,
                      const double* Khat, double* energy) {
  state().table->energies(u, dofs, n, Khat, energy);
}

void element_apply_dot(const double* u, const double* y, const std::int32_t* dofs,
                       std::size_t n, const double* Khat, double* out) {
  state().table->apply_dot(u, y, dofs, n, Khat, out);
}

void element_scatter_add(const double* u, const std::int32_t* dofs, std::size_t n,
                         const double* Khat, const double* c, double* out) {
  state().table->scatter_add(u, dofs, n, Khat, c, out);
}

}  // namespace wcto::kernels
