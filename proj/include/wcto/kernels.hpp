#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Per-element data-parallel kernels with a scalar reference implementation and
// an AVX2 variant selected at runtime. Everything here is allocation-free and
// deterministic for a fixed backend; higher modules never touch intrinsics.
namespace wcto::kernels {

enum class Backend { scalar, avx2 };

// Detected-or-overridden backend currently in use.
Backend active_backend();
// Force a backend (tests, config). Throws std::runtime_error if unsupported.
void set_backend(Backend b);
bool backend_available(Backend b);
const char* backend_name(Backend b);
// Parse "scalar"/"avx2"; throws on anything else.
Backend backend_from_name(const std::string& name);

// Inverse (harmonic) interpolation E = 1/(a + b*delta).
// Any of E, dE, d2E may be nullptr; dE = -b E^2, d2E = 2 b^2 E^3.
void law_inverse_eval(const double* delta, std::size_t n, double a, double b,
                      double* E, double* dE, double* d2E);

// RAMP interpolation E = ED + (1 - delta) * (E0 - ED) / (1 + q*delta).
// dE = -(E0-ED)(1+q)/(1+q d)^2, d2E = 2(E0-ED) q (1+q)/(1+q d)^3.
void law_ramp_eval(const double* delta, std::size_t n, double E0, double ED,
                   double q, double* E, double* dE, double* d2E);

// Log-barrier derivative terms for the box (0,1):
// b1 = 1/d - 1/(1-d), b2 = 1/d^2 + 1/(1-d)^2. Either output may be nullptr.
void barrier_terms(const double* delta, std::size_t n, double* b1, double* b2);

// energy[e] = u_loc' Khat u_loc with u_loc gathered via dofs[8e .. 8e+7]
// from the full-length dof vector u. Khat is the shared 8x8 row-major block.
void element_energies(const double* u, const std::int32_t* dofs, std::size_t n,
                      const double* Khat, double* energy);

// out[e] = (Khat * u_loc)' y_loc, both gathered via dofs. Used for the
// off-diagonal Hessian block products B' y without forming B.
void element_apply_dot(const double* u, const double* y, const std::int32_t* dofs,
                       std::size_t n, const double* Khat, double* out);

// out_loc += c[e] * (Khat * u_loc), scattered via dofs (sequential over
// elements, so the accumulation order is fixed). Used for B * x products.
void element_scatter_add(const double* u, const std::int32_t* dofs, std::size_t n,
                         const double* Khat, const double* c, double* out);

}  // namespace wcto::kernels
