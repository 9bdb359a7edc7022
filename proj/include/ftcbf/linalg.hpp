#pragma once

#include "ftcbf/types.hpp"

namespace ftcbf {

/// Solves A^T X + X A + Q = 0 through the Kronecker-product linear system.
/// Throws LyapunovError when some eigenvalue pair of A sums to zero.
Mat solve_lyapunov(const Mat& a, const Mat& q);

struct RiccatiOptions {
  double tolerance = 1e-10;   // on ||dP/dt||_inf
  int max_steps = 20000;
  bool newton_polish = true;
};

/// Integrates dP/dt = A P + P A^T + Q - P S P from P0 until ||dP/dt||_inf
/// falls below the tolerance. Steps use the exact flow map of the Riccati
/// equation (linear Hamiltonian system plus fractional transform), so the
/// step length is limited only by conditioning. Throws DetectabilityError if
/// the iteration does not settle.
Mat riccati_fixed_point(const Mat& a, const Mat& q, const Mat& s, const Mat& p0,
                        const RiccatiOptions& opts = {});

/// Right-hand side of the Riccati ODE above.
Mat riccati_rhs(const Mat& a, const Mat& q, const Mat& s, const Mat& p);

/// Infinite-horizon LQR gain K = R^-1 G^T X for dx = F x + G u, u = -K x.
Mat lqr_gain(const Mat& f, const Mat& g, const Mat& q, const Mat& r);

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

}  // namespace ftcbf
