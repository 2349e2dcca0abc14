#pragma once

#include <vector>

#include "latscat/common.hpp"

namespace latscat {

struct GmresOptions {
  double tol = 1e-5;   // relative residual |Ax - b| / |b|
  int max_iters = 500; // no restarts
};

struct GmresResult {
  CVecX x;
  int iterations = 0;
  double residual = 0.0;  // true relative residual of the returned x
};

/// Unrestarted GMRES (modified Gram-Schmidt, Givens rotations) on a dense
/// matrix. Throws NoConvergence carrying the final true residual.
GmresResult gmres(const CMatX& a, const CVecX& b, const GmresOptions& opt = {});

/// Independent GMRES runs for every column of `b`, advanced in lockstep so
/// that each iteration reads the matrix once for all active columns.
/// Throws NoConvergence for the first column that fails.
std::vector<GmresResult> gmres_columns(const CMatX& a, const CMatX& b, const GmresOptions& opt = {});

}  // namespace latscat
