#pragma once

#include <cstddef>

namespace latscat::detail {

/// Structure-of-arrays point set with weights and (optionally) the unit
/// normal of the face each point lies on.
struct PointBlock {
  const double* x;
  const double* y;
  const double* z;
  const double* w;
  const double* nx;
  const double* ny;
  const double* nz;
  std::size_t size;

  PointBlock offset(std::size_t start, std::size_t count) const {
    return {x + start, y + start, z + start, w + start,
            nx ? nx + start : nullptr, ny ? ny + start : nullptr, nz ? nz + start : nullptr, count};
  }
};

/// For a target point x (normal n) against every source point y_q (normal m_q):
///   fwd[q] = w_q (cs Phi(x, y_q) + ck dPhi/dnu_x(x, y_q))
///   rev[q] = w_q (cs Phi(y_q, x) + ck dPhi/dnu_y(y_q, x))
/// with Phi = e^{ikr}/(4 pi r); both share the transcendental work. cs and ck
/// are complex weights given as (re, im). Source points must not coincide
/// with x; the block must carry normals.
void helmholtz_pair_row(const double x[3], const double n[3], double k, const double cs[2], const double ck[2],
                        const PointBlock& src, double* fwd_re, double* fwd_im, double* rev_re, double* rev_im);

/// out[q] = w_q * e^{-i k xhat . y_q}.
void plane_wave_row(const double xhat[3], double k, const PointBlock& src, double* out_re, double* out_im);

/// out[q] = w_q * e^{ikr}/(4 pi r), r = |x - y_q|.
void single_layer_row(const double x[3], double k, const PointBlock& src, double* out_re, double* out_im);

}  // namespace latscat::detail
