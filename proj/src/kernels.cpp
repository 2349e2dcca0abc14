// Built with fast-math so the loops below vectorize with SIMD sin/cos.
#include "kernels.hpp"

#include <cmath>

namespace latscat::detail {

namespace {
constexpr double kInv4Pi = 0.25 / M_PI;
}

void helmholtz_pair_row(const double x[3], const double n[3], double k, const double cs[2], const double ck[2],
                        const PointBlock& src, double* fwd_re, double* fwd_im, double* rev_re, double* rev_im) {
  const double x0 = x[0], x1 = x[1], x2 = x[2];
  const double n0 = n[0], n1 = n[1], n2 = n[2];
  const double sr = cs[0], si = cs[1], kr0 = ck[0], ki0 = ck[1];
  const double* __restrict px = src.x;
  const double* __restrict py = src.y;
  const double* __restrict pz = src.z;
  const double* __restrict pw = src.w;
  const double* __restrict mx = src.nx;
  const double* __restrict my = src.ny;
  const double* __restrict mz = src.nz;
  double* __restrict fr = fwd_re;
  double* __restrict fi = fwd_im;
  double* __restrict rr = rev_re;
  double* __restrict ri = rev_im;
  const std::size_t count = src.size;
#pragma omp simd
  for (std::size_t q = 0; q < count; ++q) {
    const double d0 = x0 - px[q], d1 = x1 - py[q], d2 = x2 - pz[q];
    const double r2 = d0 * d0 + d1 * d1 + d2 * d2;
    const double inv_r = 1.0 / std::sqrt(r2);
    const double kr = k * r2 * inv_r;
    const double amp = pw[q] * kInv4Pi * inv_r;
    const double er = amp * std::cos(kr), ei = amp * std::sin(kr);
    // dPhi/dnu = Phi * (nu . d) (ikr - 1) / r^2, with d = x - y seen from x
    // and y - x seen from y.
    const double inv_r2 = inv_r * inv_r;
    const double tf = (n0 * d0 + n1 * d1 + n2 * d2) * inv_r2;
    const double tr = -(mx[q] * d0 + my[q] * d1 + mz[q] * d2) * inv_r2;
    // g = (ikr - 1) = (-1, kr); weight factor w = cs + ck * t * g
    const double gf_r = -tf, gf_i = tf * kr;
    const double gr_r = -tr, gr_i = tr * kr;
    const double wf_r = sr + (kr0 * gf_r - ki0 * gf_i), wf_i = si + (kr0 * gf_i + ki0 * gf_r);
    const double wr_r = sr + (kr0 * gr_r - ki0 * gr_i), wr_i = si + (kr0 * gr_i + ki0 * gr_r);
    fr[q] = er * wf_r - ei * wf_i;
    fi[q] = er * wf_i + ei * wf_r;
    rr[q] = er * wr_r - ei * wr_i;
    ri[q] = er * wr_i + ei * wr_r;
  }
}

void plane_wave_row(const double xhat[3], double k, const PointBlock& src, double* out_re, double* out_im) {
  const double a = xhat[0], b = xhat[1], c = xhat[2];
  const double* __restrict px = src.x;
  const double* __restrict py = src.y;
  const double* __restrict pz = src.z;
  const double* __restrict pw = src.w;
  double* __restrict ore = out_re;
  double* __restrict oim = out_im;
  const std::size_t count = src.size;
#pragma omp simd
  for (std::size_t q = 0; q < count; ++q) {
    const double ph = -k * (a * px[q] + b * py[q] + c * pz[q]);
    ore[q] = pw[q] * std::cos(ph);
    oim[q] = pw[q] * std::sin(ph);
  }
}

void single_layer_row(const double x[3], double k, const PointBlock& src, double* out_re, double* out_im) {
  const double x0 = x[0], x1 = x[1], x2 = x[2];
  const double* __restrict px = src.x;
  const double* __restrict py = src.y;
  const double* __restrict pz = src.z;
  const double* __restrict pw = src.w;
  double* __restrict ore = out_re;
  double* __restrict oim = out_im;
  const std::size_t count = src.size;
#pragma omp simd
  for (std::size_t q = 0; q < count; ++q) {
    const double d0 = x0 - px[q], d1 = x1 - py[q], d2 = x2 - pz[q];
    const double r2 = d0 * d0 + d1 * d1 + d2 * d2;
    const double inv_r = 1.0 / std::sqrt(r2);
    const double kr = k * r2 * inv_r;
    const double amp = pw[q] * kInv4Pi * inv_r;
    ore[q] = amp * std::cos(kr);
    oim[q] = amp * std::sin(kr);
  }
}

}  // namespace latscat::detail
