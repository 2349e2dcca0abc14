#include "latscat/gmres.hpp"

#include <cmath>
#include <sstream>

#include "latscat/errors.hpp"

namespace latscat {

namespace {

// Complex Givens rotation [c s; -conj(s) c] zeroing b in (a, b).
void make_rotation(Complex a, Complex b, double& c, Complex& s) {
  const double na = std::abs(a), nb = std::abs(b);
  if (nb == 0.0) {
    c = 1.0;
    s = 0.0;
  } else if (na == 0.0) {
    c = 0.0;
    s = std::conj(b) / nb;
  } else {
    const double r = std::hypot(na, nb);
    c = na / r;
    s = (a / na) * std::conj(b) / r;
  }
}

struct Arnoldi {
  double bnorm = 0.0;
  int limit = 0;
  int k = 0;
  bool done = false;
  std::vector<CVecX> v;
  CMatX h;
  std::vector<double> cs;
  std::vector<Complex> sn;
  CVecX g;

  void start(const CVecX& b, int max_iters, int n) {
    bnorm = b.norm();
    limit = std::min(max_iters, n);
    done = bnorm == 0.0;
    if (done) return;
    v.push_back(b / bnorm);
    h = CMatX::Zero(limit + 1, limit);
    cs.assign(limit, 0.0);
    sn.assign(limit, 0.0);
    g = CVecX::Zero(limit + 1);
    g[0] = bnorm;
  }

  // Consumes w = A v_k and advances one step.
  void step(CVecX w, double tol) {
    for (int i = 0; i <= k; ++i) {
      h(i, k) = v[i].dot(w);  // conjugates the first argument
      w -= h(i, k) * v[i];
    }
    const double beta = w.norm();
    h(k + 1, k) = beta;
    v.push_back(beta > 0.0 ? CVecX(w / beta) : CVecX(w));
    for (int i = 0; i < k; ++i) {
      const Complex t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
      h(i + 1, k) = -std::conj(sn[i]) * h(i, k) + cs[i] * h(i + 1, k);
      h(i, k) = t;
    }
    make_rotation(h(k, k), h(k + 1, k), cs[k], sn[k]);
    h(k, k) = cs[k] * h(k, k) + sn[k] * h(k + 1, k);
    h(k + 1, k) = 0.0;
    g[k + 1] = -std::conj(sn[k]) * g[k];
    g[k] = cs[k] * g[k];
    ++k;
    // Small margin so the true residual, not just the recurrence, meets tol.
    if (std::abs(g[k]) <= 0.95 * tol * bnorm || beta == 0.0 || k >= limit) done = true;
  }

  CVecX solution(Eigen::Index n) const {
    CVecX x = CVecX::Zero(n);
    if (k == 0) return x;
    CVecX y(k);
    for (int i = k - 1; i >= 0; --i) {
      Complex s = g[i];
      for (int j = i + 1; j < k; ++j) s -= h(i, j) * y[j];
      y[i] = s / h(i, i);
    }
    for (int i = 0; i < k; ++i) x += y[i] * v[i];
    return x;
  }
};

GmresResult finish(const CMatX& a, const CVecX& b, const Arnoldi& arn, double tol) {
  GmresResult res;
  res.x = arn.solution(b.size());
  res.iterations = arn.k;
  res.residual = arn.bnorm == 0.0 ? 0.0 : (a * res.x - b).norm() / arn.bnorm;
  if (!(res.residual <= tol)) {
    std::ostringstream msg;
    msg << "GMRES stopped after " << arn.k << " iterations with relative residual " << res.residual
        << " (tolerance " << tol << ")";
    throw NoConvergence(msg.str(), arn.k, res.residual);
  }
  return res;
}

}  // namespace

std::vector<GmresResult> gmres_columns(const CMatX& a, const CMatX& b, const GmresOptions& opt) {
  const Eigen::Index n = b.rows();
  if (a.rows() != n || a.cols() != n) throw DimensionMismatch("gmres: matrix and right-hand side disagree");
  if (!(opt.tol > 0.0) || opt.max_iters < 1) throw ConfigError("gmres: tol must be positive, max_iters >= 1");
  const Eigen::Index cols = b.cols();
  std::vector<Arnoldi> runs(cols);
  for (Eigen::Index c = 0; c < cols; ++c) runs[c].start(b.col(c), opt.max_iters, static_cast<int>(n));

  std::vector<Eigen::Index> active;
  CMatX block, product;
  for (;;) {
    active.clear();
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!runs[c].done) active.push_back(c);
    }
    if (active.empty()) break;
    block.resize(n, static_cast<Eigen::Index>(active.size()));
    for (std::size_t t = 0; t < active.size(); ++t) block.col(t) = runs[active[t]].v.back();
    product.noalias() = a * block;
    for (std::size_t t = 0; t < active.size(); ++t) runs[active[t]].step(product.col(t), opt.tol);
  }

  std::vector<GmresResult> out;
  out.reserve(cols);
  for (Eigen::Index c = 0; c < cols; ++c) out.push_back(finish(a, b.col(c), runs[c], opt.tol));
  return out;
}

GmresResult gmres(const CMatX& a, const CVecX& b, const GmresOptions& opt) {
  return std::move(gmres_columns(a, CMatX(b), opt).front());
}

}  // namespace latscat
