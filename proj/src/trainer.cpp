#include "latscat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "latscat/errors.hpp"

namespace latscat {

namespace {

using Mat = Eigen::MatrixXd;
using MapMat = Eigen::Map<Mat>;
using MapVec = Eigen::Map<VecX>;

// Flat parameter vector [w_0, b_0, w_1, b_1, ..., codes] with matrix views.
struct Layout {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;  // (rows, cols)
  std::vector<Eigen::Index> w_off, b_off;
  Eigen::Index code_off = 0;
  Eigen::Index total = 0;
};

Layout make_layout(const DecoderWeights& w, std::size_t shapes, int zdim) {
  Layout lay;
  Eigen::Index off = 0;
  for (const auto& m : w.w) {
    lay.shapes.emplace_back(m.rows(), m.cols());
    lay.w_off.push_back(off);
    off += m.size();
    lay.b_off.push_back(off);
    off += m.rows();
  }
  lay.code_off = off;
  lay.total = off + static_cast<Eigen::Index>(shapes) * zdim;
  return lay;
}

void activate(Activation act, double beta, const Mat& a, Mat& h, Mat& slope) {
  h.resize(a.rows(), a.cols());
  slope.resize(a.rows(), a.cols());
  const Eigen::Index n = a.size();
  const double* pa = a.data();
  double* ph = h.data();
  double* ps = slope.data();
  if (act == Activation::kTanh) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = std::tanh(pa[i]);
      ph[i] = t;
      ps[i] = 1.0 - t * t;
    }
    return;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = beta * pa[i];
    const double e = std::exp(-std::abs(t));
    ph[i] = (std::max(t, 0.0) + std::log1p(e)) / beta;
    ps[i] = t >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  }
}

}  // namespace

TrainResult train_decoder(const std::vector<SdfSampleSet>& dataset, const TrainOptions& opt) {
  if (dataset.empty()) throw EmptyDataset("train_decoder: dataset is empty");
  for (const auto& s : dataset) {
    if (s.size() == 0) throw EmptyDataset("train_decoder: a shape has no samples");
    if (s.points.size() != s.sdf.size()) throw DimensionMismatch("train_decoder: sample set sizes differ");
  }
  if (!(opt.lambda >= 0.0)) throw ConfigError("train_decoder: lambda must be non-negative");
  if (opt.latent_dim < 0 || opt.epochs < 0 || opt.batch_per_shape == 0) {
    throw ConfigError("train_decoder: invalid latent dimension, epoch count or batch size");
  }

  const int zdim = opt.latent_dim;
  const std::size_t nshape = dataset.size();
  const DecoderWeights init = random_weights(zdim, opt.hidden, opt.activation, opt.beta, opt.seed);
  const Layout lay = make_layout(init, nshape, zdim);
  const std::size_t layers = init.w.size();

  VecX theta(lay.total);
  for (std::size_t l = 0; l < layers; ++l) {
    MapMat(theta.data() + lay.w_off[l], lay.shapes[l].first, lay.shapes[l].second) = init.w[l];
    MapVec(theta.data() + lay.b_off[l], lay.shapes[l].first) = init.b[l];
  }
  std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, opt.code_init_std);
  for (Eigen::Index i = lay.code_off; i < lay.total; ++i) theta[i] = gauss(rng);

  AdamState adam = AdamState::fresh(lay.total);
  VecX grad(lay.total);

  std::size_t longest = 0;
  for (const auto& s : dataset) longest = std::max(longest, s.size());
  const std::size_t steps = (longest + opt.batch_per_shape - 1) / opt.batch_per_shape;

  std::vector<std::vector<std::size_t>> order(nshape);
  for (std::size_t s = 0; s < nshape; ++s) {
    order[s].resize(dataset[s].size());
    std::iota(order[s].begin(), order[s].end(), std::size_t{0});
  }

  // Per-step buffers; batch columns are grouped by shape.
  const std::size_t bs = opt.batch_per_shape;
  const Eigen::Index cols = static_cast<Eigen::Index>(bs * nshape);
  Mat input(zdim + 3, cols);
  VecX target(cols);
  std::vector<Mat> pre(layers), act(layers), slope(layers);

  TrainResult result;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (auto& o : order) std::shuffle(o.begin(), o.end(), rng);
    const double lr = opt.schedule.rate(epoch);
    double epoch_sum = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      for (std::size_t s = 0; s < nshape; ++s) {
        const auto code = theta.segment(lay.code_off + static_cast<Eigen::Index>(s) * zdim, zdim);
        for (std::size_t q = 0; q < bs; ++q) {
          const std::size_t idx = order[s][(step * bs + q) % order[s].size()];
          const Eigen::Index c = static_cast<Eigen::Index>(s * bs + q);
          input.col(c).head(zdim) = code;
          input.col(c).tail<3>() = dataset[s].points[idx];
          target[c] = dataset[s].sdf[idx];
        }
      }
      // Forward.
      const Mat* h = &input;
      for (std::size_t l = 0; l < layers; ++l) {
        const MapMat w(theta.data() + lay.w_off[l], lay.shapes[l].first, lay.shapes[l].second);
        const MapVec b(theta.data() + lay.b_off[l], lay.shapes[l].first);
        pre[l].noalias() = w * *h;
        pre[l].colwise() += b;
        if (l + 1 < layers) {
          activate(opt.activation, opt.beta, pre[l], act[l], slope[l]);
          h = &act[l];
        }
      }
      // Loss and its derivative with respect to the network output.
      Mat g(1, cols);
      double data_loss = 0.0;
      for (Eigen::Index c = 0; c < cols; ++c) {
        const double r = pre.back()(0, c) - target[c];
        data_loss += std::abs(r);
        g(0, c) = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) / static_cast<double>(bs);
      }
      data_loss /= static_cast<double>(bs);
      const auto codes = theta.segment(lay.code_off, static_cast<Eigen::Index>(nshape) * zdim);
      epoch_sum += data_loss + opt.lambda * codes.squaredNorm();

      // Backward.
      grad.setZero();
      for (std::size_t l = layers; l-- > 0;) {
        const Mat& below = l == 0 ? input : act[l - 1];
        MapMat(grad.data() + lay.w_off[l], lay.shapes[l].first, lay.shapes[l].second).noalias() = g * below.transpose();
        MapVec(grad.data() + lay.b_off[l], lay.shapes[l].first) = g.rowwise().sum();
        const MapMat w(theta.data() + lay.w_off[l], lay.shapes[l].first, lay.shapes[l].second);
        if (l > 0) {
          Mat next = w.transpose() * g;
          g = next.cwiseProduct(slope[l - 1]);
        } else {
          const Mat gin = w.leftCols(zdim).transpose() * g;
          for (std::size_t s = 0; s < nshape; ++s) {
            grad.segment(lay.code_off + static_cast<Eigen::Index>(s) * zdim, zdim) =
                gin.middleCols(static_cast<Eigen::Index>(s * bs), static_cast<Eigen::Index>(bs)).rowwise().sum();
          }
        }
      }
      grad.segment(lay.code_off, static_cast<Eigen::Index>(nshape) * zdim) += 2.0 * opt.lambda * codes;
      adam_update(adam, theta, grad, lr);
    }
    const double mean = epoch_sum / static_cast<double>(steps);
    if (!std::isfinite(mean)) throw ConfigError("train_decoder: loss diverged at epoch " + std::to_string(epoch));
    result.epoch_loss.push_back(mean);
    if (opt.on_epoch) opt.on_epoch(epoch, mean);
  }

  result.weights = init;
  for (std::size_t l = 0; l < layers; ++l) {
    result.weights.w[l] = MapMat(theta.data() + lay.w_off[l], lay.shapes[l].first, lay.shapes[l].second);
    result.weights.b[l] = MapVec(theta.data() + lay.b_off[l], lay.shapes[l].first);
  }
  for (std::size_t s = 0; s < nshape; ++s) {
    result.codes.push_back(theta.segment(lay.code_off + static_cast<Eigen::Index>(s) * zdim, zdim));
  }
  return result;
}

double mean_abs_sdf_error(const Decoder& decoder, const VecX& z, const SdfSampleSet& samples) {
  if (samples.size() == 0) throw EmptyDataset("mean_abs_sdf_error: no samples");
  const std::vector<double> f = decoder.evaluate_many(z, samples.points);
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) sum += std::abs(f[i] - samples.sdf[i]);
  return sum / static_cast<double>(f.size());
}

}  // namespace latscat
