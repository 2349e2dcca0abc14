#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "latscat/decoder.hpp"
#include "latscat/optimizer.hpp"
#include "latscat/shapes.hpp"

namespace latscat {

struct TrainOptions {
  int latent_dim = 256;
  std::vector<int> hidden{128, 128, 128, 128};
  Activation activation = Activation::kSoftplus;
  double beta = 10.0;
  double lambda = 1e-4;             // weight of sum_S |z_S|^2
  int epochs = 200;
  std::size_t batch_per_shape = 256;
  Schedule schedule{ScheduleKind::kStepDecay, 5e-4, 50};  // indexed by epoch
  double code_init_std = 0.01;
  std::uint64_t seed = 1;
  /// Called after every epoch with the epoch index and its mean batch loss.
  std::function<void(int, double)> on_epoch;
};

struct TrainResult {
  DecoderWeights weights;
  std::vector<VecX> codes;
  std::vector<double> epoch_loss;
};

/// Joint fit of network weights and one latent code per shape to
///   sum_S mean_{x in X_S} |f(z_S, x) - sdf_S(x)| + lambda sum_S |z_S|^2
/// by minibatch Adam (each step draws batch_per_shape points from every shape).
/// Throws EmptyDataset for an empty dataset or a shape without samples.
TrainResult train_decoder(const std::vector<SdfSampleSet>& dataset, const TrainOptions& opt);

/// Mean absolute SDF error of the decoder on a sample set.
double mean_abs_sdf_error(const Decoder& decoder, const VecX& z, const SdfSampleSet& samples);

}  // namespace latscat
