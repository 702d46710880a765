#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wprox/diff_function.hpp"
#include "wprox/rng.hpp"
#include "wprox/tape.hpp"

namespace wprox::models {

using diff::Matrix;
using diff::ParamLayout;
using diff::Tape;
using diff::Var;
using diff::Vector;

enum class Activation { kLinear, kTanh, kRelu, kLeakyRelu, kSigmoid };

Activation activation_from_string(const std::string& s);
std::string activation_to_string(Activation a);

struct NetSpec {
  int in_dim = 0;
  std::vector<int> hidden;
  int out_dim = 0;
  Activation hidden_act = Activation::kTanh;
  Activation out_act = Activation::kLinear;
  double leaky_slope = 0.2;
  bool operator==(const NetSpec&) const = default;
};

// Fully connected network over a flat parameter vector. Batch rows are
// samples; parameters are laid out as W0,b0,W1,b1,... with W stored
// column-major inside its slice.
class Mlp {
 public:
  explicit Mlp(NetSpec spec);

  const NetSpec& spec() const { return spec_; }
  int param_dim() const { return param_dim_; }
  const ParamLayout& layout() const { return layout_; }

  Var forward(Tape& tape, Var theta, Var x) const;
  Var forward(Tape& tape, Var theta, const Matrix& x) const;
  Matrix forward_value(const Vector& theta, const Matrix& x) const;

  // d(output)/d(input) rows for a scalar-output network, built as a tape
  // graph so it stays differentiable in theta (manual reverse chain; no
  // second-order machinery involved).
  Var input_gradient(Tape& tape, Var theta, const Matrix& x) const;

  // Xavier-uniform weights, zero biases.
  Vector init_params(Rng& rng) const;

 private:
  Var apply_activation(Var v, Activation act) const;
  Var activation_derivative(Tape& tape, Var pre, Activation act) const;

  NetSpec spec_;
  ParamLayout layout_;
  int param_dim_ = 0;
  std::vector<int> widths_;  // in_dim, hidden..., out_dim
};

enum class LatentKind { kNormal, kUniformPm1, kUniform01 };

struct LatentProvenance {
  LatentKind kind = LatentKind::kNormal;
  int dim = 0;
  std::uint64_t seed = 0;
  std::uint64_t batch_index = 0;
  int rows = 0;
  bool operator==(const LatentProvenance&) const = default;
};

struct LatentBatch {
  Matrix z;
  LatentProvenance prov;
};

// Reproducible latent stream: every batch is generated from a seed derived
// from (source seed, batch index), so any batch can be replayed without
// replaying its predecessors.
class LatentSource {
 public:
  LatentSource(LatentKind kind, int dim, std::uint64_t seed)
      : kind_(kind), dim_(dim), seed_(seed) {}

  LatentBatch next(int rows);
  LatentBatch batch_at(std::uint64_t index, int rows) const;
  static LatentBatch replay(const LatentProvenance& prov);

  LatentSource clone() const { return *this; }
  int dim() const { return dim_; }
  LatentKind kind() const { return kind_; }

 private:
  LatentKind kind_;
  int dim_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// Generated (or target) samples plus enough provenance to pair batches by
// their latent stream and to replay them at a different parameter.
struct SampleBatch {
  Matrix x;
  LatentProvenance prov;
  Vector theta;

  int rows() const { return static_cast<int>(x.rows()); }
  int cols() const { return static_cast<int>(x.cols()); }
  bool paired_with(const SampleBatch& other) const {
    return prov == other.prov;
  }
};

// Differentiable implicit model g(theta, z).
class Generator {
 public:
  virtual ~Generator() = default;
  virtual int latent_dim() const = 0;
  virtual int sample_dim() const = 0;
  virtual int param_dim() const = 0;
  virtual ParamLayout layout() const = 0;
  virtual LatentKind latent_kind() const { return LatentKind::kNormal; }
  virtual Var forward(Tape& tape, Var theta, const Matrix& z) const = 0;
  virtual Vector init_params(Rng& rng) const = 0;

  // Constant closed-form pullback metric tensor, when the family has one
  // (delta mixtures, 1-D location-scale). Empty otherwise.
  virtual std::optional<Matrix> exact_metric() const { return std::nullopt; }

  Matrix forward_value(const Vector& theta, const Matrix& z) const;
  SampleBatch sample(const Vector& theta, const LatentBatch& z) const;

  // DiffFunction view of one output sample, for jacobian().
  diff::DiffFunction as_diff_function() const;
};

class MlpGenerator : public Generator {
 public:
  MlpGenerator(NetSpec spec, LatentKind latent = LatentKind::kNormal);
  int latent_dim() const override { return net_.spec().in_dim; }
  int sample_dim() const override { return net_.spec().out_dim; }
  int param_dim() const override { return net_.param_dim(); }
  ParamLayout layout() const override { return net_.layout(); }
  LatentKind latent_kind() const override { return latent_; }
  Var forward(Tape& tape, Var theta, const Matrix& z) const override;
  Vector init_params(Rng& rng) const override { return net_.init_params(rng); }
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
  LatentKind latent_;
};

// g(theta, z) = mu + sigma .* z with theta = (mu, sigma).
class LocationScaleGenerator : public Generator {
 public:
  explicit LocationScaleGenerator(int n);
  int latent_dim() const override { return n_; }
  int sample_dim() const override { return n_; }
  int param_dim() const override { return 2 * n_; }
  ParamLayout layout() const override;
  Var forward(Tape& tape, Var theta, const Matrix& z) const override;
  Vector init_params(Rng& rng) const override;
  std::optional<Matrix> exact_metric() const override;

 private:
  int n_;
};

// Mixture of two delta measures, Example-style: weight alpha at a and
// 1-alpha at b, theta = (a, b). Latents are uniform01 component picks.
struct DeltaMixtureModel {
  double a;
  double b;
  double alpha;

  DeltaMixtureModel(double a_, double b_, double alpha_);
  Vector theta() const;
};

class DeltaMixtureGenerator : public Generator {
 public:
  explicit DeltaMixtureGenerator(double alpha);
  int latent_dim() const override { return 1; }
  int sample_dim() const override { return 1; }
  int param_dim() const override { return 2; }
  ParamLayout layout() const override;
  LatentKind latent_kind() const override { return LatentKind::kUniform01; }
  Var forward(Tape& tape, Var theta, const Matrix& z) const override;
  Vector init_params(Rng& rng) const override;
  std::optional<Matrix> exact_metric() const override;
  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

// Per-coordinate Gaussian location-scale family.
struct GaussianLocationScale {
  Vector mu;
  Vector sigma;

  GaussianLocationScale(Vector mu_, Vector sigma_);
  Vector theta() const;  // (mu, sigma) flattened
  int dim() const { return static_cast<int>(mu.size()); }
};

// Desk-scale stand-ins for the target density.
struct TargetSpec {
  enum class Kind { kDeltaMixture, kGaussian1d, kRing2d };
  Kind kind = Kind::kRing2d;
  // delta mixture
  double a = -1.0, b = 1.0, alpha = 0.5;
  // 1-D Gaussian
  double mu = 0.0, sigma = 1.0;
  // 2-D ring mixture: K equally weighted components on a circle
  int components = 8;
  double radius = 1.0;
  double noise = 0.05;
  std::uint64_t seed = 0;

  int sample_dim() const;
  Matrix sample(int rows, std::uint64_t batch_index = 0) const;
  void validate() const;
};

}  // namespace wprox::models
