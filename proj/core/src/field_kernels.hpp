#pragma once

// Internal batched evaluation kernels shared by field extraction, ray
// rendering and the training forward/backward pass. Not installed.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "tomo/field.hpp"

namespace tomo::detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Views into one flat MLP parameter segment (W1|b1|W2|b2|w3|b3).
struct MlpParams {
  MlpDims dims;
  const double* w1;
  const double* b1;
  const double* w2;
  const double* b2;
  const double* w3;
  const double* b3;

  static MlpParams view(std::span<const double> segment, const MlpDims& dims);
};

struct AffineParams {
  const double* w;  // length L
  double b;
  static AffineParams view(std::span<const double> segment, int input);
};

struct MlpActs {
  MatrixXd h1;  // post-ReLU
  MatrixXd h2;
  VectorXd z;
};

void mlp_forward(const MlpParams& p, const MatrixXd& x, MlpActs& acts);

struct MlpScratch {
  MatrixXd gh1;
  MatrixXd gh2;
};

// Accumulates parameter gradients into grad_segment and returns gx.
void mlp_backward(const MlpParams& p, const MatrixXd& x, const MlpActs& acts,
                  const VectorXd& gz, MatrixXd& gx, std::span<double> grad_segment,
                  MlpScratch& scratch);

// Gather the four per-branch feature streams (each P x L) for a point batch.
void gather_streams_quad(const HashGridConfig& cfg, const double* tables,
                         std::span<const Vec3> pts, MatrixXd& a, MatrixXd& b,
                         MatrixXd& vb, MatrixXd& vs);

// Undivided gather: P x 4L feature matrix for the single-output baseline.
void gather_features_single(const HashGridConfig& cfg, const double* tables,
                            std::span<const Vec3> pts, MatrixXd& x);

void scatter_streams_quad(const HashGridConfig& cfg, std::span<const Vec3> pts,
                          const MatrixXd& ga, const MatrixXd& gb, const MatrixXd& gvb,
                          const MatrixXd& gvs, double* grad_tables);

void scatter_features_single(const HashGridConfig& cfg, std::span<const Vec3> pts,
                             const MatrixXd& gx, double* grad_tables);

// Full forward state of the quadruple field over a point batch.
struct QuadForward {
  MatrixXd a_in, b_in, vb_in, vs_in;
  MlpActs a_act, b_act;
  VectorXd vb_z, vs_z;
  VectorXd alpha, beta, vb, vs;
  VectorXd sigma;
  double eps = 0.0;

  void run(const QuadField& field, std::span<const Vec3> pts_normalized);
};

struct SingleForward {
  MatrixXd x_in;
  MlpActs act;
  VectorXd sigma;

  void run(const SingleField& field, std::span<const Vec3> pts_normalized);
};

inline VectorXd sigmoid_vec(const VectorXd& z) {
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

}  // namespace tomo::detail
