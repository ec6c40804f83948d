#pragma once

// Terms of the registration objective f = f_tg + xi (f_jac + f_msh + P) as
// functions of the mapping coefficients, with analytic gradients.

#include "regmap/dense_op.hpp"
#include "regmap/displacement_space.hpp"
#include "regmap/mesh.hpp"

#include <Eigen/QR>

#include <functional>
#include <memory>
#include <vector>

namespace regmap {

inline constexpr double kExpCap = 40.0;

struct PenaltyConfig {
  double eps = 0.1;
  double c_exp = 0.025;
  double kappa_msh = 10.0;
  double xi = 1.0;
  bool use_jac = true;
  bool use_msh = true;
  bool use_smooth = true;

  /// Throws OutOfRange naming the offending field.
  void validate() const;
};

/// Value, gradient and the number of flagged points (capped exponents,
/// clamped evaluations).
struct Term {
  double value = 0.0;
  Eigen::VectorXd grad;
  std::size_t flagged = 0;
};

/// Quadrature of Omega_p: sample points, physical points and weights, J(Psi).
struct PolytopeQuadrature {
  std::vector<SamplePoint> points;
  std::vector<Vec2> x;
  std::vector<double> weights;
  std::vector<double> psi_jacobian;
  double area = 0.0;

  std::size_t size() const { return points.size(); }
};

PolytopeQuadrature polytope_quadrature(const GeometricMap& gm, int degree);

/// Psi(x); outside Omega_p the polynomial of the nearest element is
/// extrapolated and `clamped` is set.
GeometricMap::Value eval_psi_clamped(const GeometricMap& gm, const Vec2& x, bool* clamped = nullptr);

/// Psi^{-1}(y) as a sample point of the polytope mesh. Points slightly
/// outside Omega are first projected onto the boundary.
SamplePoint psi_preimage(const GeometricMap& gm, const Vec2& y, Vec2* x = nullptr);

// ---------------------------------------------------------------------------

struct SensorValue {
  double value = 0.0;
  Vec2 grad = Vec2::Zero();
  bool clamped = false;
};

class Sensor {
 public:
  virtual ~Sensor() = default;
  virtual SensorValue eval(const Vec2& x) const = 0;
};

/// P1 field on a linear mesh of Omega_p.
class P1Sensor final : public Sensor {
 public:
  P1Sensor(std::shared_ptr<const PolytopeMesh> mesh, Eigen::VectorXd values);

  const PolytopeMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const PolytopeMesh>& mesh_ptr() const { return mesh_; }
  const Eigen::VectorXd& values() const { return values_; }
  SensorValue eval(const Vec2& x) const override;

 private:
  std::shared_ptr<const PolytopeMesh> mesh_;
  Eigen::VectorXd values_;
  std::vector<Mat2> grad_basis_;
};

/// Analytic sensor (value and gradient callbacks).
class FunctionSensor final : public Sensor {
 public:
  FunctionSensor(std::function<double(const Vec2&)> f, std::function<Vec2(const Vec2&)> grad)
      : f_(std::move(f)), grad_(std::move(grad)) {}
  SensorValue eval(const Vec2& x) const override { return {f_(x), grad_(x), false}; }

 private:
  std::function<double(const Vec2&)> f_;
  std::function<Vec2(const Vec2&)> grad_;
};

/// Splits every triangle into 4^levels congruent triangles (tags dropped).
PolytopeMesh refine_uniform(const PolytopeMesh& pm, int levels);

/// Template space S_n as value vectors at the fixed quadrature points with
/// weights w_q J(Psi)(x_q).
class TemplateSpace {
 public:
  TemplateSpace() = default;
  explicit TemplateSpace(std::vector<double> weights);

  int size() const { return static_cast<int>(values_.cols()); }
  std::size_t points() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const Eigen::MatrixXd& values() const { return values_; }

  void add(const Eigen::VectorXd& values);
  /// Weighted least-squares coefficients of s (minimum-norm when the
  /// templates are linearly dependent).
  Eigen::VectorXd coefficients(const Eigen::VectorXd& s) const;
  /// s - T nu* and sum_q w_q r_q^2.
  double residual(const Eigen::VectorXd& s, Eigen::VectorXd* r = nullptr) const;

 private:
  std::vector<double> weights_;
  Eigen::VectorXd sqrt_w_;
  Eigen::MatrixXd values_;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
};

// ---------------------------------------------------------------------------

/// High-order mesh T_pb used by f_msh: node preimages, reference quadrature
/// and the undeformed qualities.
struct QualityMesh {
  CurvedMesh mesh;
  NodeTable table;
  std::vector<SamplePoint> preimages;
  std::vector<Vec2> preimage_x;
  std::vector<double> quad_weights;             ///< reference rule
  std::vector<std::vector<Vec2>> grads;         ///< per quad point, per node
  std::vector<std::vector<double>> q_id;        ///< per element, per quad point
  std::vector<double> element_area;
  double area = 0.0;
};

QualityMesh make_quality_mesh(const GeometricMap& gm, CurvedMesh pb);

/// Immutable data shared by all registration solves on one (Psi, U) pair.
class RegistrationContext {
 public:
  RegistrationContext(const GeometricMap& gm, const DisplacementSpace& space, PenaltyConfig config,
                      std::shared_ptr<const QualityMesh> pb = nullptr, int quad_degree = -1);

  const GeometricMap& geometric_map() const { return *gm_; }
  const DisplacementSpace& space() const { return *space_; }
  const PenaltyConfig& config() const { return config_; }
  const PolytopeQuadrature& quadrature() const { return quad_; }
  const QualityMesh* quality_mesh() const { return pb_.get(); }

  /// Template points of a point-set target (preimages computed once).
  void set_pointset(const std::vector<Vec2>& template_points);
  const std::vector<Vec2>& pointset_points() const { return ps_points_; }
  const std::vector<SamplePoint>& pointset_preimages() const { return ps_pre_; }
  const std::vector<Vec2>& pointset_preimage_x() const { return ps_pre_x_; }

  std::shared_ptr<const DenseOp> value_q() const { return val_q_; }
  std::shared_ptr<const DenseOp> grad_q() const { return grad_q_; }
  std::shared_ptr<const DenseOp> value_pb() const { return val_pb_; }
  std::shared_ptr<const DenseOp> value_ps() const { return val_ps_; }

  /// Weighted template weights w_q J(Psi).
  std::vector<double> template_weights() const;
  /// w_q / |Omega_p|.
  const std::vector<double>& barrier_weights() const { return barrier_w_; }

 private:
  const GeometricMap* gm_;
  const DisplacementSpace* space_;
  PenaltyConfig config_;
  std::shared_ptr<const QualityMesh> pb_;
  PolytopeQuadrature quad_;
  std::shared_ptr<const DenseOp> val_q_, grad_q_, val_pb_, val_ps_;
  std::vector<double> barrier_w_;
  std::vector<Vec2> ps_points_;
  std::vector<SamplePoint> ps_pre_;
  std::vector<Vec2> ps_pre_x_;
};

/// Context operators restricted to a = W b (W is M x m, orthonormal
/// columns). An empty W means the identity.
class ReducedOperators {
 public:
  explicit ReducedOperators(const RegistrationContext& ctx, const Eigen::MatrixXd& w = {});

  const RegistrationContext& context() const { return *ctx_; }
  int dim() const { return dim_; }
  bool identity() const { return identity_; }
  const Eigen::MatrixXd& w() const { return w_; }
  /// a = W b.
  Eigen::VectorXd lift(const Eigen::VectorXd& b) const { return identity_ ? b : Eigen::VectorXd(w_ * b); }

  const DenseOp& value_q() const { return *val_q_; }
  const DenseOp& grad_q() const { return *grad_q_; }
  const DenseOp* value_pb() const { return val_pb_.get(); }
  const DenseOp* value_ps() const { return val_ps_.get(); }
  const Eigen::MatrixXd& penalty() const { return penalty_; }

 private:
  const RegistrationContext* ctx_;
  Eigen::MatrixXd w_;
  bool identity_ = true;
  int dim_ = 0;
  std::shared_ptr<const DenseOp> val_q_, grad_q_, val_pb_, val_ps_;
  Eigen::MatrixXd penalty_;
};

/// (1/|Omega_p|) int exp(min((eps - J(N_p))/C_exp, 40)).
Term jacobian_penalty(const ReducedOperators& ops, const Eigen::VectorXd& b, bool with_grad = true);
/// (1/|Omega|) sum_k |D_k^pb| avg_{D_k} exp(min(q(Phi)/q(id) - kappa_msh, 40)).
Term mesh_penalty(const ReducedOperators& ops, const Eigen::VectorXd& b, bool with_grad = true);
/// b^T W^T H W b.
Term smoothness_penalty(const ReducedOperators& ops, const Eigen::VectorXd& b, bool with_grad = true);
/// weight * sum_i |Psi(N_p(z_i)) - targets_i|^2 (weight < 0: 1/N).
Term pointset_target(const ReducedOperators& ops, const std::vector<Vec2>& targets, const Eigen::VectorXd& b,
                     bool with_grad = true, double weight = -1.0);
/// min_nu sum_q w_q J(Psi) (s(N_p(x_q)) - nu(x_q))^2.
Term distributed_target(const ReducedOperators& ops, const Sensor& sensor, const TemplateSpace& templates,
                        const Eigen::VectorXd& b, bool with_grad = true);
/// Sensor values at the deformed quadrature points N_p(a)(x_q).
Eigen::VectorXd sensor_at_quadrature(const ReducedOperators& ops, const Sensor& sensor, const Eigen::VectorXd& b,
                                     std::size_t* clamped = nullptr);

struct TargetSpec {
  const Sensor* sensor = nullptr;
  const TemplateSpace* templates = nullptr;
  const std::vector<Vec2>* pointset = nullptr;
  double pointset_weight = -1.0;
  double distributed_weight = 1.0;
};

struct ObjectiveBreakdown {
  double total = 0.0;
  double target = 0.0;
  double jac = 0.0;
  double msh = 0.0;
  double smooth = 0.0;
  std::size_t flagged = 0;
};

/// f = f_tg + xi (f_jac + f_msh + P) in the reduced coordinates of `ops`.
class Objective {
 public:
  Objective(const ReducedOperators& ops, TargetSpec target) : ops_(&ops), target_(target) {}

  double operator()(const Eigen::VectorXd& b, Eigen::VectorXd* grad) const;
  ObjectiveBreakdown breakdown(const Eigen::VectorXd& b) const;
  Term target(const Eigen::VectorXd& b, bool with_grad = true) const;

 private:
  const ReducedOperators* ops_;
  TargetSpec target_;
};

// ---------------------------------------------------------------------------

/// Samples of a boundary field on one facet of an ordered facet chain.
struct FacetProfile {
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
  std::vector<double> t;       ///< increasing positions in [0, 1]
  std::vector<double> values;
};

struct ShockOptions {
  double threshold = 1.0;
  double slope = 1e-2;
};

/// Midpoint of the first facet j with mean_j > threshold > mean_{j+1} and
/// mean tangential derivative below -slope / |F_j|. Throws NoFeature.
Vec2 detect_shock(const std::vector<FacetProfile>& chain, const ShockOptions& options = {});

/// Strict interior local maxima of a sampled profile (indices).
std::vector<int> local_maxima(const std::vector<double>& values);

}  // namespace regmap
