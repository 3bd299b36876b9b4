#include "mind/contingency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace mind::contingency {

using json = nlohmann::json;

namespace {

using StateVec = Eigen::Matrix<double, 6, 1>;
using StateMat = Eigen::Matrix<double, 6, 6>;
using CtrlVec = Eigen::Matrix<double, 2, 1>;
using CtrlMat = Eigen::Matrix<double, 2, 2>;
using InputMat = Eigen::Matrix<double, 6, 2>;
using StepMat = Eigen::Matrix<double, 6, 8>;
using StepVec = Eigen::Matrix<double, 8, 1>;

/// Augmented planning state: vehicle state plus the previous control.
struct Augmented {
  VehicleState s;
  Control prev;
};

StateVec to_vec(const Augmented& x) {
  StateVec v;
  v << x.s.x, x.s.y, x.s.theta, x.s.v, x.prev.a, x.prev.kappa;
  return v;
}

StateVec difference(const Augmented& a, const Augmented& b) {
  StateVec d = to_vec(a) - to_vec(b);
  d[2] = normalize_angle(d[2]);
  return d;
}

Augmented step(const Augmented& x, const Control& u, double dt) {
  return {bicycle_step(x.s, u, dt), u};
}

/// Jacobians of the augmented dynamics at (x, u).
void linearize(const Augmented& x, const Control& u, double dt, StateMat& A, InputMat& B) {
  const double c = std::cos(x.s.theta);
  const double s = std::sin(x.s.theta);
  const double v = x.s.v;
  A.setZero();
  A(0, 0) = 1.0;
  A(0, 2) = -dt * v * s;
  A(0, 3) = dt * c;
  A(1, 1) = 1.0;
  A(1, 2) = dt * v * c;
  A(1, 3) = dt * s;
  A(2, 2) = 1.0;
  A(2, 3) = dt * u.kappa;
  A(3, 3) = 1.0;
  B.setZero();
  B(2, 1) = dt * v;
  B(3, 0) = dt;
  B(4, 0) = 1.0;
  B(5, 1) = 1.0;
}

void add_hinge(StageCost& c, double& term, double w, double h, const StageVector& grad,
               const StageMatrix* hess) {
  if (h <= 0.0 || w == 0.0) return;
  term += w * h * h;
  c.gradient += 2.0 * w * h * grad;
  const StageMatrix outer = grad * grad.transpose();
  c.hessian += 2.0 * w * outer;
  c.hessian_gn += 2.0 * w * outer;
  if (hess) c.hessian += 2.0 * w * h * *hess;
}

StageVector unit(int i) {
  StageVector e = StageVector::Zero();
  e[i] = 1.0;
  return e;
}

struct SolverSegment {
  int parent = -1;
  std::vector<Augmented> states;  // after each control
  std::vector<Control> controls;
};

struct Rollout {
  std::vector<SolverSegment> segs;
  double cost = 0.0;
  CostBreakdown breakdown;
};

Augmented start_of(const std::vector<SolverSegment>& segs, const PlanProblem& pb, std::size_t j) {
  const int parent = pb.segments[j].parent;
  if (parent < 0) return {pb.x0, pb.u_prev};
  return segs[static_cast<std::size_t>(parent)].states.back();
}

/// Evaluates cost of the given trajectories (states already rolled out).
void accumulate_cost(Rollout& r, const PlanProblem& pb, const PlannerConfig& cfg) {
  r.cost = 0.0;
  r.breakdown = {};
  for (std::size_t j = 0; j < pb.segments.size(); ++j) {
    const auto& spec = pb.segments[j];
    const auto& seg = r.segs[j];
    Control prev = start_of(r.segs, pb, j).prev;
    for (std::size_t k = 0; k < seg.controls.size(); ++k) {
      const StageCost sc = stage_cost(seg.states[k].s, seg.controls[k], prev, spec.steps[k], pb.route, cfg);
      r.breakdown += sc.terms.scaled(spec.weight);
      prev = seg.controls[k];
    }
  }
  r.cost = r.breakdown.total();
}

void roll(Rollout& r, const PlanProblem& pb, double dt) {
  for (std::size_t j = 0; j < pb.segments.size(); ++j) {
    Augmented x = start_of(r.segs, pb, j);
    auto& seg = r.segs[j];
    for (std::size_t k = 0; k < seg.controls.size(); ++k) {
      x = step(x, seg.controls[k], dt);
      seg.states[k] = x;
    }
  }
}

Control pursuit(const VehicleState& s, const std::optional<Polyline>& route, const PlannerConfig& cfg) {
  Control u;
  if (!route || route->size() < 2) return u;
  const double lookahead = std::max(4.0, 0.8 * s.v + 2.0);
  const Vec2 target = route->at(route->project(s.position()).s + lookahead);
  const Vec2 to = target - s.position();
  const double alpha = normalize_angle(std::atan2(to.y(), to.x()) - s.theta);
  u.kappa = std::clamp(2.0 * std::sin(alpha) / lookahead, -cfg.kappa_max, cfg.kappa_max);
  return u;
}

Rollout initial_guess(const PlanProblem& pb, const PlannerConfig& cfg) {
  Rollout r;
  r.segs.resize(pb.segments.size());
  for (std::size_t j = 0; j < pb.segments.size(); ++j) {
    const std::size_t n = pb.segments[j].steps.size();
    r.segs[j].parent = pb.segments[j].parent;
    r.segs[j].states.resize(n);
    r.segs[j].controls.resize(n);
    Augmented x = start_of(r.segs, pb, j);
    const auto& steps = pb.segments[j].steps;
    for (std::size_t k = 0; k < n; ++k) {
      // Track the speed implied by the ego decision means.
      const Vec2 before = k == 0 ? (j == 0 && pb.segments[j].parent < 0 ? pb.x0.position()
                                                                         : x.s.position())
                                 : steps[k - 1].decision.mean;
      const double v_ref = (steps[k].decision.mean - before).norm() / cfg.dt;
      Control u = pursuit(x.s, pb.route, cfg);
      u.a = std::clamp(2.0 * (v_ref - x.s.v), cfg.a_min, cfg.a_max);
      r.segs[j].controls[k] = u;
      x = step(x, u, cfg.dt);
      r.segs[j].states[k] = x;
    }
  }
  return r;
}

struct Gains {
  std::vector<std::vector<CtrlVec>> k;
  std::vector<std::vector<Eigen::Matrix<double, 2, 6>>> K;
};

/// Backward pass; returns false when a control Hessian is not positive definite.
bool backward(const Rollout& r, const PlanProblem& pb, const PlannerConfig& cfg, double mu, Gains& gains) {
  const std::size_t m = pb.segments.size();
  gains.k.assign(m, {});
  gains.K.assign(m, {});
  std::vector<StateVec> v_start(m, StateVec::Zero());
  std::vector<StateMat> vv_start(m, StateMat::Zero());
  std::vector<std::vector<std::size_t>> children(m);
  for (std::size_t j = 0; j < m; ++j) {
    if (pb.segments[j].parent >= 0) children[static_cast<std::size_t>(pb.segments[j].parent)].push_back(j);
  }
  const double dt = cfg.dt;
  for (std::size_t jj = m; jj-- > 0;) {
    const auto& spec = pb.segments[jj];
    const auto& seg = r.segs[jj];
    StateVec Vx = StateVec::Zero();
    StateMat Vxx = StateMat::Zero();
    for (std::size_t c : children[jj]) {
      Vx += v_start[c];
      Vxx += vv_start[c];
    }
    const std::size_t n = seg.controls.size();
    gains.k[jj].resize(n);
    gains.K[jj].resize(n);
    const Augmented x_begin = start_of(r.segs, pb, jj);
    for (std::size_t k = n; k-- > 0;) {
      const Augmented& x_prev = k == 0 ? x_begin : seg.states[k - 1];
      const Control& u = seg.controls[k];
      StateMat A;
      InputMat B;
      linearize(x_prev, u, dt, A, B);

      const StageCost sc =
          stage_cost(seg.states[k].s, u, x_prev.prev, spec.steps[k], pb.route, cfg);
      // Map stage variables z = (x', u, u_prev) onto w = (x_prev, u).
      StageMatrix J = StageMatrix::Zero();
      J.block<4, 6>(0, 0) = A.topRows<4>();
      J.block<4, 2>(0, 6) = B.topRows<4>();
      J(4, 6) = 1.0;
      J(5, 7) = 1.0;
      J(6, 4) = 1.0;
      J(7, 5) = 1.0;
      const StepVec lw = spec.weight * (J.transpose() * sc.gradient);
      const Eigen::Matrix<double, 8, 8> lww = spec.weight * (J.transpose() * sc.hessian_gn * J);

      StepMat F;
      F.leftCols<6>() = A;
      F.rightCols<2>() = B;
      const StepVec Qw = lw + F.transpose() * Vx;
      const Eigen::Matrix<double, 8, 8> Qww = lww + F.transpose() * Vxx * F;
      const Eigen::Matrix<double, 8, 8> Qreg =
          lww + F.transpose() * (Vxx + mu * StateMat::Identity()) * F;

      const StateVec Qx = Qw.head<6>();
      const CtrlVec Qu = Qw.tail<2>();
      const StateMat Qxx = Qww.topLeftCorner<6, 6>();
      const CtrlMat Quu = Qww.bottomRightCorner<2, 2>();
      const Eigen::Matrix<double, 2, 6> Qux = Qww.bottomLeftCorner<2, 6>();
      const CtrlMat Quu_reg = Qreg.bottomRightCorner<2, 2>();
      const Eigen::Matrix<double, 2, 6> Qux_reg = Qreg.bottomLeftCorner<2, 6>();

      Eigen::LLT<CtrlMat> llt(Quu_reg);
      if (llt.info() != Eigen::Success || !Quu_reg.allFinite()) return false;
      const CtrlVec kk = -llt.solve(Qu);
      const Eigen::Matrix<double, 2, 6> KK = -llt.solve(Qux_reg);
      gains.k[jj][k] = kk;
      gains.K[jj][k] = KK;

      Vx = Qx + KK.transpose() * Quu * kk + KK.transpose() * Qu + Qux.transpose() * kk;
      Vxx = Qxx + KK.transpose() * Quu * KK + KK.transpose() * Qux + Qux.transpose() * KK;
      Vxx = 0.5 * (Vxx + Vxx.transpose()).eval();
    }
    v_start[jj] = Vx;
    vv_start[jj] = Vxx;
  }
  return true;
}

Rollout forward(const Rollout& ref, const Gains& gains, const PlanProblem& pb, const PlannerConfig& cfg,
                double alpha) {
  Rollout r;
  r.segs.resize(ref.segs.size());
  for (std::size_t j = 0; j < pb.segments.size(); ++j) {
    const auto& old = ref.segs[j];
    auto& seg = r.segs[j];
    seg.parent = old.parent;
    const std::size_t n = old.controls.size();
    seg.states.resize(n);
    seg.controls.resize(n);
    Augmented x = start_of(r.segs, pb, j);
    Augmented x_ref = start_of(ref.segs, pb, j);
    for (std::size_t k = 0; k < n; ++k) {
      const CtrlVec du = alpha * gains.k[j][k] + gains.K[j][k] * difference(x, x_ref);
      const Control u{old.controls[k].a + du[0], old.controls[k].kappa + du[1]};
      seg.controls[k] = u;
      x = step(x, u, cfg.dt);
      seg.states[k] = x;
      x_ref = old.states[k];
    }
  }
  accumulate_cost(r, pb, cfg);
  return r;
}

}  // namespace

VehicleState bicycle_step(const VehicleState& s, const Control& u, double dt) {
  VehicleState n;
  n.x = s.x + dt * s.v * std::cos(s.theta);
  n.y = s.y + dt * s.v * std::sin(s.theta);
  n.theta = s.theta + dt * s.v * u.kappa;
  n.v = s.v + dt * u.a;
  return n;
}

void PlannerConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("planner: dt must be positive");
  for (double w : {w_safe, w_speed, w_lateral, w_kin, w_acc, w_kappa, w_jerk, w_dkappa, gamma, w_col,
                   decision_cov_floor, corridor_margin, footprint_radius}) {
    if (!(w >= 0.0)) throw std::invalid_argument("planner: weights must be non-negative");
  }
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("planner: p must lie in (0, 1)");
  if (!(v_min <= v_max && a_min < a_max && kappa_max > 0.0 && lat_acc_max > 0.0)) {
    throw std::invalid_argument("planner: inconsistent bounds");
  }
  if (max_iterations < 0 || !(tolerance >= 0.0)) throw std::invalid_argument("planner: bad solver limits");
  if (!(reg_min > 0.0 && reg_init >= reg_min && reg_max > reg_init)) {
    throw std::invalid_argument("planner: bad regularization schedule");
  }
  if (chance_samples == 0) throw std::invalid_argument("planner: chance_samples must be positive");
}

CostBreakdown& CostBreakdown::operator+=(const CostBreakdown& o) {
  safe += o.safe;
  target += o.target;
  kin += o.kin;
  comfort += o.comfort;
  decision += o.decision;
  collision += o.collision;
  return *this;
}

CostBreakdown CostBreakdown::scaled(double w) const {
  return {w * safe, w * target, w * kin, w * comfort, w * decision, w * collision};
}

Mat2 collision_covariance(const Mat2& agent_cov, double radius, double d_bound) {
  const Mat2 e1 = d_bound * d_bound * agent_cov;
  const Mat2 e2 = radius * radius * Mat2::Identity();
  const double t1 = std::max(e1.trace(), 0.0);
  const double t2 = e2.trace();
  if (t1 < 1e-18) return e2 / (d_bound * d_bound);
  const double c = std::sqrt(t1 / t2);
  return ((1.0 + 1.0 / c) * e1 + (1.0 + c) * e2) / (d_bound * d_bound);
}

StageCost stage_cost(const VehicleState& x, const Control& u, const Control& u_prev,
                     const StepContext& ctx, const std::optional<Polyline>& route,
                     const PlannerConfig& cfg) {
  StageCost c;
  auto& t = c.terms;
  const Vec2 p = x.position();

  if (route && route->size() >= 2) {
    const Projection pr = route->project(p);
    const double lat = pr.lateral;
    const Vec2 n(-pr.tangent.y(), pr.tangent.x());
    StageVector g = StageVector::Zero();
    g.head<2>() = n;
    const StageMatrix nn = g * g.transpose();
    t.target += cfg.w_lateral * lat * lat;
    c.gradient += 2.0 * cfg.w_lateral * lat * g;
    c.hessian += 2.0 * cfg.w_lateral * nn;
    c.hessian_gn += 2.0 * cfg.w_lateral * nn;
    const double sign = lat >= 0.0 ? 1.0 : -1.0;
    add_hinge(c, t.safe, cfg.w_safe, std::abs(lat) - cfg.corridor_margin, sign * g, nullptr);
  }

  const double dv = x.v - cfg.target_speed;
  t.target += cfg.w_speed * dv * dv;
  c.gradient[3] += 2.0 * cfg.w_speed * dv;
  c.hessian(3, 3) += 2.0 * cfg.w_speed;
  c.hessian_gn(3, 3) += 2.0 * cfg.w_speed;

  add_hinge(c, t.kin, cfg.w_kin, x.v - cfg.v_max, unit(3), nullptr);
  add_hinge(c, t.kin, cfg.w_kin, cfg.v_min - x.v, -unit(3), nullptr);
  add_hinge(c, t.kin, cfg.w_kin, u.a - cfg.a_max, unit(4), nullptr);
  add_hinge(c, t.kin, cfg.w_kin, cfg.a_min - u.a, -unit(4), nullptr);
  add_hinge(c, t.kin, cfg.w_kin, u.kappa - cfg.kappa_max, unit(5), nullptr);
  add_hinge(c, t.kin, cfg.w_kin, -u.kappa - cfg.kappa_max, -unit(5), nullptr);
  {
    const double lat_acc = x.v * x.v * u.kappa;
    StageVector g = StageVector::Zero();
    g[3] = 2.0 * x.v * u.kappa;
    g[5] = x.v * x.v;
    StageMatrix h = StageMatrix::Zero();
    h(3, 3) = 2.0 * u.kappa;
    h(3, 5) = h(5, 3) = 2.0 * x.v;
    add_hinge(c, t.kin, cfg.w_kin, lat_acc - cfg.lat_acc_max, g, &h);
    const StageMatrix hn = -h;
    add_hinge(c, t.kin, cfg.w_kin, -lat_acc - cfg.lat_acc_max, -g, &hn);
  }

  auto quad = [&](double w, const StageVector& g, double value) {
    t.comfort += w * value * value;
    c.gradient += 2.0 * w * value * g;
    const StageMatrix outer = g * g.transpose();
    c.hessian += 2.0 * w * outer;
    c.hessian_gn += 2.0 * w * outer;
  };
  quad(cfg.w_acc, unit(4), u.a);
  quad(cfg.w_kappa, unit(5), u.kappa);
  quad(cfg.w_jerk, unit(4) - unit(6), u.a - u_prev.a);
  quad(cfg.w_dkappa, unit(5) - unit(7), u.kappa - u_prev.kappa);

  if (cfg.gamma > 0.0) {
    const Mat2 cov = ctx.decision.cov + cfg.decision_cov_floor * Mat2::Identity();
    const Mat2 S = gmm::regularized(cov).inverse();
    const Vec2 d = p - ctx.decision.mean;
    t.decision += cfg.gamma * d.dot(S * d);
    c.gradient.head<2>() += 2.0 * cfg.gamma * S * d;
    c.hessian.topLeftCorner<2, 2>() += 2.0 * cfg.gamma * S;
    c.hessian_gn.topLeftCorner<2, 2>() += 2.0 * cfg.gamma * S;
  }

  const double w_col = cfg.w_col * ctx.collision_scale;
  if (w_col > 0.0 && !ctx.agents.empty()) {
    const double d_bnd = gmm::chi2_threshold(cfg.p);
    for (const auto& agent : ctx.agents) {
      const Mat2 S = collision_covariance(agent.cov, cfg.footprint_radius, d_bnd).inverse();
      const Vec2 d = p - agent.mean;
      const double D = std::sqrt(std::max(d.dot(S * d), 0.0));
      if (D >= d_bnd) continue;
      const double gap = d_bnd - D;
      t.collision += w_col * gap * gap;
      if (D < 1e-9) continue;
      const Vec2 gD = S * d / D;
      const Mat2 hD = S / D - gD * gD.transpose() / D;
      c.gradient.head<2>() += -2.0 * w_col * gap * gD;
      const Mat2 outer = gD * gD.transpose();
      c.hessian.topLeftCorner<2, 2>() += 2.0 * w_col * (outer - gap * hD);
      c.hessian_gn.topLeftCorner<2, 2>() += 2.0 * w_col * outer;
    }
  }
  return c;
}

double collision_cost(const Vec2& ego, const std::vector<gmm::Gaussian2>& agents,
                      const PlannerConfig& cfg) {
  const double d_bnd = gmm::chi2_threshold(cfg.p);
  double total = 0.0;
  for (const auto& agent : agents) {
    const Mat2 S = collision_covariance(agent.cov, cfg.footprint_radius, d_bnd).inverse();
    const Vec2 d = ego - agent.mean;
    const double D = std::sqrt(std::max(d.dot(S * d), 0.0));
    const double gap = std::max(d_bnd - D, 0.0);
    total += cfg.w_col * gap * gap;
  }
  return total;
}

PlanProblem make_problem(const aime::ScenarioTree& tree, const aime::Policy& policy,
                         const VehicleState& x0, const Control& u_prev,
                         const std::optional<Polyline>& route) {
  PlanProblem pb;
  pb.x0 = x0;
  pb.u_prev = u_prev;
  pb.route = route;
  std::vector<int> index_of(tree.nodes.size(), -1);
  for (int id : policy.nodes) {
    const auto& node = tree.nodes[static_cast<std::size_t>(id)];
    SegmentSpec spec;
    spec.parent = id == policy.root_child ? -1 : index_of[static_cast<std::size_t>(node.parent)];
    if (id != policy.root_child && spec.parent < 0) {
      throw std::invalid_argument("make_problem: policy nodes are not in pre-order");
    }
    spec.scenario_node = id;
    spec.mass = node.mass;
    spec.weight = policy.mass > 0.0 ? node.mass / policy.mass : 0.0;
    spec.start_step = node.entry_step;
    for (const auto& sn : node.segment.nodes) {
      StepContext ctx;
      ctx.decision = sn.entities.front();
      ctx.agents.assign(sn.entities.begin() + 1, sn.entities.end());
      ctx.collision_scale = spec.weight > 0.0 ? 1.0 / spec.weight : 1.0;
      spec.steps.push_back(std::move(ctx));
    }
    index_of[static_cast<std::size_t>(id)] = static_cast<int>(pb.segments.size());
    pb.segments.push_back(std::move(spec));
  }
  // Choosing a policy does not rule out the agent behaviors of the other
  // policies, so every segment also avoids the agents of every scenario
  // outside the policy covering the same step.
  std::vector<bool> own(tree.nodes.size(), false);
  for (int id : policy.nodes) own[static_cast<std::size_t>(id)] = true;
  for (auto& seg : pb.segments) {
    for (std::size_t k = 0; k < seg.steps.size(); ++k) {
      const int t = seg.start_step + static_cast<int>(k) + 1;
      for (const auto& node : tree.nodes) {
        if (own[static_cast<std::size_t>(node.id)] || node.parent < 0) continue;
        if (t <= node.entry_step || t > node.end_step) continue;
        const auto& sn = node.segment.nodes[static_cast<std::size_t>(t - node.entry_step - 1)];
        auto& agents = seg.steps[k].agents;
        agents.insert(agents.end(), sn.entities.begin() + 1, sn.entities.end());
      }
    }
  }
  return pb;
}

VehicleState TrajectoryTree::start_state(std::size_t j) const {
  const int parent = segments.at(j).parent;
  if (parent < 0) return root;
  return segments[static_cast<std::size_t>(parent)].states.back();
}

double TrajectoryTree::max_continuity_residual(double dt) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < segments.size(); ++j) {
    const auto& seg = segments[j];
    if (seg.controls.empty()) continue;
    const VehicleState expect = bicycle_step(start_state(j), seg.controls.front(), dt);
    const VehicleState& got = seg.states.front();
    const double r = std::max({std::abs(expect.x - got.x), std::abs(expect.y - got.y),
                               std::abs(expect.theta - got.theta), std::abs(expect.v - got.v)});
    worst = std::max(worst, r);
  }
  return worst;
}

double evaluate_controls(const PlanProblem& pb, const std::vector<std::vector<Control>>& controls,
                         const PlannerConfig& cfg) {
  if (controls.size() != pb.segments.size()) throw std::invalid_argument("evaluate_controls: shape mismatch");
  Rollout r;
  r.segs.resize(pb.segments.size());
  for (std::size_t j = 0; j < pb.segments.size(); ++j) {
    if (controls[j].size() != pb.segments[j].steps.size()) {
      throw std::invalid_argument("evaluate_controls: shape mismatch");
    }
    r.segs[j].parent = pb.segments[j].parent;
    r.segs[j].controls = controls[j];
    r.segs[j].states.resize(controls[j].size());
  }
  roll(r, pb, cfg.dt);
  accumulate_cost(r, pb, cfg);
  return r.cost;
}

TrajectoryTree ilqr_solve_tree(const PlanProblem& pb, const PlannerConfig& cfg) {
  cfg.validate();
  for (std::size_t j = 0; j < pb.segments.size(); ++j) {
    const int parent = pb.segments[j].parent;
    if (parent >= static_cast<int>(j) || (j > 0 && parent < 0) || (j == 0 && parent != -1)) {
      throw std::invalid_argument("ilqr_solve_tree: segments must be a single pre-ordered tree");
    }
    if (pb.segments[j].steps.empty()) throw std::invalid_argument("ilqr_solve_tree: empty segment");
  }
  TrajectoryTree out;
  out.root = pb.x0;
  out.u_prev = pb.u_prev;

  Rollout cur = initial_guess(pb, cfg);
  accumulate_cost(cur, pb, cfg);
  out.cost_history.push_back(cur.cost);
  double mu = cfg.reg_init;
  SolveStatus status = SolveStatus::kIterationCap;
  int it = 0;
  if (!std::isfinite(cur.cost)) status = SolveStatus::kDiverged;
  while (status == SolveStatus::kIterationCap && it < cfg.max_iterations) {
    Gains gains;
    if (!backward(cur, pb, cfg, mu, gains)) {
      mu *= 10.0;
      if (mu > cfg.reg_max) {
        status = SolveStatus::kConverged;
        break;
      }
      continue;
    }
    bool accepted = false;
    Rollout cand;
    for (double alpha = 1.0; alpha > 1e-3; alpha *= 0.5) {
      cand = forward(cur, gains, pb, cfg, alpha);
      if (std::isfinite(cand.cost) && cand.cost <= cur.cost) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      mu *= 10.0;
      if (mu > cfg.reg_max) status = SolveStatus::kConverged;
      continue;
    }
    ++it;
    const double decrease = cur.cost - cand.cost;
    cur = std::move(cand);
    out.cost_history.push_back(cur.cost);
    mu = std::max(mu / 2.0, cfg.reg_min);
    if (decrease <= cfg.tolerance * std::max(std::abs(cur.cost), 1.0)) status = SolveStatus::kConverged;
  }

  // Enforce the control box, then re-roll so every state follows the dynamics.
  for (auto& seg : cur.segs) {
    for (auto& u : seg.controls) {
      u.a = std::clamp(u.a, cfg.a_min, cfg.a_max);
      u.kappa = std::clamp(u.kappa, -cfg.kappa_max, cfg.kappa_max);
    }
  }
  roll(cur, pb, cfg.dt);
  accumulate_cost(cur, pb, cfg);
  if (!std::isfinite(cur.cost)) status = SolveStatus::kDiverged;

  out.status = status;
  out.iterations = it;
  out.cost = cur.breakdown;
  for (std::size_t j = 0; j < pb.segments.size(); ++j) {
    const auto& spec = pb.segments[j];
    Segment seg;
    seg.parent = spec.parent;
    seg.scenario_node = spec.scenario_node;
    seg.weight = spec.weight;
    seg.mass = spec.mass;
    seg.start_step = spec.start_step;
    for (const auto& x : cur.segs[j].states) seg.states.push_back(x.s);
    seg.controls = cur.segs[j].controls;
    seg.context = spec.steps;
    out.segments.push_back(std::move(seg));
  }
  out.continuity_residual = out.max_continuity_residual(cfg.dt);
  return out;
}

ChanceResult check_chance(const TrajectoryTree& tree, double p, std::size_t n_samples,
                          std::uint64_t seed, double radius) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("check_chance: p must lie in (0, 1)");
  if (n_samples == 0) throw std::invalid_argument("check_chance: n_samples must be positive");
  ChanceResult res;
  const double n = static_cast<double>(n_samples);
  res.threshold = p + 3.0 * std::sqrt(p * (1.0 - p) / n);
  const double r2 = radius * radius;
  for (std::size_t j = 0; j < tree.segments.size(); ++j) {
    const auto& seg = tree.segments[j];
    for (std::size_t k = 0; k < seg.states.size(); ++k) {
      const Vec2 ego = seg.states[k].position();
      std::vector<std::vector<Vec2>> draws;
      for (std::size_t a = 0; a < seg.context[k].agents.size(); ++a) {
        const auto& g = seg.context[k].agents[a];
        Eigen::SelfAdjointEigenSolver<Mat2> es(g.cov);
        const double sd = std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
        // Beyond six standard deviations the overlap probability is negligible.
        if ((ego - g.mean).norm() - radius > 6.0 * sd) continue;
        const std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL * (j + 1)) ^ (0xBF58476D1CE4E5B9ULL * (k + 1)) ^
                                (0x94D049BB133111EBULL * (a + 1));
        draws.push_back(gmm::sample(g, n_samples, s));
      }
      if (draws.empty()) continue;
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n_samples; ++i) {
        for (const auto& d : draws) {
          if ((d[i] - ego).squaredNorm() < r2) {
            ++hits;
            break;
          }
        }
      }
      const double est = static_cast<double>(hits) / n;
      res.max_violation = std::max(res.max_violation, est);
    }
  }
  res.pass = res.max_violation <= res.threshold;
  return res;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kIterationCap:
      return "iteration-cap";
    case SolveStatus::kDiverged:
      return "diverged";
  }
  return "unknown";
}

json to_json(const CostBreakdown& c) {
  return {{"safe", c.safe},           {"target", c.target},       {"kin", c.kin},
          {"comfort", c.comfort},     {"decision", c.decision},   {"collision", c.collision},
          {"total", c.total()}};
}

json to_json(const TrajectoryTree& tree) {
  json segs = json::array();
  for (const auto& seg : tree.segments) {
    json steps = json::array();
    for (std::size_t k = 0; k < seg.states.size(); ++k) {
      const auto& s = seg.states[k];
      const auto& u = seg.controls[k];
      steps.push_back({{"t", seg.start_step + static_cast<int>(k) + 1},
                       {"x", s.x},
                       {"y", s.y},
                       {"theta", s.theta},
                       {"v", s.v},
                       {"a", u.a},
                       {"kappa", u.kappa}});
    }
    const int parent_id =
        seg.parent < 0 ? -1 : tree.segments[static_cast<std::size_t>(seg.parent)].scenario_node;
    segs.push_back({{"scenario_id", seg.scenario_node},
                    {"parent", parent_id},
                    {"weight", seg.weight},
                    {"steps", std::move(steps)}});
  }
  return {{"segments", std::move(segs)},
          {"root", {{"x", tree.root.x}, {"y", tree.root.y}, {"theta", tree.root.theta}, {"v", tree.root.v}}},
          {"cost", to_json(tree.cost)},
          {"status", to_string(tree.status)},
          {"iterations", tree.iterations},
          {"continuity_residual", tree.continuity_residual}};
}

}  // namespace mind::contingency
