#include "elmap/qp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <limits>

namespace elmap {

// ---------------------------------------------------------------------------
// LinearConstraintSystem

LinearConstraintSystem::LinearConstraintSystem(Eigen::Index n_nodes, Eigen::Index dim)
    : n_nodes_(n_nodes), dim_(dim) {
  if (n_nodes < 1 || dim < 1) {
    throw std::invalid_argument("constraint system needs n_nodes >= 1, dim >= 1");
  }
}

Eigen::Index LinearConstraintSystem::add_aux_variable() {
  return primary_vars() + aux_vars_++;
}

Eigen::Index LinearConstraintSystem::add_row(Row row) {
  for (const auto& [idx, coeff] : row.terms) {
    if (idx < 0 || idx >= total_vars()) {
      throw std::invalid_argument("row references an unknown variable");
    }
    (void)coeff;
  }
  rows_.push_back(std::move(row));
  return row_count() - 1;
}

Eigen::Index LinearConstraintSystem::register_constraint() { return constraint_count_++; }

Eigen::Index LinearConstraintSystem::radius_row_of(Eigen::Index constraint_id) const {
  for (Eigen::Index i = 0; i < row_count(); ++i) {
    if (rows_[static_cast<std::size_t>(i)].radius_row &&
        rows_[static_cast<std::size_t>(i)].origin == constraint_id) {
      return i;
    }
  }
  return -1;
}

Eigen::VectorXd LinearConstraintSystem::apply(const Eigen::VectorXd& z) const {
  Eigen::VectorXd out(row_count());
  for (Eigen::Index i = 0; i < row_count(); ++i) {
    double v = 0.0;
    for (const auto& [idx, coeff] : rows_[static_cast<std::size_t>(i)].terms) {
      v += coeff * z(idx);
    }
    out(i) = v;
  }
  return out;
}

Eigen::VectorXd LinearConstraintSystem::apply_transpose(const Eigen::VectorXd& y) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(total_vars());
  for (Eigen::Index i = 0; i < row_count(); ++i) {
    for (const auto& [idx, coeff] : rows_[static_cast<std::size_t>(i)].terms) {
      out(idx) += coeff * y(i);
    }
  }
  return out;
}

Eigen::MatrixXd LinearConstraintSystem::dense_matrix() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(row_count(), total_vars());
  for (Eigen::Index i = 0; i < row_count(); ++i) {
    for (const auto& [idx, coeff] : rows_[static_cast<std::size_t>(i)].terms) {
      a(i, idx) += coeff;
    }
  }
  return a;
}

Eigen::VectorXd LinearConstraintSystem::rhs() const {
  Eigen::VectorXd b(row_count());
  for (Eigen::Index i = 0; i < row_count(); ++i) {
    b(i) = rows_[static_cast<std::size_t>(i)].rhs;
  }
  return b;
}

// ---------------------------------------------------------------------------
// reformulate_l1

LinearConstraintSystem reformulate_l1(const ConstraintSet& cons, Eigen::Index n_nodes,
                                      Eigen::Index dim, double min_radius) {
  LinearConstraintSystem sys(n_nodes, dim);
  for (const PointConstraint& c : cons) {
    if (c.node_index < 0 || c.node_index >= n_nodes) {
      throw std::invalid_argument("constraint node index out of range");
    }
    if (c.anchor.size() != dim) {
      throw std::invalid_argument("constraint anchor dimension mismatch");
    }
    const Eigen::Index id = sys.register_constraint();
    double rho = c.effective_radius();
    if (rho < min_radius) {
      rho = min_radius;
      sys.mark_clamped(id);
    }

    LinearConstraintSystem::L1Block blk;
    blk.constraint_id = id;
    blk.aux_start = sys.primary_vars() + sys.aux_vars();
    for (Eigen::Index k = 0; k < dim; ++k) {
      sys.add_aux_variable();
    }
    LinearConstraintSystem::Row radius;
    for (Eigen::Index k = 0; k < dim; ++k) {
      const Eigen::Index xk = sys.variable_index(c.node_index, k);
      const Eigen::Index sk = blk.aux_start + k;
      // y_k - x_k <= s_k
      blk.plus_rows.push_back(
          sys.add_row({{{xk, -1.0}, {sk, -1.0}}, -c.anchor(k), id, false}));
      // x_k - y_k <= s_k
      blk.minus_rows.push_back(
          sys.add_row({{{xk, 1.0}, {sk, -1.0}}, c.anchor(k), id, false}));
      radius.terms.emplace_back(sk, 1.0);
    }
    radius.rhs = rho;
    radius.origin = id;
    radius.radius_row = true;
    blk.radius_row = sys.add_row(std::move(radius));
    sys.add_l1_block(std::move(blk));
  }

  // Two constraints pinning the same node to the same ball leave the dual
  // split undetermined; flag so callers know the multipliers are a choice.
  for (std::size_t i = 0; i < cons.size(); ++i) {
    for (std::size_t j = i + 1; j < cons.size(); ++j) {
      if (cons[i].node_index == cons[j].node_index &&
          cons[i].anchor == cons[j].anchor &&
          cons[i].effective_radius() == cons[j].effective_radius()) {
        sys.mark_degenerate();
      }
    }
  }
  return sys;
}

// ---------------------------------------------------------------------------
// Dual repair and dual value

Eigen::VectorXd repair_duals(const LinearConstraintSystem& sys, Eigen::VectorXd row_duals) {
  row_duals = row_duals.cwiseMax(0.0);
  for (const auto& blk : sys.l1_blocks()) {
    const double sum = row_duals(blk.radius_row);
    for (std::size_t k = 0; k < blk.plus_rows.size(); ++k) {
      const double delta =
          row_duals(blk.plus_rows[k]) - row_duals(blk.minus_rows[k]);
      const double clamped = std::clamp(delta, -sum, sum);
      row_duals(blk.plus_rows[k]) = 0.5 * (sum + clamped);
      row_duals(blk.minus_rows[k]) = 0.5 * (sum - clamped);
    }
  }
  return row_duals;
}

double dual_value(const QuadraticObjective& obj, const LinearConstraintSystem& sys,
                  const Eigen::VectorXd& row_duals) {
  const Eigen::Index n = obj.nodes();
  const Eigen::Index d = obj.dim();
  const Eigen::VectorXd mu = repair_duals(sys, row_duals);
  const Eigen::VectorXd w = sys.apply_transpose(mu);
  Eigen::LLT<Eigen::MatrixXd> llt(obj.q_block);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("dual_value: Q is not positive definite");
  }
  double g = obj.k0 - mu.dot(sys.rhs());
  for (Eigen::Index k = 0; k < d; ++k) {
    const Eigen::VectorXd v = obj.c.col(k) - 0.5 * w.segment(k * n, n);
    g -= v.dot(llt.solve(v));
  }
  return g;
}

// ---------------------------------------------------------------------------
// KKT report

namespace {

struct Residuals {
  double stationarity = 0.0;
  double feasibility = 0.0;
  double slackness = 0.0;
};

Residuals first_principles_residuals(const QuadraticObjective& obj,
                                     const LinearConstraintSystem& sys,
                                     const Eigen::MatrixXd& nodes,
                                     const Eigen::VectorXd& aux,
                                     const Eigen::VectorXd& row_duals) {
  const Eigen::Index n = obj.nodes();
  const Eigen::Index d = obj.dim();
  Eigen::VectorXd z(sys.total_vars());
  for (Eigen::Index k = 0; k < d; ++k) {
    z.segment(k * n, n) = nodes.col(k);
  }
  z.tail(sys.aux_vars()) = aux;

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(sys.total_vars());
  const Eigen::MatrixXd g = obj.gradient(nodes);
  for (Eigen::Index k = 0; k < d; ++k) {
    grad.segment(k * n, n) = g.col(k);
  }

  Residuals r;
  if (sys.row_count() == 0) {
    r.stationarity = grad.lpNorm<Eigen::Infinity>();
    return r;
  }
  const Eigen::VectorXd az = sys.apply(z);
  const Eigen::VectorXd b = sys.rhs();
  r.stationarity = (grad + sys.apply_transpose(row_duals)).lpNorm<Eigen::Infinity>();
  r.feasibility = std::max(0.0, (az - b).maxCoeff());
  r.slackness = (row_duals.array() * (b - az).array()).abs().maxCoeff();
  return r;
}

}  // namespace

bool KktReport::within(const SolverTolerances& tol) const {
  const double s = std::max(1.0, tol.scale);
  return stationarity <= tol.kkt * s && feasibility <= tol.feas * s &&
         slackness <= tol.comp_slack * s * s && gap_rel <= tol.gap_rel;
}

KktReport kkt_report(const QuadraticObjective& obj, const LinearConstraintSystem& sys,
                     const Solution& sol) {
  KktReport rep;
  const Residuals r =
      first_principles_residuals(obj, sys, sol.nodes, sol.aux, sol.row_duals);
  rep.stationarity = r.stationarity;
  rep.feasibility = r.feasibility;
  rep.slackness = r.slackness;
  const double p = obj.value(sol.nodes);
  const double d = sys.row_count() == 0 ? p : dual_value(obj, sys, sol.row_duals);
  rep.gap_abs = std::abs(p - d);
  rep.gap_rel = rep.gap_abs / std::max(1.0, std::abs(p));
  return rep;
}

// ---------------------------------------------------------------------------
// Interior-point solver

namespace {

class IpmWorkspace {
public:
  IpmWorkspace(const QuadraticObjective& obj, const LinearConstraintSystem& sys,
               double scale)
      : obj_(obj),
        sys_(sys),
        scale_(scale),
        n_(obj.nodes()),
        d_(obj.dim()),
        nv_(sys.total_vars()),
        m_(sys.row_count()),
        c_s_(obj.c / scale),
        k0_s_(obj.k0 / (scale * scale)),
        b_s_(sys.rhs() / scale) {}

  Eigen::VectorXd apply_p(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(nv_);
    for (Eigen::Index k = 0; k < d_; ++k) {
      out.segment(k * n_, n_) = 2.0 * (obj_.q_block * z.segment(k * n_, n_));
    }
    return out;
  }

  Eigen::VectorXd q_vec() const {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(nv_);
    for (Eigen::Index k = 0; k < d_; ++k) {
      q.segment(k * n_, n_) = -2.0 * c_s_.col(k);
    }
    return q;
  }

  double objective(const Eigen::VectorXd& z) const {
    double v = k0_s_;
    for (Eigen::Index k = 0; k < d_; ++k) {
      const auto xk = z.segment(k * n_, n_);
      v += xk.dot(obj_.q_block * xk) - 2.0 * c_s_.col(k).dot(xk);
    }
    return v;
  }

  const QuadraticObjective& obj_;
  const LinearConstraintSystem& sys_;
  double scale_;
  Eigen::Index n_, d_, nv_, m_;
  Eigen::MatrixXd c_s_;
  double k0_s_;
  Eigen::VectorXd b_s_;
};

struct NewtonStep {
  Eigen::VectorXd dz, dt, dlam;
};

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) {
      alpha = std::min(alpha, -v(i) / dv(i));
    }
  }
  return alpha;
}

// Quality of a candidate point: worst scaled KKT residual.
double candidate_quality(const IpmWorkspace& w, const Eigen::VectorXd& q_vec,
                         const Eigen::VectorXd& z, const Eigen::VectorXd& lam) {
  const Eigen::VectorXd rd = w.apply_p(z) + q_vec + w.sys_.apply_transpose(lam);
  const Eigen::VectorXd az = w.sys_.apply(z);
  const double viol = std::max(0.0, (az - w.b_s_).maxCoeff());
  const double comp =
      (lam.array() * (w.b_s_ - az).array()).abs().maxCoeff();
  return std::max({rd.lpNorm<Eigen::Infinity>(), viol, comp});
}

}  // namespace

Solution solve_qp(const QuadraticObjective& obj, const LinearConstraintSystem& sys,
                  const SolverTolerances& tol) {
  if (obj.nodes() != sys.nodes() || obj.dim() != sys.dim()) {
    throw std::invalid_argument("objective and constraint system shapes differ");
  }
  const double scale = tol.scale > 0.0 ? tol.scale : 1.0;
  const Eigen::Index n = obj.nodes();
  const Eigen::Index d = obj.dim();
  IpmWorkspace w(obj, sys, scale);
  const Eigen::Index nv = w.nv_;
  const Eigen::Index m = w.m_;

  Eigen::LLT<Eigen::MatrixXd> q_llt(obj.q_block);
  if (q_llt.info() != Eigen::Success) {
    throw std::invalid_argument("solve_qp: Q must be positive definite");
  }

  Solution sol;
  sol.degenerate = sys.degenerate();

  auto finalize = [&](const Eigen::VectorXd& z, const Eigen::VectorXd& lam,
                      SolveStatus provisional, int iterations) {
    sol.iterations = iterations;
    sol.nodes.resize(n, d);
    for (Eigen::Index k = 0; k < d; ++k) {
      sol.nodes.col(k) = scale * z.segment(k * n, n);
    }
    sol.aux = scale * z.tail(sys.aux_vars());
    sol.row_duals = repair_duals(sys, scale * lam);
    sol.p_star = obj.value(sol.nodes);
    sol.d_star = m == 0 ? sol.p_star : dual_value(obj, sys, sol.row_duals);
    sol.gap = std::abs(sol.p_star - sol.d_star);
    sol.lambda.assign(static_cast<std::size_t>(sys.constraint_count()), 0.0);
    for (Eigen::Index i = 0; i < sys.constraint_count(); ++i) {
      const Eigen::Index row = sys.radius_row_of(i);
      if (row >= 0) {
        sol.lambda[static_cast<std::size_t>(i)] = std::max(0.0, sol.row_duals(row));
      }
    }
    if (provisional == SolveStatus::infeasible) {
      sol.status = SolveStatus::infeasible;
      return;
    }
    const KktReport rep = kkt_report(obj, sys, sol);
    sol.status = rep.within(tol) ? SolveStatus::solved : provisional;
  };

  // Unconstrained minimizer doubles as the starting point.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(nv);
  for (Eigen::Index k = 0; k < d; ++k) {
    z.segment(k * n, n) = q_llt.solve(w.c_s_.col(k));
  }
  if (m == 0) {
    finalize(z, Eigen::VectorXd(), SolveStatus::max_iter, 0);
    return sol;
  }

  // Auxiliary start: s a little above |y - x| so split rows begin interior.
  for (const auto& blk : sys.l1_blocks()) {
    const double rho = w.b_s_(blk.radius_row);
    for (std::size_t k = 0; k < blk.plus_rows.size(); ++k) {
      const double y_k = w.b_s_(blk.minus_rows[k]);
      const auto& terms = sys.rows()[static_cast<std::size_t>(blk.minus_rows[k])].terms;
      const Eigen::Index x_idx = terms.front().first;
      z(blk.aux_start + k) = std::abs(y_k - z(x_idx)) + 0.5 * std::max(1.0, rho);
    }
  }

  const Eigen::VectorXd q_vec = w.q_vec();
  Eigen::VectorXd raw = w.b_s_ - sys.apply(z);
  Eigen::VectorXd t = raw.cwiseMax(0.5);
  Eigen::VectorXd lam = Eigen::VectorXd::Ones(m);

  const double eps_d = 1e-10 * std::max(1.0, q_vec.lpNorm<Eigen::Infinity>());
  const double eps_p = 1e-10 * std::max(1.0, w.b_s_.lpNorm<Eigen::Infinity>());
  const double eps_c = 1e-10;

  // Pushing complementarity far below the other residuals wrecks the normal
  // matrix conditioning, so remember the best iterate seen and fall back to
  // it if later iterations degrade.
  Eigen::VectorXd z_bi = z;
  Eigen::VectorXd t_bi = t;
  Eigen::VectorXd lam_bi = lam;
  double best_quality = std::numeric_limits<double>::infinity();
  int since_improvement = 0;

  Eigen::MatrixXd big_m(nv, nv);
  int iter = 0;
  for (; iter < tol.max_iter; ++iter) {
    const Eigen::VectorXd r_d = w.apply_p(z) + q_vec + sys.apply_transpose(lam);
    const Eigen::VectorXd r_p = sys.apply(z) + t - w.b_s_;
    const Eigen::VectorXd comp = t.cwiseProduct(lam);
    const double mu = comp.sum() / static_cast<double>(m);

    const double quality = std::max(
        {r_d.lpNorm<Eigen::Infinity>(), r_p.lpNorm<Eigen::Infinity>(), comp.maxCoeff()});
    if (quality < best_quality) {
      best_quality = quality;
      z_bi = z;
      t_bi = t;
      lam_bi = lam;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }

    if (std::getenv("ELMAP_IPM_TRACE") != nullptr) {
      std::fprintf(stderr, "it=%3d mu=%9.3e rd=%9.3e rp=%9.3e cmax=%9.3e\n", iter,
                   mu, r_d.lpNorm<Eigen::Infinity>(), r_p.lpNorm<Eigen::Infinity>(),
                   comp.maxCoeff());
    }

    if (r_d.lpNorm<Eigen::Infinity>() <= eps_d &&
        r_p.lpNorm<Eigen::Infinity>() <= eps_p && comp.maxCoeff() <= eps_c) {
      break;
    }
    if (since_improvement >= 8) {
      break;  // stalled; the best iterate is already recorded
    }

    // Farkas test: diverging duals with A'lam -> 0 and b'lam < 0 certify
    // primal infeasibility.
    if (lam.lpNorm<Eigen::Infinity>() > 1e2) {
      const Eigen::VectorXd phi = lam / lam.lpNorm<Eigen::Infinity>();
      if (sys.apply_transpose(phi).lpNorm<Eigen::Infinity>() <= 1e-8 &&
          w.b_s_.dot(phi) <= -1e-8) {
        sol.certificate = phi;
        finalize(z, lam, SolveStatus::infeasible, iter);
        return sol;
      }
    }

    // Normal matrix P + A' W A with W = diag(lam / t).
    Eigen::VectorXd w_diag(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      w_diag(i) = lam(i) / std::max(t(i), 1e-300);
    }
    big_m.setZero();
    for (Eigen::Index k = 0; k < d; ++k) {
      big_m.block(k * n, k * n, n, n) = 2.0 * obj.q_block;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& terms = sys.rows()[static_cast<std::size_t>(i)].terms;
      for (const auto& [a, va] : terms) {
        for (const auto& [bidx, vb] : terms) {
          big_m(a, bidx) += w_diag(i) * va * vb;
        }
      }
    }
    const double reg = 1e-13 * (1.0 + big_m.diagonal().maxCoeff());
    big_m.diagonal().array() += reg;

    Eigen::LLT<Eigen::MatrixXd> llt(big_m);
    if (llt.info() != Eigen::Success) {
      big_m.diagonal().array() += 1e-9 * (1.0 + big_m.diagonal().maxCoeff());
      llt.compute(big_m);
      if (llt.info() != Eigen::Success) {
        break;  // give up; finalize with best iterate
      }
    }

    auto newton = [&](const Eigen::VectorXd& rc) {
      Eigen::VectorXd rr(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        rr(i) = w_diag(i) * r_p(i) - rc(i) / std::max(t(i), 1e-300);
      }
      const Eigen::VectorXd rhs = -r_d - sys.apply_transpose(rr);
      NewtonStep s;
      s.dz = llt.solve(rhs);
      s.dz -= llt.solve(big_m * s.dz - rhs);  // one refinement pass
      const Eigen::VectorXd adz = sys.apply(s.dz);
      s.dt = -r_p - adz;
      s.dlam.resize(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        s.dlam(i) = (-rc(i) - lam(i) * s.dt(i)) / std::max(t(i), 1e-300);
      }
      return s;
    };

    // Predictor.
    const NewtonStep aff = newton(comp);
    const double a_aff = std::min(max_step(t, aff.dt), max_step(lam, aff.dlam));
    const double mu_aff = (t + a_aff * aff.dt).dot(lam + a_aff * aff.dlam) /
                          static_cast<double>(m);
    const double ratio = std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0);
    const double sigma = ratio * ratio * ratio;

    // Corrector with centering.
    Eigen::VectorXd rc = comp.array() - sigma * mu +
                         (aff.dt.array() * aff.dlam.array());
    const NewtonStep step = newton(rc);
    const double frac = mu > 1e-8 ? 0.995 : 0.9995;
    const double alpha = std::min(
        1.0, frac * std::min(max_step(t, step.dt), max_step(lam, step.dlam)));
    if (alpha < 1e-13) {
      break;  // stalled
    }
    z += alpha * step.dz;
    t += alpha * step.dt;
    lam += alpha * step.dlam;
  }

  // Last-chance Farkas test when the loop exhausted without converging.
  if (best_quality > 1e-8 && lam.lpNorm<Eigen::Infinity>() > 1e2) {
    const Eigen::VectorXd phi = lam / lam.lpNorm<Eigen::Infinity>();
    if (sys.apply_transpose(phi).lpNorm<Eigen::Infinity>() <= 1e-7 &&
        w.b_s_.dot(phi) <= -1e-7) {
      sol.certificate = phi;
      finalize(z, lam, SolveStatus::infeasible, iter);
      return sol;
    }
  }

  z = z_bi;
  t = t_bi;
  lam = lam_bi;

  // Active-set polish: solve the equality-constrained KKT system on the rows
  // the central path declared active, then refine the guess by adding rows
  // the candidate violates and dropping rows with negative multipliers. An
  // interior-point iterate alone leaves the nodes ~sqrt(gap / gamma) from the
  // optimum; the crossover removes that amplification. Skipped for degenerate
  // systems, where the central-path multipliers are the ones to report.
  Eigen::VectorXd z_best = z;
  Eigen::VectorXd lam_best = lam;
  const bool trace = std::getenv("ELMAP_IPM_TRACE") != nullptr;
  if (!sys.degenerate()) {
    // Seed with rows the central path decided clearly; marginal rows (lambda
    // comparable to t) would make the equality system inconsistent, so they
    // stay out and re-enter through the violation check below.
    std::vector<bool> active(static_cast<std::size_t>(m), false);
    Eigen::Index na = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (lam(i) > 1e2 * t(i)) {
        active[static_cast<std::size_t>(i)] = true;
        ++na;
      }
    }
    for (int pass = 0; pass < 12 && na > 0; ++pass) {
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nv + na, nv + na);
      for (Eigen::Index k = 0; k < d; ++k) {
        kkt.block(k * n, k * n, n, n) = 2.0 * obj.q_block;
      }
      Eigen::VectorXd rhs(nv + na);
      rhs.head(nv) = -q_vec;
      std::vector<Eigen::Index> rows_in;
      rows_in.reserve(static_cast<std::size_t>(na));
      for (Eigen::Index i = 0; i < m; ++i) {
        if (!active[static_cast<std::size_t>(i)]) {
          continue;
        }
        const Eigen::Index r = static_cast<Eigen::Index>(rows_in.size());
        for (const auto& [idx, coeff] : sys.rows()[static_cast<std::size_t>(i)].terms) {
          kkt(nv + r, idx) += coeff;
          kkt(idx, nv + r) += coeff;
        }
        rhs(nv + r) = w.b_s_(i);
        rows_in.push_back(i);
      }
      // Quasi-definite regularization keeps the factorization nonsingular
      // even when the active rows are rank deficient.
      const double delta = 1e-11;
      Eigen::MatrixXd kkt_reg = kkt;
      kkt_reg.topLeftCorner(nv, nv).diagonal().array() += delta;
      kkt_reg.bottomRightCorner(na, na).diagonal().array() -= delta;
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt_reg);
      Eigen::VectorXd u = lu.solve(rhs);
      u -= lu.solve(kkt * u - rhs);
      u -= lu.solve(kkt * u - rhs);
      const double res_tol = 1e-9 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
      if ((kkt * u - rhs).lpNorm<Eigen::Infinity>() > res_tol) {
        // Rank-deficient active set: redo with a rank-revealing factorization.
        Eigen::FullPivLU<Eigen::MatrixXd> full_lu(kkt);
        u = full_lu.solve(rhs);
        u -= full_lu.solve(kkt * u - rhs);
      }
      if ((kkt * u - rhs).lpNorm<Eigen::Infinity>() > res_tol) {
        if (trace) {
          std::fprintf(stderr, "polish: pass=%d na=%ld kkt residual reject %.2e\n",
                       pass, static_cast<long>(na),
                       (kkt * u - rhs).lpNorm<Eigen::Infinity>());
        }
        break;  // active rows too ill-posed to polish
      }

      const Eigen::VectorXd z_pol = u.head(nv);
      const Eigen::VectorXd nu = u.tail(na);
      const Eigen::VectorXd az = sys.apply(z_pol);
      const double tol_step = 1e-11 * std::max(1.0, w.b_s_.lpNorm<Eigen::Infinity>());

      bool changed = false;
      // Dropping rows can flip-flop on near-degenerate sets; after a few
      // passes grow the set monotonically, which must terminate.
      if (pass < 6) {
        for (Eigen::Index r = 0; r < na; ++r) {
          if (nu(r) < -tol_step) {
            active[static_cast<std::size_t>(rows_in[static_cast<std::size_t>(r)])] =
                false;
            --na;
            changed = true;
          }
        }
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        if (!active[static_cast<std::size_t>(i)] && az(i) - w.b_s_(i) > tol_step) {
          active[static_cast<std::size_t>(i)] = true;
          ++na;
          changed = true;
        }
      }
      if (changed) {
        if (trace && pass == 11) {
          std::fprintf(stderr, "polish: refinement did not settle\n");
        }
        continue;
      }

      Eigen::VectorXd lam_pol = Eigen::VectorXd::Zero(m);
      for (Eigen::Index r = 0; r < na; ++r) {
        lam_pol(rows_in[static_cast<std::size_t>(r)]) = std::max(0.0, nu(r));
      }
      const double q_pol = candidate_quality(w, q_vec, z_pol, lam_pol);
      const double q_ipm = candidate_quality(w, q_vec, z_best, lam_best);
      if (trace) {
        std::fprintf(stderr, "polish: pass=%d na=%ld q_pol=%.2e q_ipm=%.2e\n", pass,
                     static_cast<long>(na), q_pol, q_ipm);
      }
      if (q_pol <= q_ipm * 10.0 || q_pol <= 1e-11) {
        z_best = z_pol;
        lam_best = lam_pol;
      }
      break;
    }
  }

  finalize(z_best, lam_best, SolveStatus::max_iter, iter);
  return sol;
}

}  // namespace elmap
