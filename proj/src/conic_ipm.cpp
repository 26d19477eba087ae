#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

#include "stresslab/conic.hpp"

namespace stresslab {

namespace {

// Element of R^m_+ x S^n1 x ... x S^nk.
struct ConeVec {
  VectorXd lp;
  std::vector<MatrixXd> psd;
};

double dot(const ConeVec& a, const ConeVec& b) {
  double s = a.lp.dot(b.lp);
  for (std::size_t j = 0; j < a.psd.size(); ++j) s += a.psd[j].cwiseProduct(b.psd[j]).sum();
  return s;
}

double norm(const ConeVec& a) { return std::sqrt(dot(a, a)); }

// b += alpha * a
void axpy(double alpha, const ConeVec& a, ConeVec& b) {
  b.lp += alpha * a.lp;
  for (std::size_t j = 0; j < a.psd.size(); ++j) b.psd[j] += alpha * a.psd[j];
}

ConeVec scaled(double alpha, const ConeVec& a) {
  ConeVec out = a;
  out.lp *= alpha;
  for (auto& m : out.psd) m *= alpha;
  return out;
}

ConeVec lin_comb(const ConeVec& a, double alpha, const ConeVec& b) {
  ConeVec out = a;
  axpy(alpha, b, out);
  return out;
}

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Nesterov-Todd scaling point. For the linear block W = diag(w); for each PSD
// block W(u) = Rᵀ u R with R⁻¹ S R⁻ᵀ = Rᵀ Z R = diag(lambda).
struct Scaling {
  VectorXd w;
  VectorXd lam_lp;
  std::vector<MatrixXd> R, Rinv, V, RRt;
  std::vector<VectorXd> lam;

  ConeVec W(const ConeVec& u) const {
    ConeVec o;
    o.lp = w.cwiseProduct(u.lp);
    for (std::size_t j = 0; j < R.size(); ++j) o.psd.push_back(sym(R[j].transpose() * u.psd[j] * R[j]));
    return o;
  }
  ConeVec Wt(const ConeVec& u) const {
    ConeVec o;
    o.lp = w.cwiseProduct(u.lp);
    for (std::size_t j = 0; j < R.size(); ++j) o.psd.push_back(sym(R[j] * u.psd[j] * R[j].transpose()));
    return o;
  }
  ConeVec Winvt(const ConeVec& u) const {
    ConeVec o;
    o.lp = u.lp.cwiseQuotient(w);
    for (std::size_t j = 0; j < R.size(); ++j) o.psd.push_back(sym(Rinv[j] * u.psd[j] * Rinv[j].transpose()));
    return o;
  }
  ConeVec WtW_inv(const ConeVec& u) const {
    ConeVec o;
    o.lp = u.lp.cwiseQuotient(w.cwiseProduct(w));
    for (std::size_t j = 0; j < R.size(); ++j) o.psd.push_back(sym(V[j] * u.psd[j] * V[j]));
    return o;
  }
  ConeVec WtW(const ConeVec& u) const {
    ConeVec o;
    o.lp = u.lp.cwiseProduct(w.cwiseProduct(w));
    for (std::size_t j = 0; j < R.size(); ++j) o.psd.push_back(sym(RRt[j] * u.psd[j] * RRt[j]));
    return o;
  }
  ConeVec lambda() const {
    ConeVec o;
    o.lp = lam_lp;
    for (const auto& l : lam) o.psd.push_back(l.asDiagonal().toDenseMatrix());
    return o;
  }
  // lambda o v
  ConeVec lprod(const ConeVec& v) const {
    ConeVec o;
    o.lp = lam_lp.cwiseProduct(v.lp);
    for (std::size_t j = 0; j < lam.size(); ++j) {
      MatrixXd m = v.psd[j];
      for (Index a = 0; a < m.rows(); ++a)
        for (Index b = 0; b < m.cols(); ++b) m(a, b) *= 0.5 * (lam[j](a) + lam[j](b));
      o.psd.push_back(std::move(m));
    }
    return o;
  }
  // inverse of lambda o (.)
  ConeVec ldiv(const ConeVec& v) const {
    ConeVec o;
    o.lp = v.lp.cwiseQuotient(lam_lp);
    for (std::size_t j = 0; j < lam.size(); ++j) {
      MatrixXd m = v.psd[j];
      for (Index a = 0; a < m.rows(); ++a)
        for (Index b = 0; b < m.cols(); ++b) m(a, b) *= 2.0 / (lam[j](a) + lam[j](b));
      o.psd.push_back(std::move(m));
    }
    return o;
  }
};

ConeVec jordan(const ConeVec& a, const ConeVec& b) {
  ConeVec o;
  o.lp = a.lp.cwiseProduct(b.lp);
  for (std::size_t j = 0; j < a.psd.size(); ++j) o.psd.push_back(sym(a.psd[j] * b.psd[j]));
  return o;
}

std::optional<Scaling> compute_scaling(const ConeVec& s, const ConeVec& z) {
  Scaling sc;
  if (s.lp.size() > 0 && (s.lp.minCoeff() <= 0.0 || z.lp.minCoeff() <= 0.0)) return std::nullopt;
  sc.w = s.lp.cwiseQuotient(z.lp).cwiseSqrt();
  sc.lam_lp = s.lp.cwiseProduct(z.lp).cwiseSqrt();
  for (std::size_t j = 0; j < s.psd.size(); ++j) {
    Eigen::LLT<MatrixXd> cs(s.psd[j]);
    Eigen::LLT<MatrixXd> cz(z.psd[j]);
    if (cs.info() != Eigen::Success || cz.info() != Eigen::Success) return std::nullopt;
    const MatrixXd Ls = cs.matrixL();
    const MatrixXd Lz = cz.matrixL();
    Eigen::JacobiSVD<MatrixXd> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VectorXd l = svd.singularValues();
    if (l.minCoeff() <= 0.0) return std::nullopt;
    const MatrixXd& Vs = svd.matrixV();
    const VectorXd isq = l.cwiseSqrt().cwiseInverse();
    const MatrixXd R = Ls * Vs * isq.asDiagonal();
    // Rinv = diag(sqrt l) Vsᵀ Ls⁻¹
    const MatrixXd LsInvT_V = Ls.transpose().triangularView<Eigen::Upper>().solve(Vs);
    const MatrixXd Rinv = l.cwiseSqrt().asDiagonal() * LsInvT_V.transpose();
    sc.R.push_back(R);
    sc.Rinv.push_back(Rinv);
    sc.V.push_back(Rinv.transpose() * Rinv);
    sc.RRt.push_back(R * R.transpose());
    sc.lam.push_back(l);
  }
  return sc;
}

// Largest alpha <= cap with lambda + alpha * d inside the cone.
double max_step(const Scaling& sc, const ConeVec& d, double cap) {
  double alpha = cap;
  for (Index i = 0; i < d.lp.size(); ++i) {
    if (d.lp(i) < 0.0) alpha = std::min(alpha, -sc.lam_lp(i) / d.lp(i));
  }
  for (std::size_t j = 0; j < d.psd.size(); ++j) {
    const VectorXd isq = sc.lam[j].cwiseSqrt().cwiseInverse();
    const MatrixXd m = isq.asDiagonal() * d.psd[j] * isq.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(m), Eigen::EigenvaluesOnly);
    const double t = es.eigenvalues()(0);
    if (t < 0.0) alpha = std::min(alpha, -1.0 / t);
  }
  return alpha;
}

using RowMajorSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Problem operators after equality presolve and variable classification.
class Model {
 public:
  Model(const ConicProblem& p) : p_(p) {
    n_ = p.num_vars;
    presolve_equalities();
    classify_variables();
    h_.lp = p.lp.offset;
    for (const auto& blk : p.lmis) h_.psd.push_back(blk.F0);
    degree_ = p.lp.rows();
    for (const auto& blk : p.lmis) degree_ += blk.size;
  }

  Index n() const { return n_; }
  Index p() const { return A_.rows(); }
  Index degree() const { return degree_; }
  const MatrixXd& A() const { return A_; }
  const VectorXd& b() const { return b_; }
  const ConeVec& h() const { return h_; }
  const VectorXd& c() const { return p_.c; }
  bool inconsistent() const { return inconsistent_; }
  const std::vector<Index>& eq_rows() const { return rows_; }

  ConeVec G(const VectorXd& x) const {
    ConeVec o;
    o.lp = -(p_.lp.M * x);
    for (const auto& blk : p_.lmis) o.psd.push_back(-blk.apply(x));
    return o;
  }
  VectorXd Gt(const ConeVec& z) const {
    VectorXd g = -(p_.lp.M.transpose() * z.lp);
    VectorXd acc = VectorXd::Zero(n_);
    for (std::size_t j = 0; j < p_.lmis.size(); ++j) p_.lmis[j].adjoint_add(z.psd[j], acc);
    return g - acc;
  }
  ConeVec identity() const {
    ConeVec o;
    o.lp = VectorXd::Ones(p_.lp.rows());
    for (const auto& blk : p_.lmis) o.psd.push_back(MatrixXd::Identity(blk.size, blk.size));
    return o;
  }

  // Factorization of the reduced KKT system for the current scaling.
  bool factor(const Scaling& sc) {
    const Index nk = static_cast<Index>(kept_.size());
    const VectorXd D = sc.w.cwiseProduct(sc.w).cwiseInverse();
    H_ = MatrixXd::Zero(nk, nk);
    if (p_.lp.rows() > 0) {
      // Rows free of eliminated variables enter directly.
      VectorXd Dfree = D;
      for (Index r = 0; r < D.size(); ++r) {
        if (row_elim_[static_cast<std::size_t>(r)] >= 0) Dfree(r) = 0.0;
      }
      const SparseMatrix DMk = Dfree.asDiagonal() * Mk_;
      H_ += MatrixXd(SparseMatrix(Mk_.transpose() * DMk));
      if (!elim_.empty()) {
        const SparseMatrix DMe = D.asDiagonal() * Me_;
        Hke_ = Mk_.transpose() * DMe;
        hee_ = VectorXd(Me_.cols());
        for (Index e = 0; e < Me_.cols(); ++e) {
          double s = 0.0;
          for (SparseMatrix::InnerIterator it(Me_, e); it; ++it) s += it.value() * it.value() * D(it.row());
          hee_(e) = s;
        }
        if (hee_.minCoeff() <= 0.0) return false;
        // Schur complement of each eliminated variable in pairwise form,
        // sum_{r<r'} D_r D_r' / h_ee (m_r' a_r - m_r a_r')(...)ᵀ, which avoids
        // the cancellation of the direct formula when D spans many decades.
        for (Index e = 0; e < Me_.cols(); ++e) {
          std::vector<std::pair<Index, double>> rows;
          for (SparseMatrix::InnerIterator it(Me_, e); it; ++it) rows.emplace_back(it.row(), it.value());
          for (std::size_t u = 0; u < rows.size(); ++u) {
            for (std::size_t v = u + 1; v < rows.size(); ++v) {
              const auto [r1, m1] = rows[u];
              const auto [r2, m2] = rows[v];
              const double coef = D(r1) * D(r2) / hee_(e);
              std::vector<std::pair<Index, double>> vec;
              for (RowMajorSparse::InnerIterator it(MkR_, r1); it; ++it) vec.emplace_back(it.col(), m2 * it.value());
              for (RowMajorSparse::InnerIterator it(MkR_, r2); it; ++it) vec.emplace_back(it.col(), -m1 * it.value());
              for (const auto& [i, vi] : vec)
                for (const auto& [j, vj] : vec) H_(i, j) += coef * vi * vj;
            }
          }
        }
      }
    }
    for (std::size_t j = 0; j < p_.lmis.size(); ++j) add_lmi_schur(p_.lmis[j], sc.Rinv[j]);

    double reg = 0.0;
    const double diag_max = nk > 0 ? std::max(1e-300, H_.diagonal().cwiseAbs().maxCoeff()) : 1.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      MatrixXd Hr = H_;
      if (reg > 0.0) Hr.diagonal().array() += reg;
      llt_.compute(Hr);
      if (llt_.info() == Eigen::Success) break;
      reg = reg == 0.0 ? 1e-14 * diag_max : reg * 100.0;
      if (attempt == 7) return false;
    }
    if (p() > 0) {
      MatrixXd Ak(p(), nk);
      for (Index k = 0; k < nk; ++k) Ak.col(k) = A_.col(kept_[static_cast<std::size_t>(k)]);
      Y_ = llt_.matrixL().solve(Ak.transpose());
      MatrixXd Sy = Y_.transpose() * Y_;
      sy_.compute(Sy);
      if (sy_.info() != Eigen::Success) return false;
    }
    scaling_ = &sc;
    return true;
  }

  // Solves [0 Aᵀ Gᵀ; A 0 0; G 0 -WᵀW] (dx, dy, dz) = (bx, by, bz).
  void solve(const VectorXd& bx, const VectorXd& by, const ConeVec& bz, VectorXd& dx, VectorXd& dy, ConeVec& dz,
             int refine) const {
    solve_once(bx, by, bz, dx, dy, dz);
    for (int r = 0; r < refine; ++r) {
      const VectorXd ex = bx - A_.transpose() * dy - Gt(dz);
      const VectorXd ey = by - A_ * dx;
      ConeVec ez = lin_comb(bz, -1.0, G(dx));
      axpy(1.0, scaling_->WtW(dz), ez);
      VectorXd cx, cy;
      ConeVec cz;
      solve_once(ex, ey, ez, cx, cy, cz);
      dx += cx;
      dy += cy;
      axpy(1.0, cz, dz);
    }
  }

 private:
  void presolve_equalities() {
    const Index m = p_.A_eq.rows();
    if (m == 0) {
      A_ = MatrixXd(0, n_);
      b_ = VectorXd(0);
      return;
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(p_.A_eq.transpose());
    qr.setThreshold(1e-10);
    const Index r = qr.rank();
    const auto& perm = qr.colsPermutation().indices();
    for (Index k = 0; k < r; ++k) rows_.push_back(perm(k));
    std::sort(rows_.begin(), rows_.end());
    A_ = MatrixXd(r, n_);
    b_ = VectorXd(r);
    for (Index k = 0; k < r; ++k) {
      A_.row(k) = p_.A_eq.row(rows_[static_cast<std::size_t>(k)]);
      b_(k) = p_.b_eq(rows_[static_cast<std::size_t>(k)]);
    }
    if (r > 0 && r < m) {
      const VectorXd x0 = A_.transpose() * (A_ * A_.transpose()).ldlt().solve(b_);
      const double res = (p_.A_eq * x0 - p_.b_eq).norm();
      inconsistent_ = res > 1e-9 * (1.0 + p_.b_eq.norm());
    } else if (r == 0) {
      inconsistent_ = p_.b_eq.norm() > 1e-12;
    }
  }

  void classify_variables() {
    std::vector<char> in_cone(static_cast<std::size_t>(n_), 0), blocked(static_cast<std::size_t>(n_), 0);
    for (const auto& blk : p_.lmis) {
      for (Index v : blk.owner) blocked[static_cast<std::size_t>(v)] = 1;
      for (const auto& [v, f] : blk.dense) blocked[static_cast<std::size_t>(v)] = 1;
      for (Index v : blk.owner) in_cone[static_cast<std::size_t>(v)] = 1;
      for (const auto& [v, f] : blk.dense) in_cone[static_cast<std::size_t>(v)] = 1;
    }
    for (Index j = 0; j < n_; ++j) {
      if (A_.rows() > 0 && A_.col(j).cwiseAbs().maxCoeff() > 0.0) blocked[static_cast<std::size_t>(j)] = 1;
    }
    const SparseMatrix& M = p_.lp.M;
    for (Index j = 0; j < n_; ++j) {
      if (SparseMatrix::InnerIterator(M, j)) in_cone[static_cast<std::size_t>(j)] = 1;
    }
    for (Index j = 0; j < n_; ++j) {
      if (!in_cone[static_cast<std::size_t>(j)]) {
        throw Error(ErrorCode::InvalidInput, "variable " + std::to_string(j) + " appears in no cone constraint");
      }
    }
    // A variable is eliminated when it touches only linear rows that hold no
    // other eliminated variable, which keeps its Hessian block diagonal.
    std::vector<char> row_taken(static_cast<std::size_t>(M.rows()), 0);
    std::vector<char> is_elim(static_cast<std::size_t>(n_), 0);
    for (Index j = 0; j < n_; ++j) {
      if (blocked[static_cast<std::size_t>(j)]) continue;
      bool ok = true;
      for (SparseMatrix::InnerIterator it(M, j); it; ++it) ok = ok && !row_taken[static_cast<std::size_t>(it.row())];
      if (!ok) continue;
      for (SparseMatrix::InnerIterator it(M, j); it; ++it) row_taken[static_cast<std::size_t>(it.row())] = 1;
      is_elim[static_cast<std::size_t>(j)] = 1;
    }
    kidx_.assign(static_cast<std::size_t>(n_), -1);
    for (Index j = 0; j < n_; ++j) {
      if (is_elim[static_cast<std::size_t>(j)]) {
        elim_.push_back(j);
      } else {
        kidx_[static_cast<std::size_t>(j)] = static_cast<Index>(kept_.size());
        kept_.push_back(j);
      }
    }
    Mk_ = select_columns(M, kept_);
    Me_ = select_columns(M, elim_);
    MkR_ = Mk_;
    row_elim_.assign(static_cast<std::size_t>(M.rows()), -1);
    for (Index e = 0; e < Me_.cols(); ++e) {
      for (SparseMatrix::InnerIterator it(Me_, e); it; ++it) row_elim_[static_cast<std::size_t>(it.row())] = e;
    }
  }

  static SparseMatrix select_columns(const SparseMatrix& M, const std::vector<Index>& cols) {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      for (SparseMatrix::InnerIterator it(M, cols[k]); it; ++it) trip.emplace_back(it.row(), static_cast<Index>(k), it.value());
    }
    SparseMatrix out(M.rows(), static_cast<Index>(cols.size()));
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
  }

  // Lower triangle of H += [tr(F_k V F_l V)], V = Rinvᵀ Rinv.
  void add_lmi_schur(const LmiBlock& blk, const MatrixXd& Rinv) {
    const Index K = blk.U.cols();
    MatrixXd Ut;
    if (K > 0) {
      Ut = Rinv * blk.U;
      MatrixXd T(K, K);
      T.setZero();
      T.selfadjointView<Eigen::Lower>().rankUpdate(Ut.transpose());
      for (Index b = 0; b < K; ++b) {
        const Index ib = kidx_[static_cast<std::size_t>(blk.owner[static_cast<std::size_t>(b)])];
        const double wb = blk.weight(b);
        for (Index a = b; a < K; ++a) {
          const Index ia = kidx_[static_cast<std::size_t>(blk.owner[static_cast<std::size_t>(a)])];
          const double t = T(a, b);
          const double val = blk.weight(a) * wb * t * t;
          if (a == b) {
            H_(ia, ia) += val;
          } else if (ia == ib) {
            H_(ia, ia) += 2.0 * val;
          } else {
            H_(std::max(ia, ib), std::min(ia, ib)) += val;
          }
        }
      }
    }
    if (blk.dense.empty()) return;
    std::vector<Index> vars;
    std::vector<MatrixXd> gt;
    for (const auto& [v, f] : blk.dense) {
      const Index kv = kidx_[static_cast<std::size_t>(v)];
      auto it = std::find(vars.begin(), vars.end(), kv);
      const MatrixXd g = Rinv * f * Rinv.transpose();
      if (it == vars.end()) {
        vars.push_back(kv);
        gt.push_back(g);
      } else {
        gt[static_cast<std::size_t>(it - vars.begin())] += g;
      }
    }
    for (std::size_t a = 0; a < vars.size(); ++a) {
      for (std::size_t b = 0; b <= a; ++b) {
        const double val = gt[a].cwiseProduct(gt[b]).sum();
        H_(std::max(vars[a], vars[b]), std::min(vars[a], vars[b])) += val;
      }
    }
    for (Index a = 0; a < K; ++a) {
      const Index ia = kidx_[static_cast<std::size_t>(blk.owner[static_cast<std::size_t>(a)])];
      const VectorXd u = Ut.col(a);
      for (std::size_t l = 0; l < vars.size(); ++l) {
        const double val = blk.weight(a) * u.dot(gt[l] * u);
        if (ia == vars[l]) {
          H_(ia, ia) += 2.0 * val;
        } else {
          H_(std::max(ia, vars[l]), std::min(ia, vars[l])) += val;
        }
      }
    }
  }

  void solve_once(const VectorXd& bx, const VectorXd& by, const ConeVec& bz, VectorXd& dx, VectorXd& dy,
                  ConeVec& dz) const {
    const Scaling& sc = *scaling_;
    const VectorXd r = bx + Gt(sc.WtW_inv(bz));
    const Index nk = static_cast<Index>(kept_.size());
    VectorXd rk(nk), re(static_cast<Index>(elim_.size()));
    for (Index k = 0; k < nk; ++k) rk(k) = r(kept_[static_cast<std::size_t>(k)]);
    for (std::size_t e = 0; e < elim_.size(); ++e) re(static_cast<Index>(e)) = r(elim_[e]);
    if (!elim_.empty()) rk -= Hke_ * re.cwiseQuotient(hee_);
    VectorXd xk;
    if (p() > 0) {
      const VectorXd t = llt_.matrixL().solve(rk);
      dy = sy_.solve(Y_.transpose() * t - by);
      xk = llt_.matrixU().solve(t - Y_ * dy);
    } else {
      dy = VectorXd(0);
      xk = llt_.solve(rk);
    }
    dx = VectorXd::Zero(n_);
    for (Index k = 0; k < nk; ++k) dx(kept_[static_cast<std::size_t>(k)]) = xk(k);
    if (!elim_.empty()) {
      const VectorXd xe = (re - Hke_.transpose() * xk).cwiseQuotient(hee_);
      for (std::size_t e = 0; e < elim_.size(); ++e) dx(elim_[e]) = xe(static_cast<Index>(e));
    }
    dz = sc.WtW_inv(lin_comb(G(dx), -1.0, bz));
  }

  const ConicProblem& p_;
  Index n_ = 0;
  Index degree_ = 0;
  MatrixXd A_;
  VectorXd b_;
  std::vector<Index> rows_;
  bool inconsistent_ = false;
  ConeVec h_;

  std::vector<Index> kept_, elim_, kidx_;
  SparseMatrix Mk_, Me_, Hke_;
  RowMajorSparse MkR_;
  std::vector<Index> row_elim_;
  VectorXd hee_;
  MatrixXd H_, Y_;
  Eigen::LLT<MatrixXd> llt_;
  Eigen::LDLT<MatrixXd> sy_;
  const Scaling* scaling_ = nullptr;
};

struct Iterate {
  VectorXd x, y;
  ConeVec s, z;
  double tau = 1.0, kappa = 1.0;
};

}  // namespace

ConicSolution InteriorPointSolver::solve(const ConicProblem& problem, const SolverOptions& opt) const {
  const auto t0 = std::chrono::steady_clock::now();
  problem.validate();
  ConicSolution sol;
  auto finish = [&](ConicSolution& s) -> ConicSolution& {
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
  };

  Model model(problem);
  const Index n = model.n();
  const Index m = model.degree();
  const VectorXd& c = model.c();
  const VectorXd& b = model.b();
  const ConeVec& h = model.h();
  if (model.inconsistent()) {
    sol.status = SolveStatus::PrimalInfeasible;
    sol.message = "equality constraints are inconsistent";
    sol.x = VectorXd::Zero(n);
    return finish(sol);
  }

  const double cnorm = std::max(1.0, c.norm());
  const double bnorm = std::max(1.0, b.norm());
  const double hnorm = std::max(1.0, norm(h));

  Iterate it;
  it.x = VectorXd::Zero(n);
  it.y = VectorXd::Zero(model.p());
  it.s = model.identity();
  it.z = model.identity();

  auto pack = [&](SolveStatus status, const Iterate& p, double scale_by) {
    sol.status = status;
    sol.x = p.x / scale_by;
    VectorXd y_full = VectorXd::Zero(problem.A_eq.rows());
    for (std::size_t k = 0; k < model.eq_rows().size(); ++k) y_full(model.eq_rows()[k]) = p.y(static_cast<Index>(k)) / scale_by;
    sol.y = y_full;
    sol.z_lp = p.z.lp / scale_by;
    sol.z_lmi.clear();
    for (const auto& zj : p.z.psd) sol.z_lmi.push_back(zj / scale_by);
  };

  std::optional<Iterate> best;
  double best_merit = std::numeric_limits<double>::infinity();
  double best_pres = 0, best_dres = 0, best_gap = 0, best_pc = 0, best_dc = 0;
  int stalls = 0;

  for (int iter = 0; iter <= opt.max_iterations; ++iter) {
    sol.iterations = iter;
    const VectorXd Ax = model.A() * it.x;
    const ConeVec Gx = model.G(it.x);
    const VectorXd Aty = model.A().transpose() * it.y;
    const VectorXd Gtz = model.Gt(it.z);

    const VectorXd rx = Aty + Gtz + c * it.tau;
    const VectorXd ry = b * it.tau - Ax;
    ConeVec rz = scaled(it.tau, h);
    axpy(-1.0, Gx, rz);
    axpy(-1.0, it.s, rz);
    const double cx = c.dot(it.x);
    const double by_hz = b.dot(it.y) + dot(h, it.z);
    const double rt = it.kappa + cx + by_hz;
    const double sz = dot(it.s, it.z);
    const double mu = (sz + it.tau * it.kappa) / static_cast<double>(m + 1);

    const double pcost = cx / it.tau;
    const double dcost = -by_hz / it.tau;
    const double gap = sz / (it.tau * it.tau);
    const double pres = std::max(ry.norm() / bnorm, norm(rz) / hnorm) / it.tau;
    const double dres = rx.norm() / cnorm / it.tau;
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost < 0.0) relgap = gap / -pcost;
    else if (dcost > 0.0) relgap = gap / dcost;

    if (opt.verbose) {
      std::fprintf(stderr, "%3d  pcost % .8e  dcost % .8e  gap %.2e  pres %.2e  dres %.2e  k/t %.2e\n", iter, pcost,
                   dcost, gap, pres, dres, it.kappa / it.tau);
    }

    const double merit = std::max({pres, dres, std::min(gap, relgap)});
    if (merit < best_merit) {
      best_merit = merit;
      best = it;
      best_pres = pres;
      best_dres = dres;
      best_gap = gap;
      best_pc = pcost;
      best_dc = dcost;
    }

    if (pres <= opt.tol && dres <= opt.tol && (gap <= opt.gap_tol || relgap <= opt.gap_tol)) {
      pack(SolveStatus::Optimal, it, it.tau);
      sol.primal_objective = pcost;
      sol.dual_objective = dcost;
      sol.primal_residual = pres;
      sol.dual_residual = dres;
      sol.gap = gap;
      return finish(sol);
    }
    if (by_hz < 0.0) {
      const double pinf = (Aty + Gtz).norm() / cnorm / (-by_hz);
      if (pinf <= opt.tol) {
        pack(SolveStatus::PrimalInfeasible, it, -by_hz);
        sol.x = VectorXd::Zero(n);
        sol.message = "certificate of primal infeasibility found";
        sol.primal_residual = pinf;
        return finish(sol);
      }
    }
    if (cx < 0.0) {
      ConeVec gs = Gx;
      axpy(1.0, it.s, gs);
      const double dinf = std::max(Ax.norm() / bnorm, norm(gs) / hnorm) / (-cx);
      if (dinf <= opt.tol) {
        pack(SolveStatus::DualInfeasible, it, -cx);
        sol.message = "certificate of dual infeasibility (unbounded primal) found";
        sol.dual_residual = dinf;
        return finish(sol);
      }
    }
    if (iter == opt.max_iterations) break;

    auto scaling = compute_scaling(it.s, it.z);
    if (!scaling || !model.factor(*scaling)) {
      sol.message = "KKT factorization failed";
      stalls = 1000;
      break;
    }
    const Scaling& sc = *scaling;
    const ConeVec lam = sc.lambda();

    VectorXd x1, y1;
    ConeVec z1;
    model.solve(-c, b, h, x1, y1, z1, opt.refinement_steps);
    const double denom_base = c.dot(x1) + b.dot(y1) + dot(h, z1);

    struct Dir {
      VectorXd dx, dy;
      ConeVec ds, dz;
      double dtau = 0, dkappa = 0;
    };
    auto direction = [&](double eta, const ConeVec& rc, double rtk) {
      Dir d;
      ConeVec bz = scaled(eta, rz);
      axpy(-1.0, sc.Wt(rc), bz);
      VectorXd x2, y2;
      ConeVec z2;
      model.solve(-eta * rx, eta * ry, bz, x2, y2, z2, opt.refinement_steps);
      d.dtau = (-eta * rt - rtk / it.tau - (c.dot(x2) + b.dot(y2) + dot(h, z2))) / (denom_base - it.kappa / it.tau);
      d.dx = x2 + d.dtau * x1;
      d.dy = y2 + d.dtau * y1;
      d.dz = lin_comb(z2, d.dtau, z1);
      // From the linearized primal equation, so primal residuals contract exactly.
      d.ds = scaled(eta, rz);
      axpy(-1.0, model.G(d.dx), d.ds);
      axpy(d.dtau, h, d.ds);
      d.dkappa = (rtk - it.kappa * d.dtau) / it.tau;
      return d;
    };
    auto step_limit = [&](const Dir& d, double cap) {
      double a = std::min(max_step(sc, sc.Winvt(d.ds), cap), max_step(sc, sc.W(d.dz), cap));
      if (d.dtau < 0.0) a = std::min(a, -it.tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -it.kappa / d.dkappa);
      return a;
    };

    // Predictor.
    const Dir aff = direction(1.0, scaled(-1.0, lam), -it.tau * it.kappa);
    const double alpha_aff = std::min(1.0, step_limit(aff, 1.0));
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    // Combined corrector.
    ConeVec target = scaled(sigma * mu, model.identity());
    axpy(-1.0, jordan(lam, lam), target);
    axpy(-1.0, jordan(sc.Winvt(aff.ds), sc.W(aff.dz)), target);
    const ConeVec rc = sc.ldiv(target);
    const double rtk = sigma * mu - it.tau * it.kappa - aff.dtau * aff.dkappa;
    const Dir dir = direction(1.0 - sigma, rc, rtk);
    const double alpha = std::min(1.0, 0.99 * step_limit(dir, 1e3));
    if (!std::isfinite(alpha) || !dir.dx.allFinite() || !std::isfinite(dir.dtau)) {
      sol.message = "non-finite search direction";
      stalls = 1000;
      break;
    }

    if (alpha < 1e-10) {
      if (++stalls >= 3) {
        sol.message = "step length collapsed";
        break;
      }
    } else {
      stalls = 0;
    }
    it.x += alpha * dir.dx;
    it.y += alpha * dir.dy;
    axpy(alpha, dir.ds, it.s);
    axpy(alpha, dir.dz, it.z);
    it.tau += alpha * dir.dtau;
    it.kappa += alpha * dir.dkappa;
    for (auto& mtx : it.s.psd) mtx = sym(mtx);
    for (auto& mtx : it.z.psd) mtx = sym(mtx);
  }

  // No certificate reached: report the best iterate seen.
  const bool near = best && best_pres <= 1e3 * opt.tol && best_dres <= 1e3 * opt.tol &&
                    (best_gap <= 1e3 * opt.gap_tol || best_gap / std::max(1e-300, std::max(std::abs(best_pc), std::abs(best_dc))) <= 1e3 * opt.gap_tol);
  const SolveStatus st = near ? SolveStatus::OptimalInaccurate
                              : (stalls >= 3 ? SolveStatus::NumericalError : SolveStatus::MaxIterations);
  if (best) {
    pack(st, *best, best->tau);
  } else {
    sol.status = st;
    sol.x = VectorXd::Zero(n);
  }
  sol.primal_objective = best_pc;
  sol.dual_objective = best_dc;
  sol.primal_residual = best_pres;
  sol.dual_residual = best_dres;
  sol.gap = best_gap;
  if (sol.message.empty()) sol.message = "iteration limit reached";
  return finish(sol);
}

}  // namespace stresslab
