#include "nashfiber/scene.hpp"

#include "nashfiber/error.hpp"

#include <cmath>
#include <set>

namespace nashfiber {

namespace {

std::vector<NumericPolynomial> numeric(const std::vector<Polynomial>& ps) {
  std::vector<NumericPolynomial> out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.emplace_back(p);
  return out;
}

std::vector<NumericPolynomial> scaled_all(const std::vector<NumericPolynomial>& ps, double s) {
  std::vector<NumericPolynomial> out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.push_back(p.scaled(s));
  return out;
}

bool has_nonzero_constant(const std::vector<Polynomial>& eqs) {
  for (const auto& e : eqs) {
    if (!e.is_zero() && e.degree() == 0) return true;
  }
  return false;
}

void add_unique(std::vector<Polynomial>& into, const Polynomial& p) {
  if (p.is_zero()) return;
  for (const auto& q : into) {
    if (q == p || q == -p) return;
  }
  into.push_back(p);
}

void combinations(int n, int k, std::vector<std::vector<int>>& out) {
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  if (k > n) return;
  while (true) {
    out.push_back(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

constexpr std::size_t kMaxMinors = 400;

}  // namespace

BasicPiece::BasicPiece(int n, std::vector<Polynomial> equations, std::vector<Polynomial> ge,
                       std::vector<Polynomial> gt, std::vector<Polynomial> ne)
    : n_(n), eq_(std::move(equations)), ge_(std::move(ge)), gt_(std::move(gt)), ne_(std::move(ne)) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "piece ambient dimension must be positive");
  for (const auto* group : {&eq_, &ge_, &gt_, &ne_}) {
    for (const auto& p : *group) {
      if (p.n() != n) throw Error(ErrorKind::DimensionMismatch, "piece polynomial dimension");
    }
  }
  neq_ = numeric(eq_);
  nge_ = numeric(ge_);
  ngt_ = numeric(gt_);
  nne_ = numeric(ne_);
}

ScaledPiece BasicPiece::scaled(double s) const {
  ScaledPiece sp;
  sp.s = s;
  sp.eq = scaled_all(neq_, s);
  sp.ge = scaled_all(nge_, s);
  sp.gt = scaled_all(ngt_, s);
  sp.ne = scaled_all(nne_, s);
  return sp;
}

Scene make_scene(std::string name, int n, int d, std::vector<BasicPiece> pieces,
                 std::optional<std::vector<BasicPiece>> singular_locus) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "ambient_dim must be positive");
  if (d < 0 || d > n) throw Error(ErrorKind::InvalidArgument, "declared_dim must lie in [0, n]");
  if (pieces.empty()) throw Error(ErrorKind::EmptyInput, "scene has no pieces");
  for (const auto& p : pieces) {
    if (p.n() != n) throw Error(ErrorKind::DimensionMismatch, "piece dimension differs from scene");
  }
  if (singular_locus) {
    for (const auto& p : *singular_locus) {
      if (p.n() != n) throw Error(ErrorKind::DimensionMismatch, "singular locus dimension");
    }
  }
  Scene s;
  s.name = std::move(name);
  s.n = n;
  s.d = d;
  s.pieces = std::move(pieces);
  s.singular_locus = std::move(singular_locus);
  Vec zero = Vec::Zero(n);
  for (const auto& p : s.pieces) {
    for (const auto& e : p.equations()) {
      if (e.eval(zero) != 0.0) s.origin_on_set = false;
    }
  }
  return s;
}

bool satisfies(const BasicPiece& piece, const Vec& x, double tol) {
  if (x.size() != piece.n()) throw Error(ErrorKind::DimensionMismatch, "satisfies");
  for (const auto& p : piece.neq_) {
    if (std::abs(p.eval(x)) > tol) return false;
  }
  for (const auto& p : piece.nge_) {
    if (p.eval(x) < -tol) return false;
  }
  for (const auto& p : piece.ngt_) {
    if (!(p.eval(x) > tol)) return false;
  }
  for (const auto& p : piece.nne_) {
    if (!(std::abs(p.eval(x)) > tol)) return false;
  }
  return true;
}

double scaled_residual(const ScaledPiece& sp, const Vec& u) {
  double r = 0.0;
  for (const auto& p : sp.eq) r = std::max(r, std::abs(p.eval(u)));
  return r;
}

bool satisfies_scaled(const ScaledPiece& sp, const Vec& u, double tol) {
  if (scaled_residual(sp, u) > tol) return false;
  for (const auto& p : sp.ge) {
    if (p.eval(u) < -tol) return false;
  }
  for (const auto& p : sp.gt) {
    if (!(p.eval(u) > tol)) return false;
  }
  for (const auto& p : sp.ne) {
    if (!(std::abs(p.eval(u)) > tol)) return false;
  }
  return true;
}

TangentSpaceResult tangent_space_at(const Scene& scene, std::size_t piece_index, const Vec& x) {
  if (piece_index >= scene.pieces.size()) {
    throw Error(ErrorKind::InvalidArgument, "piece index out of range");
  }
  const BasicPiece& piece = scene.pieces[piece_index];
  if (x.size() != scene.n) throw Error(ErrorKind::DimensionMismatch, "tangent_space_at");
  const double s = x.norm();
  if (s == 0.0) throw Error(ErrorKind::SingularPoint, "the origin is the distinguished singular point");
  const Vec u = x / s;
  const ScaledPiece sp = piece.scaled(s);
  if (!satisfies_scaled(sp, u, 1e-8)) {
    throw Error(ErrorKind::OffVariety, "point does not satisfy the piece");
  }

  const Eigen::Index n = scene.n;
  const Eigen::Index m = static_cast<Eigen::Index>(sp.eq.size());
  Mat jac = Mat::Zero(std::max<Eigen::Index>(m, 1), n);
  Vec g;
  for (Eigen::Index i = 0; i < m; ++i) {
    sp.eq[i].eval_grad(u, g);
    double gn = g.norm();
    if (gn >= kGradFloor) jac.row(i) = g.transpose() / gn;
  }
  Eigen::JacobiSVD<Mat> svd(jac, Eigen::ComputeFullV);
  const Vec sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (smax > 0.0 && sv[i] >= kRankTol * smax) ++rank;
  }
  const int codim = scene.n - scene.d;
  if (rank == 0) throw Error(ErrorKind::SingularPoint, "Jacobian vanishes");
  if (rank != codim) {
    throw Error(ErrorKind::SingularPoint,
                "Jacobian rank " + std::to_string(rank) + " differs from codimension " +
                    std::to_string(codim));
  }
  const double retained = sv[rank - 1];
  const double discarded = rank < sv.size() ? sv[rank] : 0.0;
  const double gap = discarded > 0.0 ? retained / discarded : std::numeric_limits<double>::infinity();
  if (gap < kGapRatio) throw Error(ErrorKind::SingularPoint, "singular value gap too small");

  bool active = false;
  for (const auto& p : sp.ge) {
    if (std::abs(p.eval(u)) <= kSignTol) active = true;
  }
  Mat null = svd.matrixV().rightCols(n - rank);
  return TangentSpaceResult{GrassPoint(null), retained / smax, gap, rank, !active, active};
}

NewtonResult newton_project_detailed(const BasicPiece& piece, const Vec& x0,
                                     std::optional<double> radius) {
  if (x0.size() != piece.n()) throw Error(ErrorKind::DimensionMismatch, "newton_project");
  if (!x0.allFinite()) throw Error(ErrorKind::InvalidArgument, "non-finite seed");
  if (radius && !(*radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  double s = radius ? *radius : x0.norm();
  if (s == 0.0) s = 1.0;
  const ScaledPiece sp = piece.scaled(s);
  const Eigen::Index n = piece.n();
  const Eigen::Index m = static_cast<Eigen::Index>(sp.eq.size()) + (radius ? 1 : 0);

  Vec u = x0 / s;
  Vec F(m);
  Mat J(m, n);
  Vec g;
  auto assemble = [&] {
    for (std::size_t i = 0; i < sp.eq.size(); ++i) {
      F[static_cast<Eigen::Index>(i)] = sp.eq[i].eval_grad(u, g);
      J.row(static_cast<Eigen::Index>(i)) = g.transpose();
    }
    if (radius) {
      F[m - 1] = 0.5 * (u.squaredNorm() - 1.0);
      J.row(m - 1) = u.transpose();
    }
    return m == 0 ? 0.0 : F.cwiseAbs().maxCoeff();
  };

  NewtonResult out;
  double res = assemble();
  double best = res;
  int stalled = 0;
  while (res > kNewtonTol) {
    // Infeasible targets stall far from zero; give up early on them.
    if (out.iterations >= kNewtonMaxIter || (stalled >= 10 && best > 1e-6)) {
      throw Error(ErrorKind::NoConvergence,
                  "residual " + std::to_string(res) + " after " + std::to_string(kNewtonMaxIter) +
                      " iterations");
    }
    Vec step = J.completeOrthogonalDecomposition().solve(F);
    double sn = step.norm();
    if (!std::isfinite(sn)) throw Error(ErrorKind::NoConvergence, "non-finite Newton step");
    const double cap = 0.5 * std::max(1.0, u.norm());
    if (sn > cap) step *= cap / sn;
    u -= step;
    ++out.iterations;
    res = assemble();
    if (res < 0.5 * best) {
      best = res;
      stalled = 0;
    } else {
      ++stalled;
    }
  }
  if (!satisfies_scaled(sp, u, kSignTol)) {
    throw Error(ErrorKind::SignViolation, "projected point violates a sign condition");
  }
  out.x = out.iterations == 0 ? x0 : Vec(u * s);
  out.residual = res;
  return out;
}

Vec newton_project(const BasicPiece& piece, const Vec& x0, std::optional<double> radius) {
  return newton_project_detailed(piece, x0, radius).x;
}

Polynomial polynomial_determinant(const std::vector<std::vector<Polynomial>>& m) {
  const std::size_t k = m.size();
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "empty determinant");
  const int n = m[0][0].n();
  if (k == 1) return m[0][0];
  Polynomial acc(n);
  for (std::size_t j = 0; j < k; ++j) {
    if (m[0][j].is_zero()) continue;
    std::vector<std::vector<Polynomial>> minor;
    for (std::size_t i = 1; i < k; ++i) {
      std::vector<Polynomial> row;
      for (std::size_t c = 0; c < k; ++c) {
        if (c != j) row.push_back(m[i][c]);
      }
      minor.push_back(std::move(row));
    }
    Polynomial term = m[0][j] * polynomial_determinant(minor);
    acc = (j % 2 == 0) ? acc + term : acc - term;
  }
  return acc;
}

std::vector<BasicPiece> derive_singular_locus(const Scene& scene) {
  std::vector<BasicPiece> out;
  const int n = scene.n;
  const int c = scene.n - scene.d;

  for (const auto& piece : scene.pieces) {
    const auto& eqs = piece.equations();
    const int m = static_cast<int>(eqs.size());
    // Rank drop of the Jacobian.
    if (c >= 1 && m >= c) {
      std::vector<std::vector<int>> rows, cols;
      combinations(m, c, rows);
      combinations(n, c, cols);
      if (rows.size() * cols.size() > kMaxMinors) {
        throw Error(ErrorKind::SingularLocusUnavailable,
                    "too many Jacobian minors; supply singular_locus in the scene file");
      }
      std::vector<std::vector<Polynomial>> partials(m);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) partials[i].push_back(eqs[i].derivative(j));
      }
      std::vector<Polynomial> sing = eqs;
      for (const auto& r : rows) {
        for (const auto& cc : cols) {
          std::vector<std::vector<Polynomial>> sub;
          for (int i : r) {
            std::vector<Polynomial> row;
            for (int j : cc) row.push_back(partials[i][j]);
            sub.push_back(std::move(row));
          }
          add_unique(sing, polynomial_determinant(sub));
        }
      }
      if (!has_nonzero_constant(sing)) {
        out.emplace_back(n, sing, piece.weak(), piece.strict(), piece.exclusions());
      }
    }
    // Boundaries of weak inequalities.
    for (std::size_t w = 0; w < piece.weak().size(); ++w) {
      std::vector<Polynomial> eq = eqs;
      add_unique(eq, piece.weak()[w]);
      std::vector<Polynomial> ge;
      for (std::size_t o = 0; o < piece.weak().size(); ++o) {
        if (o != w) ge.push_back(piece.weak()[o]);
      }
      if (!has_nonzero_constant(eq)) out.emplace_back(n, eq, ge, piece.strict(), piece.exclusions());
    }
  }

  // Where the closures of two pieces meet.
  for (std::size_t a = 0; a < scene.pieces.size(); ++a) {
    for (std::size_t b = a + 1; b < scene.pieces.size(); ++b) {
      const auto& pa = scene.pieces[a];
      const auto& pb = scene.pieces[b];
      std::vector<Polynomial> eq = pa.equations();
      for (const auto& e : pb.equations()) add_unique(eq, e);
      std::vector<Polynomial> ge;
      for (const auto* p : {&pa, &pb}) {
        for (const auto& g : p->weak()) ge.push_back(g);
        for (const auto& g : p->strict()) ge.push_back(g);
      }
      if (!has_nonzero_constant(eq)) out.emplace_back(n, eq, ge);
    }
  }
  return out;
}

}  // namespace nashfiber
