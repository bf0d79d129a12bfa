/*
 Copyright 2026 The deepc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "deepc/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <set>
#include <vector>

namespace deepc {

namespace {

constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqualityFactor = 1e3;
constexpr double kPolishDelta = 1e-9;
constexpr int kPolishRefine = 25;
constexpr int kMaxPolishAttempts = 200;
constexpr int kPolishRounds = 10;
constexpr double kIpmTolerance = 1e-7;
constexpr double kPolishGate = 1e-3;
// Iterations between polish attempts before the ADMM tolerances are met.
constexpr int kPolishSpacing = 50;
constexpr int kRhoAdaptInterval = 50;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

enum class RowKind : char { Free, Inequality, Equality };

RowKind row_kind(double lo, double hi)
{
    if (lo == -kInf && hi == kInf) return RowKind::Free;
    if (lo == hi) return RowKind::Equality;
    return RowKind::Inequality;
}

double scale_factor(double norm)
{
    if (norm < kMinScaling) return 1.0;
    return std::clamp(1.0 / std::sqrt(norm), 1.0 / std::sqrt(kMaxScaling), 1.0 / std::sqrt(kMinScaling));
}

} // namespace

std::string to_string(QpStatus status)
{
    switch (status) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::Unbounded: return "unbounded";
    case QpStatus::MaxIterations: return "max_iterations";
    }
    return "unknown";
}

std::string to_string(QpMethod method)
{
    return method == QpMethod::Admm ? "admm" : "interior_point";
}

QpMethod parse_qp_method(const std::string& text)
{
    if (text == "admm") return QpMethod::Admm;
    if (text == "interior_point") return QpMethod::InteriorPoint;
    throw ParseError("unknown QP method '" + text + "' (expected admm or interior_point)");
}

namespace {

/// Point returned by the interior-point method, in the duals convention of
/// QpSolution (y_b includes the one-norm subgradient).
struct IpmPoint {
    bool converged = false;
    int iterations = 0;
    Vector x, y_eq, y_in, y_b;
};

/**
 * Mehrotra predictor-corrector on
 *
 *     minimize 1/2 x'Px + q'x + w't   s.t.  Aeq x = beq,  lin <= Ain x <= uin,
 *                                           lb <= x <= ub,  -t <= x <= t  (w > 0)
 *
 * The one-norm epigraph variables t are eliminated from every Newton system,
 * which leaves an n x n block inside a quasi-definite system with the
 * equalities.
 */
IpmPoint interior_point(const Matrix& P, const Vector& q, const Matrix& Aeq, const Vector& beq, const Matrix& Ain,
                        const Vector& lin, const Vector& uin, const Vector& lb, const Vector& ub, const Vector& w,
                        int max_iter, double tol)
{
    const Index n = P.rows();
    std::vector<Index> al, au, ae, bl, bu, be, l1;
    for (Index i = 0; i < Ain.rows(); ++i) {
        if (lin(i) == uin(i)) {
            ae.push_back(i);
            continue;
        }
        if (lin(i) > -kInf) al.push_back(i);
        if (uin(i) < kInf) au.push_back(i);
    }
    for (Index j = 0; j < n; ++j) {
        if (lb(j) == ub(j)) {
            be.push_back(j);
            continue;
        }
        if (lb(j) > -kInf) bl.push_back(j);
        if (ub(j) < kInf) bu.push_back(j);
        if (w(j) > 0.0) l1.push_back(j);
    }
    auto sz = [](const std::vector<Index>& v) { return static_cast<Index>(v.size()); };

    // Equalities: Aeq, equal-sided Ain rows, fixed variables.
    const Index ne = Aeq.rows() + sz(ae) + sz(be);
    Matrix E = Matrix::Zero(ne, n);
    Vector f(ne);
    E.topRows(Aeq.rows()) = Aeq;
    f.head(Aeq.rows()) = beq;
    for (Index k = 0; k < sz(ae); ++k) {
        E.row(Aeq.rows() + k) = Ain.row(ae[k]);
        f(Aeq.rows() + k) = lin(ae[k]);
    }
    for (Index k = 0; k < sz(be); ++k) {
        E(Aeq.rows() + sz(ae) + k, be[k]) = 1.0;
        f(Aeq.rows() + sz(ae) + k) = lb(be[k]);
    }

    // Inequality rows in blocks: Ain lower, Ain upper, bound lower, bound
    // upper, t - x >= 0, t + x >= 0.
    const Index o_au = sz(al), o_bl = o_au + sz(au), o_bu = o_bl + sz(bl), o_lp = o_bu + sz(bu),
                o_lm = o_lp + sz(l1), m = o_lm + sz(l1);
    Matrix A_l(sz(al), n), A_u(sz(au), n);
    for (Index k = 0; k < sz(al); ++k) A_l.row(k) = Ain.row(al[k]);
    for (Index k = 0; k < sz(au); ++k) A_u.row(k) = Ain.row(au[k]);

    Vector x = Vector::Zero(n);
    Vector t = Vector::Zero(sz(l1));
    Vector lam = Vector::Zero(ne);
    Vector s(m), z = Vector::Ones(m);

    auto constraint_values = [&](const Vector& xv, const Vector& tv) {
        Vector c(m);
        if (sz(al)) c.segment(0, sz(al)) = A_l * xv;
        if (sz(au)) c.segment(o_au, sz(au)) = -(A_u * xv);
        for (Index k = 0; k < sz(al); ++k) c(k) -= lin(al[k]);
        for (Index k = 0; k < sz(au); ++k) c(o_au + k) += uin(au[k]);
        for (Index k = 0; k < sz(bl); ++k) c(o_bl + k) = xv(bl[k]) - lb(bl[k]);
        for (Index k = 0; k < sz(bu); ++k) c(o_bu + k) = ub(bu[k]) - xv(bu[k]);
        for (Index k = 0; k < sz(l1); ++k) {
            c(o_lp + k) = tv(k) - xv(l1[k]);
            c(o_lm + k) = tv(k) + xv(l1[k]);
        }
        return c;
    };
    // Sum of grad_x c_k * v_k over all rows.
    auto grad_x = [&](const Vector& v) {
        Vector g = Vector::Zero(n);
        if (sz(al)) g.noalias() += A_l.transpose() * v.segment(0, sz(al));
        if (sz(au)) g.noalias() -= A_u.transpose() * v.segment(o_au, sz(au));
        for (Index k = 0; k < sz(bl); ++k) g(bl[k]) += v(o_bl + k);
        for (Index k = 0; k < sz(bu); ++k) g(bu[k]) -= v(o_bu + k);
        for (Index k = 0; k < sz(l1); ++k) g(l1[k]) += v(o_lm + k) - v(o_lp + k);
        return g;
    };
    auto grad_t = [&](const Vector& v) {
        return Vector(v.segment(o_lp, sz(l1)) + v.segment(o_lm, sz(l1)));
    };
    auto directional = [&](const Vector& dx, const Vector& dt) {
        Vector c = constraint_values(dx, dt);
        // Remove the constant offsets: only the linear part is wanted.
        for (Index k = 0; k < sz(al); ++k) c(k) += lin(al[k]);
        for (Index k = 0; k < sz(au); ++k) c(o_au + k) -= uin(au[k]);
        for (Index k = 0; k < sz(bl); ++k) c(o_bl + k) += lb(bl[k]);
        for (Index k = 0; k < sz(bu); ++k) c(o_bu + k) -= ub(bu[k]);
        return c;
    };

    s = Vector::Ones(m);
    const Vector wl = [&] {
        Vector v(sz(l1));
        for (Index k = 0; k < sz(l1); ++k) v(k) = w(l1[k]);
        return v;
    }();
    double scale_p = 1.0 + inf_norm(f);
    for (const Vector* v : {&lin, &uin, &lb, &ub})
        for (Index k = 0; k < v->size(); ++k)
            if (std::isfinite((*v)(k))) scale_p = std::max(scale_p, 1.0 + std::abs((*v)(k)));

    IpmPoint out;
    // Pass 0 computes the least-squares point with z = -s and shifts both
    // into the positive orthant; it is not counted as an iteration.
    for (int pass = 0; pass <= max_iter + 1; ++pass) {
        const bool start = pass == 0;
        const Vector Px = P * x, Etl = E.transpose() * lam, Jz = grad_x(z);
        const Vector rdx = Px + q - Etl - Jz;
        const Vector rdt = wl - grad_t(z);
        const Vector re = E * x - f;
        const Vector rp = constraint_values(x, t) - s;
        const double mu = m > 0 ? s.dot(z) / static_cast<double>(m) : 0.0;
        const double dres = std::max(inf_norm(rdx), inf_norm(rdt));
        // Relative to every stationarity term, as near the boundary the
        // multiplier terms carry the round-off.
        const double scale_d = 1.0 + std::max({inf_norm(Px), inf_norm(q), inf_norm(w), inf_norm(Etl), inf_norm(Jz)});
        const double pres = std::max(inf_norm(re), inf_norm(rp));
        if (!std::isfinite(dres + pres + mu)) break;
        if (!start) {
            out.iterations = pass - 1;
            if (dres <= tol * scale_d && pres <= tol * scale_p && mu <= tol) {
                out.converged = true;
                break;
            }
            if (pass - 1 == max_iter) break;
        }

        const Vector d = z.cwiseQuotient(s);
        // Both sides of an Ain row share one rank-one term.
        Vector drow = Vector::Zero(Ain.rows());
        for (Index k = 0; k < sz(al); ++k) drow(al[k]) += d(k);
        for (Index k = 0; k < sz(au); ++k) drow(au[k]) += d(o_au + k);
        Matrix M = P;
        if (Ain.rows() > 0) {
            const Matrix B = drow.cwiseSqrt().asDiagonal() * Ain;
            M.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
            M = Matrix(M.selfadjointView<Eigen::Lower>());
        }
        for (Index k = 0; k < sz(bl); ++k) M(bl[k], bl[k]) += d(o_bl + k);
        for (Index k = 0; k < sz(bu); ++k) M(bu[k], bu[k]) += d(o_bu + k);
        Vector couple(sz(l1)), tdiag(sz(l1));
        for (Index k = 0; k < sz(l1); ++k) {
            const double dp = d(o_lp + k), dm = d(o_lm + k);
            tdiag(k) = dp + dm;
            couple(k) = dm - dp;
            M(l1[k], l1[k]) += 4.0 * dp * dm / (dp + dm);
        }
        // Quasi-definite augmented system [M E'; E -delta I] in (dx, -dl). The
        // shifts keep it nonsingular for a singular P or dependent equality
        // rows; iterative refinement removes their bias.
        const double delta = 1e-9 * std::max(1.0, P.diagonal().cwiseAbs().maxCoeff());
        Matrix K(n + ne, n + ne);
        K.topLeftCorner(n, n) = M;
        K.topLeftCorner(n, n).diagonal().array() += delta;
        if (ne > 0) {
            K.topRightCorner(n, ne) = E.transpose();
            K.bottomLeftCorner(ne, n) = E;
            K.bottomRightCorner(ne, ne) = -delta * Matrix::Identity(ne, ne);
        }
        const Eigen::PartialPivLU<Matrix> lu(K);
        auto kkt_solve = [&](const Vector& bx, const Vector& be, Vector& dx, Vector& dl) {
            Vector rhs(n + ne);
            rhs << bx, be;
            Vector sol = lu.solve(rhs);
            for (int r = 0; r < 3; ++r) {
                Vector res = rhs;
                res.head(n).noalias() -= M * sol.head(n);
                if (ne > 0) {
                    res.head(n).noalias() -= E.transpose() * sol.tail(ne);
                    res.tail(ne).noalias() -= E * sol.head(n);
                }
                sol += lu.solve(res);
            }
            dx = sol.head(n);
            dl = -sol.tail(ne);
        };

        // Solves the Newton system for a complementarity target rc.
        auto newton = [&](const Vector& rc, Vector& dx, Vector& dt, Vector& dl, Vector& ds, Vector& dz) {
            const Vector rho_k = (rc - z.cwiseProduct(rp)).cwiseQuotient(s);
            Vector bx = -rdx + grad_x(rho_k);
            const Vector bt = -rdt + grad_t(rho_k);
            for (Index k = 0; k < sz(l1); ++k) bx(l1[k]) -= couple(k) * bt(k) / tdiag(k);
            kkt_solve(bx, -re, dx, dl);
            dt.resize(sz(l1));
            for (Index k = 0; k < sz(l1); ++k) dt(k) = (bt(k) - couple(k) * dx(l1[k])) / tdiag(k);
            ds = directional(dx, dt) + rp;
            dz = (rc - z.cwiseProduct(ds)).cwiseQuotient(s);
        };
        auto max_step = [](const Vector& v, const Vector& dv) {
            double a = 1.0;
            for (Index k = 0; k < v.size(); ++k)
                if (dv(k) < 0.0) a = std::min(a, -v(k) / dv(k));
            return a;
        };

        Vector dx, dt, dl, ds, dz;
        if (start) {
            newton(Vector::Constant(m, -2.0), dx, dt, dl, ds, dz);
            x += dx;
            t += dt;
            lam += dl;
            s += ds;
            z += dz;
            auto shift = [](Vector& v) {
                if (v.size() == 0) return;
                const double lo = v.minCoeff();
                if (lo <= 0.0) v.array() += 1.0 - lo;
            };
            shift(s);
            shift(z);
            continue;
        }
        newton(-s.cwiseProduct(z), dx, dt, dl, ds, dz);
        const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
        double sigma = 0.0;
        Vector rc = -s.cwiseProduct(z);
        if (m > 0) {
            const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
            sigma = std::pow(mu_aff / mu, 3.0);
            rc += (sigma * mu - ds.cwiseProduct(dz).array()).matrix();
            newton(rc, dx, dt, dl, ds, dz);
        }
        const double a = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));
        x += a * dx;
        t += a * dt;
        lam += a * dl;
        s += a * ds;
        z += a * dz;
    }

    out.x = x;
    out.y_eq = -lam.head(Aeq.rows());
    out.y_in = Vector::Zero(Ain.rows());
    for (Index k = 0; k < sz(al); ++k) out.y_in(al[k]) -= z(k);
    for (Index k = 0; k < sz(au); ++k) out.y_in(au[k]) += z(o_au + k);
    for (Index k = 0; k < sz(ae); ++k) out.y_in(ae[k]) = -lam(Aeq.rows() + k);
    out.y_b = Vector::Zero(n);
    for (Index k = 0; k < sz(bl); ++k) out.y_b(bl[k]) -= z(o_bl + k);
    for (Index k = 0; k < sz(bu); ++k) out.y_b(bu[k]) += z(o_bu + k);
    for (Index k = 0; k < sz(be); ++k) out.y_b(be[k]) = -lam(Aeq.rows() + sz(ae) + k);
    for (Index k = 0; k < sz(l1); ++k) out.y_b(l1[k]) += z(o_lp + k) - z(o_lm + k);
    return out;
}

} // namespace

QpProblem QpProblem::normalized() const
{
    QpProblem out = *this;
    const Index n = q.size();
    if (out.P.size() == 0) out.P = Matrix::Zero(n, n);
    if (out.Aeq.size() == 0) {
        out.Aeq.resize(out.beq.size(), n);
        out.Aeq.setZero();
    }
    if (out.Ain.size() == 0) {
        out.Ain.resize(std::max(out.lin.size(), out.uin.size()), n);
        out.Ain.setZero();
    }
    if (out.lin.size() == 0 && out.Ain.rows() > 0) out.lin = Vector::Constant(out.Ain.rows(), -kInf);
    if (out.uin.size() == 0 && out.Ain.rows() > 0) out.uin = Vector::Constant(out.Ain.rows(), kInf);
    if (out.lb.size() == 0) out.lb = Vector::Constant(n, -kInf);
    if (out.ub.size() == 0) out.ub = Vector::Constant(n, kInf);
    if (out.l1.size() == 0) out.l1 = Vector::Zero(n);
    return out;
}

void QpProblem::validate() const
{
    const Index n = q.size();
    if (P.rows() != n || P.cols() != n) throw DimensionError("qp: P must be n x n");
    if (Aeq.cols() != n || Aeq.rows() != beq.size()) throw DimensionError("qp: Aeq/beq not conformal");
    if (Ain.cols() != n || Ain.rows() != lin.size() || Ain.rows() != uin.size()) {
        throw DimensionError("qp: Ain/lin/uin not conformal");
    }
    if (lb.size() != n || ub.size() != n) throw DimensionError("qp: bounds not conformal");
    if (l1.size() != n) throw DimensionError("qp: one-norm weights not conformal");
    if (!(l1.array() >= 0.0).all() || !l1.allFinite()) throw Error("qp: one-norm weights must be finite and nonnegative");
    const double pscale = std::max(1.0, P.size() ? P.cwiseAbs().maxCoeff() : 0.0);
    if (n > 0 && (P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * pscale) {
        throw Error("qp: P is not symmetric");
    }
    if ((lb.array() > ub.array()).any() || (lin.array() > uin.array()).any()) {
        throw Error("qp: lower bound exceeds upper bound");
    }
}

// ---------------------------------------------------------------------------

struct QpSolver::Impl {
    QpSettings settings;
    Index n = 0;
    Index me = 0;  // equality rows
    Index mi = 0;  // general inequality rows

    // Unscaled data.
    Matrix P, Aeq, Ain;
    Vector w;  // one-norm weights
    bool has_l1 = false;

    // Ruiz scaling: scaled x = D^{-1} x, scaled rows = E * rows, cost scale c.
    Vector D, Eeq, Ein, Eb;
    double c = 1.0;
    Matrix Ps, Aeqs, Ains;
    Vector eb;  // scaled coefficient of each bound row (Eb_j * D_j)
    Vector ws;  // one-norm weight per bound row in scaled z units (c w_j / Eb_j)
    Vector wx;  // one-norm weight on the scaled variable (c w_j D_j)
    Matrix AeqtAeq;

    // Cached factorization for the initial penalty.
    std::vector<RowKind> cached_kinds;
    std::optional<Eigen::LLT<Matrix>> cached_llt;
    std::optional<Eigen::LDLT<Matrix>> cached_ldlt;

    struct Factor {
        std::optional<Eigen::LLT<Matrix>> llt;
        std::optional<Eigen::LDLT<Matrix>> ldlt;
        Vector solve(const Vector& b) const { return llt ? Vector(llt->solve(b)) : Vector(ldlt->solve(b)); }
    };

    void equilibrate();
    Factor factorize(const Vector& rho_in, const Vector& rho_b, double rho_eq) const;
};

void QpSolver::Impl::equilibrate()
{
    D = Vector::Ones(n);
    Eeq = Vector::Ones(me);
    Ein = Vector::Ones(mi);
    Eb = Vector::Ones(n);
    c = 1.0;
    Ps = P;
    Aeqs = Aeq;
    Ains = Ain;
    eb = Vector::Ones(n);

    for (int it = 0; it < settings.scaling_iterations; ++it) {
        Vector dcol(n);
        for (Index j = 0; j < n; ++j) {
            double norm = std::abs(eb(j));
            if (n > 0) norm = std::max(norm, Ps.col(j).cwiseAbs().maxCoeff());
            if (me > 0) norm = std::max(norm, Aeqs.col(j).cwiseAbs().maxCoeff());
            if (mi > 0) norm = std::max(norm, Ains.col(j).cwiseAbs().maxCoeff());
            dcol(j) = scale_factor(norm);
        }
        Vector deq(me), din(mi), db(n);
        for (Index i = 0; i < me; ++i) deq(i) = scale_factor(Aeqs.row(i).cwiseAbs().maxCoeff());
        for (Index i = 0; i < mi; ++i) din(i) = scale_factor(Ains.row(i).cwiseAbs().maxCoeff());
        for (Index j = 0; j < n; ++j) db(j) = scale_factor(std::abs(eb(j)));

        Ps = dcol.asDiagonal() * Ps * dcol.asDiagonal();
        Aeqs = deq.asDiagonal() * Aeqs * dcol.asDiagonal();
        Ains = din.asDiagonal() * Ains * dcol.asDiagonal();
        eb = db.cwiseProduct(eb).cwiseProduct(dcol);
        D = D.cwiseProduct(dcol);
        Eeq = Eeq.cwiseProduct(deq);
        Ein = Ein.cwiseProduct(din);
        Eb = Eb.cwiseProduct(db);

        if (n > 0) {
            double mean_col = 0.0;
            for (Index j = 0; j < n; ++j) mean_col += Ps.col(j).cwiseAbs().maxCoeff();
            mean_col /= static_cast<double>(n);
            if (mean_col > kMinScaling) {
                const double gamma = std::clamp(1.0 / mean_col, kMinScaling, kMaxScaling);
                Ps *= gamma;
                c *= gamma;
            }
        }
    }
    AeqtAeq = Aeqs.transpose() * Aeqs;
    ws = c * w.cwiseQuotient(Eb);
    wx = c * w.cwiseProduct(D);
}

QpSolver::Impl::Factor QpSolver::Impl::factorize(const Vector& rho_in, const Vector& rho_b, double rho_eq) const
{
    Matrix K = Ps;
    K.diagonal().array() += settings.sigma;
    if (me > 0) K.noalias() += rho_eq * AeqtAeq;
    if (mi > 0) {
        const Matrix weighted = rho_in.asDiagonal() * Ains;
        K.noalias() += Ains.transpose() * weighted;
    }
    K.diagonal() += rho_b.cwiseProduct(eb.cwiseAbs2());
    Factor f;
    Eigen::LLT<Matrix> llt(K);
    if (llt.info() == Eigen::Success) {
        f.llt.emplace(std::move(llt));
    } else {
        f.ldlt.emplace(K);
    }
    return f;
}

QpSolver::QpSolver(Matrix P, Matrix Aeq, Matrix Ain, QpSettings settings, Vector l1)
    : impl_(std::make_unique<Impl>())
{
    auto& s = *impl_;
    s.settings = settings;
    s.n = P.rows();
    if (P.cols() != s.n) throw DimensionError("qp: P must be square");
    if (Aeq.size() == 0) Aeq.resize(0, s.n);
    if (Ain.size() == 0) Ain.resize(0, s.n);
    if (Aeq.cols() != s.n || Ain.cols() != s.n) throw DimensionError("qp: constraint matrices must have n columns");
    s.me = Aeq.rows();
    s.mi = Ain.rows();
    s.P = std::move(P);
    s.Aeq = std::move(Aeq);
    s.Ain = std::move(Ain);
    if (l1.size() == 0) l1 = Vector::Zero(s.n);
    if (l1.size() != s.n) throw DimensionError("qp: one-norm weights must have n entries");
    if (!(l1.array() >= 0.0).all() || !l1.allFinite()) throw Error("qp: one-norm weights must be finite and nonnegative");
    s.w = std::move(l1);
    s.has_l1 = (s.w.array() > 0.0).any();
    s.equilibrate();
}

QpSolver::~QpSolver() = default;
QpSolver::QpSolver(QpSolver&&) noexcept = default;
QpSolver& QpSolver::operator=(QpSolver&&) noexcept = default;

Index QpSolver::num_variables() const { return impl_->n; }
const QpSettings& QpSolver::settings() const { return impl_->settings; }

namespace {

/// Unscaled KKT measures of a candidate primal/dual pair.
struct KktReport {
    double primal = 0.0;
    double dual = 0.0;
    double complementarity = 0.0;
    double primal_scale = 0.0;  // max(|Ax|, |bounds|)
    double dual_scale = 0.0;    // max(|Px|, |A'y|, |q|)
};

struct UnscaledData {
    const Matrix& P;
    const Matrix& Aeq;
    const Matrix& Ain;
    const Vector& q;
    const Vector& beq;
    const Vector& lin;
    const Vector& uin;
    const Vector& lb;
    const Vector& ub;
    const Vector& w;
};

// A multiplier on an infinite side counts in full.
double side_gap(double y, double a, double lo, double hi)
{
    if (y > 0.0) return hi == kInf ? y : y * std::abs(hi - a);
    if (y < 0.0) return lo == -kInf ? -y : -y * std::abs(a - lo);
    return 0.0;
}

KktReport evaluate_kkt(const UnscaledData& d, const Vector& x, const Vector& yeq, const Vector& yin, const Vector& yb)
{
    KktReport r;
    const Vector Px = d.P * x;
    Vector Aty = yb;
    if (d.Aeq.rows() > 0) Aty.noalias() += d.Aeq.transpose() * yeq;
    if (d.Ain.rows() > 0) Aty.noalias() += d.Ain.transpose() * yin;
    r.dual = inf_norm(Px + d.q + Aty);
    r.dual_scale = std::max({inf_norm(Px), inf_norm(Aty), inf_norm(d.q), inf_norm(d.w)});

    auto bound_scale = [](double lo, double hi) {
        double s = 0.0;
        if (std::isfinite(lo)) s = std::max(s, std::abs(lo));
        if (std::isfinite(hi)) s = std::max(s, std::abs(hi));
        return s;
    };

    if (d.Aeq.rows() > 0) {
        const Vector ax = d.Aeq * x;
        r.primal = std::max(r.primal, inf_norm(ax - d.beq));
        r.primal_scale = std::max({r.primal_scale, inf_norm(ax), inf_norm(d.beq)});
    }
    if (d.Ain.rows() > 0) {
        const Vector ax = d.Ain * x;
        for (Index i = 0; i < ax.size(); ++i) {
            r.primal = std::max({r.primal, ax(i) - d.uin(i), d.lin(i) - ax(i)});
            r.primal_scale = std::max({r.primal_scale, std::abs(ax(i)), bound_scale(d.lin(i), d.uin(i))});
            r.complementarity = std::max(r.complementarity, side_gap(yin(i), ax(i), d.lin(i), d.uin(i)));
        }
    }
    for (Index j = 0; j < x.size(); ++j) {
        r.primal = std::max({r.primal, x(j) - d.ub(j), d.lb(j) - x(j)});
        r.primal_scale = std::max({r.primal_scale, std::abs(x(j)), bound_scale(d.lb(j), d.ub(j))});
        // Remove the one-norm subgradient; the remainder must be a bound multiplier.
        // Split y_b into a one-norm subgradient w * sg and a bound multiplier;
        // w (|x| - sg x) is the complementarity gap of the one-norm part.
        double ybox = yb(j);
        if (d.w(j) > 0.0) {
            const double sg = std::clamp(yb(j) / d.w(j), -1.0, 1.0);
            ybox -= d.w(j) * sg;
            r.complementarity = std::max(r.complementarity, d.w(j) * (std::abs(x(j)) - sg * x(j)));
        }
        r.complementarity = std::max(r.complementarity, side_gap(ybox, x(j), d.lb(j), d.ub(j)));
    }
    return r;
}

} // namespace

QpSolution QpSolver::solve(const Vector& q, const Vector& beq, const Vector& lin, const Vector& uin, const Vector& lb,
                           const Vector& ub, double constant)
{
    auto& s = *impl_;
    const Index n = s.n, me = s.me, mi = s.mi;
    const QpSettings& set = s.settings;
    if (q.size() != n || beq.size() != me || lin.size() != mi || uin.size() != mi || lb.size() != n ||
        ub.size() != n) {
        throw DimensionError("qp: vector sizes do not match the solver");
    }
    if ((lb.array() > ub.array()).any() || (lin.array() > uin.array()).any()) {
        throw Error("qp: lower bound exceeds upper bound");
    }
    const UnscaledData data{s.P, s.Aeq, s.Ain, q, beq, lin, uin, lb, ub, s.w};

    // Scaled vectors.
    const Vector qs = s.c * s.D.cwiseProduct(q);
    const Vector beqs = s.Eeq.cwiseProduct(beq);
    const Vector lins = s.Ein.cwiseProduct(lin);
    const Vector uins = s.Ein.cwiseProduct(uin);
    const Vector lbs = s.Eb.cwiseProduct(lb);
    const Vector ubs = s.Eb.cwiseProduct(ub);

    std::vector<RowKind> kinds(static_cast<std::size_t>(mi + n));
    for (Index i = 0; i < mi; ++i) kinds[static_cast<std::size_t>(i)] = row_kind(lin(i), uin(i));
    for (Index j = 0; j < n; ++j) {
        RowKind k = row_kind(lb(j), ub(j));
        if (k == RowKind::Free && s.w(j) > 0.0) k = RowKind::Inequality;
        kinds[static_cast<std::size_t>(mi + j)] = k;
    }

    double rho = set.rho;
    auto rho_vectors = [&](double r, Vector& rin, Vector& rb) {
        rin.resize(mi);
        rb.resize(n);
        for (Index i = 0; i < mi + n; ++i) {
            const RowKind k = kinds[static_cast<std::size_t>(i)];
            const double v = k == RowKind::Free ? kRhoMin : (k == RowKind::Equality ? kRhoEqualityFactor * r : r);
            if (i < mi) rin(i) = v;
            else rb(i - mi) = v;
        }
    };
    Vector rho_in, rho_b;
    rho_vectors(rho, rho_in, rho_b);
    double rho_eq = kRhoEqualityFactor * rho;

    Impl::Factor factor;
    if (s.cached_kinds == kinds && (s.cached_llt || s.cached_ldlt)) {
        factor.llt = s.cached_llt;
        factor.ldlt = s.cached_ldlt;
    } else {
        factor = s.factorize(rho_in, rho_b, rho_eq);
        s.cached_kinds = kinds;
        s.cached_llt = factor.llt;
        s.cached_ldlt = factor.ldlt;
    }

    Vector x = Vector::Zero(n);
    Vector zeq = beqs;
    Vector zin = Vector::Zero(mi);
    Vector zb = Vector::Zero(n);
    Vector yeq = Vector::Zero(me), yin = Vector::Zero(mi), yb = Vector::Zero(n);
    Vector x_prev = x, yeq_prev = yeq, yin_prev = yin, yb_prev = yb;

    auto clip = [](const Vector& v, const Vector& lo, const Vector& hi) { return v.cwiseMax(lo).cwiseMin(hi); };
    auto soft_threshold = [](const Vector& v, const Vector& k) {
        return Vector(v.cwiseSign().cwiseProduct((v.cwiseAbs() - k).cwiseMax(0.0)));
    };

    // Unscaling helpers.
    auto unscale_x = [&](const Vector& xs) { return Vector(s.D.cwiseProduct(xs)); };
    auto unscale_y = [&](const Vector& ys, const Vector& E) { return Vector(E.cwiseProduct(ys) / s.c); };

    QpSolution sol;
    auto finish = [&](const Vector& xu, const Vector& yequ, const Vector& yinu, const Vector& ybu, QpStatus status,
                      int iters, bool polished) {
        sol.x = xu;
        sol.y_eq = yequ;
        sol.y_in = yinu;
        sol.y_bound = ybu;
        const KktReport r = evaluate_kkt(data, xu, yequ, yinu, ybu);
        sol.primal_residual = r.primal;
        sol.dual_residual = r.dual;
        sol.complementarity = r.complementarity;
        sol.objective = 0.5 * xu.dot(s.P * xu) + q.dot(xu) + s.w.dot(xu.cwiseAbs()) + constant;
        sol.status = status;
        sol.iterations = iters;
        sol.polished = polished;
        return sol;
    };

    auto tolerances = [&](const KktReport& r) {
        return std::pair{set.eps_abs + set.eps_rel * r.primal_scale, set.eps_abs + set.eps_rel * r.dual_scale};
    };

    // Active-set polish in the scaled space. The activity pattern is guessed
    // from the ADMM iterate, then corrected by a few primal-dual active-set
    // rounds that re-guess it from the previous reduced solve.
    // Pattern per inequality/bound row: 0 inactive, 1 lower, 2 upper,
    // 3 equality; bound rows with a one-norm weight also use 4 (pinned at
    // zero), 5 (free, positive) and 6 (free, negative).
    using Pattern = std::vector<char>;
    auto guess_pattern = [&](const Vector& zin_v, const Vector& zb_v, const Vector& yin_v, const Vector& yb_v,
                             const Pattern* previous) {
        Pattern pattern(static_cast<std::size_t>(mi + n), 0);
        for (Index i = 0; i < mi + n; ++i) {
            const bool is_in = i < mi;
            const double lo = is_in ? lins(i) : lbs(i - mi);
            const double hi = is_in ? uins(i) : ubs(i - mi);
            const double z = is_in ? zin_v(i) : zb_v(i - mi);
            const double wz = is_in ? 0.0 : s.ws(i - mi);
            double y = is_in ? yin_v(i) : yb_v(i - mi);
            const double y_l1 = std::clamp(y, -wz, wz);
            y -= y_l1;  // bound part of the multiplier
            char& st = pattern[static_cast<std::size_t>(i)];
            if (lo == hi) st = 3;
            else if (lo > -kInf && z - lo < -y) st = 1;
            else if (hi < kInf && hi - z < y) st = 2;
            else if (wz > 0.0) {
                const char before = previous ? (*previous)[static_cast<std::size_t>(i)] : 0;
                // Pinned when closer to the kink than the multiplier is to the
                // edge of the subgradient interval.
                if (std::abs(z) < wz - std::abs(y_l1)) st = 4;
                else if (z > 0.0) st = before == 6 ? 4 : 5;
                else if (z < 0.0) st = before == 5 ? 4 : 6;
                else if (y > 0.0) st = 5;  // multiplier beyond the weight releases the variable
                else if (y < 0.0) st = 6;
                else st = 4;
            }
        }
        return pattern;
    };

    // Solves the equality-constrained problem of one pattern. Returns false
    // when the reduced system breaks down.
    auto polish_once = [&](const Pattern& pattern, Vector& xs, Vector& ys_eq, Vector& ys_in, Vector& ys_b,
                           std::vector<Index>& fixed_vars) -> bool {
        std::vector<Index> free_vars;
        fixed_vars.clear();
        Vector xfix = Vector::Zero(n);
        for (Index j = 0; j < n; ++j) {
            const char st = pattern[static_cast<std::size_t>(mi + j)];
            if (st == 0 || st == 5 || st == 6) {
                free_vars.push_back(j);
            } else {
                const double value = st == 4 ? 0.0 : (st == 2 ? ub(j) : lb(j));
                xfix(j) = value / s.D(j);
                fixed_vars.push_back(j);
            }
        }
        std::vector<Index> active_in;
        for (Index i = 0; i < mi; ++i)
            if (pattern[static_cast<std::size_t>(i)] != 0) active_in.push_back(i);

        const Index nf = static_cast<Index>(free_vars.size());
        const Index na = me + static_cast<Index>(active_in.size());
        Matrix H(nf, nf);
        Vector h(nf);
        const Vector Pxfix = s.Ps * xfix;
        for (Index a = 0; a < nf; ++a) {
            const Index ja = free_vars[static_cast<std::size_t>(a)];
            const char st = pattern[static_cast<std::size_t>(mi + ja)];
            h(a) = qs(ja) + Pxfix(ja) + (st == 5 ? s.wx(ja) : (st == 6 ? -s.wx(ja) : 0.0));
            for (Index b = 0; b < nf; ++b) H(a, b) = s.Ps(ja, free_vars[static_cast<std::size_t>(b)]);
        }
        Matrix G(na, nf);
        Vector g(na);
        for (Index r = 0; r < na; ++r) {
            const bool is_eq = r < me;
            const Index i = is_eq ? r : active_in[static_cast<std::size_t>(r - me)];
            const auto row = is_eq ? s.Aeqs.row(i) : s.Ains.row(i);
            double target = 0.0;
            if (is_eq) {
                target = beqs(i);
            } else {
                const char st = pattern[static_cast<std::size_t>(i)];
                target = st == 2 ? uins(i) : lins(i);
            }
            g(r) = target - row.dot(xfix);
            for (Index b = 0; b < nf; ++b) G(r, b) = row(free_vars[static_cast<std::size_t>(b)]);
        }

        const Index nk = nf + na;
        Matrix K = Matrix::Zero(nk, nk);
        K.topLeftCorner(nf, nf) = H;
        K.topRightCorner(nf, na) = G.transpose();
        K.bottomLeftCorner(na, nf) = G;
        Matrix Kreg = K;
        Kreg.topLeftCorner(nf, nf).diagonal().array() += kPolishDelta;
        Kreg.bottomRightCorner(na, na).diagonal().array() -= kPolishDelta;
        Eigen::PartialPivLU<Matrix> lu(Kreg);
        Vector rhs(nk);
        rhs << -h, g;
        Vector sol_k = Vector::Zero(nk);
        double last_res = kInf;
        for (int k = 0; k < kPolishRefine; ++k) {
            const Vector res = rhs - K * sol_k;
            const double rn = inf_norm(res);
            if (!std::isfinite(rn)) return false;
            if (rn >= last_res * 0.999 && k > 2) break;
            last_res = rn;
            sol_k += lu.solve(res);
        }
        if (!sol_k.allFinite()) return false;

        xs = xfix;
        for (Index a = 0; a < nf; ++a) xs(free_vars[static_cast<std::size_t>(a)]) = sol_k(a);
        ys_eq = sol_k.segment(nf, me);
        ys_in = Vector::Zero(mi);
        for (std::size_t r = 0; r < active_in.size(); ++r) ys_in(active_in[r]) = sol_k(nf + me + static_cast<Index>(r));
        Vector grad = s.Ps * xs + qs;
        if (me > 0) grad.noalias() += s.Aeqs.transpose() * ys_eq;
        if (mi > 0) grad.noalias() += s.Ains.transpose() * ys_in;
        ys_b = Vector::Zero(n);
        for (Index j : fixed_vars) ys_b(j) = -grad(j) / s.eb(j);
        for (Index j : free_vars) {
            const char st = pattern[static_cast<std::size_t>(mi + j)];
            if (st == 5) ys_b(j) = s.ws(j);
            else if (st == 6) ys_b(j) = -s.ws(j);
        }
        return true;
    };

    // Returns true after storing a candidate that passed the unscaled KKT test.
    std::set<Pattern> tried_patterns;
    int polish_attempts = 0;
    auto try_polish = [&](int iters) -> bool {
        if (!set.polish) return false;
        Pattern pattern = guess_pattern(zin, zb, yin, yb, nullptr);
        for (int round = 0; round < kPolishRounds && polish_attempts < kMaxPolishAttempts; ++round) {
            if (!tried_patterns.insert(pattern).second) return false;
            ++polish_attempts;
            Vector xs, ys_eq, ys_in, ys_b;
            std::vector<Index> fixed_vars;
            if (!polish_once(pattern, xs, ys_eq, ys_in, ys_b, fixed_vars)) return false;

            // Snap fixed variables exactly onto their unscaled bounds.
            Vector xu = unscale_x(xs);
            for (Index j : fixed_vars) {
                const char st = pattern[static_cast<std::size_t>(mi + j)];
                xu(j) = st == 4 ? 0.0 : (st == 2 ? ub(j) : lb(j));
            }
            const Vector yequ = unscale_y(ys_eq, s.Eeq);
            const Vector yinu = unscale_y(ys_in, s.Ein);
            const Vector ybu = unscale_y(ys_b, s.Eb);
            const KktReport r = evaluate_kkt(data, xu, yequ, yinu, ybu);
            const auto [tol_p, tol_d] = tolerances(r);
            if (r.primal <= tol_p && r.dual <= tol_d && r.complementarity <= std::max(tol_p, tol_d)) {
                finish(xu, yequ, yinu, ybu, QpStatus::Optimal, iters, true);
                return true;
            }
            const Vector zin_p = mi > 0 ? Vector(s.Ains * xs) : Vector(0);
            const Pattern previous = pattern;
            pattern = guess_pattern(zin_p, s.eb.cwiseProduct(xs), ys_in, ys_b, &previous);
        }
        return false;
    };

    auto Ax_parts = [&](const Vector& v, Vector& aeq, Vector& ain, Vector& ab) {
        aeq.noalias() = s.Aeqs * v;
        ain.noalias() = s.Ains * v;
        ab = s.eb.cwiseProduct(v);
    };
    auto At_y = [&](const Vector& ye, const Vector& yi, const Vector& ybv) {
        Vector out = s.eb.cwiseProduct(ybv);
        if (me > 0) out.noalias() += s.Aeqs.transpose() * ye;
        if (mi > 0) out.noalias() += s.Ains.transpose() * yi;
        return out;
    };

    Vector aeq(me), ain(mi), ab(n);
    const Vector Dinv = s.D.cwiseInverse();

    // ADMM primal estimate; one-norm variables are read from z, whose soft
    // thresholding produces exact zeros.
    auto admm_x = [&]() {
        Vector xu = unscale_x(x);
        if (s.has_l1) {
            for (Index j = 0; j < n; ++j)
                if (s.w(j) > 0.0) xu(j) = zb(j) / s.Eb(j);
        }
        return xu;
    };

    if (set.method == QpMethod::InteriorPoint) {
        const Vector lbx = lb.cwiseQuotient(s.D), ubx = ub.cwiseQuotient(s.D);
        const IpmPoint ip = interior_point(s.Ps, qs, s.Aeqs, beqs, s.Ains, lins, uins, lbx, ubx, s.wx,
                                           set.ipm_max_iter, kIpmTolerance);
        // Only a converged point seeds ADMM: infeasibility and unboundedness
        // certificates then start from the usual cold state.
        if (ip.converged && ip.x.allFinite() && ip.y_b.allFinite()) {
            x = ip.x;
            yeq = ip.y_eq;
            yin = ip.y_in;
            yb = ip.y_b.cwiseQuotient(s.eb);
            zin = clip(s.Ains * x, lins, uins);
            zb = clip(s.eb.cwiseProduct(x), lbs, ubs);
            if (try_polish(ip.iterations)) return sol;
            const Vector xu = unscale_x(x);
            const Vector yequ = unscale_y(yeq, s.Eeq), yinu = unscale_y(yin, s.Ein), ybu = unscale_y(yb, s.Eb);
            const KktReport r = evaluate_kkt(data, xu, yequ, yinu, ybu);
            const auto [tol_p, tol_d] = tolerances(r);
            if (r.primal <= tol_p && r.dual <= tol_d && r.complementarity <= std::max(tol_p, tol_d)) {
                return finish(xu, yequ, yinu, ybu, QpStatus::Optimal, ip.iterations, false);
            }
        }
    }

    double rho_damping = 1.0;
    int rho_direction = 0;
    int last_polish_iter = -kPolishSpacing;
    int iter = 0;
    for (iter = 1; iter <= set.max_iter; ++iter) {
        x_prev = x;
        yeq_prev = yeq;
        yin_prev = yin;
        yb_prev = yb;

        Vector rhs = set.sigma * x - qs;
        rhs += At_y(rho_eq * zeq - yeq, rho_in.cwiseProduct(zin) - yin, rho_b.cwiseProduct(zb) - yb);
        const Vector xt = factor.solve(rhs);
        Ax_parts(xt, aeq, ain, ab);

        const double a = set.alpha;
        x = a * xt + (1.0 - a) * x;
        const Vector heq = a * aeq + (1.0 - a) * zeq;
        const Vector hin = a * ain + (1.0 - a) * zin;
        const Vector hb = a * ab + (1.0 - a) * zb;
        const Vector zin_new = clip(hin + yin.cwiseQuotient(rho_in), lins, uins);
        Vector zb_new = hb + yb.cwiseQuotient(rho_b);
        if (s.has_l1) zb_new = soft_threshold(zb_new, s.ws.cwiseQuotient(rho_b));
        zb_new = clip(zb_new, lbs, ubs);
        yeq += rho_eq * (heq - beqs);
        yin += rho_in.cwiseProduct(hin - zin_new);
        yb += rho_b.cwiseProduct(hb - zb_new);
        zeq = beqs;
        zin = zin_new;
        zb = zb_new;

        if (iter % set.check_interval != 0 && iter != set.max_iter) continue;

        // Residuals in unscaled units.
        Ax_parts(x, aeq, ain, ab);
        double prim = 0.0;
        if (me > 0) prim = std::max(prim, inf_norm((aeq - zeq).cwiseQuotient(s.Eeq)));
        if (mi > 0) prim = std::max(prim, inf_norm((ain - zin).cwiseQuotient(s.Ein)));
        prim = std::max(prim, inf_norm((ab - zb).cwiseQuotient(s.Eb)));
        const double ax_norm = std::max({me ? inf_norm(aeq.cwiseQuotient(s.Eeq)) : 0.0,
                                         mi ? inf_norm(ain.cwiseQuotient(s.Ein)) : 0.0,
                                         inf_norm(ab.cwiseQuotient(s.Eb))});
        const double z_norm = std::max({me ? inf_norm(zeq.cwiseQuotient(s.Eeq)) : 0.0,
                                        mi ? inf_norm(zin.cwiseQuotient(s.Ein)) : 0.0,
                                        inf_norm(zb.cwiseQuotient(s.Eb))});
        const Vector Px = s.Ps * x;
        const Vector Aty = At_y(yeq, yin, yb);
        const double dual = inf_norm((Px + qs + Aty).cwiseProduct(Dinv)) / s.c;
        const double px_norm = inf_norm(Px.cwiseProduct(Dinv)) / s.c;
        const double aty_norm = inf_norm(Aty.cwiseProduct(Dinv)) / s.c;
        const double q_norm = std::max(inf_norm(q), inf_norm(s.w));
        const double pscale = std::max(ax_norm, z_norm);
        const double dscale = std::max({px_norm, aty_norm, q_norm});
        const double eps_p = set.eps_abs + set.eps_rel * pscale;
        const double eps_d = set.eps_abs + set.eps_rel * dscale;

        if (prim <= eps_p && dual <= eps_d) {
            if (try_polish(iter)) return sol;
            return finish(admm_x(), unscale_y(yeq, s.Eeq), unscale_y(yin, s.Ein), unscale_y(yb, s.Eb),
                          QpStatus::Optimal, iter, false);
        }
        if (prim <= kPolishGate * std::max(1.0, pscale) && dual <= kPolishGate * std::max(1.0, dscale) &&
            iter - last_polish_iter >= kPolishSpacing) {
            last_polish_iter = iter;
            if (try_polish(iter)) return sol;
        }

        // Primal infeasibility certificate from the dual increment.
        {
            const Vector dyeq = (yeq - yeq_prev).cwiseProduct(s.Eeq);
            const Vector dyin = (yin - yin_prev).cwiseProduct(s.Ein);
            const Vector dyb = (yb - yb_prev).cwiseProduct(s.Eb);
            const double dy_norm = std::max({inf_norm(dyeq), inf_norm(dyin), inf_norm(dyb)});
            if (dy_norm > 1e-12) {
                Vector atdy = dyb;
                if (me > 0) atdy.noalias() += s.Aeq.transpose() * dyeq;
                if (mi > 0) atdy.noalias() += s.Ain.transpose() * dyin;
                const double tol = set.eps_infeasible * dy_norm;
                if (inf_norm(atdy) <= tol) {
                    double support = beq.dot(dyeq);
                    bool finite = true;
                    auto add = [&](double dy, double lo, double hi) {
                        if (dy > tol) {
                            if (hi == kInf) finite = false;
                            else support += hi * dy;
                        } else if (dy < -tol) {
                            if (lo == -kInf) finite = false;
                            else support += lo * dy;
                        }
                    };
                    for (Index i = 0; i < mi; ++i) add(dyin(i), lin(i), uin(i));
                    for (Index j = 0; j < n; ++j) add(dyb(j), lb(j), ub(j));
                    if (finite && support < -tol) {
                        finish(admm_x(), unscale_y(yeq, s.Eeq), unscale_y(yin, s.Ein), unscale_y(yb, s.Eb),
                               QpStatus::Infeasible, iter, false);
                        return sol;
                    }
                }
            }
        }
        // Dual infeasibility (unbounded objective) certificate.
        {
            const Vector dx = s.D.cwiseProduct(x - x_prev);
            const double dx_norm = inf_norm(dx);
            if (dx_norm > 1e-12) {
                const double tol = set.eps_infeasible * dx_norm;
                if (inf_norm(s.P * dx) <= tol && q.dot(dx) + s.w.dot(dx.cwiseAbs()) < -tol) {
                    bool recession = true;
                    if (me > 0 && inf_norm(s.Aeq * dx) > tol) recession = false;
                    if (recession && mi > 0) {
                        const Vector adx = s.Ain * dx;
                        for (Index i = 0; i < mi && recession; ++i) {
                            if (uin(i) < kInf && adx(i) > tol) recession = false;
                            if (lin(i) > -kInf && adx(i) < -tol) recession = false;
                        }
                    }
                    for (Index j = 0; j < n && recession; ++j) {
                        if (ub(j) < kInf && dx(j) > tol) recession = false;
                        if (lb(j) > -kInf && dx(j) < -tol) recession = false;
                    }
                    if (recession) {
                        finish(admm_x(), unscale_y(yeq, s.Eeq), unscale_y(yin, s.Ein), unscale_y(yb, s.Eb),
                               QpStatus::Unbounded, iter, false);
                        return sol;
                    }
                }
            }
        }

        if (set.adaptive_rho && iter % kRhoAdaptInterval == 0) {
            const double prim_n = prim / std::max(pscale, 1e-10);
            const double dual_n = dual / std::max(dscale, 1e-10);
            // Log-space step, halved whenever its direction flips so the
            // penalty cannot oscillate between two extremes.
            const double step = 0.5 * std::log(std::max(prim_n, 1e-30) / std::max(dual_n, 1e-20));
            const int direction = step > 0 ? 1 : -1;
            if (rho_direction != 0 && direction != rho_direction) rho_damping *= 0.5;
            const double rho_new = std::clamp(rho * std::exp(rho_damping * step), kRhoMin, kRhoMax);
            if (rho_new > 5.0 * rho || rho_new < 0.2 * rho) {
                rho_direction = direction;
                // Keep the scaled duals, rescale the penalty.
                rho = rho_new;
                rho_vectors(rho, rho_in, rho_b);
                rho_eq = kRhoEqualityFactor * rho;
                factor = s.factorize(rho_in, rho_b, rho_eq);
            }
        }
    }

    if (try_polish(set.max_iter)) return sol;
    return finish(admm_x(), unscale_y(yeq, s.Eeq), unscale_y(yin, s.Ein), unscale_y(yb, s.Eb),
                  QpStatus::MaxIterations, set.max_iter, false);
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings)
{
    const QpProblem p = problem.normalized();
    p.validate();
    QpSolver solver(p.P, p.Aeq, p.Ain, settings, p.l1);
    return solver.solve(p.q, p.beq, p.lin, p.uin, p.lb, p.ub, p.constant);
}

// ---------------------------------------------------------------------------

Vector OneNormEmbedding::recover(const Vector& x) const
{
    Vector out = x.head(original_variables);
    for (Index i = first; i < first + count; ++i) out(i) = x(positive_index(i)) - x(negative_index(i));
    return out;
}

Vector OneNormEmbedding::lift_cost(const Vector& q) const
{
    Vector out(original_variables + count);
    out.head(original_variables) = q;
    out.segment(first, count) += weights;
    out.tail(count) = weights - q.segment(first, count);
    return out;
}

OneNormEmbedding embed_one_norm(const QpProblem& problem, const Vector& weights, Index first, Index count)
{
    const QpProblem p = problem.normalized();
    const Index n = p.num_variables();
    if (first < 0 || count < 0 || first + count > n) throw DimensionError("embed_one_norm: range out of bounds");
    if (weights.size() != count) throw DimensionError("embed_one_norm: one weight per penalized variable");
    if ((weights.array() < 0.0).any()) throw Error("embed_one_norm: weights must be nonnegative");

    OneNormEmbedding e;
    e.original_variables = n;
    e.first = first;
    e.count = count;
    e.weights = weights;

    // x = M xbig with M = [I_n, -S], S selecting the penalized range.
    Matrix M = Matrix::Zero(n, n + count);
    M.leftCols(n).setIdentity();
    for (Index k = 0; k < count; ++k) M(first + k, n + k) = -1.0;

    QpProblem& out = e.problem;
    out.P = M.transpose() * p.P * M;
    out.P = 0.5 * (out.P + out.P.transpose());
    out.q = M.transpose() * p.q;
    out.q.segment(first, count) += weights;
    out.q.tail(count) += weights;
    out.constant = p.constant;
    out.Aeq = p.Aeq * M;
    out.beq = p.beq;

    // Finite bounds on the penalized variables move to general rows.
    std::vector<Index> bounded;
    for (Index k = 0; k < count; ++k) {
        const Index i = first + k;
        if (p.lb(i) > -kInf || p.ub(i) < kInf) bounded.push_back(i);
    }
    const Index extra = static_cast<Index>(bounded.size());
    out.Ain.resize(p.Ain.rows() + extra, n + count);
    out.lin.resize(p.Ain.rows() + extra);
    out.uin.resize(p.Ain.rows() + extra);
    out.Ain.topRows(p.Ain.rows()) = p.Ain * M;
    out.lin.head(p.Ain.rows()) = p.lin;
    out.uin.head(p.Ain.rows()) = p.uin;
    for (Index r = 0; r < extra; ++r) {
        const Index i = bounded[static_cast<std::size_t>(r)];
        const Index row = p.Ain.rows() + r;
        out.Ain.row(row).setZero();
        out.Ain(row, e.positive_index(i)) = 1.0;
        out.Ain(row, e.negative_index(i)) = -1.0;
        out.lin(row) = p.lb(i);
        out.uin(row) = p.ub(i);
    }

    out.lb.resize(n + count);
    out.ub.resize(n + count);
    out.lb.head(n) = p.lb;
    out.ub.head(n) = p.ub;
    out.lb.segment(first, count).setZero();
    out.ub.segment(first, count).setConstant(kInf);
    out.lb.tail(count).setZero();
    out.ub.tail(count).setConstant(kInf);
    return e;
}

void write_qp_problem(std::ostream& os, const QpProblem& problem)
{
    const QpProblem p = problem.normalized();
    auto vec = [&](const char* name, const Vector& v) {
        os << name << ' ' << v.size();
        for (Index i = 0; i < v.size(); ++i) os << ' ' << format_double(v(i));
        os << '\n';
    };
    auto mat = [&](const char* name, const Matrix& M) {
        os << name << ' ' << M.rows() << ' ' << M.cols() << '\n';
        for (Index i = 0; i < M.rows(); ++i) {
            for (Index j = 0; j < M.cols(); ++j) os << (j ? " " : "") << format_double(M(i, j));
            os << '\n';
        }
    };
    os << "qp_problem v1\n";
    mat("P", p.P);
    vec("q", p.q);
    os << "constant " << format_double(p.constant) << '\n';
    mat("Aeq", p.Aeq);
    vec("beq", p.beq);
    mat("Ain", p.Ain);
    vec("lin", p.lin);
    vec("uin", p.uin);
    vec("lb", p.lb);
    vec("ub", p.ub);
    vec("l1", p.l1);
}

} // namespace deepc
