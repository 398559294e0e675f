#include "hfde/solve.hpp"

#include <algorithm>
#include <cmath>

namespace hfde {

Mat2 normalization_Dn(std::size_t n, double delta) {
    const double nn = static_cast<double>(n);
    return Mat2::diag(1.0 / std::sqrt(nn * delta), 1.0 / (delta * std::sqrt(nn)));
}

SolveSettings SolveSettings::defaults(const ParamPoint& start) {
    SolveSettings s;
    s.multistart = {start,
                    {start.alpha * 1.2, start.beta * 1.2},
                    {start.alpha * 1.2, start.beta * 0.8},
                    {start.alpha * 0.8, start.beta * 1.2},
                    {start.alpha * 0.8, start.beta * 0.8}};
    return s;
}

namespace {

struct Attempt {
    ParamPoint theta;
    double g_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::string note;
};

// residual of the normalized system; scalar modes zero out the frozen
// coordinate so the Newton step stays well posed
Vec2 residual(const EstimatingFunction& ef, const SamplePath& path, const Mat2& Dn,
              const ParamPoint& th, const SolveSettings& s) {
    Vec2 g = eval_G(ef, path, th);
    g = Dn * g;
    if (s.fix_beta) g.x1 = 0.0;
    if (s.fix_alpha) g.x0 = 0.0;
    return g;
}

Attempt newton_from(const EstimatingFunction& ef, const SamplePath& path, const Mat2& Dn,
                    ParamPoint th, const SolveSettings& s) {
    Attempt a;
    a.theta = th;
    const bool scalar_alpha = s.fix_beta.has_value();
    const bool scalar_beta = s.fix_alpha.has_value();
    Vec2 g = residual(ef, path, Dn, th, s);
    a.g_norm = g.inf_norm();

    for (int it = 0; it < s.max_iter; ++it) {
        if (a.g_norm <= s.tol_g) {
            a.converged = true;
            return a;
        }
        Mat2 J = jac_G(ef, path, th);
        J = Dn * J;
        Vec2 step;
        if (scalar_alpha) {
            if (std::abs(J(0, 0)) < 1e-300) {
                a.note = "SingularJacobian";
                return a;
            }
            step = Vec2{-g.x0 / J(0, 0), 0.0};
        } else if (scalar_beta) {
            if (std::abs(J(1, 1)) < 1e-300) {
                a.note = "SingularJacobian";
                return a;
            }
            step = Vec2{0.0, -g.x1 / J(1, 1)};
        } else {
            const double scale = J.inf_norm();
            if (!(std::abs(J.det()) > 1e-14 * scale * scale)) {
                a.note = "SingularJacobian";
                return a;
            }
            step = J.solve(Vec2{-g.x0, -g.x1});
        }

        // backtracking on the squared norm, with projection into the bounds
        double lam = s.damping;
        bool moved = false;
        const double base = a.g_norm;
        for (int bt = 0; bt < 30; ++bt) {
            ParamPoint cand{th.alpha + lam * step.x0, th.beta + lam * step.x1};
            cand = s.bounds.project(cand);
            const Vec2 gc = residual(ef, path, Dn, cand, s);
            const double nc = gc.inf_norm();
            if (std::isfinite(nc) && nc < base) {
                const double dstep = std::max(std::abs(cand.alpha - th.alpha),
                                              std::abs(cand.beta - th.beta));
                th = cand;
                g = gc;
                a.g_norm = nc;
                a.theta = th;
                a.iterations = it + 1;
                moved = true;
                if (dstep <= s.tol_step) it = s.max_iter;  // stagnated at the boundary
                break;
            }
            lam *= 0.5;
        }
        if (!moved) {
            a.note = a.note.empty() ? "LineSearchStalled" : a.note;
            break;
        }
    }
    a.converged = a.g_norm <= s.tol_g;
    return a;
}

// Nelder-Mead on the squared residual norm; used only when Newton fails
Attempt nelder_mead_polish(const EstimatingFunction& ef, const SamplePath& path,
                           const Mat2& Dn, ParamPoint start, const SolveSettings& s) {
    auto fval = [&](const ParamPoint& p) {
        const Vec2 g = residual(ef, path, Dn, s.bounds.project(p), s);
        return g.x0 * g.x0 + g.x1 * g.x1;
    };
    struct Node {
        ParamPoint p;
        double f;
    };
    std::vector<Node> simp;
    const double da = 0.1 * (1.0 + std::abs(start.alpha));
    const double db = 0.1 * (1.0 + std::abs(start.beta));
    simp.push_back({start, fval(start)});
    simp.push_back({{start.alpha + da, start.beta}, 0.0});
    simp.push_back({{start.alpha, start.beta + db}, 0.0});
    simp[1].f = fval(simp[1].p);
    simp[2].f = fval(simp[2].p);

    for (int it = 0; it < 200; ++it) {
        std::sort(simp.begin(), simp.end(), [](const Node& a, const Node& b) { return a.f < b.f; });
        if (simp[0].f < s.tol_g * s.tol_g) break;
        const ParamPoint c{0.5 * (simp[0].p.alpha + simp[1].p.alpha),
                           0.5 * (simp[0].p.beta + simp[1].p.beta)};
        const ParamPoint refl{2 * c.alpha - simp[2].p.alpha, 2 * c.beta - simp[2].p.beta};
        const double fr = fval(refl);
        if (fr < simp[0].f) {
            const ParamPoint exp_{3 * c.alpha - 2 * simp[2].p.alpha,
                                  3 * c.beta - 2 * simp[2].p.beta};
            const double fe = fval(exp_);
            simp[2] = fe < fr ? Node{exp_, fe} : Node{refl, fr};
        } else if (fr < simp[1].f) {
            simp[2] = {refl, fr};
        } else {
            const ParamPoint con{0.5 * (c.alpha + simp[2].p.alpha),
                                 0.5 * (c.beta + simp[2].p.beta)};
            const double fc = fval(con);
            if (fc < simp[2].f) {
                simp[2] = {con, fc};
            } else {
                for (int j = 1; j < 3; ++j) {
                    simp[j].p = {0.5 * (simp[0].p.alpha + simp[j].p.alpha),
                                 0.5 * (simp[0].p.beta + simp[j].p.beta)};
                    simp[j].f = fval(simp[j].p);
                }
            }
        }
    }
    std::sort(simp.begin(), simp.end(), [](const Node& a, const Node& b) { return a.f < b.f; });
    // polish with Newton from the simplex best
    return newton_from(ef, path, Dn, s.bounds.project(simp[0].p), s);
}

bool better(const Attempt& a, const Attempt& b) {
    if (a.converged != b.converged) return a.converged;
    if (a.g_norm != b.g_norm) return a.g_norm < b.g_norm;
    if (a.theta.alpha != b.theta.alpha) return a.theta.alpha < b.theta.alpha;
    return a.theta.beta < b.theta.beta;
}

}  // namespace

Estimate solve_estimating_equation(const EstimatingFunction& ef, const SamplePath& path,
                                   const SolveSettings& settings) {
    if (path.values.size() < 2)
        throw std::invalid_argument("solve_estimating_equation: path too short");
    if (settings.multistart.empty())
        throw std::invalid_argument("solve_estimating_equation: no starts configured");

    const Mat2 Dn = normalization_Dn(path.n_increments(), path.delta);

    bool any_inside = false;
    for (const auto& st : settings.multistart) any_inside |= settings.bounds.contains(st);
    if (!any_inside)
        throw BoundsEscapeError("solve_estimating_equation: no start inside the bounds");

    Attempt best;
    ParamPoint best_start{};
    std::string notes;
    for (const auto& st : settings.multistart) {
        ParamPoint start = settings.bounds.project(st);
        if (settings.fix_alpha) start.alpha = *settings.fix_alpha;
        if (settings.fix_beta) start.beta = *settings.fix_beta;
        Attempt a = newton_from(ef, path, Dn, start, settings);
        if (!a.converged && !settings.fix_alpha && !settings.fix_beta)
            a = nelder_mead_polish(ef, path, Dn, start, settings);
        if (!a.note.empty())
            notes += (notes.empty() ? "" : "; ") + a.note + " at start (" +
                     std::to_string(start.alpha) + "," + std::to_string(start.beta) + ")";
        if (better(a, best)) {
            best = a;
            best_start = start;
        }
    }

    // a root only counts with an invertible (normalized) Jacobian there; a
    // degenerate coordinate makes every point solve its equation
    if (best.converged && !settings.fix_alpha && !settings.fix_beta) {
        const Mat2 J = Dn * jac_G(ef, path, best.theta);
        const double scale = J.inf_norm();
        if (!(std::abs(J.det()) > 1e-12 * scale * scale)) {
            best.converged = false;
            notes += (notes.empty() ? "" : "; ") + std::string("SingularJacobian at solution");
        }
    }

    Estimate est;
    est.theta_hat = best.theta;
    est.g_norm = best.g_norm;
    est.iterations = best.iterations;
    est.converged = best.converged;
    est.start_used = best_start;
    est.diagnostic = notes;
    return est;
}

}  // namespace hfde
