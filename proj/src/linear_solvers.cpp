#include "urans/linear_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace urans {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * b[n];
    return s;
}

double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

struct Residual {
    double l2;
    double inf;
};

bool is_converged(const Residual& r, double b_norm, const SolveControl& control) {
    if (control.rel_tol > 0.0 && r.l2 <= control.rel_tol * b_norm) return true;
    if (control.abs_tol_inf > 0.0 && r.inf <= control.abs_tol_inf) return true;
    return false;
}

Residual true_residual(const LinearOperator& apply, std::span<const double> b, std::span<const double> x,
                       std::vector<double>& r) {
    apply(x, r);
    for (std::size_t n = 0; n < r.size(); ++n) r[n] = b[n] - r[n];
    return {std::sqrt(dot(r, r)), norm_inf(r)};
}

[[noreturn]] void fail(const SolveControl& control, const SolveStats& stats) {
    std::ostringstream msg;
    msg << control.label << " did not converge: " << stats.iterations << " iterations, |r|_2=" << stats.residual_l2
        << ", |r|_inf=" << stats.residual_inf;
    throw SolverError(msg.str(), stats);
}

}  // namespace

SolveStats pcg(const LinearOperator& apply, const LinearOperator& precondition, std::span<const double> b,
               std::span<double> x, const SolveControl& control) {
    const std::size_t n = b.size();
    const double b_norm = std::sqrt(dot(b, b));
    std::vector<double> r(n), z(n), p(n), q(n);
    SolveStats stats;

    Residual res = true_residual(apply, b, x, r);
    if (b_norm == 0.0 && res.inf == 0.0) {
        stats.converged = true;
        return stats;
    }
    precondition(r, z);
    p = z;
    double rz = dot(r, z);
    for (int it = 0; it < control.max_iter; ++it) {
        stats.iterations = it;
        if (is_converged(res, b_norm, control)) {
            // confirm against the true residual before accepting
            res = true_residual(apply, b, x, r);
            if (is_converged(res, b_norm, control)) {
                stats.residual_l2 = res.l2;
                stats.residual_inf = res.inf;
                stats.converged = true;
                return stats;
            }
            precondition(r, z);
            p = z;
            rz = dot(r, z);
        }
        apply(p, q);
        const double pq = dot(p, q);
        if (pq <= 0.0 || !std::isfinite(pq)) break;
        const double alpha = rz / pq;
        for (std::size_t k = 0; k < n; ++k) {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        res = {std::sqrt(dot(r, r)), norm_inf(r)};
        precondition(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    }
    res = true_residual(apply, b, x, r);
    stats.residual_l2 = res.l2;
    stats.residual_inf = res.inf;
    stats.converged = is_converged(res, b_norm, control);
    if (!stats.converged) fail(control, stats);
    return stats;
}

SolveStats bicgstab(const LinearOperator& apply, const LinearOperator& precondition, std::span<const double> b,
                    std::span<double> x, const SolveControl& control) {
    const std::size_t n = b.size();
    const double b_norm = std::sqrt(dot(b, b));
    std::vector<double> r(n), r0(n), p(n, 0.0), v(n, 0.0), s(n), t(n), phat(n), shat(n);
    SolveStats stats;

    Residual res = true_residual(apply, b, x, r);
    if (b_norm == 0.0 && res.inf == 0.0) {
        stats.converged = true;
        return stats;
    }
    r0 = r;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    for (int it = 0; it < control.max_iter; ++it) {
        stats.iterations = it;
        if (is_converged(res, b_norm, control)) {
            res = true_residual(apply, b, x, r);
            if (is_converged(res, b_norm, control)) {
                stats.residual_l2 = res.l2;
                stats.residual_inf = res.inf;
                stats.converged = true;
                return stats;
            }
            r0 = r;
            rho = alpha = omega = 1.0;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
        }
        const double rho_new = dot(r0, r);
        if (rho_new == 0.0 || !std::isfinite(rho_new)) break;
        const double beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * (p[k] - omega * v[k]);
        precondition(p, phat);
        apply(phat, v);
        const double r0v = dot(r0, v);
        if (r0v == 0.0 || !std::isfinite(r0v)) break;
        alpha = rho / r0v;
        for (std::size_t k = 0; k < n; ++k) s[k] = r[k] - alpha * v[k];
        const Residual s_res{std::sqrt(dot(s, s)), norm_inf(s)};
        if (is_converged(s_res, b_norm, control)) {
            for (std::size_t k = 0; k < n; ++k) x[k] += alpha * phat[k];
            r = s;
            res = s_res;
            continue;
        }
        precondition(s, shat);
        apply(shat, t);
        const double tt = dot(t, t);
        omega = tt > 0.0 ? dot(t, s) / tt : 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            x[k] += alpha * phat[k] + omega * shat[k];
            r[k] = s[k] - omega * t[k];
        }
        res = {std::sqrt(dot(r, r)), norm_inf(r)};
        if (omega == 0.0) break;
    }
    res = true_residual(apply, b, x, r);
    stats.residual_l2 = res.l2;
    stats.residual_inf = res.inf;
    stats.converged = is_converged(res, b_norm, control);
    if (!stats.converged) fail(control, stats);
    return stats;
}

LinearOperator jacobi_preconditioner(std::vector<double> diagonal) {
    return [d = std::move(diagonal)](std::span<const double> r, std::span<double> z) {
        for (std::size_t n = 0; n < r.size(); ++n) z[n] = r[n] / d[n];
    };
}

void remove_mean(std::span<double> x) {
    if (x.empty()) return;
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    for (double& value : x) value -= mean;
}

// ---------------------------------------------------------------------------
// Multigrid
// ---------------------------------------------------------------------------

struct PoissonMultigrid::Level {
    int nx;
    int ny;
    double cx;  // 1/dx^2
    double cy;  // 1/dy^2
    bool px;
    bool py;
    mutable std::vector<double> residual;
    mutable std::vector<double> coarse_rhs;
    mutable std::vector<double> coarse_x;

    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }

    double neighbour_sum(std::span<const double> x, int i, int j, double& diag) const {
        double s = 0.0;
        diag = 0.0;
        if (px || i > 0) {
            s += cx * x[idx((i - 1 + nx) % nx, j)];
            diag += cx;
        }
        if (px || i < nx - 1) {
            s += cx * x[idx((i + 1) % nx, j)];
            diag += cx;
        }
        if (py || j > 0) {
            s += cy * x[idx(i, (j - 1 + ny) % ny)];
            diag += cy;
        }
        if (py || j < ny - 1) {
            s += cy * x[idx(i, (j + 1) % ny)];
            diag += cy;
        }
        return s;
    }

    void apply(std::span<const double> x, std::span<double> y) const {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                double diag = 0.0;
                const double s = neighbour_sum(x, i, j, diag);
                y[idx(i, j)] = diag * x[idx(i, j)] - s;
            }
    }

    void sweep(std::span<const double> b, std::span<double> x, int color) const {
        for (int j = 0; j < ny; ++j)
            for (int i = (j + color) % 2; i < nx; i += 2) {
                double diag = 0.0;
                const double s = neighbour_sum(x, i, j, diag);
                x[idx(i, j)] = (b[idx(i, j)] + s) / diag;
            }
    }
};

PoissonMultigrid::PoissonMultigrid(int nx, int ny, double dx, double dy, bool periodic_x, bool periodic_y) {
    int lx = nx, ly = ny;
    double hx = dx, hy = dy;
    while (true) {
        auto level = std::make_unique<Level>();
        level->nx = lx;
        level->ny = ly;
        level->cx = 1.0 / (hx * hx);
        level->cy = 1.0 / (hy * hy);
        level->px = periodic_x;
        level->py = periodic_y;
        level->residual.resize(static_cast<std::size_t>(lx) * ly);
        levels_.push_back(std::move(level));
        if (lx % 2 != 0 || ly % 2 != 0 || lx / 2 < 4 || ly / 2 < 4) break;
        lx /= 2;
        ly /= 2;
        hx *= 2.0;
        hy *= 2.0;
    }
    for (std::size_t l = 0; l + 1 < levels_.size(); ++l) {
        const auto& c = *levels_[l + 1];
        levels_[l]->coarse_rhs.resize(static_cast<std::size_t>(c.nx) * c.ny);
        levels_[l]->coarse_x.resize(static_cast<std::size_t>(c.nx) * c.ny);
    }
}

PoissonMultigrid::~PoissonMultigrid() = default;
PoissonMultigrid::PoissonMultigrid(PoissonMultigrid&&) noexcept = default;
PoissonMultigrid& PoissonMultigrid::operator=(PoissonMultigrid&&) noexcept = default;

int PoissonMultigrid::levels() const { return static_cast<int>(levels_.size()); }

void PoissonMultigrid::apply(std::span<const double> x, std::span<double> y) const { levels_.front()->apply(x, y); }

namespace {

// Bilinear cell-centered interpolation stencil: fine cell (2I+a, 2J+b) takes
// 9/16, 3/16, 3/16, 1/16 from its coarse parent and the neighbours on its side.
template <typename Visit>
void for_each_prolongation_weight(int cnx, int cny, bool px, bool py, Visit&& visit) {
    const int fnx = 2 * cnx;
    for (int J = 0; J < cny; ++J)
        for (int I = 0; I < cnx; ++I)
            for (int b = 0; b < 2; ++b)
                for (int a = 0; a < 2; ++a) {
                    int Ix = I + (a == 0 ? -1 : 1);
                    int Jy = J + (b == 0 ? -1 : 1);
                    Ix = px ? (Ix + cnx) % cnx : std::clamp(Ix, 0, cnx - 1);
                    Jy = py ? (Jy + cny) % cny : std::clamp(Jy, 0, cny - 1);
                    const std::size_t fine = static_cast<std::size_t>(2 * J + b) * fnx + (2 * I + a);
                    visit(fine, static_cast<std::size_t>(J) * cnx + I, 9.0 / 16.0);
                    visit(fine, static_cast<std::size_t>(J) * cnx + Ix, 3.0 / 16.0);
                    visit(fine, static_cast<std::size_t>(Jy) * cnx + I, 3.0 / 16.0);
                    visit(fine, static_cast<std::size_t>(Jy) * cnx + Ix, 1.0 / 16.0);
                }
}

}  // namespace

void PoissonMultigrid::vcycle(std::size_t l, std::span<const double> b, std::span<double> x) const {
    const Level& lv = *levels_[l];
    std::fill(x.begin(), x.end(), 0.0);
    if (l + 1 == levels_.size()) {
        for (int s = 0; s < 40; ++s) {
            lv.sweep(b, x, 0);
            lv.sweep(b, x, 1);
            lv.sweep(b, x, 1);
            lv.sweep(b, x, 0);
        }
        return;
    }
    for (int s = 0; s < 2; ++s) {
        lv.sweep(b, x, 0);
        lv.sweep(b, x, 1);
    }
    lv.apply(x, lv.residual);
    for (std::size_t n = 0; n < lv.residual.size(); ++n) lv.residual[n] = b[n] - lv.residual[n];

    const Level& cl = *levels_[l + 1];
    std::fill(lv.coarse_rhs.begin(), lv.coarse_rhs.end(), 0.0);
    for_each_prolongation_weight(cl.nx, cl.ny, cl.px, cl.py, [&](std::size_t f, std::size_t c, double w) {
        lv.coarse_rhs[c] += 0.25 * w * lv.residual[f];
    });
    vcycle(l + 1, lv.coarse_rhs, lv.coarse_x);
    for_each_prolongation_weight(cl.nx, cl.ny, cl.px, cl.py, [&](std::size_t f, std::size_t c, double w) {
        x[f] += w * lv.coarse_x[c];
    });
    for (int s = 0; s < 2; ++s) {
        lv.sweep(b, x, 1);
        lv.sweep(b, x, 0);
    }
}

void PoissonMultigrid::precondition(std::span<const double> r, std::span<double> z) const {
    vcycle(0, r, z);
    remove_mean(z);
}

}  // namespace urans
