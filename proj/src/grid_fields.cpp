#include "urans/grid_fields.hpp"

#include <algorithm>
#include <cmath>

namespace urans {

bool Geometry::inside_solid(double x, double y) const {
    for (const auto& c : obstacles) {
        if (std::hypot(x - c.cx, y - c.cy) <= c.r) return true;
    }
    if (has_outer && std::hypot(x - outer.cx, y - outer.cy) >= outer.r) return true;
    return false;
}

double Geometry::wall_distance(double x, double y) const {
    double d = std::numeric_limits<double>::infinity();
    if (bc_x == BoundaryKind::NoSlip) d = std::min({d, x - box.x0, box.x0 + box.lx - x});
    if (bc_y == BoundaryKind::NoSlip) d = std::min({d, y - box.y0, box.y0 + box.ly - y});
    for (const auto& c : obstacles) d = std::min(d, std::hypot(x - c.cx, y - c.cy) - c.r);
    if (has_outer) d = std::min(d, outer.r - std::hypot(x - outer.cx, y - outer.cy));
    return std::max(d, 0.0);
}

Grid::Grid(const Geometry& geometry, int nx, int ny)
    : geometry_(geometry), nx_(nx), ny_(ny), dx_(0.0), dy_(0.0) {
    if (nx < 4 || ny < 4) throw ConfigError("grid needs at least 4 cells per direction");
    if (!(geometry.box.lx > 0.0) || !(geometry.box.ly > 0.0)) throw ConfigError("domain box must have positive extent");
    dx_ = geometry.box.lx / nx;
    dy_ = geometry.box.ly / ny;

    const auto& b = geometry.box;
    const double h = std::max(dx_, dy_);
    for (const auto& c : geometry.obstacles) {
        if (c.cx - c.r < b.x0 || c.cx + c.r > b.x0 + b.lx || c.cy - c.r < b.y0 || c.cy + c.r > b.y0 + b.ly)
            throw ConfigError("obstacle circle must lie inside the domain box");
        if (2.0 * c.r < 2.0 * h)
            throw ConfigError("resolution too coarse to resolve obstacle of radius " + std::to_string(c.r));
    }

    solid_.assign(static_cast<std::size_t>(nx) * ny, 0);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) solid_[index(i, j)] = geometry.inside_solid(xc(i), yc(j)) ? 1 : 0;
    fluid_count_ = static_cast<std::size_t>(std::count(solid_.begin(), solid_.end(), std::uint8_t{0}));
    if (fluid_count_ == 0) throw ConfigError("geometry leaves no fluid cells");

    chi_u_ = Array2D(nx, ny);
    chi_v_ = Array2D(nx, ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const bool here = solid(i, j);
            const bool left = (i > 0 || periodic_x()) ? solid(wrap_x(i - 1), j) : here;
            const bool below = (j > 0 || periodic_y()) ? solid(i, wrap_y(j - 1)) : here;
            chi_u_(i, j) = (here || left) ? 1.0 : 0.0;
            chi_v_(i, j) = (here || below) ? 1.0 : 0.0;
        }
    }

    has_walls_ = !periodic_x() || !periodic_y() || !geometry.obstacles.empty() || geometry.has_outer;
    wall_distance_ = Array2D(nx, ny, std::numeric_limits<double>::infinity());
    if (has_walls_) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                if (solid(i, j)) {
                    wall_distance_(i, j) = 0.0;
                    continue;
                }
                bool near_wall = (!periodic_x() && (i == 0 || i == nx - 1)) ||
                                 (!periodic_y() && (j == 0 || j == ny - 1));
                const int di[4] = {1, -1, 0, 0};
                const int dj[4] = {0, 0, 1, -1};
                for (int n = 0; n < 4 && !near_wall; ++n) {
                    const int ii = i + di[n];
                    const int jj = j + dj[n];
                    if (!cell_in_domain(ii, jj)) continue;
                    near_wall = solid(wrap_x(ii), wrap_y(jj));
                }
                wall_distance_(i, j) = near_wall ? 0.0 : geometry.wall_distance(xc(i), yc(j));
            }
        }
    }
}

double Grid::domain_length() const { return std::min(geometry_.box.lx, geometry_.box.ly); }

bool Grid::cell_in_domain(int i, int j) const {
    if (!periodic_x() && (i < 0 || i >= nx_)) return false;
    if (!periodic_y() && (j < 0 || j >= ny_)) return false;
    return true;
}

double Grid::u_at(const Array2D& u, int i, int j) const {
    if (periodic_y()) {
        j = wrap_y(j);
    } else if (j < 0) {
        return -u_at(u, i, 0);
    } else if (j >= ny_) {
        return -u_at(u, i, ny_ - 1);
    }
    if (periodic_x()) return u(wrap_x(i), j);
    if (i <= 0 || i >= nx_) return 0.0;
    return u(i, j);
}

double Grid::v_at(const Array2D& v, int i, int j) const {
    if (periodic_x()) {
        i = wrap_x(i);
    } else if (i < 0) {
        return -v_at(v, 0, j);
    } else if (i >= nx_) {
        return -v_at(v, nx_ - 1, j);
    }
    if (periodic_y()) return v(i, wrap_y(j));
    if (j <= 0 || j >= ny_) return 0.0;
    return v(i, j);
}

Grid make_grid(const Box& box, int nx, int ny, BoundaryKind bc_x, BoundaryKind bc_y,
               const std::vector<Circle>& obstacles, const Circle* outer) {
    Geometry g;
    g.box = box;
    g.bc_x = bc_x;
    g.bc_y = bc_y;
    g.obstacles = obstacles;
    if (outer != nullptr) {
        g.has_outer = true;
        g.outer = *outer;
    }
    return Grid(g, nx, ny);
}

Array2D node_shear(const VectorField& vel, const Grid& grid) {
    const int nx = grid.nx();
    const int ny = grid.ny();
    const double dx = grid.dx();
    const double dy = grid.dy();
    Array2D s(nx + 1, ny + 1);
    for (int J = 0; J < grid.node_count_y(); ++J) {
        for (int I = 0; I < grid.node_count_x(); ++I) {
            const double dudy = (grid.u_at(vel.u, I, J) - grid.u_at(vel.u, I, J - 1)) / dy;
            const double dvdx = (grid.v_at(vel.v, I, J) - grid.v_at(vel.v, I - 1, J)) / dx;
            s(I, J) = 0.5 * (dudy + dvdx);
        }
    }
    // duplicate periodic seam so corner lookups need no wrapping
    if (grid.periodic_x())
        for (int J = 0; J <= ny; ++J) s(nx, J) = s(0, J);
    if (grid.periodic_y())
        for (int I = 0; I <= nx; ++I) s(I, ny) = s(I, 0);
    return s;
}

ScalarField deformation_tensor_magsq(const VectorField& vel, const Grid& grid) {
    const int nx = grid.nx();
    const int ny = grid.ny();
    const Array2D s12 = node_shear(vel, grid);
    ScalarField out(nx, ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double s11 = (grid.u_at(vel.u, i + 1, j) - grid.u_at(vel.u, i, j)) / grid.dx();
            const double s22 = (grid.v_at(vel.v, i, j + 1) - grid.v_at(vel.v, i, j)) / grid.dy();
            const double corners = s12(i, j) * s12(i, j) + s12(i + 1, j) * s12(i + 1, j) +
                                   s12(i, j + 1) * s12(i, j + 1) + s12(i + 1, j + 1) * s12(i + 1, j + 1);
            out(i, j) = s11 * s11 + s22 * s22 + 0.5 * corners;
        }
    }
    return out;
}

ScalarField divergence(const VectorField& vel, const Grid& grid) {
    ScalarField out(grid.nx(), grid.ny());
    for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i)
            out(i, j) = (grid.u_at(vel.u, i + 1, j) - grid.u_at(vel.u, i, j)) / grid.dx() +
                        (grid.v_at(vel.v, i, j + 1) - grid.v_at(vel.v, i, j)) / grid.dy();
    return out;
}

VectorField gradient(const ScalarField& p, const Grid& grid) {
    VectorField g(grid.nx(), grid.ny());
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            if (!grid.fixed_u(i, j)) g.u(i, j) = (p(i, j) - p(grid.wrap_x(i - 1), j)) / grid.dx();
            if (!grid.fixed_v(i, j)) g.v(i, j) = (p(i, j) - p(i, grid.wrap_y(j - 1))) / grid.dy();
        }
    }
    return g;
}

namespace {

// Upwind flux through the left x-face of cell (i,j); zero on walls and blocked faces.
double upwind_flux_x(const VectorField& vel, const ScalarField& k, const Grid& grid, int i, int j) {
    if (!grid.periodic_x() && (i == 0 || i == grid.nx())) return 0.0;
    const int ir = grid.wrap_x(i);
    if (grid.chi_u(ir, j) != 0.0) return 0.0;
    const double u = vel.u(ir, j);
    return u > 0.0 ? u * k(grid.wrap_x(i - 1), j) : u * k(ir, j);
}

double upwind_flux_y(const VectorField& vel, const ScalarField& k, const Grid& grid, int i, int j) {
    if (!grid.periodic_y() && (j == 0 || j == grid.ny())) return 0.0;
    const int jr = grid.wrap_y(j);
    if (grid.chi_v(i, jr) != 0.0) return 0.0;
    const double v = vel.v(i, jr);
    return v > 0.0 ? v * k(i, grid.wrap_y(j - 1)) : v * k(i, jr);
}

}  // namespace

ScalarField advect(const VectorField& vel, const ScalarField& k, const Grid& grid) {
    ScalarField out(grid.nx(), grid.ny());
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            if (grid.solid(i, j)) continue;
            const double fx = upwind_flux_x(vel, k, grid, i + 1, j) - upwind_flux_x(vel, k, grid, i, j);
            const double fy = upwind_flux_y(vel, k, grid, i, j + 1) - upwind_flux_y(vel, k, grid, i, j);
            out(i, j) = -(fx / grid.dx() + fy / grid.dy());
        }
    }
    return out;
}

double upwind_stable_dt(const VectorField& vel, const Grid& grid) {
    const ScalarField ones(grid.nx(), grid.ny(), 1.0);
    double worst = 0.0;
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            if (grid.solid(i, j)) continue;
            // outgoing rate = sum of positive outward face speeds
            const double out_x = std::max(upwind_flux_x(vel, ones, grid, i + 1, j), 0.0) +
                                 std::max(-upwind_flux_x(vel, ones, grid, i, j), 0.0);
            const double out_y = std::max(upwind_flux_y(vel, ones, grid, i, j + 1), 0.0) +
                                 std::max(-upwind_flux_y(vel, ones, grid, i, j), 0.0);
            worst = std::max(worst, out_x / grid.dx() + out_y / grid.dy());
        }
    }
    return worst > 0.0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
}

void apply_convection(const VectorField& w, const VectorField& x, VectorField& out, const Grid& grid) {
    const int nx = grid.nx();
    const int ny = grid.ny();
    const double dx = grid.dx();
    const double dy = grid.dy();
    if (out.u.nx() != nx || out.u.ny() != ny) out = VectorField(nx, ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            if (grid.fixed_u(i, j)) {
                out.u(i, j) = 0.0;
            } else {
                const double xc = x.u(i, j);
                const double fe = 0.5 * (w.u(i, j) + grid.u_at(w.u, i + 1, j));
                const double fw = 0.5 * (grid.u_at(w.u, i - 1, j) + w.u(i, j));
                const double fn = 0.5 * (grid.v_at(w.v, i - 1, j + 1) + grid.v_at(w.v, i, j + 1));
                const double fs = 0.5 * (grid.v_at(w.v, i - 1, j) + grid.v_at(w.v, i, j));
                const double xe = 0.5 * (xc + grid.u_at(x.u, i + 1, j));
                const double xw = 0.5 * (grid.u_at(x.u, i - 1, j) + xc);
                const double xn = 0.5 * (xc + grid.u_at(x.u, i, j + 1));
                const double xs = 0.5 * (grid.u_at(x.u, i, j - 1) + xc);
                const double div = (fe - fw) / dx + (fn - fs) / dy;
                out.u(i, j) = (fe * xe - fw * xw) / dx + (fn * xn - fs * xs) / dy - 0.5 * div * xc;
            }
            if (grid.fixed_v(i, j)) {
                out.v(i, j) = 0.0;
            } else {
                const double xc = x.v(i, j);
                const double fn = 0.5 * (w.v(i, j) + grid.v_at(w.v, i, j + 1));
                const double fs = 0.5 * (grid.v_at(w.v, i, j - 1) + w.v(i, j));
                const double fe = 0.5 * (grid.u_at(w.u, i + 1, j - 1) + grid.u_at(w.u, i + 1, j));
                const double fw = 0.5 * (grid.u_at(w.u, i, j - 1) + grid.u_at(w.u, i, j));
                const double xn = 0.5 * (xc + grid.v_at(x.v, i, j + 1));
                const double xs = 0.5 * (grid.v_at(x.v, i, j - 1) + xc);
                const double xe = 0.5 * (xc + grid.v_at(x.v, i + 1, j));
                const double xw = 0.5 * (grid.v_at(x.v, i - 1, j) + xc);
                const double div = (fe - fw) / dx + (fn - fs) / dy;
                out.v(i, j) = (fe * xe - fw * xw) / dx + (fn * xn - fs * xs) / dy - 0.5 * div * xc;
            }
        }
    }
}

VectorField advect(const VectorField& vel, const VectorField& x, const Grid& grid) {
    VectorField out(grid.nx(), grid.ny());
    apply_convection(vel, x, out, grid);
    for (auto& value : out.u.raw()) value = -value;
    for (auto& value : out.v.raw()) value = -value;
    return out;
}

void cell_velocity(const VectorField& vel, const Grid& grid, Array2D& uc, Array2D& vc) {
    uc = Array2D(grid.nx(), grid.ny());
    vc = Array2D(grid.nx(), grid.ny());
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            uc(i, j) = 0.5 * (grid.u_at(vel.u, i, j) + grid.u_at(vel.u, i + 1, j));
            vc(i, j) = 0.5 * (grid.v_at(vel.v, i, j) + grid.v_at(vel.v, i, j + 1));
        }
    }
}

double dot_cells(const Array2D& a, const Array2D& b, const Grid& grid) {
    double s = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) s += a.raw()[n] * b.raw()[n];
    return s * grid.cell_area();
}

double dot_faces(const VectorField& a, const VectorField& b, const Grid& grid) {
    return dot_cells(a.u, b.u, grid) + dot_cells(a.v, b.v, grid);
}

double max_speed(const VectorField& vel) {
    double m = 0.0;
    for (double x : vel.u.raw()) m = std::max(m, std::abs(x));
    for (double x : vel.v.raw()) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace urans
