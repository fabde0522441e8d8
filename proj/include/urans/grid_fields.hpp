/// @file grid_fields.hpp
/// @brief Staggered (MAC) grid, discrete fields and the shared difference operators.
///
/// Layout on an nx x ny cell grid:
///   - cell (i,j) centers hold p, k, nu_T, |S|^2
///   - u(i,j) lives on the left x-face of cell (i,j), v(i,j) on the bottom y-face
///   - shear S12 lives on nodes; node (i,j) is the lower-left corner of cell (i,j)
///
/// For a no-slip direction the wall-normal face at index 0 is a fixed zero and the
/// opposite wall face (index n) is not stored. Tangential velocities are mirrored
/// into ghost cells (u(i,-1) = -u(i,0)) so the wall value is zero.
#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace urans {

/// Thrown for invalid scenario or configuration input.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class BoundaryKind { Periodic, NoSlip };

/// Dense cell-indexed 2d array, row-major with i fastest.
class Array2D {
public:
    Array2D() = default;
    Array2D(int nx, int ny, double fill = 0.0) : nx_(nx), ny_(ny), data_(static_cast<std::size_t>(nx) * ny, fill) {}

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(int i, int j) { return data_[index(i, j)]; }
    double operator()(int i, int j) const { return data_[index(i, j)]; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }

    std::span<double> span() { return data_; }
    std::span<const double> span() const { return data_; }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    void fill(double value) { std::fill(data_.begin(), data_.end(), value); }
    bool operator==(const Array2D&) const = default;

private:
    int nx_ = 0;
    int ny_ = 0;
    std::vector<double> data_;
};

/// Cell-centered scalar (pressure, k, nu_T, ...).
using ScalarField = Array2D;

/// Face-centered velocity.
struct VectorField {
    Array2D u;
    Array2D v;

    VectorField() = default;
    VectorField(int nx, int ny) : u(nx, ny), v(nx, ny) {}
    bool operator==(const VectorField&) const = default;
};

struct Circle {
    double cx = 0.0;
    double cy = 0.0;
    double r = 0.0;
};

/// Axis-aligned domain box.
struct Box {
    double x0 = 0.0;
    double y0 = 0.0;
    double lx = 1.0;
    double ly = 1.0;
};

/// Analytic geometry used for masks and wall distance.
///
/// Fluid is the box minus the obstacles, intersected with the outer disk when present.
struct Geometry {
    Box box;
    BoundaryKind bc_x = BoundaryKind::Periodic;
    BoundaryKind bc_y = BoundaryKind::Periodic;
    std::vector<Circle> obstacles;
    bool has_outer = false;
    Circle outer;

    bool inside_solid(double x, double y) const;
    /// Exact distance to the nearest no-slip surface; +inf when there are none.
    double wall_distance(double x, double y) const;
};

class Grid {
public:
    /// Builds the grid, solid masks and wall distance. Throws ConfigError when the
    /// resolution cannot represent an obstacle (diameter < 2 max(dx, dy)).
    Grid(const Geometry& geometry, int nx, int ny);

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double dx() const { return dx_; }
    double dy() const { return dy_; }
    double cell_area() const { return dx_ * dy_; }
    const Geometry& geometry() const { return geometry_; }
    BoundaryKind bc_x() const { return geometry_.bc_x; }
    BoundaryKind bc_y() const { return geometry_.bc_y; }
    bool periodic_x() const { return geometry_.bc_x == BoundaryKind::Periodic; }
    bool periodic_y() const { return geometry_.bc_y == BoundaryKind::Periodic; }

    double xc(int i) const { return geometry_.box.x0 + (i + 0.5) * dx_; }
    double yc(int j) const { return geometry_.box.y0 + (j + 0.5) * dy_; }
    double xf(int i) const { return geometry_.box.x0 + i * dx_; }
    double yf(int j) const { return geometry_.box.y0 + j * dy_; }

    bool solid(int i, int j) const { return solid_[index(i, j)] != 0; }
    bool fluid(int i, int j) const { return solid_[index(i, j)] == 0; }
    /// Penalization indicator on x-faces / y-faces (1 if either neighbouring cell is solid).
    double chi_u(int i, int j) const { return chi_u_(i, j); }
    double chi_v(int i, int j) const { return chi_v_(i, j); }
    /// Wall-normal faces that are pinned to zero by a no-slip box wall.
    bool fixed_u(int i, int) const { return !periodic_x() && i == 0; }
    bool fixed_v(int, int j) const { return !periodic_y() && j == 0; }

    const Array2D& wall_distance() const { return wall_distance_; }
    bool has_walls() const { return has_walls_; }
    std::size_t fluid_cell_count() const { return fluid_count_; }
    double fluid_area() const { return static_cast<double>(fluid_count_) * cell_area(); }
    /// Largest domain length used as the cap L_Omega of the large length scale.
    double domain_length() const;

    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }
    int wrap_x(int i) const { return (i % nx_ + nx_) % nx_; }
    int wrap_y(int j) const { return (j % ny_ + ny_) % ny_; }

    /// u(i,j) for i in [-1, nx], j in [-1, ny] with periodic wrap or wall ghost rules.
    double u_at(const Array2D& u, int i, int j) const;
    double v_at(const Array2D& v, int i, int j) const;
    /// Cell value with periodic wrap; out-of-range cells along walls are reported as missing.
    bool cell_in_domain(int i, int j) const;

    /// Node index ranges (nodes duplicated by periodicity are skipped).
    int node_count_x() const { return periodic_x() ? nx_ : nx_ + 1; }
    int node_count_y() const { return periodic_y() ? ny_ : ny_ + 1; }

private:
    Geometry geometry_;
    int nx_;
    int ny_;
    double dx_;
    double dy_;
    std::vector<std::uint8_t> solid_;
    Array2D chi_u_;
    Array2D chi_v_;
    Array2D wall_distance_;
    bool has_walls_ = false;
    std::size_t fluid_count_ = 0;
};

/// Factory mirroring the scenario description: box, resolution, boundary kind,
/// circular obstacles and an optional enclosing circle.
Grid make_grid(const Box& box, int nx, int ny, BoundaryKind bc_x, BoundaryKind bc_y,
               const std::vector<Circle>& obstacles, const Circle* outer = nullptr);

// ---------------------------------------------------------------------------
// Difference operators
// ---------------------------------------------------------------------------

/// Node-centered shear S12 = (du/dy + dv/dx)/2, sized (nx+1) x (ny+1).
Array2D node_shear(const VectorField& vel, const Grid& grid);

/// Cell-centered |grad^s v|^2. Diagonal entries from centered face differences; the
/// off-diagonal contribution is the corner average of 2 S12^2 weighted so that the
/// cell sum reproduces the node-based energy norm exactly.
ScalarField deformation_tensor_magsq(const VectorField& vel, const Grid& grid);

/// Cell-centered discrete divergence; exact negative adjoint of gradient().
ScalarField divergence(const VectorField& vel, const Grid& grid);

/// Face-centered gradient of a cell field; zero on fixed wall faces.
VectorField gradient(const ScalarField& p, const Grid& grid);

/// Tendency -div(vel k) with first-order upwind fluxes (monotone for dt within
/// upwind_stable_dt()). Solid cells receive no tendency.
ScalarField advect(const VectorField& vel, const ScalarField& k, const Grid& grid);

/// Tendency -div(vel (x) vel) in skew-symmetric central form.
VectorField advect(const VectorField& vel, const VectorField& x, const Grid& grid);

/// Linearized convection C(w) x in skew-symmetric form: <C(w)x, x> = 0 for all x.
void apply_convection(const VectorField& w, const VectorField& x, VectorField& out, const Grid& grid);

/// Largest explicit step for which upwind advection keeps every cell a convex combination.
double upwind_stable_dt(const VectorField& vel, const Grid& grid);

/// Face velocities averaged to cell centers.
void cell_velocity(const VectorField& vel, const Grid& grid, Array2D& uc, Array2D& vc);

/// Inner products with cell-area weights.
double dot_cells(const Array2D& a, const Array2D& b, const Grid& grid);
double dot_faces(const VectorField& a, const VectorField& b, const Grid& grid);

/// max |v| over all faces.
double max_speed(const VectorField& vel);

}  // namespace urans
