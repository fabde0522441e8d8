#include "urans/flowsolver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace urans {

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

void SolverConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("solver: dt must be positive");
    if (!(t_end >= 0.0)) throw ConfigError("solver: t_end must be non-negative");
    if (!(proj_tol > 0.0)) throw ConfigError("solver: proj_tol must be positive");
    if (!(penal_eta > 0.0)) throw ConfigError("solver: penal_eta must be positive");
    if (!(cfl_max > 0.0)) throw ConfigError("solver: cfl_max must be positive");
}

std::pair<double, double> body_force_annulus(double x, double y, double t, bool ramp) {
    const double m = ramp ? std::min(t, 1.0) : 1.0;
    const double g = 4.0 * (1.0 - x * x - y * y);
    return {-m * g * y, m * g * x};
}

VectorField sample_force(const BodyForce& force, const Grid& grid, double t) {
    VectorField f(grid.nx(), grid.ny());
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            if (!grid.fixed_u(i, j)) f.u(i, j) = force(grid.xf(i), grid.yc(j), t).first;
            if (!grid.fixed_v(i, j)) f.v(i, j) = force(grid.xc(i), grid.yf(j), t).second;
        }
    }
    return f;
}

namespace {

// Node viscosity = mean over the in-domain cells sharing the node.
Array2D node_average(const Array2D& cell, const Grid& grid) {
    Array2D out(grid.nx() + 1, grid.ny() + 1);
    for (int J = 0; J <= grid.ny(); ++J) {
        for (int I = 0; I <= grid.nx(); ++I) {
            double s = 0.0;
            int n = 0;
            for (int dj = -1; dj <= 0; ++dj)
                for (int di = -1; di <= 0; ++di) {
                    const int ci = I + di;
                    const int cj = J + dj;
                    if (!grid.cell_in_domain(ci, cj)) continue;
                    s += cell(grid.wrap_x(ci), grid.wrap_y(cj));
                    ++n;
                }
            out(I, J) = n > 0 ? s / n : 0.0;
        }
    }
    return out;
}

}  // namespace

FlowSolver::FlowSolver(const Grid& grid, ClosureConfig closure, SolverConfig config, BodyForce force,
                       LengthScaleField l0)
    : grid_(grid),
      closure_(closure),
      config_(config),
      force_(std::move(force)),
      l0_(std::move(l0)),
      poisson_(grid.nx(), grid.ny(), grid.dx(), grid.dy(), grid.periodic_x(), grid.periodic_y()) {
    closure_.validate();
    config_.validate();
    if (l0_.l.nx() != grid.nx() || l0_.l.ny() != grid.ny()) throw ConfigError("l0 field does not match grid");
}

namespace {

// A face value expressed through the packed unknowns: sign * x[index], or identically 0.
struct FaceRef {
    long index = -1;
    double sign = 0.0;
};

// Same ghost rules as Grid::u_at / Grid::v_at.
FaceRef u_ref(const Grid& g, int i, int j) {
    double sign = 1.0;
    if (g.periodic_y()) {
        j = g.wrap_y(j);
    } else if (j < 0 || j >= g.ny()) {
        j = j < 0 ? 0 : g.ny() - 1;
        sign = -1.0;
    }
    if (g.periodic_x()) {
        i = g.wrap_x(i);
    } else if (i <= 0 || i >= g.nx()) {
        return {};
    }
    return {static_cast<long>(g.index(i, j)), sign};
}

FaceRef v_ref(const Grid& g, int i, int j) {
    double sign = 1.0;
    if (g.periodic_x()) {
        i = g.wrap_x(i);
    } else if (i < 0 || i >= g.nx()) {
        i = i < 0 ? 0 : g.nx() - 1;
        sign = -1.0;
    }
    if (g.periodic_y()) {
        j = g.wrap_y(j);
    } else if (j <= 0 || j >= g.ny()) {
        return {};
    }
    return {static_cast<long>(g.index(i, j) + g.index(0, g.ny())), sign};
}

class RowBuilder {
public:
    explicit RowBuilder(std::vector<Eigen::Triplet<double>>& triplets) : triplets_(triplets) {}
    void row(long r) { row_ = r; }
    void add(FaceRef ref, double coef) {
        if (ref.index >= 0 && coef != 0.0) triplets_.emplace_back(row_, ref.index, ref.sign * coef);
    }

private:
    std::vector<Eigen::Triplet<double>>& triplets_;
    long row_ = 0;
};

}  // namespace

MomentumSystem FlowSolver::assemble_momentum(const FlowState& state) const {
    const Grid& g = grid_;
    const int nx = g.nx();
    const int ny = g.ny();
    const double dx = g.dx();
    const double dy = g.dy();
    const double dt = config_.dt;
    const double inv_eta = 1.0 / config_.penal_eta;
    const long offset_v = static_cast<long>(g.index(0, ny));
    const long n = 2 * offset_v;

    const ScalarField nu_t =
        closure_active(state.t) ? model_eddy_viscosity(closure_, l0_, state.k, g) : ScalarField(nx, ny);
    Array2D eta_c(nx, ny);
    for (std::size_t c = 0; c < eta_c.size(); ++c) eta_c.raw()[c] = 2.0 * closure_.nu + nu_t.raw()[c];
    const Array2D eta_n = node_average(eta_c, g);
    const VectorField& w = state.vel;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n) * 16);
    RowBuilder row(triplets);

    // contributions factor * sigma_11(cell), factor * sigma_22(cell), factor * sigma_12(node)
    auto add_s11 = [&](int i, int j, double factor) {
        const double c = factor * eta_c(i, j) / dx;
        row.add(u_ref(g, i + 1, j), c);
        row.add(u_ref(g, i, j), -c);
    };
    auto add_s22 = [&](int i, int j, double factor) {
        const double c = factor * eta_c(i, j) / dy;
        row.add(v_ref(g, i, j + 1), c);
        row.add(v_ref(g, i, j), -c);
    };
    auto add_s12 = [&](int I, int J, double factor) {
        const double c = 0.5 * factor * eta_n(I, J);
        row.add(u_ref(g, I, J), c / dy);
        row.add(u_ref(g, I, J - 1), -c / dy);
        row.add(v_ref(g, I, J), c / dx);
        row.add(v_ref(g, I - 1, J), -c / dx);
    };

    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const long ru = static_cast<long>(g.index(i, j));
            row.row(ru);
            if (g.fixed_u(i, j)) {
                row.add({ru, 1.0}, 1.0);
            } else {
                row.add({ru, 1.0}, 1.0 / dt + g.chi_u(i, j) * inv_eta);
                // skew-symmetric convection; the centre coefficient cancels identically
                const double fe = 0.5 * (w.u(i, j) + g.u_at(w.u, i + 1, j));
                const double fw = 0.5 * (g.u_at(w.u, i - 1, j) + w.u(i, j));
                const double fn = 0.5 * (g.v_at(w.v, i - 1, j + 1) + g.v_at(w.v, i, j + 1));
                const double fs = 0.5 * (g.v_at(w.v, i - 1, j) + g.v_at(w.v, i, j));
                row.add(u_ref(g, i + 1, j), 0.5 * fe / dx);
                row.add(u_ref(g, i - 1, j), -0.5 * fw / dx);
                row.add(u_ref(g, i, j + 1), 0.5 * fn / dy);
                row.add(u_ref(g, i, j - 1), -0.5 * fs / dy);
                // -div(eta grad^s v), x-component
                add_s11(i, j, -1.0 / dx);
                add_s11(g.wrap_x(i - 1), j, 1.0 / dx);
                add_s12(i, j + 1, -1.0 / dy);
                add_s12(i, j, 1.0 / dy);
            }

            const long rv = offset_v + ru;
            row.row(rv);
            if (g.fixed_v(i, j)) {
                row.add({rv, 1.0}, 1.0);
            } else {
                row.add({rv, 1.0}, 1.0 / dt + g.chi_v(i, j) * inv_eta);
                const double fn = 0.5 * (w.v(i, j) + g.v_at(w.v, i, j + 1));
                const double fs = 0.5 * (g.v_at(w.v, i, j - 1) + w.v(i, j));
                const double fe = 0.5 * (g.u_at(w.u, i + 1, j - 1) + g.u_at(w.u, i + 1, j));
                const double fw = 0.5 * (g.u_at(w.u, i, j - 1) + g.u_at(w.u, i, j));
                row.add(v_ref(g, i, j + 1), 0.5 * fn / dy);
                row.add(v_ref(g, i, j - 1), -0.5 * fs / dy);
                row.add(v_ref(g, i + 1, j), 0.5 * fe / dx);
                row.add(v_ref(g, i - 1, j), -0.5 * fw / dx);
                add_s22(i, j, -1.0 / dy);
                add_s22(i, g.wrap_y(j - 1), 1.0 / dy);
                add_s12(i + 1, j, -1.0 / dx);
                add_s12(i, j, 1.0 / dx);
            }
        }
    }

    MomentumSystem system;
    system.matrix.resize(n, n);
    system.matrix.setFromTriplets(triplets.begin(), triplets.end());
    system.matrix.makeCompressed();

    const VectorField f = sample_force(force_, g, state.t + dt);
    const VectorField gp = gradient(state.p, g);
    system.rhs = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const long c = static_cast<long>(g.index(i, j));
            if (!g.fixed_u(i, j)) system.rhs[c] = w.u(i, j) / dt + f.u(i, j) - gp.u(i, j);
            if (!g.fixed_v(i, j)) system.rhs[offset_v + c] = w.v(i, j) / dt + f.v(i, j) - gp.v(i, j);
        }
    return system;
}

VectorField FlowSolver::momentum_step(const FlowState& state, StepDiagnostics* diagnostics) const {
    const MomentumSystem system = assemble_momentum(state);
    const long half = static_cast<long>(state.vel.u.size());
    Eigen::VectorXd guess(2 * half);
    std::copy(state.vel.u.raw().begin(), state.vel.u.raw().end(), guess.data());
    std::copy(state.vel.v.raw().begin(), state.vel.v.raw().end(), guess.data() + half);

    const double target = 100.0 * config_.momentum_rel_tol * system.rhs.norm();
    SolveStats stats;
    auto accept = [&](const Eigen::VectorXd& candidate) {
        const Eigen::VectorXd r = system.rhs - system.matrix * candidate;
        stats.residual_l2 = r.norm();
        stats.residual_inf = r.lpNorm<Eigen::Infinity>();
        stats.converged = std::isfinite(stats.residual_l2) && stats.residual_l2 <= target;
        return stats.converged;
    };

    Eigen::VectorXd x = guess;
    bool done = false;
    if (!config_.momentum_direct) {
        Eigen::BiCGSTAB<SparseMatrix, Eigen::DiagonalPreconditioner<double>> solver;
        solver.setTolerance(config_.momentum_rel_tol);
        solver.setMaxIterations(1000);
        solver.compute(system.matrix);
        x = solver.solveWithGuess(system.rhs, guess);
        stats.iterations = static_cast<int>(solver.iterations());
        done = solver.info() == Eigen::Success && accept(x);
    }
    if (!done) {
        // BiCGSTAB breakdown is rare but possible; fall back to a sparse direct solve
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(Eigen::SparseMatrix<double>(system.matrix));
        if (lu.info() == Eigen::Success) x = lu.solve(system.rhs);
        if (lu.info() != Eigen::Success || !accept(x)) throw SolverError("momentum solve did not converge", stats);
    }
    if (diagnostics) diagnostics->momentum = stats;

    VectorField out(state.vel.u.nx(), state.vel.u.ny());
    std::copy(x.data(), x.data() + half, out.u.raw().begin());
    std::copy(x.data() + half, x.data() + 2 * half, out.v.raw().begin());
    return out;
}

Projection FlowSolver::pressure_project(const VectorField& intermediate) const {
    const Grid& g = grid_;
    const double dt = config_.dt;
    const ScalarField div = divergence(intermediate, g);
    std::vector<double> b(div.size());
    for (std::size_t n = 0; n < b.size(); ++n) b[n] = -div.raw()[n] / dt;
    remove_mean(b);
    std::vector<double> phi(b.size(), 0.0);

    SolveControl control;
    control.rel_tol = 0.0;
    control.abs_tol_inf = 0.25 * config_.proj_tol / dt;
    control.max_iter = 500;
    control.label = "pressure Poisson solve";
    auto apply = [this](std::span<const double> in, std::span<double> out) { poisson_.apply(in, out); };
    auto precondition = [this](std::span<const double> r, std::span<double> z) { poisson_.precondition(r, z); };

    Projection result;
    result.stats = pcg(apply, precondition, b, phi, control);
    remove_mean(phi);
    result.phi = ScalarField(g.nx(), g.ny());
    std::copy(phi.begin(), phi.end(), result.phi.raw().begin());
    const VectorField gphi = gradient(result.phi, g);
    result.vel = intermediate;
    for (std::size_t n = 0; n < gphi.u.size(); ++n) {
        result.vel.u.raw()[n] -= dt * gphi.u.raw()[n];
        result.vel.v.raw()[n] -= dt * gphi.v.raw()[n];
    }
    return result;
}

FlowState FlowSolver::step(const FlowState& state, StepDiagnostics* diagnostics) const {
    const Grid& g = grid_;
    StepDiagnostics diag;
    const double dt = config_.dt;
    diag.cfl = max_speed(state.vel) * dt / std::min(g.dx(), g.dy());
    if (diag.cfl > config_.cfl_max) {
        std::ostringstream msg;
        msg << "CFL guard: max|v| dt / h = " << diag.cfl << " exceeds " << config_.cfl_max << " at t = " << state.t;
        throw SolverError(msg.str(), SolveStats{});
    }

    const VectorField intermediate = momentum_step(state, &diag);
    Projection projection = pressure_project(intermediate);
    diag.pressure = projection.stats;

    FlowState next;
    next.vel = std::move(projection.vel);
    next.p = state.p;
    for (std::size_t n = 0; n < next.p.size(); ++n) next.p.raw()[n] += projection.phi.raw()[n];
    const bool active = closure_active(state.t);
    next.k = active ? k_step(state.k, state.vel, next.vel, closure_, l0_, g, dt, &diag.k) : state.k;
    next.t = state.t + dt;
    next.step = state.step + 1;

    const ScalarField div = divergence(next.vel, g);
    for (double d : div.raw()) diag.max_divergence = std::max(diag.max_divergence, std::abs(d));
    const VectorField f = sample_force(force_, g, next.t);
    diag.forcing_power = dot_faces(f, next.vel, g);
    diag.energy_audit =
        audit_energy(next) - audit_energy(state) + dt * audit_dissipation(next, active) - dt * diag.forcing_power;
    if (diagnostics) *diagnostics = diag;
    return next;
}

double FlowSolver::audit_energy(const FlowState& state) const {
    double k_sum = 0.0;
    for (double k : state.k.raw()) k_sum += k;
    return 0.5 * dot_faces(state.vel, state.vel, grid_) + k_sum * grid_.cell_area();
}

bool FlowSolver::closure_active(double t) const { return t + 0.5 * config_.dt >= config_.model_start; }

double FlowSolver::audit_dissipation(const FlowState& state, bool with_sink) const {
    const ScalarField magsq = deformation_tensor_magsq(state.vel, grid_);
    double s = 0.0;
    for (int j = 0; j < grid_.ny(); ++j)
        for (int i = 0; i < grid_.nx(); ++i)
            s += 2.0 * closure_.nu * magsq(i, j) +
                 (with_sink ? dissipation_density(closure_, l0_.l(i, j), state.k(i, j)) : 0.0);
    return s * grid_.cell_area();
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'U', 'R', 'A', 'N', 'S', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::vector<char>& buf, std::size_t offset, T value) {
    std::memcpy(buf.data() + offset, &value, sizeof(T));
}

template <typename T>
T get(const std::vector<char>& buf, std::size_t offset) {
    T value;
    std::memcpy(&value, buf.data() + offset, sizeof(T));
    return value;
}
}  // namespace

void write_checkpoint(const std::string& path, const FlowState& state) {
    const auto nx = static_cast<std::uint32_t>(state.k.nx());
    const auto ny = static_cast<std::uint32_t>(state.k.ny());
    std::vector<char> header(64, 0);
    std::memcpy(header.data(), kMagic, 8);
    put<std::uint32_t>(header, 8, kVersion);
    put<std::uint32_t>(header, 12, nx);
    put<std::uint32_t>(header, 16, ny);
    put<std::uint32_t>(header, 20, 4);
    put<double>(header, 24, state.t);
    put<std::int64_t>(header, 32, static_cast<std::int64_t>(state.step));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const Array2D* a : {&state.vel.u, &state.vel.v, &state.p, &state.k})
        out.write(reinterpret_cast<const char*>(a->raw().data()), static_cast<std::streamsize>(a->size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

FlowState read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::vector<char> header(64);
    in.read(header.data(), 64);
    if (!in || std::memcmp(header.data(), kMagic, 8) != 0) throw std::runtime_error("not a checkpoint file: " + path);
    if (get<std::uint32_t>(header, 8) != kVersion) throw std::runtime_error("unsupported checkpoint version");
    const auto nx = static_cast<int>(get<std::uint32_t>(header, 12));
    const auto ny = static_cast<int>(get<std::uint32_t>(header, 16));
    if (get<std::uint32_t>(header, 20) != 4) throw std::runtime_error("unexpected checkpoint field count");
    FlowState state(nx, ny);
    state.t = get<double>(header, 24);
    state.step = static_cast<long>(get<std::int64_t>(header, 32));
    for (Array2D* a : {&state.vel.u, &state.vel.v, &state.p, &state.k})
        in.read(reinterpret_cast<char*>(a->raw().data()), static_cast<std::streamsize>(a->size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return state;
}

}  // namespace urans
