#include "bfl1/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "bfl1/errors.hpp"

namespace bfl1 {

// --- beam --------------------------------------------------------------------

double BeamGeometry::hole_center(std::size_t i) {
    if (i >= n_holes) throw config_error("hole index out of range");
    return length * static_cast<double>(2 * i + 1) / 10.0;
}

double BeamGeometry::web_gap(double x) {
    for (std::size_t i = 0; i < n_holes; ++i) {
        const double d = x - hole_center(i);
        if (std::abs(d) < hole_radius)
            return 2.0 * std::sqrt(hole_radius * hole_radius - d * d);
    }
    return 0.0;
}

double beam_section_ei(double e1_pa, double e2_pa, double e3_pa, double web_gap_m) {
    if (!(e1_pa > 0.0) || !(e2_pa > 0.0) || !(e3_pa > 0.0))
        throw config_error("beam moduli must be > 0");
    if (!(web_gap_m >= 0.0) || web_gap_m > BeamGeometry::web_height)
        throw config_error("web gap must lie in [0, web height]");

    const double hb = BeamGeometry::flange_bottom;
    const double hw = BeamGeometry::web_height;
    const double ht = BeamGeometry::flange_top;
    const double w = BeamGeometry::width;
    const double y_mid = hb + hw / 2.0;

    // Strips as (modulus, y_lo, y_hi); the web is split around the gap.
    struct Strip { double e, lo, hi; };
    const Strip strips[] = {
        {e2_pa, 0.0, hb},
        {e3_pa, hb, y_mid - web_gap_m / 2.0},
        {e3_pa, y_mid + web_gap_m / 2.0, hb + hw},
        {e1_pa, hb + hw, hb + hw + ht},
    };

    double ea = 0.0, eay = 0.0, ei0 = 0.0; // about y = 0
    for (const auto& s : strips) {
        if (s.hi <= s.lo) continue;
        const double a = w * (s.hi - s.lo);
        ea += s.e * a;
        eay += s.e * a * (s.lo + s.hi) / 2.0;
        ei0 += s.e * w * (s.hi * s.hi * s.hi - s.lo * s.lo * s.lo) / 3.0;
    }
    const double ybar = eay / ea;
    return ei0 - ybar * ybar * ea;
}

namespace {

void beam_check_inputs(double q, double e1, double e2, double e3) {
    if (!(q > 0.0) || !(e1 > 0.0) || !(e2 > 0.0) || !(e3 > 0.0))
        throw config_error("beam load and moduli must be > 0");
}

struct BeamSI {
    double q, e1, e2, e3;
};

BeamSI beam_to_si(double q_kn_per_m, double e1_mpa, double e2_mpa, double e3_kpa) {
    beam_check_inputs(q_kn_per_m, e1_mpa, e2_mpa, e3_kpa);
    return {q_kn_per_m * 1e3, e1_mpa * 1e6, e2_mpa * 1e6, e3_kpa * 1e3};
}

constexpr double kGaussX[4] = {-0.8611363115940526, -0.33998104358485626,
                               0.33998104358485626, 0.8611363115940526};
constexpr double kGaussW[4] = {0.34785484513745385, 0.6521451548625461,
                               0.6521451548625461, 0.34785484513745385};

// Symmetric banded matrix, lower storage: entry(i, d) = A(i, i-d). Bending
// stiffness conditioning grows like the fourth power of the element count
// (~2e9 at 200 elements), so the factorization and solves run in extended
// precision; a plain double solve leaves only 7-8 significant digits in the
// tip deflection. The matrix is a few kilobytes, so the cost is negligible.
struct BandMatrix {
    std::size_t n, hb;
    std::vector<long double> a;
    BandMatrix(std::size_t n_, std::size_t hb_) : n(n_), hb(hb_), a(n_ * (hb_ + 1), 0.0L) {}
    long double& at(std::size_t i, std::size_t d) { return a[i * (hb + 1) + d]; }
    long double at(std::size_t i, std::size_t d) const { return a[i * (hb + 1) + d]; }
};

// In-place banded Cholesky, then two triangular solves.
void band_cholesky_solve(BandMatrix& m, Vector& rhs) {
    const std::size_t n = m.n, hb = m.hb;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t jmin = i > hb ? i - hb : 0;
        for (std::size_t j = jmin; j <= i; ++j) {
            long double s = m.at(i, i - j);
            for (std::size_t k = jmin; k < j; ++k)
                s -= m.at(i, i - k) * m.at(j, j - k);
            if (j < i) {
                m.at(i, i - j) = s / m.at(j, 0);
            } else {
                if (!(s > 0.0L)) throw config_error("beam stiffness matrix is not positive definite");
                m.at(i, 0) = std::sqrt(s);
            }
        }
    }
    std::vector<long double> y(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t jmin = i > hb ? i - hb : 0;
        long double s = y[i];
        for (std::size_t k = jmin; k < i; ++k) s -= m.at(i, i - k) * y[k];
        y[i] = s / m.at(i, 0);
    }
    for (std::size_t i = n; i-- > 0;) {
        const std::size_t kmax = std::min(n - 1, i + hb);
        long double s = y[i];
        for (std::size_t k = i + 1; k <= kmax; ++k) s -= m.at(k, k - i) * y[k];
        y[i] = s / m.at(i, 0);
    }
    for (std::size_t i = 0; i < n; ++i) rhs[i] = static_cast<double>(y[i]);
}

} // namespace

double beam_lofi_deflection(double q_kn_per_m, double e1_mpa, double e2_mpa, double e3_kpa) {
    const BeamSI p = beam_to_si(q_kn_per_m, e1_mpa, e2_mpa, e3_kpa);
    const double ei = beam_section_ei(p.e1, p.e2, p.e3);
    const double l = BeamGeometry::length;
    return -p.q * l * l * l * l / (8.0 * ei);
}

double beam_hifi_proxy(double q_kn_per_m, double e1_mpa, double e2_mpa, double e3_kpa,
                       std::size_t n_elems, bool with_holes) {
    if (n_elems < 50) throw config_error("beam mesh needs at least 50 elements");
    const BeamSI p = beam_to_si(q_kn_per_m, e1_mpa, e2_mpa, e3_kpa);

    const double l = BeamGeometry::length;
    const double h = l / static_cast<double>(n_elems);
    const std::size_t n_red = 2 * n_elems; // dofs after clamping node 0
    BandMatrix stiff(n_red, 3);
    Vector rhs(n_red, 0.0);

    // Hole edges; quadrature intervals are split there so every piece of the
    // integrand is smooth.
    std::vector<double> edges;
    if (with_holes) {
        for (std::size_t i = 0; i < BeamGeometry::n_holes; ++i) {
            edges.push_back(BeamGeometry::hole_center(i) - BeamGeometry::hole_radius);
            edges.push_back(BeamGeometry::hole_center(i) + BeamGeometry::hole_radius);
        }
    }

    const double w_load = -p.q; // downward distributed load
    for (std::size_t e = 0; e < n_elems; ++e) {
        const double xa = static_cast<double>(e) * h;
        const double xb = xa + h;

        std::vector<double> cuts{xa, xb};
        for (double c : edges)
            if (c > xa && c < xb) cuts.push_back(c);
        std::sort(cuts.begin(), cuts.end());

        double ke[4][4] = {};
        for (std::size_t piece = 0; piece + 1 < cuts.size(); ++piece) {
            const double mid = (cuts[piece] + cuts[piece + 1]) / 2.0;
            const double half = (cuts[piece + 1] - cuts[piece]) / 2.0;
            if (half <= 0.0) continue;
            for (int g = 0; g < 4; ++g) {
                const double x = mid + half * kGaussX[g];
                const double gap = with_holes ? BeamGeometry::web_gap(x) : 0.0;
                const double ei = beam_section_ei(p.e1, p.e2, p.e3, gap);
                const double xi = (x - xa) / h;
                const double b[4] = {(-6.0 + 12.0 * xi) / (h * h), (-4.0 + 6.0 * xi) / h,
                                     (6.0 - 12.0 * xi) / (h * h), (-2.0 + 6.0 * xi) / h};
                const double wq = kGaussW[g] * half * ei;
                for (int r = 0; r < 4; ++r)
                    for (int c = 0; c < 4; ++c) ke[r][c] += wq * b[r] * b[c];
            }
        }

        const double fe[4] = {w_load * h / 2.0, w_load * h * h / 12.0,
                              w_load * h / 2.0, -w_load * h * h / 12.0};

        // Global dofs 2e..2e+3; the clamp removes dofs 0 and 1.
        for (int r = 0; r < 4; ++r) {
            const long gr = static_cast<long>(2 * e) + r - 2;
            if (gr < 0) continue;
            rhs[static_cast<std::size_t>(gr)] += fe[r];
            for (int c = 0; c < 4; ++c) {
                const long gc = static_cast<long>(2 * e) + c - 2;
                if (gc < 0 || gc > gr) continue;
                stiff.at(static_cast<std::size_t>(gr), static_cast<std::size_t>(gr - gc)) +=
                    ke[r][c];
            }
        }
    }

    band_cholesky_solve(stiff, rhs);
    return rhs[n_red - 2]; // transverse deflection at the free end
}

// --- nozzle ------------------------------------------------------------------

double nozzle_delta(double xi) {
    // Algebraically (-1 + sqrt(1 + 4 xi^2)) / (2 xi), written without the
    // cancellation and with the xi = 0 limit built in.
    return 2.0 * xi / (1.0 + std::sqrt(1.0 + 4.0 * xi * xi));
}

std::optional<double> nozzle_shock_position(double delta) {
    if (std::abs(delta) >= 1.0) return std::nullopt;
    const double s = std::sqrt(1.0 - delta * delta);
    if (delta <= 0.0) return std::asin(s);
    return std::numbers::pi - std::asin(s);
}

Vector nozzle_grid(std::size_t n) {
    if (n < 2) throw config_error("nozzle grid needs at least 2 points");
    Vector x(n);
    // The fraction is computed first so the endpoints are exactly 0 and pi
    // for every n; grids of different sizes then share their range and
    // cross-grid interpolation never falls out of bounds.
    for (std::size_t i = 0; i < n; ++i)
        x[i] = std::numbers::pi * (static_cast<double>(i) / static_cast<double>(n - 1));
    return x;
}

Vector nozzle_field(double delta, std::size_t n) {
    const auto xs = nozzle_shock_position(delta);
    if (!xs) throw config_error("nozzle profile needs |delta| < 1");
    Vector u = nozzle_grid(n);
    for (auto& v : u) v = v <= *xs ? std::sin(v) : -std::sin(v);
    return u;
}

std::optional<double> shock_from_profile(const Vector& x, const Vector& u) {
    if (x.size() != u.size())
        throw config_error("shock_from_profile: coordinate and value sizes differ");
    if (x.size() < 4) throw config_error("shock_from_profile: needs at least 4 samples");
    // Only interior samples vote: the profile ends are pinned to zero by the
    // boundary conditions, so their signs say nothing about the jump.
    std::size_t last_pos = x.size();
    for (std::size_t i = 1; i + 1 < u.size(); ++i)
        if (u[i] > 0.0) last_pos = i;
    if (last_pos + 2 >= x.size()) return std::nullopt; // no interior crossing
    const double ul = u[last_pos], ur = u[last_pos + 1];
    const double t = ul / (ul - ur); // ur <= 0 < ul
    return x[last_pos] + t * (x[last_pos + 1] - x[last_pos]);
}

std::optional<double> nozzle_shock_from_field(const Vector& field) {
    return shock_from_profile(nozzle_grid(field.size()), field);
}

namespace {

inline double burgers_flux(double u) { return 0.5 * u * u; }

// Godunov flux for the Riemann problem (uL, uR).
inline double godunov_flux(double ul, double ur) {
    if (ul > ur) { // shock
        const double s = 0.5 * (ul + ur);
        return s > 0.0 ? burgers_flux(ul) : burgers_flux(ur);
    }
    if (ul > 0.0) return burgers_flux(ul);  // rarefaction, fully right-moving
    if (ur < 0.0) return burgers_flux(ur);  // fully left-moving
    return 0.0;                             // sonic point inside the fan
}

} // namespace

UpwindSteadyResult burgers_steady_upwind(double delta, std::size_t n_cells, double cfl,
                                         double tol, std::size_t max_steps) {
    if (std::abs(delta) >= 1.0) throw config_error("steady march needs |delta| < 1");
    if (n_cells < 8) throw config_error("steady march needs at least 8 cells");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw config_error("cfl must lie in (0, 1]");
    if (!(tol > 0.0)) throw config_error("tolerance must be > 0");

    const double pi = std::numbers::pi;
    const std::size_t n = n_cells;
    const double dx = pi / static_cast<double>(n);

    UpwindSteadyResult res;
    res.x.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        res.x[i] = (static_cast<double>(i) + 0.5) * dx;

    // Flux-form source: cell average of (sin^2 x / 2)_x. It telescopes, so
    // the total source over the domain vanishes exactly.
    Vector source(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xl = static_cast<double>(i) * dx;
        const double xr = static_cast<double>(i + 1) * dx;
        const double sl = std::sin(xl), sr = std::sin(xr);
        source[i] = (sr * sr - sl * sl) / (2.0 * dx);
    }

    // Two plateaus carrying integral 2*delta. Zero ghost cells keep both
    // boundary fluxes at zero while the edge cells hold their signs, so the
    // integral -- and with it the eventual shock position -- is preserved.
    const double plateau_pos = 1.0 + 2.0 * delta / pi;
    const double plateau_neg = 1.0 - 2.0 * delta / pi;
    res.u.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (n % 2 == 1 && i == (n - 1) / 2)
            res.u[i] = (plateau_pos - plateau_neg) / 2.0;
        else
            res.u[i] = res.x[i] < pi / 2.0 ? plateau_pos : -plateau_neg;
    }

    Vector flux(n + 1), next(n);
    for (std::size_t step = 1; step <= max_steps; ++step) {
        double umax = 0.1;
        for (double v : res.u) umax = std::max(umax, std::abs(v));
        const double dt = cfl * dx / umax;

        flux[0] = godunov_flux(0.0, res.u[0]);
        for (std::size_t i = 1; i < n; ++i) flux[i] = godunov_flux(res.u[i - 1], res.u[i]);
        flux[n] = godunov_flux(res.u[n - 1], 0.0);

        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] = res.u[i] - dt / dx * (flux[i + 1] - flux[i]) + dt * source[i];
            residual = std::max(residual, std::abs(next[i] - res.u[i]));
        }
        residual /= dt;
        res.u.swap(next);
        res.steps = step;
        res.residual = residual;
        if (residual <= tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

Vector interp_linear(const Vector& x_src, const Vector& y_src, const Vector& x_dst) {
    if (x_src.size() != y_src.size())
        throw config_error("interp_linear: coordinate and value sizes differ");
    if (x_src.size() < 2) throw config_error("interp_linear: needs at least 2 source points");
    for (std::size_t i = 1; i < x_src.size(); ++i)
        if (!(x_src[i] > x_src[i - 1]))
            throw config_error("interp_linear: source coordinates must increase strictly");

    Vector out(x_dst.size());
    for (std::size_t i = 0; i < x_dst.size(); ++i) {
        const double xd = x_dst[i];
        if (xd < x_src.front() || xd > x_src.back())
            throw config_error("interp_linear: query point outside the source range");
        auto it = std::upper_bound(x_src.begin(), x_src.end(), xd);
        std::size_t j = it == x_src.end() ? x_src.size() - 2
                                          : static_cast<std::size_t>(it - x_src.begin()) - 1;
        if (j >= x_src.size() - 1) j = x_src.size() - 2;
        const double t = (xd - x_src[j]) / (x_src[j + 1] - x_src[j]);
        out[i] = y_src[j] + t * (y_src[j + 1] - y_src[j]);
    }
    return out;
}

// --- datasets ------------------------------------------------------------------

std::string problem_name(Problem p) {
    switch (p) {
        case Problem::Beam: return "beam";
        case Problem::Nozzle: return "nozzle";
    }
    throw config_error("unknown problem");
}

Problem problem_from_name(const std::string& name) {
    if (name == "beam") return Problem::Beam;
    if (name == "nozzle") return Problem::Nozzle;
    throw config_error("unknown problem: " + name);
}

Dataset generate_beam_samples(std::size_t n, Rng& rng, bool hifi, std::size_t n_elems) {
    Dataset data;
    data.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double q = 9.0 + 2.0 * rng.uniform01();
        const double e1 = 0.9 + 0.2 * rng.uniform01();
        const double e2 = 0.9 + 0.2 * rng.uniform01();
        const double e3 = 9.0 + 2.0 * rng.uniform01();
        const double y = hifi ? beam_hifi_proxy(q, e1, e2, e3, n_elems)
                              : beam_lofi_deflection(q, e1, e2, e3);
        data.push_back({{q, e1, e2, e3}, {y}});
    }
    return data;
}

Dataset generate_nozzle_samples(std::size_t n, Rng& rng, std::size_t n_grid,
                                std::size_t upsample_to) {
    if (upsample_to != 0 && upsample_to < n_grid)
        throw config_error("upsample target must be at least the source grid size");
    const Vector x_src = nozzle_grid(n_grid);
    const Vector x_dst = upsample_to > n_grid ? nozzle_grid(upsample_to) : Vector{};
    Dataset data;
    data.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double delta = nozzle_delta(rng.normal());
        Vector field = nozzle_field(delta, n_grid);
        if (!x_dst.empty()) field = interp_linear(x_src, field, x_dst);
        data.push_back({field, field});
    }
    return data;
}

BiFidelityDataset generate_bifidelity_dataset(Problem p, std::size_t n_lo, std::size_t n_hi,
                                              std::size_t n_val, const Rng& rng,
                                              const DatasetOptions& opts) {
    if (n_lo == 0 || n_hi == 0 || n_val == 0)
        throw config_error("dataset sizes must be > 0");
    Rng lo_rng = rng.split(0);
    Rng hi_rng = rng.split(1);
    Rng val_rng = rng.split(2);
    BiFidelityDataset out;
    out.meta = {p, rng.key(), opts};
    if (p == Problem::Beam) {
        out.lo = generate_beam_samples(n_lo, lo_rng, false, opts.beam_n_elems);
        out.hi = generate_beam_samples(n_hi, hi_rng, true, opts.beam_n_elems);
        out.val = generate_beam_samples(n_val, val_rng, true, opts.beam_n_elems);
    } else {
        out.lo = generate_nozzle_samples(n_lo, lo_rng, opts.nozzle_grid_lo, opts.nozzle_grid_hi);
        out.hi = generate_nozzle_samples(n_hi, hi_rng, opts.nozzle_grid_hi, 0);
        out.val = generate_nozzle_samples(n_val, val_rng, opts.nozzle_grid_hi, 0);
    }
    return out;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_double(const std::string& tok, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw input_error("csv line " + std::to_string(line_no) + ": bad number '" + tok + "'");
    }
}

} // namespace

void write_dataset_csv(const std::string& path, const Dataset& data, Problem p) {
    if (data.empty()) throw config_error("refusing to write an empty dataset");
    std::ofstream out(path);
    if (!out) throw input_error("cannot open for writing: " + path);

    if (p == Problem::Beam) {
        out << "q,E1,E2,E3,y\n";
        for (const auto& s : data) {
            if (s.x.size() != 4 || s.y.size() != 1)
                throw config_error("beam samples must have 4 inputs and 1 output");
            out << format_double(s.x[0]) << ',' << format_double(s.x[1]) << ','
                << format_double(s.x[2]) << ',' << format_double(s.x[3]) << ','
                << format_double(s.y[0]) << '\n';
        }
    } else {
        const std::size_t n = data.front().x.size();
        for (std::size_t j = 0; j < n; ++j) out << (j ? ",x_" : "x_") << j;
        out << '\n';
        for (const auto& s : data) {
            if (s.x.size() != n || s.y != s.x)
                throw config_error("nozzle csv stores one profile per row; "
                                   "inputs and targets must match");
            for (std::size_t j = 0; j < n; ++j) {
                if (j) out << ',';
                out << format_double(s.x[j]);
            }
            out << '\n';
        }
    }
    if (!out) throw input_error("write failed: " + path);
}

Dataset load_dataset_csv(const std::string& path, Problem p) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw input_error("empty csv: " + path);

    std::size_t width = 0;
    if (p == Problem::Beam) {
        if (line != "q,E1,E2,E3,y")
            throw input_error(path + ": expected header 'q,E1,E2,E3,y', got '" + line + "'");
        width = 5;
    } else {
        const auto names = split_csv_line(line);
        for (std::size_t j = 0; j < names.size(); ++j)
            if (names[j] != "x_" + std::to_string(j))
                throw input_error(path + ": expected header x_0,...,x_{n-1}");
        width = names.size();
        if (width < 2) throw input_error(path + ": profile header too short");
    }

    Dataset data;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto toks = split_csv_line(line);
        if (toks.size() != width)
            throw input_error(path + " line " + std::to_string(line_no) + ": expected " +
                              std::to_string(width) + " fields, got " +
                              std::to_string(toks.size()));
        Vector row(width);
        for (std::size_t j = 0; j < width; ++j) row[j] = parse_double(toks[j], line_no);
        if (p == Problem::Beam) {
            data.push_back({{row[0], row[1], row[2], row[3]}, {row[4]}});
        } else {
            data.push_back({row, row});
        }
    }
    if (data.empty()) throw input_error(path + ": no data rows");
    return data;
}

// --- json bundles --------------------------------------------------------------

namespace {

nlohmann::json split_to_json(const Dataset& data) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : data) out.push_back({{"x", s.x}, {"y", s.y}});
    return out;
}

Dataset split_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw input_error("bundle " + where + ": expected a non-empty sample array");
    Dataset data;
    for (const auto& s : j) {
        Sample sample{s.at("x").get<Vector>(), s.at("y").get<Vector>()};
        if (sample.x.empty() || sample.y.empty())
            throw input_error("bundle " + where + ": empty sample vectors");
        if (!data.empty() &&
            (sample.x.size() != data.front().x.size() ||
             sample.y.size() != data.front().y.size()))
            throw input_error("bundle " + where + ": ragged sample widths");
        data.push_back(std::move(sample));
    }
    return data;
}

} // namespace

std::map<std::string, std::string> dataset_units(Problem p) {
    if (p == Problem::Beam)
        return {{"q", "kN/m"}, {"E1", "MPa"}, {"E2", "MPa"}, {"E3", "kPa"}, {"y", "m"}};
    return {{"x", "dimensionless"}, {"y", "dimensionless"}};
}

nlohmann::json dataset_bundle_to_json(const BiFidelityDataset& bundle) {
    return {{"meta",
             {{"problem", problem_name(bundle.meta.problem)},
              {"seed", bundle.meta.seed},
              {"grids",
               {{"beam_n_elems", bundle.meta.grids.beam_n_elems},
                {"nozzle_grid_lo", bundle.meta.grids.nozzle_grid_lo},
                {"nozzle_grid_hi", bundle.meta.grids.nozzle_grid_hi}}},
              {"units", dataset_units(bundle.meta.problem)}}},
            {"lo", split_to_json(bundle.lo)},
            {"hi", split_to_json(bundle.hi)},
            {"val", split_to_json(bundle.val)}};
}

BiFidelityDataset dataset_bundle_from_json(const nlohmann::json& j) {
    // The bytes come from outside, so every malformation (including a problem
    // name the config parser would reject) is the file's fault, not the
    // caller's.
    try {
        BiFidelityDataset bundle;
        const auto& meta = j.at("meta");
        bundle.meta.problem = problem_from_name(meta.at("problem").get<std::string>());
        bundle.meta.seed = meta.at("seed").get<std::uint64_t>();
        const auto& grids = meta.at("grids");
        bundle.meta.grids.beam_n_elems = grids.at("beam_n_elems").get<std::size_t>();
        bundle.meta.grids.nozzle_grid_lo = grids.at("nozzle_grid_lo").get<std::size_t>();
        bundle.meta.grids.nozzle_grid_hi = grids.at("nozzle_grid_hi").get<std::size_t>();
        bundle.lo = split_from_json(j.at("lo"), "lo");
        bundle.hi = split_from_json(j.at("hi"), "hi");
        bundle.val = split_from_json(j.at("val"), "val");
        return bundle;
    } catch (const nlohmann::json::exception& e) {
        throw input_error(std::string("bad dataset bundle: ") + e.what());
    } catch (const config_error& e) {
        throw input_error(std::string("bad dataset bundle: ") + e.what());
    }
}

} // namespace bfl1
