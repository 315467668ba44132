#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"

#include "bfl1/dataset.hpp"
#include "bfl1/rng.hpp"

namespace bfl1 {

// --- cantilever beam -------------------------------------------------------
//
// Geometry (meters): length 50, width 1, top and bottom flanges 0.1 thick,
// web 5 tall. Flange moduli are given in MPa, the web modulus in kPa, the
// distributed load in kN/m; everything is converted to SI internally.

struct BeamGeometry {
    static constexpr double length = 50.0;
    static constexpr double width = 1.0;
    static constexpr double flange_top = 0.1;    // modulus e1
    static constexpr double flange_bottom = 0.1; // modulus e2
    static constexpr double web_height = 5.0;    // modulus e3
    static constexpr double hole_radius = 1.5;
    static constexpr std::size_t n_holes = 5;

    // Hole centers sit at x = length * (2i + 1) / 10, i = 0..n_holes-1.
    static double hole_center(std::size_t i);
    // Total vertical extent removed from the web mid-height at station x.
    static double web_gap(double x);
};

// Bending stiffness (N m^2) of the transformed cross-section, with a strip of
// height web_gap removed symmetrically about the web mid-height. Moduli in Pa.
double beam_section_ei(double e1_pa, double e2_pa, double e3_pa, double web_gap_m = 0.0);

// Closed-form tip deflection -q L^4 / (8 EI) of the solid-web cantilever
// under uniform downward load. q in kN/m, e1/e2 in MPa, e3 in kPa; meters out.
double beam_lofi_deflection(double q_kn_per_m, double e1_mpa, double e2_mpa, double e3_kpa);

// Tip deflection of the cantilever with web holes, from a Hermite-cubic
// finite element model of (EI(x) u'')'' = -q with per-element quadrature
// split at hole edges. n_elems >= 50.
double beam_hifi_proxy(double q_kn_per_m, double e1_mpa, double e2_mpa, double e3_kpa,
                       std::size_t n_elems = 200, bool with_holes = true);

// --- shocked nozzle profile --------------------------------------------------

// delta = (-1 + sqrt(1 + 4 xi^2)) / (2 xi), continuously extended to 0 at
// xi = 0; always in (-1, 1).
double nozzle_delta(double xi);

// Shock location on (0, pi):
//   asin(sqrt(1 - delta^2))       for -1 < delta <= 0
//   pi - asin(sqrt(1 - delta^2))  for  0 < delta <  1
// nullopt for |delta| >= 1 (no shock).
std::optional<double> nozzle_shock_position(double delta);

// n evenly spaced points covering [0, pi] inclusive; n >= 2.
Vector nozzle_grid(std::size_t n);

// Piecewise profile on nozzle_grid(n): sin(x) up to and including the shock
// position, -sin(x) after it. Requires |delta| < 1.
Vector nozzle_field(double delta, std::size_t n);

// Zero crossing of a sampled profile: takes the last strictly positive
// interior sample, requires the following sample to be <= 0 and interior,
// and linearly interpolates the crossing. The two end samples never vote
// (boundary conditions pin them to zero). nullopt when the interior never
// crosses; needs >= 4 samples.
std::optional<double> shock_from_profile(const Vector& x, const Vector& u);

// shock_from_profile on the inclusive [0, pi] grid matching field.size().
std::optional<double> nozzle_shock_from_field(const Vector& field);

// --- time-marched reference for the nozzle profile --------------------------
//
// First-order Godunov finite-volume march of u_t + (u^2/2)_x = (sin^2 x / 2)_x
// on [0, pi] to steady state. The initial state is a two-plateau profile
// carrying integral 2*delta; zero-valued ghost cells make both boundary
// fluxes vanish, so the integral is conserved and the steady profile selects
// the shock position on its own. Nothing here reuses the closed-form field.

struct UpwindSteadyResult {
    Vector x;        // cell centers
    Vector u;        // steady cell averages
    std::size_t steps = 0;
    double residual = 0.0; // last max |du|/dt
    bool converged = false;
};

UpwindSteadyResult burgers_steady_upwind(double delta, std::size_t n_cells,
                                         double cfl = 0.4, double tol = 1e-10,
                                         std::size_t max_steps = 5'000'000);

// Piecewise-linear interpolation of (x_src, y_src) onto x_dst. x_src must be
// strictly increasing and x_dst within its range.
Vector interp_linear(const Vector& x_src, const Vector& y_src, const Vector& x_dst);

// --- datasets ----------------------------------------------------------------

enum class Problem { Beam, Nozzle };

std::string problem_name(Problem p);
Problem problem_from_name(const std::string& name);

struct DatasetOptions {
    std::size_t beam_n_elems = 200;  // hi-fidelity mesh
    std::size_t nozzle_grid_lo = 52;
    std::size_t nozzle_grid_hi = 1048;
};

// Beam samples: x = (q, E1, E2, E3) in kN/m, MPa, MPa, kPa with
// q ~ U[9,11], E1,E2 ~ U[0.9,1.1], E3 ~ U[9,11]; y = tip deflection (m).
Dataset generate_beam_samples(std::size_t n, Rng& rng, bool hifi, std::size_t n_elems);

// Nozzle samples: xi ~ N(0,1) drives the shock position; x = y = profile on
// n_grid points. If upsample_to > n_grid the coarse profile is linearly
// interpolated onto the fine grid so both fidelities share one width.
Dataset generate_nozzle_samples(std::size_t n, Rng& rng, std::size_t n_grid,
                                std::size_t upsample_to = 0);

struct DatasetMeta {
    Problem problem = Problem::Beam;
    std::uint64_t seed = 0; // key of the rng the bundle was drawn from
    DatasetOptions grids;
};

struct BiFidelityDataset {
    Dataset lo;
    Dataset hi;
    Dataset val; // high-fidelity held-out set
    DatasetMeta meta;
};

// Draws the three sets from independent child streams of rng
// (0: lo, 1: hi, 2: val). Validation data is high-fidelity.
BiFidelityDataset generate_bifidelity_dataset(Problem p, std::size_t n_lo, std::size_t n_hi,
                                              std::size_t n_val, const Rng& rng,
                                              const DatasetOptions& opts = {});

// CSV round-trip. Beam header: q,E1,E2,E3,y. Nozzle header: x_0,...,x_{n-1}
// (the profile is both input and target, so it is stored once).
void write_dataset_csv(const std::string& path, const Dataset& data, Problem p);
Dataset load_dataset_csv(const std::string& path, Problem p);

// Column unit labels embedded in serialized bundles.
std::map<std::string, std::string> dataset_units(Problem p);

// Whole-bundle JSON: {"meta": {problem, seed, grids, units}, "lo": [...],
// "hi": [...], "val": [...]} with one {"x": [...], "y": [...]} per sample.
// Parsing treats the bytes as external data: anything malformed (including an
// unknown problem name or ragged sample widths) raises input_error.
nlohmann::json dataset_bundle_to_json(const BiFidelityDataset& bundle);
BiFidelityDataset dataset_bundle_from_json(const nlohmann::json& j);

} // namespace bfl1
