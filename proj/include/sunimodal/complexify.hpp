#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sunimodal/induced.hpp"

namespace sunimodal {

using Complex = std::complex<double>;
using PlaneMap = std::function<Complex(Complex)>;

// A real diffeomorphism with its jet, defined on a closed real interval.
struct DiffeoFactor {
    std::function<Jet(double)> jet;
    Interval domain{-1e300, 1e300};

    double operator()(double x) const { return jet(x).v; }
    static DiffeoFactor affine(double slope, double offset);
};

// t -> q0 + d0 t + alpha t^2, kept in Taylor form at 0 so that nearly flat
// factors of short intervals evaluate without cancellation
struct QuadraticFactor {
    double q0 = 0, d0 = 0, alpha = 1;

    static QuadraticFactor from_vertex(double alpha, double c, double beta);
    double critical_point() const { return -d0 / (2 * alpha); }
    double operator()(double t) const { return q0 + t * (d0 + alpha * t); }
    double derivative(double t) const { return d0 + 2 * alpha * t; }
    Complex analytic(Complex z) const { return q0 + z * (d0 + alpha * z); }
};

struct FactorPair {
    std::optional<QuadraticFactor> q;   // absent for a purely diffeomorphic step
    DiffeoFactor h;
};

// A branch written in unit coordinates: every intermediate image is rescaled
// affinely to (0,1), oriented so that each factor increases.
struct NormalizedBranch {
    std::vector<FactorPair> factors;
    std::vector<Interval> intervals;   // real images of the domain, one per step plus the domain
    Interval extended{0, 1};           // unit-coordinate domain mapped onto (-epsilon, 1+epsilon)
    double epsilon = 0;
    int critical_index = -1;           // pair whose quadratic folds, -1 for monotone branches

    double operator()(double t) const;
    Jet jet(double t) const;
    // the unit-coordinate value of each real domain point, and back
    double to_unit(double x) const;
    double from_unit(double t) const;
};

struct ExtensionConfig {
    double large_diamond = 0.25;       // height below which local and global extensions agree
    double epsilon = 0.05;
    std::vector<double> alphas{0.05, 0.1, 0.2, 0.4};
};

struct OrbitTrace {
    std::vector<PlanePoint> points;    // z_0 .. z_n, unit coordinates of each step
    std::vector<double> heights;
    std::vector<double> deltas;        // signed x-discrepancy of each quadratic step
    double Y = 0;                      // max |y_i| over i < n
};

struct LocalImage {
    PlanePoint image;
    OrbitTrace trace;
};

PlanePoint tangent_extension(const DiffeoFactor& h, const PlanePoint& z);
Complex beltrami_tangent(const DiffeoFactor& h, const PlanePoint& z);
Complex beltrami_numeric(const PlaneMap& F, const PlanePoint& z, double step);

// Monotone branches need extendability at least epsilon.
NormalizedBranch normalized_branch(const UnimodalMap& f, const Branch& b, double epsilon = 0.05);
// The same decomposition for monotone or folding branches, without the extension check.
NormalizedBranch branch_chain(const UnimodalMap& f, const Branch& b);

// z in unit coordinates of the domain, inside the large diamond.
LocalImage local_extension(const NormalizedBranch& nb, const PlanePoint& z, const ExtensionConfig& cfg = {});
LocalImage local_extension(const UnimodalMap& f, const Branch& b, const PlanePoint& z,
                           const ExtensionConfig& cfg = {});
// the whole branch extended by its tangent map
PlanePoint tangent_branch_extension(const NormalizedBranch& nb, const PlanePoint& z);

struct QuadraticDiscrepancy {
    double dx = 0;
    double bound = 0;       // y^2 / dist(c, I)^2
    double fitted_k = 0;    // dx <= fitted_k * bound
    double dy = 0;          // difference of the y-coordinates
};
QuadraticDiscrepancy quadratic_discrepancy(const QuadraticFactor& q, const Interval& I, const PlanePoint& z);

struct OrbitBounds {
    double log_height_ratio = 0;
    double delta_sum = 0;
    double Y = 0;
    double delta_over_Y2 = 0;
    bool finite = true;
};
OrbitBounds orbit_bounds_check(const OrbitTrace& t);

enum class Regime { local, blend, affine };
const char* to_string(Regime r);

Regime global_regime(const PlanePoint& z, const ExtensionConfig& cfg = {});
PlanePoint global_extension(const NormalizedBranch& nb, const PlanePoint& z, const ExtensionConfig& cfg = {});

struct DistortionSample {
    double x = 0, y = 0, mu = 0;
    Regime regime = Regime::local;
};

struct DistortionProfile {
    std::vector<DistortionSample> samples;
    double total_length = 0;           // sum of intermediate image lengths
    double fitted_constant = 0;        // max |mu| * (domain length) / (total_length * y)
    double mean_mu = 0;
    double max_mu = 0;
    std::vector<std::pair<double, double>> gamma;   // (alpha, measured Gamma(alpha))
};

// |mu| over a grid of the diamond of the given size
DistortionProfile distortion_profile(const NormalizedBranch& nb, int nx, int ny, double size,
                                     const ExtensionConfig& cfg = {});
// the largest diamond whose image stays in the diamond of size alpha
double measured_gamma(const NormalizedBranch& nb, double alpha, const ExtensionConfig& cfg = {});

// sampled lower bound of the Schwarzian of the normalized composition
double schwarzian_floor(const NormalizedBranch& nb, int samples = 200);

// x, y, |mu|, regime
void write_distortion_field(std::ostream& os, const DistortionProfile& p);
std::string distortion_summary_json(const DistortionProfile& p);

}  // namespace sunimodal
