#include "sunimodal/complexify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <json.hpp>

namespace sunimodal {

DiffeoFactor DiffeoFactor::affine(double slope, double offset)
{
    if (!(slope > 0)) throw PreconditionError("affine factor needs a positive slope");
    return {[=](double x) { return Jet{slope * x + offset, slope, 0, 0}; }, Interval(-1e300, 1e300)};
}

QuadraticFactor QuadraticFactor::from_vertex(double alpha, double c, double beta)
{
    return {alpha * c * c + beta, -2 * alpha * c, alpha};
}

static Jet quadratic_jet(const QuadraticFactor& q, double t)
{
    return {q(t), q.derivative(t), 2 * q.alpha, 0};
}

double NormalizedBranch::operator()(double t) const
{
    for (auto& p : factors) {
        if (p.q) t = (*p.q)(t);
        t = p.h(t);
    }
    return t;
}

Jet NormalizedBranch::jet(double t) const
{
    Jet j{t, 1, 0, 0};
    for (auto& p : factors) {
        if (p.q) j = compose(quadratic_jet(*p.q, j.v), j);
        j = compose(p.h.jet(j.v), j);
    }
    return j;
}

double NormalizedBranch::to_unit(double x) const { return intervals.front().to_unit(x); }
double NormalizedBranch::from_unit(double t) const { return intervals.front().from_unit(t); }

PlanePoint tangent_extension(const DiffeoFactor& h, const PlanePoint& z)
{
    if (!h.domain.contains_closed(z.x))
        throw DomainError("tangent_extension: point outside the extended domain");
    Jet j = h.jet(z.x);
    return {j.v, j.d1 * z.y};
}

// the tangent extension, continued by tangent lines beyond the factor's domain
static PlanePoint tangent_total(const DiffeoFactor& h, const PlanePoint& z)
{
    if (h.domain.contains_closed(z.x)) return tangent_extension(h, z);
    double e = std::clamp(z.x, h.domain.lo(), h.domain.hi());
    Jet j = h.jet(e);
    return {j.v + j.d1 * (z.x - e), j.d1 * z.y};
}

Complex beltrami_tangent(const DiffeoFactor& h, const PlanePoint& z)
{
    Jet j = h.jet(z.x);
    if (j.d1 == 0) throw SingularityError("beltrami_tangent: vanishing derivative");
    Complex w(0, z.y * j.d2 / j.d1);
    return w / (2.0 + w);
}

Complex beltrami_numeric(const PlaneMap& F, const PlanePoint& z, double step)
{
    if (!(step > 0)) throw PreconditionError("beltrami_numeric: step must be positive");
    Complex c = z.z();
    Complex fx = (F(c + step) - F(c - step)) / (2 * step);
    Complex fy = (F(c + Complex(0, step)) - F(c - Complex(0, step))) / (2 * step);
    Complex dz = 0.5 * (fx - Complex(0, 1) * fy);
    Complex dzb = 0.5 * (fx + Complex(0, 1) * fy);
    if (dz == 0.0) return {HUGE_VAL, 0};
    return dzb / dz;
}

namespace {

// affine normalization of an interval onto (0,1), increasing when o > 0
struct Unit {
    Interval I{0, 1};
    int o = 1;
    double to(double x) const { return o > 0 ? (x - I.lo()) / I.length() : (I.hi() - x) / I.length(); }
    double from(double t) const { return o > 0 ? I.lo() + t * I.length() : I.hi() - t * I.length(); }
    double slope() const { return o / I.length(); }
};

}  // namespace

NormalizedBranch branch_chain(const UnimodalMap& f, const Branch& b)
{
    if (b.kind == BranchKind::indifferent) throw PreconditionError("branch_chain: indifferent branch");
    NormalizedBranch nb;
    nb.intervals.push_back(b.domain);
    Unit A{b.domain, 1};
    // two tracked points fix the orientation: the domain ends, or the right lap of a fold
    double ra = b.folding() ? b.fold_point : b.domain.lo(), rb = b.domain.hi();
    for (int k = 0; k < b.s; ++k) {
        const Interval& I = A.I;
        bool fold = b.folding() && k == b.settled;
        if (fold) {
            ra = 0;
            nb.critical_index = k;
        }
        // squaring
        double lo = I.lo(), hi = I.hi();
        Interval U = fold ? Interval(0, std::max(lo * lo, hi * hi)) : Interval::hull(lo * lo, hi * hi);
        Unit B{U, ra * ra < rb * rb ? 1 : -1};
        QuadraticFactor q;
        double m = A.o * I.length(), x0 = A.o > 0 ? lo : hi;
        if (fold) {
            q.q0 = B.to(x0 * x0);
            q.d0 = B.slope() * 2 * m * x0;
            q.alpha = B.slope() * m * m;
        } else {
            // |hi^2 - lo^2| = len |hi + lo| avoids cancelling squares
            double Ulen = I.length() * std::abs(hi + lo);
            q.q0 = B.to(x0 * x0);
            q.d0 = B.o * 2 * m * x0 / Ulen;
            q.alpha = B.o * m * m / Ulen;
        }
        // the diffeomorphic factor
        double va = f.h(ra * ra), vb = f.h(rb * rb);
        Interval V = Interval::hull(f.h(U.lo()), f.h(U.hi()));
        Unit C{V, va < vb ? 1 : -1};
        const UnimodalMap* fp = &f;
        Unit Bc = B, Cc = C;
        DiffeoFactor h;
        h.jet = [fp, Bc, Cc](double t) {
            double u = Bc.from(t);
            Jet inner{u, Bc.o * Bc.I.length(), 0, 0};
            Jet H = fp->h_jet(u);
            H.v = Cc.to(H.v);
            H.d1 *= Cc.slope();
            H.d2 *= Cc.slope();
            H.d3 *= Cc.slope();
            return compose(H, inner);
        };
        h.domain = Interval::hull(B.to(0.0), B.to(1.0));
        nb.factors.push_back({q, h});
        nb.intervals.push_back(V);
        A = C;
        ra = va;
        rb = vb;
    }
    return nb;
}

NormalizedBranch normalized_branch(const UnimodalMap& f, const Branch& b, double epsilon)
{
    if (b.kind != BranchKind::monotone) throw PreconditionError("normalized_branch: branch is not monotone");
    NormalizedBranch nb = branch_chain(f, b);
    nb.epsilon = epsilon;
    if (epsilon <= 0) return nb;
    Interval ext = monotone_extension(f, b.domain, b.itinerary, b.s);
    double lo = nb.to_unit(ext.lo()), hi = nb.to_unit(ext.hi());
    auto F = [&](double t) { return nb(t); };
    if (!(F(lo) <= -epsilon && F(hi) >= 1 + epsilon))
        throw ExtendabilityError("normalized_branch: extension margin below epsilon");
    nb.extended = Interval(find_preimage(F, Interval(lo, 0), -epsilon, 1e-13),
                           find_preimage(F, Interval(1, hi), 1 + epsilon, 1e-13));
    return nb;
}

static double unit_height(const PlanePoint& z)
{
    if (!(0 < z.x && z.x < 1)) return HUGE_VAL;
    return std::abs(z.y) / std::min(z.x, 1 - z.x);
}

LocalImage local_extension(const NormalizedBranch& nb, const PlanePoint& z, const ExtensionConfig& cfg)
{
    if (unit_height(z) > cfg.large_diamond)
        throw PreconditionError("local_extension: point outside the large diamond");
    LocalImage r;
    PlanePoint w = z;
    r.trace.points.push_back(w);
    r.trace.heights.push_back(unit_height(w));
    for (std::size_t i = 0; i < nb.factors.size(); ++i) {
        const auto& p = nb.factors[i];
        if (p.q) {
            PlanePoint a(p.q->analytic(w.z()));
            r.trace.deltas.push_back(a.x - (*p.q)(w.x));
            w = a;
        }
        try {
            w = tangent_extension(p.h, w);
        } catch (const DomainError&) {
            throw EscapeError(static_cast<int>(i) + 1, "local_extension: orbit left the factor domain");
        }
        // after a fold the real orbit of the critical point sits on an end
        int k = static_cast<int>(i);
        bool inside = nb.critical_index >= 0 && k >= nb.critical_index
                          ? k == nb.critical_index || (0 <= w.x && w.x <= 1)
                          : 0 < w.x && w.x < 1;
        if (!inside)
            throw EscapeError(static_cast<int>(i) + 1, "local_extension: orbit left the unit interval");
        r.trace.points.push_back(w);
        r.trace.heights.push_back(unit_height(w));
    }
    for (std::size_t i = 0; i + 1 < r.trace.points.size(); ++i)
        r.trace.Y = std::max(r.trace.Y, std::abs(r.trace.points[i].y));
    r.image = w;
    return r;
}

LocalImage local_extension(const UnimodalMap& f, const Branch& b, const PlanePoint& z, const ExtensionConfig& cfg)
{
    return local_extension(branch_chain(f, b), z, cfg);
}

PlanePoint tangent_branch_extension(const NormalizedBranch& nb, const PlanePoint& z)
{
    Jet j = nb.jet(z.x);
    return {j.v, j.d1 * z.y};
}

QuadraticDiscrepancy quadratic_discrepancy(const QuadraticFactor& q, const Interval& I, const PlanePoint& z)
{
    double c = q.critical_point();
    if (I.contains_closed(c)) throw PreconditionError("quadratic_discrepancy: critical point inside the interval");
    if (!I.contains(z.x)) throw PreconditionError("quadratic_discrepancy: point not over the interval");
    PlanePoint a(q.analytic(z.z()));
    PlanePoint t(q(z.x), q.derivative(z.x) * z.y);
    double dist = std::min(std::abs(c - I.lo()), std::abs(c - I.hi()));
    QuadraticDiscrepancy r;
    r.dx = std::abs(a.x - t.x);
    r.dy = std::abs(a.y - t.y);
    r.bound = z.y * z.y / (dist * dist);
    r.fitted_k = std::abs(q.alpha) * dist * dist;
    return r;
}

OrbitBounds orbit_bounds_check(const OrbitTrace& t)
{
    OrbitBounds r;
    if (t.points.size() < 2) throw PreconditionError("orbit_bounds_check: trace needs at least one step");
    double y0 = std::abs(t.points.front().y), yn = std::abs(t.points.back().y);
    r.log_height_ratio = y0 == yn ? 0 : std::abs(std::log(yn / y0));
    for (double d : t.deltas) r.delta_sum += std::abs(d);
    r.Y = t.Y;
    r.delta_over_Y2 = r.Y > 0 ? r.delta_sum / (r.Y * r.Y) : 0;
    r.finite = std::isfinite(r.log_height_ratio) && std::isfinite(r.delta_sum) && std::isfinite(r.delta_over_Y2);
    return r;
}

const char* to_string(Regime r)
{
    switch (r) {
    case Regime::local: return "local";
    case Regime::blend: return "blend";
    case Regime::affine: return "affine";
    }
    return "?";
}

Regime global_regime(const PlanePoint& z, const ExtensionConfig& cfg)
{
    if (z.x < 0 || z.x > 1 || std::abs(z.y) > 1) return Regime::affine;
    if (std::abs(z.y) <= cfg.large_diamond * std::min(z.x, 1 - z.x)) return Regime::local;
    return Regime::blend;
}

static PlanePoint local_total(const NormalizedBranch& nb, PlanePoint w)
{
    for (auto& p : nb.factors) {
        if (p.q) w = PlanePoint(p.q->analytic(w.z()));
        w = tangent_total(p.h, w);
    }
    return w;
}

PlanePoint global_extension(const NormalizedBranch& nb, const PlanePoint& z, const ExtensionConfig& cfg)
{
    Regime r = global_regime(z, cfg);
    if (r == Regime::local) return local_total(nb, z);
    double f0 = nb(0.0), f1 = nb(1.0);
    Complex aff = f0 + (f1 - f0) * z.z();
    if (r == Regime::affine) return PlanePoint(aff);
    // radial position between the diamond and the rectangle, seen from the middle
    double u = std::abs(z.x - 0.5), v = std::abs(z.y);
    double s = std::hypot(u, v);
    double cu = u / s, cv = v / s;
    double D = cfg.large_diamond;
    double sd = 0.5 * D / (cv + D * cu);
    double sr = std::min(cu > 0 ? 0.5 / cu : HUGE_VAL, 1 / cv);
    double t = std::clamp((s - sd) / (sr - sd), 0.0, 1.0);
    double w = t * t * (3 - 2 * t);
    return PlanePoint((1 - w) * local_total(nb, z).z() + w * aff);
}

double measured_gamma(const NormalizedBranch& nb, double alpha, const ExtensionConfig& cfg)
{
    const int n = 200;
    auto fits = [&](double beta) {
        for (int i = 0; i < n; ++i) {
            double x = (i + 0.5) / n;
            PlanePoint w = global_extension(nb, {x, beta * std::min(x, 1 - x)}, cfg);
            if (!(unit_height(w) < alpha)) return false;
        }
        return true;
    };
    double lo = 0, hi = 1;
    if (fits(hi)) return hi;
    for (int k = 0; k < 50; ++k) {
        double mid = 0.5 * (lo + hi);
        (fits(mid) ? lo : hi) = mid;
    }
    return lo;
}

DistortionProfile distortion_profile(const NormalizedBranch& nb, int nx, int ny, double size,
                                     const ExtensionConfig& cfg)
{
    if (nx < 4 || ny < 4) throw PreconditionError("distortion_profile: grid must be at least 4x4");
    DistortionProfile p;
    for (std::size_t k = 0; k + 1 < nb.intervals.size(); ++k) p.total_length += nb.intervals[k].length();
    PlaneMap F = [&](Complex z) { return global_extension(nb, PlanePoint(z), cfg).z(); };
    double sum = 0;
    for (int i = 0; i < nx; ++i) {
        double x = (i + 0.5) / nx;
        for (int j = 1; j <= ny; ++j) {
            double y = size * j / ny * std::min(x, 1 - x);
            double mu = std::abs(beltrami_numeric(F, {x, y}, 1e-3 * y));
            p.samples.push_back({x, y, mu, global_regime({x, y}, cfg)});
            sum += mu;
            p.max_mu = std::max(p.max_mu, mu);
            // unit heights already carry the domain length
            p.fitted_constant = std::max(p.fitted_constant, mu / (p.total_length * y));
        }
    }
    p.mean_mu = sum / p.samples.size();
    for (double a : cfg.alphas) p.gamma.push_back({a, measured_gamma(nb, a, cfg)});
    return p;
}

double schwarzian_floor(const NormalizedBranch& nb, int samples)
{
    double lo = HUGE_VAL;
    for (int i = 0; i < samples; ++i) {
        double t = (i + 0.5) / samples;
        Jet j = nb.jet(t);
        double r = j.d2 / j.d1;
        lo = std::min(lo, j.d3 / j.d1 - 1.5 * r * r);
    }
    return lo;
}

void write_distortion_field(std::ostream& os, const DistortionProfile& p)
{
    auto old = os.precision(17);
    os << "x,y,mu,regime\n";
    for (auto& s : p.samples) os << s.x << ',' << s.y << ',' << s.mu << ',' << to_string(s.regime) << '\n';
    os.precision(old);
}

std::string distortion_summary_json(const DistortionProfile& p)
{
    nlohmann::json j;
    j["total_length"] = p.total_length;
    j["fitted_constant"] = p.fitted_constant;
    j["mean_mu"] = p.mean_mu;
    j["max_mu"] = p.max_mu;
    j["gamma"] = nlohmann::json::array();
    for (auto& [a, g] : p.gamma) j["gamma"].push_back({{"alpha", a}, {"gamma", g}});
    return j.dump(2);
}

}  // namespace sunimodal
