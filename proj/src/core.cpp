#include "sunimodal/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sunimodal {

Interval::Interval(double lo, double hi) : lo_(lo), hi_(hi)
{
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        std::ostringstream os;
        os.precision(17);
        os << "degenerate interval (" << lo << ", " << hi << ")";
        throw DomainError(os.str());
    }
}

Interval Interval::hull(double a, double b)
{
    return a < b ? Interval(a, b) : Interval(b, a);
}

PlanePoint::PlanePoint(double x, double y) : x(x), y(y)
{
    if (!std::isfinite(x) || !std::isfinite(y))
        throw DomainError("non-finite plane point");
}

Diamond::Diamond(Interval base, double size) : base(base), size(size)
{
    if (!(size > 0))
        throw DomainError("diamond size must be positive");
}

double HomographyFix::operator()(double x) const
{
    double t = fixed.to_unit(x);
    double k = std::exp(-delta);
    return fixed.from_unit(k * t / (1 + (k - 1) * t));
}

Jet compose(const Jet& g, const Jet& f)
{
    Jet r;
    r.v = g.v;
    r.d1 = g.d1 * f.d1;
    r.d2 = g.d2 * f.d1 * f.d1 + g.d1 * f.d2;
    r.d3 = g.d3 * f.d1 * f.d1 * f.d1 + 3 * g.d2 * f.d1 * f.d2 + g.d1 * f.d3;
    return r;
}

double cross_ratio(double a, double b, double c, double d)
{
    double ad = std::abs(a - d), bc = std::abs(b - c);
    double ac = std::abs(a - c), bd = std::abs(b - d);
    if (ad == 0 || bc == 0 || ac == 0 || bd == 0 || a == b || c == d)
        throw DomainError("cross_ratio: coincident points");
    return ac * bd / (ad * bc);
}

double poincare_length(const Interval& sub, const Interval& whole)
{
    double A = whole.lo(), B = whole.hi(), a = sub.lo(), b = sub.hi();
    if (!(A < a && b < B))
        throw DomainError("poincare_length: sub not strictly inside whole");
    return std::log((b - A) * (B - a) / ((a - A) * (B - b)));
}

double height(const PlanePoint& z, const Interval& base)
{
    if (!base.contains(z.x))
        throw DomainError("height: point not over the base interval");
    double t = base.to_unit(z.x);
    return std::abs(z.y) / base.length() / std::min(t, 1 - t);
}

bool diamond_contains(const Diamond& d, const PlanePoint& z)
{
    if (!d.base.contains(z.x))
        return false;
    return height(z, d.base) < d.size;
}

double delta_of_homography(const std::function<double(double)>& g,
                           const Interval& fixed, double x)
{
    if (!fixed.contains(x))
        throw DomainError("delta_of_homography: x not inside the fixed interval");
    double gx = g(x);
    if (!fixed.contains(gx))
        throw DomainError("delta_of_homography: g(x) leaves the fixed interval");
    double a = fixed.lo(), b = fixed.hi();
    return std::log((x - a) * (b - gx) / ((gx - a) * (b - x)));
}

double find_preimage(const std::function<double(double)>& F, const Interval& on,
                     double target, double tol)
{
    double lo = on.lo(), hi = on.hi();
    double flo = F(lo), fhi = F(hi);
    if (std::abs(flo - target) < tol) return lo;
    if (std::abs(fhi - target) < tol) return hi;
    bool up = flo < fhi;
    double vmin = std::min(flo, fhi), vmax = std::max(flo, fhi);
    if (target < vmin || target > vmax) {
        std::ostringstream os;
        os.precision(17);
        os << "find_preimage: target " << target << " outside [" << vmin << ", " << vmax << "]";
        throw NoSolutionError(os.str());
    }
    for (;;) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            return std::abs(flo - target) < std::abs(fhi - target) ? lo : hi;
        double fm = F(mid);
        if (fm < vmin || fm > vmax)
            throw ContractViolation("find_preimage: function not monotone on the bracket");
        if (std::abs(fm - target) < tol) return mid;
        if ((fm < target) == up) {
            lo = mid;
            flo = fm;
            if (up) vmin = fm; else vmax = fm;
        } else {
            hi = mid;
            fhi = fm;
            if (up) vmax = fm; else vmin = fm;
        }
    }
}

}  // namespace sunimodal
