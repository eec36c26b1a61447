#include "sunimodal/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace sunimodal {

static double fold_derivative(const UnimodalMap& f, const Branch& b, double x)
{
    double d = 1;
    for (int j = 0; j < b.s; ++j) {
        d *= f.derivative(x);
        x = f(x);
    }
    return d;
}

std::optional<RestrictiveInterval> detect_restrictive(const InducedMap& m, int budget)
{
    if (budget < 3) throw PreconditionError("detect_restrictive: budget must be at least 3");
    const UnimodalMap& f = m.base();
    const Branch* psi = nullptr;
    for (std::size_t i : m.folding())
        if (m[i].domain.contains(0.0)) psi = &m[i];
    if (!psi) return std::nullopt;
    const Interval& dom = psi->domain;
    double cv = psi->critical_value;
    double x = cv;
    for (int k = 0; k < budget; ++k) {
        if (!dom.contains(x)) return std::nullopt;
        x = psi->apply(f, x);
    }
    // the symmetric boundary: |psi(r)| = r, searched from the end of the domain inward
    auto g = [&](double t) { return std::abs(psi->apply(f, t)) - t; };
    double hi = dom.hi(), r = 0;
    if (std::abs(g(hi)) <= 1e-12) {
        r = hi;
    } else {
        const int n = 400;
        double prev = hi, gp = g(hi);
        for (int i = n - 1; i >= 1 && r == 0; --i) {
            double t = hi * i / n, gt = g(t);
            if ((gt > 0) != (gp > 0)) {
                double a = t, b = prev;
                for (int k = 0; k < 100; ++k) {
                    double mid = 0.5 * (a + b);
                    ((g(mid) > 0) == (gt > 0) ? a : b) = mid;
                }
                r = 0.5 * (a + b);
            }
            prev = t;
            gp = gt;
        }
    }
    if (!(r > 0) || std::abs(cv) > r * (1 + 1e-12)) return std::nullopt;
    if (!(std::abs(fold_derivative(f, *psi, r)) > 1)) return std::nullopt;
    for (int i = 0; i <= 100; ++i) {
        double t = -r + 2 * r * i / 100;
        if (std::abs(psi->apply(f, t)) > r * (1 + 1e-9)) return std::nullopt;
    }
    RestrictiveInterval ri;
    ri.interval = Interval(-r, r);
    ri.fold = *psi;
    ri.period = psi->s;
    ri.verified_iterates = budget;
    return ri;
}

RenormalizedMap::RenormalizedMap(MapPtr f, int period, double radius, int sign)
    : f_(std::move(f)), p_(period), r_(radius), sign_(sign)
{
    if (p_ < 1 || !(r_ > 0) || (sign_ != 1 && sign_ != -1))
        throw PreconditionError("RenormalizedMap: invalid period, radius or sign");
}

std::vector<double> RenormalizedMap::params() const
{
    return {double(p_), r_, double(sign_)};
}

double RenormalizedMap::h(double u) const
{
    double x = f_->h(r_ * r_ * u);
    for (int j = 1; j < p_; ++j) x = (*f_)(x);
    return sign_ * x / r_;
}

Jet RenormalizedMap::h_jet(double u) const
{
    Jet J{r_ * r_ * u, r_ * r_, 0, 0};
    J = compose(f_->h_jet(J.v), J);
    for (int j = 1; j < p_; ++j) J = compose(f_->jet(J.v), J);
    double s = sign_ / r_;
    return {s * J.v, s * J.d1, s * J.d2, s * J.d3};
}

double RenormalizedMap::h_inverse(double y) const
{
    double h0 = h(0.0), h1 = h(1.0);
    if (h0 > h1) {
        if (y >= h0) return 0;
        if (y <= h1) return 1;
        return find_preimage([&](double u) { return -h(u); }, Interval(0, 1), -y, 1e-16);
    }
    if (y <= h0) return 0;
    if (y >= h1) return 1;
    return find_preimage([&](double u) { return h(u); }, Interval(0, 1), y, 1e-16);
}

// the orientation that makes 0 a maximum of the rescaled map, so that it sends the ends to -1
static int max_orientation(const UnimodalMap& f, const RestrictiveInterval& r)
{
    return r.fold.apply(f, r.interval.hi()) > 0 ? -1 : 1;
}

MapPtr renormalize(MapPtr f, const RestrictiveInterval& r)
{
    int sign = max_orientation(*f, r);
    auto g = std::make_shared<RenormalizedMap>(std::move(f), r.period, r.interval.hi(), sign);
    ValidationReport v = validate_class_C(*g);
    if (!v.pass)
        throw RenormalizationError("renormalize: class-C condition " + std::to_string(v.condition) +
                                   " fails (" + v.detail + ")");
    return g;
}

MatchingSequence matching_sequence(MapPtr f, int max_levels, int budget)
{
    if (max_levels < 1) throw PreconditionError("matching_sequence: max_levels must be at least 1");
    MatchingSequence s;
    MapPtr cur = std::move(f);
    for (int level = 0; level < max_levels; ++level) {
        std::optional<RestrictiveInterval> ri;
        MapPtr next;
        try {
            ri = detect_restrictive(first_return_map(cur), budget);
            if (ri) next = renormalize(cur, *ri);
        } catch (const Error&) {
            ri.reset();
        }
        if (!ri) {
            s.terminal = cur;
            return s;
        }
        int sign = static_cast<const RenormalizedMap&>(*next).sign();
        s.levels.push_back({cur, *ri, sign / ri->interval.hi()});
        cur = next;
    }
    return s;
}

int arrival_count(const UnimodalMap& f, const RestrictiveInterval& r, double target, double x, int cap)
{
    int k = 0;
    while (std::abs(x) >= target) {
        if (k == cap) return -1;
        x = r.fold.apply(f, x);
        ++k;
    }
    return k;
}

int escape_count(const UnimodalMap& f, const RestrictiveInterval& r, double x, int cap)
{
    int k = 0;
    while (r.fold.domain.contains(x)) {
        if (k == cap) return -1;
        x = r.fold.apply(f, x);
        ++k;
    }
    return k;
}

// Boundaries of the sets {count <= k} on an arm from `from` toward `to`,
// assuming the count grows toward `to`.
static std::vector<StaircaseStep> steps_on_arm(const std::function<int(double)>& count, double from, double to,
                                               int max_steps)
{
    std::vector<StaircaseStep> steps;
    double prev = from;
    for (int k = 1; k <= max_steps; ++k) {
        double a = prev, b = to;
        auto ok = [&](double x) {
            int c = count(x);
            return c >= 0 && c <= k;
        };
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (a + b);
            if (mid == a || mid == b) break;
            (ok(mid) ? a : b) = mid;
        }
        if (a == prev) break;
        steps.push_back({Interval::hull(prev, a), k});
        prev = a;
    }
    return steps;
}

static void summarize(Staircase& s, double arm_length)
{
    double covered = 0;
    for (auto& st : s.steps) covered += st.right.length();
    s.gap = 2 * std::max(0.0, arm_length - covered);
    if (s.steps.size() < 2) return;
    double sum = 0;
    for (std::size_t i = 1; i < s.steps.size(); ++i) sum += s.steps[i].right.length() / s.steps[i - 1].right.length();
    s.decay = sum / (s.steps.size() - 1);
    s.geometric = s.decay <= 0.99;
}

Staircases build_staircases(MapPtr f, const RestrictiveInterval& r, int max_steps, double max_ratio)
{
    if (max_steps < 1) throw PreconditionError("build_staircases: max_steps must be at least 1");
    const Interval& dom = r.fold.domain;
    double rad = r.interval.hi();
    if (dom.length() / r.interval.length() > max_ratio)
        throw RenormalizationError("build_staircases: fold domain and restrictive interval out of regime");
    Staircases out;
    const int cap = 10 * max_steps + 100;

    out.outer.side = Staircase::Side::outer;
    if (dom.hi() - rad > 1e-12 * rad) {
        auto c = [&](double x) { return escape_count(*f, r, x, cap); };
        out.outer.steps = steps_on_arm(c, dom.hi(), rad, max_steps);
        summarize(out.outer, dom.hi() - rad);
    }

    out.inner.side = Staircase::Side::inner;
    MapPtr g = std::make_shared<RenormalizedMap>(f, r.period, rad, max_orientation(*f, r));
    out.inner_radius = rad * fixed_point_q(*g);
    auto c = [&](double x) { return arrival_count(*f, r, out.inner_radius, x, cap); };
    out.inner.steps = steps_on_arm(c, out.inner_radius, rad, max_steps);
    summarize(out.inner, rad - out.inner_radius);
    return out;
}

StaircaseEquivalence staircase_equivalence(MapPtr f, MapPtr g, int max_steps, int budget)
{
    if (kneading_mismatch(*f, *g, budget) >= 0)
        throw CorrespondenceError("staircase_equivalence: kneading sequences differ");
    auto rf = detect_restrictive(first_return_map(f), budget);
    auto rg = detect_restrictive(first_return_map(g), budget);
    if (!rf || !rg || rf->period != rg->period)
        throw CorrespondenceError("staircase_equivalence: level structures differ");
    Staircases sf = build_staircases(f, *rf, max_steps), sg = build_staircases(g, *rg, max_steps);
    std::size_t n = std::min(sf.inner.steps.size(), sg.inner.steps.size());
    if (n == 0) throw CorrespondenceError("staircase_equivalence: no inner steps");

    // right-arm boundaries b_0 < b_1 < ... < b_n, and the restrictive radius
    std::vector<double> bf{sf.inner_radius}, bg{sg.inner_radius};
    for (std::size_t k = 0; k < n; ++k) {
        bf.push_back(sf.inner.steps[k].right.hi());
        bg.push_back(sg.inner.steps[k].right.hi());
    }
    double Rf = rf->interval.hi(), Rg = rg->interval.hi();
    auto lerp = [](double x, double a, double b, double c, double d) { return c + (x - a) * (d - c) / (b - a); };
    auto fold_f = rf->fold, fold_g = rg->fold;

    auto ups = std::make_shared<std::function<double(double)>>();
    *ups = [=, fw = std::weak_ptr<std::function<double(double)>>(ups)](double x) -> double {
        if (x < 0) return -(*fw.lock())(-x);
        if (x <= bf[0]) return x * bg[0] / bf[0];
        if (x >= bf[n]) return lerp(x, bf[n], Rf, bg[n], Rg);
        std::size_t k = std::upper_bound(bf.begin(), bf.end(), x) - bf.begin();
        if (k == 1) return lerp(x, bf[0], bf[1], bg[0], bg[1]);
        double y = (*fw.lock())(fold_f.apply(*f, x));
        return fold_g.invert(*g, y, 1);
    };

    StaircaseEquivalence r;
    for (std::size_t k = 0; k <= n; ++k) {
        r.nodes.push_back({bf[k], bg[k]});
        r.nodes.push_back({-bf[k], -bg[k]});
    }
    std::sort(r.nodes.begin(), r.nodes.end());
    // equivariance at the step endpoints and at interior points of later steps
    std::vector<double> xs;
    for (std::size_t k = 1; k <= n; ++k) xs.push_back(bf[k]);
    for (int i = 0; i < 100; ++i) {
        std::size_t k = 2 + i % std::max<std::size_t>(1, n - 1);
        if (k > n) k = n;
        double t = (i / 100.0 * 0.8) + 0.1;
        xs.push_back(bf[k - 1] + t * (bf[k] - bf[k - 1]));
    }
    const auto& U = *ups;
    for (double x : xs)
        for (double s : {1.0, -1.0}) {
            double d = std::abs(U(fold_f.apply(*f, s * x)) - fold_g.apply(*g, U(s * x)));
            r.equivariance_defect = std::max(r.equivariance_defect, d);
        }
    r.qs_norm = qs_norm_estimate([&](double t) { return U(Rf * t) / Rg; }, 64, 20);
    r.map = [ups](double x) { return (*ups)(x); };
    return r;
}

void write_level_table(std::ostream& os, const MatchingSequence& s)
{
    auto old = os.precision(17);
    os << "level,interval_lo,interval_hi,period,rescale_slope\n";
    for (std::size_t i = 0; i < s.levels.size(); ++i) {
        const auto& l = s.levels[i];
        os << i << ',' << l.interval.interval.lo() << ',' << l.interval.interval.hi() << ',' << l.interval.period
           << ',' << l.rescale_slope << '\n';
    }
    os.precision(old);
}

void write_staircases(std::ostream& os, const Staircases& s)
{
    auto old = os.precision(17);
    os << "side,step_index,lo,hi,count\n";
    for (const Staircase* st : {&s.outer, &s.inner}) {
        const char* side = st->side == Staircase::Side::inner ? "inner" : "outer";
        for (std::size_t i = 0; i < st->steps.size(); ++i) {
            const auto& p = st->steps[i];
            os << side << ',' << i << ',' << p.right.lo() << ',' << p.right.hi() << ',' << p.count << '\n';
            os << side << ',' << i << ',' << -p.right.hi() << ',' << -p.right.lo() << ',' << p.count << '\n';
        }
    }
    os.precision(old);
}

}  // namespace sunimodal
