#include "sunimodal/induced.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace sunimodal {

const char* to_string(BranchKind k)
{
    switch (k) {
    case BranchKind::monotone: return "monotone";
    case BranchKind::folding: return "folding";
    case BranchKind::indifferent: return "indifferent";
    }
    return "?";
}

// sign of the derivative of f^n along a sign pattern, 0 entries ignored
static int orient_prefix(const std::vector<signed char>& it, int n)
{
    int o = 1;
    for (int j = 0; j < n; ++j)
        if (it[j] > 0) o = -o;
    return o;
}

int Branch::orientation() const
{
    if (!folding()) return orient_prefix(itinerary, s);
    // right lap: the settled step lands on the positive side of 0 when
    // f^settled increases
    int pre = orient_prefix(itinerary, settled);
    int o = pre;
    if (pre > 0) o = -o;   // right-lap symbol is +1 exactly when pre > 0
    for (int j = settled + 1; j < s; ++j)
        if (itinerary[j] > 0) o = -o;
    return o;
}

double Branch::apply(const UnimodalMap& f, double x) const
{
    for (int j = 0; j < s; ++j) x = f(x);
    return x;
}

double Branch::invert(const UnimodalMap& f, double y, int lap) const
{
    int fold_sym = 0;
    if (folding()) fold_sym = lap * orient_prefix(itinerary, settled);
    for (int j = s - 1; j >= 0; --j) {
        int sym = itinerary[j];
        if (sym == 0) sym = fold_sym;
        y = f.inverse_branch(y, sym);
    }
    return y;
}

Branch Branch::monotone_from(const UnimodalMap& f, Interval domain, int n)
{
    Branch b;
    b.domain = domain;
    b.s = n;
    double x = domain.mid();
    for (int j = 0; j < n; ++j) {
        b.itinerary.push_back(x < 0 ? -1 : 1);
        x = f(x);
    }
    b.image = Interval::hull(b.apply(f, domain.lo()), b.apply(f, domain.hi()));
    return b;
}

InducedMap::InducedMap(MapPtr f, Interval domain, std::vector<BranchPtr> branches)
    : f_(std::move(f)), domain_(domain), branches_(std::move(branches))
{
    for (std::size_t i = 1; i < branches_.size(); ++i)
        if (branches_[i - 1]->domain.hi() > branches_[i]->domain.lo())
            throw ContractViolation("induced map: overlapping or unsorted branch domains");
}

std::optional<std::size_t> InducedMap::locate(double x) const
{
    auto it = std::upper_bound(branches_.begin(), branches_.end(), x,
                               [](double v, const BranchPtr& b) { return v < b->domain.lo(); });
    if (it == branches_.begin()) return std::nullopt;
    --it;
    if (!(*it)->domain.contains(x)) return std::nullopt;
    return static_cast<std::size_t>(it - branches_.begin());
}

double InducedMap::apply(double x) const
{
    auto i = locate(x);
    if (!i)
        throw DomainError("induced map: point not in any branch domain");
    return branches_[*i]->apply(*f_, x);
}

std::vector<std::size_t> InducedMap::folding() const
{
    std::vector<std::size_t> r;
    for (std::size_t i = 0; i < branches_.size(); ++i)
        if (branches_[i]->folding()) r.push_back(i);
    return r;
}

std::optional<double> InducedMap::critical_value() const
{
    auto c = locate(0.0);
    if (c && branches_[*c]->folding()) return branches_[*c]->critical_value;
    for (auto& b : branches_)
        if (b->folding()) return b->critical_value;
    return std::nullopt;
}

double InducedMap::gap_measure() const
{
    double covered = 0;
    for (auto& b : branches_) covered += b->domain.length();
    return std::max(0.0, domain_.length() - covered);
}

std::size_t InducedMap::extreme(Side side) const
{
    if (branches_.empty())
        throw PreconditionError("induced map has no branches");
    return side == Side::left ? 0 : branches_.size() - 1;
}

bool InducedMap::is_external(std::size_t i) const
{
    return i == 0 || i + 1 == branches_.size();
}

InducedMap first_return_map(MapPtr fp, int max_time, double min_len)
{
    const UnimodalMap& f = *fp;
    double q = fixed_point_q(f);
    Interval dom(-q, q);

    // Right half first.  The piece (0, d) still travelling outside (-q,q)
    // maps onto (f^k(0), q); whenever f^k(0) < -q the part landing in
    // (-q,q) splits off as a monotone branch with full image.
    std::vector<signed char> it{1};
    std::vector<Branch> right;
    double d = q;          // outer end of the travelling piece
    double e0 = f(0.0);    // image of its inner end
    bool central = false;
    Branch centre;
    for (int k = 1; k < max_time; ++k) {
        it.push_back(e0 < 0 ? -1 : 1);
        e0 = f(e0);
        int time = k + 1;
        if (e0 > -q) {
            if (e0 < q) {
                centre.domain = Interval(-d, d);
                centre.s = time;
                centre.kind = BranchKind::folding;
                centre.settled = 0;
                centre.fold_point = 0;
                centre.critical_value = e0;
                centre.itinerary = it;
                centre.itinerary[0] = 0;
                centre.image = Interval::hull(e0, q);
                central = true;
            }
            break;
        }
        Branch b;
        b.s = time;
        b.itinerary = it;
        double lo = b.invert(f, -q);
        if (!(lo > 0 && lo < d) || d - lo < min_len) break;
        b.domain = Interval(lo, d);
        b.image = dom;
        right.push_back(b);
        d = lo;
    }
    if (right.empty() && !central)
        throw BudgetError("first_return_map: no branch found within max_time");

    std::vector<BranchPtr> all;
    // right holds branches from q inward
    for (auto& r : right) {
        Branch b = r;
        b.domain = Interval(-r.domain.hi(), -r.domain.lo());
        b.itinerary[0] = -1;
        all.push_back(std::make_shared<Branch>(b));
    }
    if (central) all.push_back(std::make_shared<Branch>(centre));
    for (auto r = right.rbegin(); r != right.rend(); ++r) all.push_back(std::make_shared<Branch>(*r));
    return InducedMap(fp, dom, std::move(all));
}

Interval monotone_extension(const UnimodalMap& f, const Interval& domain,
                            const std::vector<signed char>& itinerary, int n)
{
    if (n == 0) return Interval(-1, 1);
    double top = f.critical_value(), bottom = f(1.0);
    double lo, hi;
    // the last step may use the whole half interval on its side
    if (itinerary[n - 1] > 0) { lo = 0; hi = 1; }
    else { lo = -1; hi = 0; }
    for (int j = n - 2; j >= 0; --j) {
        double a = std::max(lo, bottom), b = std::min(hi, top);
        if (!(a < b))
            throw ContractViolation("monotone_extension: empty pull back");
        int sym = itinerary[j];
        double x1 = f.inverse_branch(a, sym), x2 = f.inverse_branch(b, sym);
        lo = std::min(x1, x2);
        hi = std::max(x1, x2);
    }
    lo = std::min(lo, domain.lo());
    hi = std::max(hi, domain.hi());
    return Interval(lo, hi);
}

static double margin_of(const UnimodalMap& f, const Interval& dom,
                        const std::vector<signed char>& it, int n)
{
    Interval ext = monotone_extension(f, dom, it, n);
    if (ext.lo() >= dom.lo() || ext.hi() <= dom.hi()) return 0;
    auto g = [&](double x) { return f.iterate(x, n); };
    double ga = g(dom.lo()), gb = g(dom.hi()), gc = g(ext.lo()), gd = g(ext.hi());
    if (ga == gc || gb == gd) return 0;
    return cross_ratio(ga, gb, gc, gd);
}

double extendability_margin(const UnimodalMap& f, const Branch& b)
{
    if (b.kind == BranchKind::indifferent)
        throw PreconditionError("extendability_margin: indifferent branch");
    if (!b.folding()) return margin_of(f, b.domain, b.itinerary, b.s);
    // The critical factor starts at the critical value, which for the families
    // here is an end of [-1,1]; only the settled factor has room to extend.
    std::vector<signed char> pre(b.itinerary.begin(), b.itinerary.begin() + b.settled);
    return margin_of(f, b.domain, pre, b.settled);
}

static Branch compose_one(const UnimodalMap& f, const Branch& outer, int lap,
                          const Branch& inner, Interval domain)
{
    Branch r;
    r.domain = domain;
    r.s = outer.s + inner.s;
    r.kind = inner.kind;
    r.itinerary = outer.itinerary;
    if (outer.folding()) r.itinerary[outer.settled] = static_cast<signed char>(
        lap * orient_prefix(outer.itinerary, outer.settled));
    r.itinerary.insert(r.itinerary.end(), inner.itinerary.begin(), inner.itinerary.end());
    r.image = inner.image;
    if (inner.folding()) {
        r.settled = outer.s + inner.settled;
        r.fold_point = outer.invert(f, inner.fold_point, lap);
        r.critical_value = inner.critical_value;
    }
    return r;
}

// folding outer followed by a monotone inner branch on the whole domain (or
// on the part of it that maps into inner)
static Branch compose_fold(const UnimodalMap& f, const Branch& outer, const Branch& inner,
                           Interval domain, double far)
{
    Branch r;
    r.domain = domain;
    r.s = outer.s + inner.s;
    r.kind = BranchKind::folding;
    r.settled = outer.settled;
    r.fold_point = outer.fold_point;
    r.itinerary = outer.itinerary;
    r.itinerary.insert(r.itinerary.end(), inner.itinerary.begin(), inner.itinerary.end());
    r.critical_value = inner.apply(f, outer.critical_value);
    // far is an end of inner's domain, so it lands on an end of inner's image
    double e = inner.apply(f, far);
    e = std::abs(e - inner.image.lo()) < std::abs(e - inner.image.hi()) ? inner.image.lo() : inner.image.hi();
    r.image = Interval::hull(r.critical_value, e);
    return r;
}

std::vector<BranchPtr> compose_branch(const UnimodalMap& f, const Branch& outer,
                                      const InducedMap& inner, double keep_len, int escape_budget)
{
    std::vector<BranchPtr> out;
    const double slack = 1e-12;
    auto inside = [&](const Interval& d, const Interval& img) {
        return d.lo() >= img.lo() - slack && d.hi() <= img.hi() + slack;
    };
    if (outer.kind == BranchKind::indifferent)
        throw PreconditionError("compose_branch: indifferent branch");
    if (!outer.folding()) {
        for (auto& D : inner.branches()) {
            if (!inside(D->domain, outer.image)) continue;
            double x1 = outer.invert(f, D->domain.lo()), x2 = outer.invert(f, D->domain.hi());
            if (std::abs(x1 - x2) < keep_len) continue;
            out.push_back(std::make_shared<Branch>(
                compose_one(f, outer, 0, *D, Interval::hull(x1, x2))));
        }
    } else {
        double c = outer.critical_value;
        auto k = inner.locate(c);
        if (!k)
            throw BudgetError("compose_branch: critical value lies in an unresolved gap");
        const Branch& Dc = inner[*k];
        if (Dc.folding())
            throw OutOfClassError("compose_branch: critical value falls into a folding domain");
        // the image end away from the critical value
        double far = std::abs(outer.image.lo() - c) < std::abs(outer.image.hi() - c)
                         ? outer.image.hi() : outer.image.lo();
        if (Dc.domain.contains_closed(outer.image.lo()) && Dc.domain.contains_closed(outer.image.hi())) {
            Branch g = compose_fold(f, outer, Dc, outer.domain, far);
            int n = 0;
            while (Dc.domain.contains_closed(g.image.lo()) && Dc.domain.contains_closed(g.image.hi())) {
                if (++n > escape_budget)
                    throw BudgetError("compose_branch: critical value never escapes the extreme domain");
                double gfar = std::abs(g.image.lo() - g.critical_value) <
                                      std::abs(g.image.hi() - g.critical_value)
                                  ? g.image.hi() : g.image.lo();
                g = compose_fold(f, g, Dc, g.domain, gfar);
            }
            out.push_back(std::make_shared<Branch>(g));
            return out;
        }
        for (int lap : {-1, 1}) {
            for (std::size_t i = 0; i < inner.size(); ++i) {
                if (i == *k) continue;
                const Branch& D = inner[i];
                if (!inside(D.domain, outer.image)) continue;
                double x1 = outer.invert(f, D.domain.lo(), lap), x2 = outer.invert(f, D.domain.hi(), lap);
                if (std::abs(x1 - x2) < keep_len) continue;
                out.push_back(std::make_shared<Branch>(
                    compose_one(f, outer, lap, D, Interval::hull(x1, x2))));
            }
        }
        // the end of Dc inside the image
        double dfar = std::abs(Dc.domain.lo() - far) < std::abs(Dc.domain.hi() - far)
                          ? Dc.domain.lo() : Dc.domain.hi();
        if (outer.image.contains(Dc.domain.lo()) || outer.image.contains(Dc.domain.hi())) {
            double xl = outer.invert(f, dfar, -1), xr = outer.invert(f, dfar, 1);
            Branch g = compose_fold(f, outer, Dc, Interval::hull(xl, xr), dfar);
            out.push_back(std::make_shared<Branch>(g));
        }
    }
    std::sort(out.begin(), out.end(),
              [](const BranchPtr& a, const BranchPtr& b) { return a->domain.lo() < b->domain.lo(); });
    return out;
}

InducedMap replace_branches(const InducedMap& m, const std::vector<std::size_t>& which,
                            const std::vector<std::vector<BranchPtr>>& parts)
{
    std::vector<BranchPtr> all;
    all.reserve(m.size());
    std::size_t w = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (w < which.size() && which[w] == i) {
            all.insert(all.end(), parts[w].begin(), parts[w].end());
            ++w;
        } else {
            all.push_back(m.branches()[i]);
        }
    }
    return InducedMap(m.base_ptr(), m.domain(), std::move(all));
}

InducedMap boundary_refine(const InducedMap& m, Side side, int depth, double keep_len)
{
    InducedMap cur = m;
    for (int k = 0; k < depth; ++k) {
        std::size_t i = cur.extreme(side);
        if (cur[i].folding())
            throw PreconditionError("boundary_refine: extreme branch is folding");
        auto parts = compose_branch(cur.base(), cur[i], m, keep_len, 0);
        if (parts.empty()) break;
        cur = replace_branches(cur, {i}, {parts});
    }
    return cur;
}

InducedMap boundary_refine_to(const InducedMap& m, Side side, double x, int budget, double keep_len)
{
    InducedMap cur = m;
    if (!cur[cur.extreme(side)].domain.contains(x))
        throw PreconditionError("boundary_refine_to: point not in the extreme branch");
    for (int n = 0; cur[cur.extreme(side)].domain.contains(x); ++n) {
        if (n >= budget)
            throw BudgetError("boundary_refine_to: point not separated within budget");
        std::size_t before = cur.size();
        cur = boundary_refine(cur, side, 1, keep_len);
        if (cur.size() == before)
            throw BudgetError("boundary_refine_to: refinement below resolution");
    }
    return cur;
}

InducedMap refine_to_adjacent_folding_depth(const InducedMap& m, std::size_t i,
                                            const RefinementBudget& cfg)
{
    if (i >= m.size() || m[i].kind != BranchKind::monotone)
        throw PreconditionError("refine_to_adjacent_folding_depth: branch is not monotone");
    const Branch& b = m[i];
    int side = 0;
    const Branch* F = nullptr;
    if (i > 0 && m[i - 1].folding() && m[i - 1].domain.hi() == b.domain.lo()) {
        F = &m[i - 1];
        side = -1;
    } else if (i + 1 < m.size() && m[i + 1].folding() && m[i + 1].domain.lo() == b.domain.hi()) {
        F = &m[i + 1];
        side = 1;
    }
    if (!F)
        throw PreconditionError("refine_to_adjacent_folding_depth: no folding neighbor");
    double target = cfg.comparability * F->domain.length();
    if (b.domain.length() <= target) return m;
    InducedMap cur = m;
    std::size_t idx = i;
    for (int n = 0; cur[idx].domain.length() > target; ++n) {
        if (n > cfg.depth)
            throw BudgetError("refine_to_adjacent_folding_depth: budget exhausted");
        auto parts = compose_branch(cur.base(), cur[idx], m, cfg.min_len, 0);
        if (parts.empty())
            throw BudgetError("refine_to_adjacent_folding_depth: refinement below resolution");
        std::size_t off = side < 0 ? 0 : parts.size() - 1;
        cur = replace_branches(cur, {idx}, {parts});
        idx += off;
    }
    return cur;
}

PreferredReport is_preferred(const InducedMap& m, double epsilon)
{
    PreferredReport r;
    const UnimodalMap& f = m.base();
    r.min_margin = std::numeric_limits<double>::infinity();
    auto c = m.critical_value();
    for (std::size_t i = 0; i < m.size(); ++i) {
        const Branch& b = m[i];
        if (b.kind == BranchKind::indifferent) {
            r.monotone_or_folding = false;
            continue;
        }
        double mg = extendability_margin(f, b);
        r.min_margin = std::min(r.min_margin, mg);
        if (!(mg > epsilon)) r.extendable = false;
        if (b.folding()) {
            if (b.critical_value != *c) r.common_critical_value = false;
            for (std::size_t e : {m.extreme(Side::left), m.extreme(Side::right)})
                if (m[e].domain.contains_closed(b.image.lo()) && m[e].domain.contains_closed(b.image.hi()))
                    r.image_not_external = false;
        }
    }
    if (m.size() && (m[0].folding() || m[m.size() - 1].folding())) r.external_monotone = false;
    return r;
}

InducedMap adjust_to_preferred(const InducedMap& m, int budget)
{
    auto c = m.critical_value();
    if (!c) return m;
    std::vector<std::size_t> which;
    std::vector<std::vector<BranchPtr>> parts;
    for (std::size_t i : m.folding()) {
        const Branch& F = m[i];
        const Branch* X = nullptr;
        for (std::size_t e : {m.extreme(Side::left), m.extreme(Side::right)}) {
            const Branch& E = m[e];
            if (!E.folding() && E.domain.contains_closed(F.image.lo()) &&
                E.domain.contains_closed(F.image.hi()))
                X = &E;
        }
        if (!X) continue;
        Branch g = F;
        int n = 0;
        while (X->domain.contains_closed(g.image.lo()) && X->domain.contains_closed(g.image.hi())) {
            if (++n > budget)
                throw BudgetError("adjust_to_preferred: critical value never escapes");
            double far = std::abs(g.image.lo() - g.critical_value) < std::abs(g.image.hi() - g.critical_value)
                             ? g.image.hi() : g.image.lo();
            g = compose_fold(m.base(), g, *X, g.domain, far);
        }
        which.push_back(i);
        parts.push_back({std::make_shared<Branch>(g)});
    }
    if (which.empty()) return m;
    return replace_branches(m, which, parts);
}

InducedMap critical_step(const InducedMap& m, const InducedMap& inner, double keep_len)
{
    auto c = m.critical_value();
    if (!c) return m;
    std::vector<std::size_t> which;
    std::vector<std::vector<BranchPtr>> parts;
    for (std::size_t i : m.folding()) {
        if (m[i].critical_value != *c) continue;
        which.push_back(i);
        parts.push_back(compose_branch(m.base(), m[i], inner, keep_len, 200));
    }
    return replace_branches(m, which, parts);
}

bool BasicDynamicsReport::pass() const
{
    if (indeterminate) return false;
    return std::all_of(stages.begin(), stages.end(), [](bool b) { return b; });
}

BasicDynamicsReport basic_dynamics_check(MapPtr f, int stages, const RefinementBudget& budget)
{
    BasicDynamicsReport rep;
    if (stages <= 0) return rep;
    InducedMap m = first_return_map(f, budget.max_time, budget.min_len);
    if (!m.critical_value()) {
        rep.indeterminate = true;
        rep.note = "critical point does not return within max_time";
        return rep;
    }
    try {
        m = adjust_to_preferred(m, budget.depth);
        for (int k = 0; k < stages; ++k) {
            double c = *m.critical_value();
            auto i = m.locate(c);
            if (!i) {
                rep.indeterminate = true;
                rep.note = "critical value in an unresolved gap at stage " + std::to_string(k + 1);
                return rep;
            }
            bool ok = m[*i].kind == BranchKind::monotone;
            rep.stages.push_back(ok);
            if (!ok) {
                rep.note = "critical value in a folding domain at stage " + std::to_string(k + 1);
                return rep;
            }
            if (k + 1 == stages) break;
            InducedMap e = m;
            for (int t = 0; t < std::max(1, budget.fill); ++t) e = critical_step(m, e, budget.keep_len);
            m = e;
            if (m.size() > budget.max_branches) {
                rep.indeterminate = true;
                rep.note = "branch budget exhausted at stage " + std::to_string(k + 1);
                return rep;
            }
        }
    } catch (const BudgetError& e) {
        rep.indeterminate = true;
        rep.note = e.what();
    }
    return rep;
}

void write_branch_table(std::ostream& os, const InducedMap& m)
{
    auto old = os.precision(17);
    os << "lo,hi,s,kind,settled,image_lo,image_hi,margin\n";
    for (auto& b : m.branches()) {
        double mg = extendability_margin(m.base(), *b);
        os << b->domain.lo() << ',' << b->domain.hi() << ',' << b->s << ',' << to_string(b->kind) << ','
           << (b->folding() ? b->settled : b->s) << ',' << b->image.lo() << ',' << b->image.hi() << ','
           << mg << '\n';
    }
    os.precision(old);
}

double max_adjacent_ratio(const InducedMap& m)
{
    double r = 1;
    for (std::size_t i = 1; i < m.size(); ++i) {
        double a = m[i - 1].domain.length(), b = m[i].domain.length();
        r = std::max(r, std::max(a / b, b / a));
    }
    return r;
}

}  // namespace sunimodal
