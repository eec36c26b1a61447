#include "sunimodal/branchwise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace sunimodal {

double mobius_fit(const Interval& d, const Interval& dt, double pin_x, double pin_y, double x)
{
    double tp = d.to_unit(pin_x), sp = dt.to_unit(pin_y);
    double k = sp * (1 - tp) / (tp * (1 - sp));
    double t = d.to_unit(x);
    return dt.from_unit(k * t / (1 + (k - 1) * t));
}

// |(f^s)'(x)| along the branch orbit
static double branch_gain(const UnimodalMap& f, const Branch& b, double x)
{
    double g = 1;
    for (int j = 0; j < b.s; ++j) {
        g *= std::abs(f.derivative(x));
        x = f(x);
    }
    return g;
}

static bool by_x(const MarkedPoint& a, const MarkedPoint& b) { return a.x < b.x; }

void BranchwiseEquivalence::add_marked(std::vector<MarkedPoint> pts)
{
    pts.insert(pts.end(), marked_.begin(), marked_.end());
    std::stable_sort(pts.begin(), pts.end(), by_x);
    // keep the first copy of each x; existing points were appended last, so
    // re-derived copies of an old point win only when bit-identical anyway
    std::vector<MarkedPoint> out;
    out.reserve(pts.size());
    for (auto& p : pts)
        if (out.empty() || out.back().x != p.x) out.push_back(p);
    marked_ = std::move(out);
}

const BranchwiseEquivalence::Piece* BranchwiseEquivalence::piece_at(double x) const
{
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), x,
                               [](double v, const Piece& p) { return v < p.src.lo(); });
    if (it == pieces_.begin()) return nullptr;
    --it;
    return it->src.contains(x) ? &*it : nullptr;
}

double BranchwiseEquivalence::eval_piece(const Piece& p, double x) const
{
    switch (p.rule) {
    case Rule::affine:
        return p.tgt.from_unit(p.src.to_unit(x));
    case Rule::mobius:
        return mobius_fit(p.src, p.tgt, p.pin_x, p.pin_y, x);
    case Rule::monotone_pull: {
        double y = p.xi->apply(source().base(), x);
        return p.xi_hat->invert(target().base(), (*p.inner)(y));
    }
    case Rule::critical_lift: {
        double y = p.xi->apply(source().base(), x);
        return p.xi_hat->invert(target().base(), (*p.inner)(y), p.xi->lap_of(x));
    }
    }
    return x;
}

double BranchwiseEquivalence::eval_gap(double x) const
{
    auto it = std::upper_bound(marked_.begin(), marked_.end(), x,
                               [](double v, const MarkedPoint& p) { return v < p.x; });
    const MarkedPoint& b = *it;
    const MarkedPoint& a = *(it - 1);
    return a.y + (x - a.x) * (b.y - a.y) / (b.x - a.x);
}

double BranchwiseEquivalence::eval_base(double x) const
{
    if (const Piece* p = piece_at(x)) return eval_piece(*p, x);
    return eval_gap(x);
}

double BranchwiseEquivalence::operator()(double x) const
{
    if (x <= -1 || x >= 1) return x;
    auto it = std::lower_bound(marked_.begin(), marked_.end(), x,
                               [](const MarkedPoint& p, double v) { return p.x < v; });
    if (it != marked_.end() && it->x == x) return it->y;
    for (auto& p : patches_) {
        if (!p.src.contains(x)) continue;
        if (p.correct) return mobius_fit(p.tgt, p.tgt, p.pin_base, p.pin_y, eval_base(x));
        return mobius_fit(p.src, p.tgt, p.pin_x, p.pin_y, x);
    }
    return eval_base(x);
}

// carry a leaf of inner (on the image of the branch) back to the domain
static Leaf pull_leaf(const BranchwiseEquivalence::Piece& p, const UnimodalMap& f, const UnimodalMap& g,
                      Leaf t, int lap)
{
    const Interval& img = p.xi->image;
    const Interval& imgh = p.xi_hat->image;
    double lo = std::max(t.src.lo(), img.lo()), hi = std::min(t.src.hi(), img.hi());
    double tlo = t.src.lo() < img.lo() ? imgh.lo() : t.tgt.lo();
    double thi = t.src.hi() > img.hi() ? imgh.hi() : t.tgt.hi();
    Leaf r;
    r.kind = t.kind;
    r.original = t.original;
    if (p.rule == BranchwiseEquivalence::Rule::critical_lift) {
        double c = p.xi->critical_value;
        if (lo == c || hi == c) {
            double o = lo == c ? hi : lo, oh = lo == c ? thi : tlo;
            r.src = Interval::hull(p.xi->invert(f, o, -1), p.xi->invert(f, o, 1));
            r.tgt = Interval::hull(p.xi_hat->invert(g, oh, -1), p.xi_hat->invert(g, oh, 1));
            r.kind = BranchKind::folding;
            r.original = false;
            return r;
        }
    }
    r.src = Interval::hull(p.xi->invert(f, lo, lap), p.xi->invert(f, hi, lap));
    r.tgt = Interval::hull(p.xi_hat->invert(g, tlo, lap), p.xi_hat->invert(g, thi, lap));
    return r;
}

Leaf BranchwiseEquivalence::leaf_at(double x, double min_len) const
{
    for (auto& p : patches_)
        if (p.src.contains_closed(x))
            return Leaf{p.src, p.tgt, p.correct ? BranchKind::folding : BranchKind::monotone};
    const Piece* p = piece_at(x);
    if (!p) {
        // a gap: between the neighboring pieces, or out to +-1
        double lo = -1, hi = 1;
        for (auto& q : pieces_) {
            if (q.src.hi() <= x) lo = std::max(lo, q.src.hi());
            if (q.src.lo() >= x) hi = std::min(hi, q.src.lo());
        }
        if (x <= -1 || x >= 1 || !(lo < hi)) throw DomainError("leaf_at: point outside [-1,1]");
        return Leaf{Interval(lo, hi), Interval((*this)(lo), (*this)(hi)), BranchKind::indifferent};
    }
    if (p->rule == Rule::affine || p->rule == Rule::mobius || p->src.length() < min_len)
        return Leaf{p->src, p->tgt, p->kind, p->rule == Rule::affine && p->kind == BranchKind::folding};
    const UnimodalMap& f = source().base();
    double y = p->xi->apply(f, x);
    double scale = p->xi->image.length() / p->src.length();
    Leaf t = p->inner->leaf_at(y, min_len * scale);
    return pull_leaf(*p, f, target().base(), t, p->xi->lap_of(x));
}

std::vector<Leaf> BranchwiseEquivalence::leaves(double min_len) const
{
    return leaves(Interval(-1, 1), min_len);
}

std::vector<Leaf> BranchwiseEquivalence::leaves(const Interval& window, double min_len) const
{
    std::vector<Leaf> all;
    double cur = -1;
    auto gap = [&](double lo, double hi) {
        if (lo < hi) all.push_back(Leaf{Interval(lo, hi), Interval((*this)(lo), (*this)(hi)),
                                        BranchKind::indifferent});
    };
    const UnimodalMap& f = source().base();
    const UnimodalMap& g = target().base();
    for (auto& p : pieces_) {
        gap(cur, p.src.lo());
        cur = p.src.hi();
        if (p.src.hi() <= window.lo() || p.src.lo() >= window.hi()) continue;
        if (p.rule == Rule::affine || p.rule == Rule::mobius || p.src.length() < min_len) {
            all.push_back(Leaf{p.src, p.tgt, p.kind, p.rule == Rule::affine && p.kind == BranchKind::folding});
            continue;
        }
        double scale = p.xi->image.length() / p.src.length();
        auto inner = p.inner->leaves(p.xi->image, min_len * scale);
        std::vector<int> laps{1};
        if (p.rule == Rule::critical_lift) laps = {-1, 1};
        bool fold_done = false;
        for (int lap : laps)
            for (auto& t : inner) {
                Leaf r = pull_leaf(p, f, g, t, lap);
                if (r.kind == BranchKind::folding && p.rule == Rule::critical_lift &&
                    (std::max(t.src.lo(), p.xi->image.lo()) == p.xi->critical_value ||
                     std::min(t.src.hi(), p.xi->image.hi()) == p.xi->critical_value)) {
                    if (fold_done) continue;
                    fold_done = true;
                }
                all.push_back(r);
            }
    }
    gap(cur, 1);
    if (!patches_.empty()) {
        std::vector<Leaf> kept;
        for (auto& l : all) {
            bool covered = false;
            for (auto& q : patches_)
                if (q.src.contains_closed(l.src.mid())) covered = true;
            if (!covered) kept.push_back(l);
        }
        for (auto& q : patches_)
            kept.push_back(Leaf{q.src, q.tgt, q.correct ? BranchKind::folding : BranchKind::monotone});
        all = std::move(kept);
    }
    std::sort(all.begin(), all.end(), [](const Leaf& a, const Leaf& b) { return a.src.lo() < b.src.lo(); });
    std::vector<Leaf> out;
    for (auto& l : all) {
        double lo = std::max(l.src.lo(), window.lo()), hi = std::min(l.src.hi(), window.hi());
        if (!(lo < hi)) continue;
        Leaf c = l;
        if (lo != l.src.lo() || hi != l.src.hi())
            c.src = Interval(lo, hi), c.tgt = Interval((*this)(lo), (*this)(hi));
        out.push_back(c);
    }
    return out;
}

static void check_correspondence(const InducedMap& src, const InducedMap& tgt)
{
    std::size_t n = std::min(src.size(), tgt.size());
    for (std::size_t i = 0; i < n; ++i)
        if (src[i].kind != tgt[i].kind || src[i].s != tgt[i].s)
            throw CorrespondenceError("branch structures differ at index " + std::to_string(i));
    if (src.size() != tgt.size())
        throw CorrespondenceError("branch structures differ at index " + std::to_string(n));
}

BranchwiseEquivalence primary_equivalence(const InducedMap& src, const InducedMap& tgt, double mark_weight)
{
    check_correspondence(src, tgt);
    BranchwiseEquivalence e;
    e.src_ = std::make_shared<InducedMap>(src);
    e.tgt_ = std::make_shared<InducedMap>(tgt);
    e.weight_ = mark_weight;
    std::vector<MarkedPoint> pts{{-1, -1, 1}, {1, 1, 1},
                                 {src.domain().lo(), tgt.domain().lo(), 1},
                                 {src.domain().hi(), tgt.domain().hi(), 1}};
    for (std::size_t i = 0; i < src.size(); ++i) {
        BranchwiseEquivalence::Piece p;
        p.src = src[i].domain;
        p.tgt = tgt[i].domain;
        p.xi = src.branches()[i];
        p.xi_hat = tgt.branches()[i];
        p.kind = src[i].kind;
        e.pieces_.push_back(p);
        pts.push_back({p.src.lo(), p.tgt.lo(), 1});
        pts.push_back({p.src.hi(), p.tgt.hi(), 1});
    }
    e.add_marked(std::move(pts));
    return e;
}

BranchwiseEquivalence mark(const BranchwiseEquivalence& e, const MarkingCondition& cond, double image,
                           double min_len)
{
    Leaf d = e.leaf_at(cond.start, min_len);
    bool deep = std::isfinite(min_len) && d.kind == BranchKind::folding;
    if ((d.kind != BranchKind::monotone && !deep) || !d.src.contains(cond.start))
        throw PreconditionError("mark: start does not lie inside a monotone domain");
    if (!d.tgt.contains(image))
        throw PreconditionError("mark: image outside the corresponding target domain");
    BranchwiseEquivalence r = e;
    if (!r.patches_.empty())
        throw PreconditionError("mark: equivalence is already marked");
    r.patches_.push_back({d.src, d.tgt, cond.start, image, deep, deep ? e.eval_base(cond.start) : 0});
    std::vector<MarkedPoint> kept;
    for (auto& p : r.marked_)
        if (!d.src.contains(p.x)) kept.push_back(p);
    r.marked_ = std::move(kept);
    r.add_marked({{d.src.lo(), d.tgt.lo(), 1}, {d.src.hi(), d.tgt.hi(), 1}, {cond.start, image, 1}});
    return r;
}

BranchwiseEquivalence pull_back(const BranchwiseEquivalence& outer, std::size_t i, EquivalencePtr inner)
{
    if (i >= outer.pieces_.size()) throw PreconditionError("pull_back: no such branch");
    BranchwiseEquivalence r = outer;
    auto& p = r.pieces_[i];
    const Branch& xi = *p.xi;
    const Branch& xh = *p.xi_hat;
    const UnimodalMap& f = outer.source().base();
    const UnimodalMap& g = outer.target().base();
    p.rule = xi.folding() ? BranchwiseEquivalence::Rule::critical_lift
                          : BranchwiseEquivalence::Rule::monotone_pull;
    p.inner = inner;
    std::vector<BranchwiseEquivalence::Patch> kept;
    for (auto& q : r.patches_)
        if (q.src.hi() <= p.src.lo() || q.src.lo() >= p.src.hi()) kept.push_back(q);
    r.patches_ = std::move(kept);

    std::vector<MarkedPoint> pts;
    std::vector<int> laps{1};
    if (xi.folding()) laps = {-1, 1};
    for (auto& m : inner->marked_points()) {
        if (!xi.image.contains(m.x) && !(xi.folding() && m.x == xi.critical_value)) continue;
        for (int lap : laps) {
            double x = xi.invert(f, m.x, lap);
            if (!p.src.contains(x)) continue;
            double w = m.weight / branch_gain(f, xi, x);
            if (!(w >= r.weight_)) continue;
            pts.push_back({x, xh.invert(g, m.y, lap), m.weight / branch_gain(f, xi, x)});
        }
    }
    r.add_marked(std::move(pts));
    return r;
}

static std::size_t piece_index(const BranchwiseEquivalence& e, const Branch& b)
{
    for (std::size_t i = 0; i < e.pieces().size(); ++i)
        if (e.pieces()[i].xi->domain == b.domain) return i;
    throw PreconditionError("pull-back: branch is not a source branch of the equivalence");
}

BranchwiseEquivalence monotone_pullback(const BranchwiseEquivalence& outer, const Branch& xi,
                                        const Branch& xi_hat, EquivalencePtr inner)
{
    if (xi.kind != BranchKind::monotone || xi_hat.kind != BranchKind::monotone)
        throw PreconditionError("monotone_pullback: branch is not monotone");
    std::size_t i = piece_index(outer, xi);
    if (!(outer.pieces()[i].xi_hat->domain == xi_hat.domain))
        throw CorrespondenceError("monotone_pullback: branches do not correspond");
    const Interval& d = inner->source().domain();
    if (xi.image.lo() < d.lo() - 1e-12 || xi.image.hi() > d.hi() + 1e-12)
        throw CoverageError("monotone_pullback: inner equivalence does not cover the image");
    return pull_back(outer, i, std::move(inner));
}

BranchwiseEquivalence critical_pullback(const BranchwiseEquivalence& outer, const Branch& psi,
                                        const Branch& psi_hat, EquivalencePtr inner, double tol)
{
    if (!psi.folding() || !psi_hat.folding())
        throw PreconditionError("critical_pullback: branch is not folding");
    std::size_t i = piece_index(outer, psi);
    if (!(outer.pieces()[i].xi_hat->domain == psi_hat.domain))
        throw CorrespondenceError("critical_pullback: branches do not correspond");
    double d = std::abs((*inner)(psi.critical_value) - psi_hat.critical_value);
    if (d > tol)
        throw MarkingError("critical_pullback: inner equivalence not marked at the critical value");
    return pull_back(outer, i, std::move(inner));
}

EquivalencePtr marked_at_critical_value(const BranchwiseEquivalence& e, double keep_len)
{
    auto c = e.source().critical_value();
    auto ch = e.target().critical_value();
    if (!c || !ch) return std::make_shared<BranchwiseEquivalence>(e);
    return std::make_shared<BranchwiseEquivalence>(mark(e, MarkingCondition{*c, Side::right}, *ch, keep_len));
}

BranchwiseEquivalence filling_in(const BranchwiseEquivalence& e, int stages, const RefinementBudget& budget)
{
    BranchwiseEquivalence cur = e;
    auto c = e.source().critical_value();
    if (!c) return cur;
    for (int k = 0; k < stages; ++k) {
        EquivalencePtr inner = marked_at_critical_value(cur, budget.keep_len);
        BranchwiseEquivalence next = cur;
        for (std::size_t i = 0; i < cur.pieces().size(); ++i) {
            const Branch& b = *cur.pieces()[i].xi;
            if (b.folding() && b.critical_value == *c)
                next = critical_pullback(next, b, *cur.pieces()[i].xi_hat, inner);
        }
        cur = std::move(next);
    }
    return cur;
}

// one stage: every branch pulls back the previous equivalence
static BranchwiseEquivalence full_step(const BranchwiseEquivalence& e, const RefinementBudget& budget,
                                       const std::vector<bool>& which)
{
    EquivalencePtr inner = marked_at_critical_value(e, budget.keep_len);
    BranchwiseEquivalence next = e;
    for (std::size_t i = 0; i < e.pieces().size(); ++i)
        if (which[i]) next = pull_back(next, i, inner);
    return next;
}

double longest_monotone(const BranchwiseEquivalence& e, double min_len);

static bool inside_external(const BranchwiseEquivalence& e, const Interval& d)
{
    const auto& ps = e.pieces();
    if (ps.empty()) return false;
    return ps.front().src.contains(d) || ps.back().src.contains(d);
}

BranchwiseEquivalence final_refinement(const BranchwiseEquivalence& e, double mesh, const RefinementBudget& budget)
{
    // The leaves next to a fold shrink only when the domain of the critical
    // value does, so a lagging leaf anywhere triggers a pull-back of every branch.
    BranchwiseEquivalence cur = e;
    std::vector<bool> all(cur.pieces().size(), true);
    for (int round = 0; round < budget.final_rounds; ++round) {
        if (!(longest_monotone(cur, mesh / 8) >= mesh)) break;
        cur = full_step(cur, budget, all);
    }
    return cur;
}

double folding_measure(const BranchwiseEquivalence& e, double min_len)
{
    double s = 0;
    for (auto& l : e.leaves(e.source().domain(), min_len))
        if (l.kind == BranchKind::folding && l.original) s += l.src.length();
    return s;
}

double longest_monotone(const BranchwiseEquivalence& e, double min_len)
{
    double m = 0;
    for (auto& l : e.leaves(e.source().domain(), min_len))
        if (l.kind == BranchKind::monotone && !inside_external(e, l.src)) m = std::max(m, l.src.length());
    return m;
}

double max_marked_gap(const BranchwiseEquivalence& e, const Interval& window)
{
    double prev = window.lo(), gap = 0;
    for (auto& p : e.marked_points()) {
        if (p.x <= window.lo() || p.x >= window.hi()) continue;
        gap = std::max(gap, p.x - prev);
        prev = p.x;
    }
    return std::max(gap, window.hi() - prev);
}

double qs_norm_estimate(const std::function<double(double)>& g, int xs, int hs)
{
    if (xs < 2 || hs < 2) throw PreconditionError("qs_norm_estimate: lattice needs xs, hs >= 2");
    // dyadic ladder of steps from 1 down to about 1e-6
    std::vector<int> ks;
    for (int j = 0; j < hs; ++j) ks.push_back(static_cast<int>(std::lround(19.0 * j / (hs - 1))));
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    double best = 1;
    for (int i = 0; i <= xs; ++i) {
        double x = -1 + 2.0 * i / xs;
        double gx = g(x);
        for (int k : ks) {
            double h = std::ldexp(1.0, -k);
            if (x - h < -1 || x + h > 1) continue;
            double num = g(x + h) - gx, den = gx - g(x - h);
            if (!(num > 0) || !(den > 0)) {
                std::ostringstream os;
                os.precision(17);
                os << "qs_norm_estimate: not increasing at (" << x - h << ", " << x << ", " << x + h << ")";
                throw ContractViolation(os.str());
            }
            double r = num / den;
            best = std::max(best, std::max(r, 1 / r));
        }
    }
    return best;
}

ConjugacyResult build_conjugacy(MapPtr f, MapPtr g, const RefinementBudget& budget)
{
    int k = kneading_mismatch(*f, *g, budget.oracle_depth);
    if (k >= 0) throw NotConjugateError("not conjugate at depth " + std::to_string(k));
    auto bd = basic_dynamics_check(f, std::min(budget.stages, 3), budget);
    if (!bd.indeterminate && !bd.pass())
        throw OutOfClassError("basic dynamics fails; the map is renormalizable (see the renorm module)");

    InducedMap m = adjust_to_preferred(first_return_map(f, budget.max_time, budget.min_len), budget.depth);
    InducedMap mh = adjust_to_preferred(first_return_map(g, budget.max_time, budget.min_len), budget.depth);
    ConjugacyOracle H(f, g, budget.oracle_depth);

    ConjugacyResult res{primary_equivalence(m, mh, budget.mark_weight), {}, 0, 0, {}};
    double q = m.domain().hi();
    for (int i = 0; i < budget.probe; ++i) res.probe.push_back(-q + 2 * q * (i + 0.5) / budget.probe);
    std::vector<double> truth;
    for (double x : res.probe) truth.push_back(H(x));
    auto sup = [&](const BranchwiseEquivalence& e) {
        double d = 0;
        for (std::size_t i = 0; i < res.probe.size(); ++i) d = std::max(d, std::abs(e(res.probe[i]) - truth[i]));
        return d;
    };
    auto record = [&](int stage, const BranchwiseEquivalence& e) {
        StageRecord r;
        r.stage = stage;
        r.qs_norm = qs_norm_estimate([&](double x) { return e(x); }, budget.qs_xs, budget.qs_hs);
        r.max_gap = max_marked_gap(e, m.domain());
        r.sup_oracle_distance = sup(e);
        r.folding_measure = folding_measure(e, budget.mark_weight);
        r.marked = e.marked_points().size();
        res.stages.push_back(r);
    };

    BranchwiseEquivalence cur = res.map;
    record(0, cur);
    std::vector<bool> all(cur.pieces().size(), true);
    for (int s = 1; s <= budget.stages; ++s) {
        cur = full_step(cur, budget, all);
        record(s, cur);
    }
    res.map = final_refinement(cur, budget.mesh, budget);
    res.final_sup_distance = sup(res.map);
    res.oracle_qs_norm = qs_norm_estimate([&](double x) { return H(x); }, budget.qs_xs, budget.qs_hs);
    return res;
}

void write_conjugacy_table(std::ostream& os, const ConjugacyResult& r, const std::function<double(double)>& oracle)
{
    auto old = os.precision(17);
    os << "x,built,oracle,diff\n";
    for (double x : r.probe) {
        double b = r.map(x), o = oracle(x);
        os << x << ',' << b << ',' << o << ',' << std::abs(b - o) << '\n';
    }
    os.precision(old);
}

std::string diagnostics_json(const ConjugacyResult& r)
{
    nlohmann::json j;
    j["stages"] = nlohmann::json::array();
    for (auto& s : r.stages)
        j["stages"].push_back({{"stage", s.stage},
                               {"qs_norm", s.qs_norm},
                               {"max_gap", s.max_gap},
                               {"sup_oracle_distance", s.sup_oracle_distance},
                               {"folding_measure", s.folding_measure},
                               {"marked_points", s.marked}});
    j["final_sup_oracle_distance"] = r.final_sup_distance;
    j["oracle_qs_norm"] = r.oracle_qs_norm;
    j["marked_points"] = r.map.marked_points().size();
    return j.dump(2);
}

}  // namespace sunimodal
