#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "sunimodal/branchwise.hpp"

using namespace sunimodal;

namespace {

struct Fixture {
    MapPtr f = std::make_shared<QuadraticMap>(1.9);
    MapPtr g = std::make_shared<ConjugatedMap>(1.9, 0.2);
    InducedMap m = adjust_to_preferred(first_return_map(f));
    InducedMap mh = adjust_to_preferred(first_return_map(g));
};

const Fixture& fixture()
{
    static Fixture fx;
    return fx;
}

bool increasing_on_grid(const BranchwiseEquivalence& e, int n = 10000)
{
    double prev = e(-1);
    for (int i = 1; i <= n; ++i) {
        double y = e(-1 + 2.0 * i / n);
        if (!(y > prev)) return false;
        prev = y;
    }
    return true;
}

bool pinned(const BranchwiseEquivalence& e)
{
    for (auto& p : e.marked_points())
        if (e(p.x) != p.y) return false;
    return true;
}

std::size_t central(const BranchwiseEquivalence& e)
{
    for (std::size_t i = 0; i < e.pieces().size(); ++i)
        if (e.pieces()[i].kind == BranchKind::folding && e.pieces()[i].src.contains(0.0)) return i;
    return e.pieces().size();
}

}  // namespace

TEST_CASE("primary equivalence")
{
    auto& fx = fixture();
    BranchwiseEquivalence id = primary_equivalence(fx.m, fx.m);
    for (int i = 0; i <= 200; ++i) {
        double x = -1 + i / 100.0;
        CHECK(std::abs(id(x) - x) < 1e-15);
    }
    BranchwiseEquivalence e = primary_equivalence(fx.m, fx.mh);
    CHECK(e(-1) == -1);
    CHECK(e(1) == 1);
    ConjugacyOracle H(fx.f, fx.g);
    for (std::size_t i = 0; i < fx.m.size(); ++i) {
        CHECK(std::abs(H(fx.m[i].domain.lo()) - e(fx.m[i].domain.lo())) < 1e-6);
        CHECK(std::abs(H(fx.m[i].domain.hi()) - e(fx.m[i].domain.hi())) < 1e-6);
    }
    CHECK(increasing_on_grid(e));
    CHECK(pinned(e));
    InducedMap other = first_return_map(std::make_shared<QuadraticMap>(2.0));
    CHECK_THROWS_AS(primary_equivalence(fx.m, other), CorrespondenceError);
}

TEST_CASE("marking")
{
    Interval d(0, 1);
    for (double x : {0.1, 0.3, 0.5, 0.9})
        CHECK(std::abs(mobius_fit(d, d, 0.5, 0.75, x) - 3 * x / (1 + 2 * x)) < 1e-15);
    CHECK(mobius_fit(d, d, 0.5, 0.75, 0.0) == 0);
    CHECK(mobius_fit(d, d, 0.5, 0.75, 1.0) == 1);

    auto& fx = fixture();
    BranchwiseEquivalence e = primary_equivalence(fx.m, fx.mh);
    const Branch& b = fx.m[0];
    const Branch& bh = fx.mh[0];
    double x0 = b.domain.mid(), y0 = bh.domain.lo() + 0.3 * bh.domain.length();
    BranchwiseEquivalence r = mark(e, MarkingCondition{x0, Side::right}, y0);
    CHECK(r(x0) == y0);
    CHECK(increasing_on_grid(r));
    for (int i = 0; i <= 2000; ++i) {
        double x = -1 + i / 1000.0;
        if (b.domain.contains(x)) continue;
        CHECK(r(x) == e(x));
    }
    CHECK_THROWS_AS(mark(r, MarkingCondition{x0, Side::right}, y0), PreconditionError);
    CHECK_THROWS_AS(mark(e, MarkingCondition{x0, Side::right}, 0.9), PreconditionError);
    CHECK_THROWS_AS(mark(e, MarkingCondition{0.0, Side::right}, 0.0), PreconditionError);
}

TEST_CASE("critical pull-back")
{
    auto& fx = fixture();
    BranchwiseEquivalence id = primary_equivalence(fx.m, fx.m);
    std::size_t c = central(id);
    REQUIRE(c < id.pieces().size());
    const Branch& psi = fx.m[c];
    auto inner_id = std::make_shared<BranchwiseEquivalence>(id);
    BranchwiseEquivalence same = critical_pullback(id, psi, psi, inner_id);
    for (int i = 0; i <= 1000; ++i) {
        double x = -1 + i / 500.0;
        CHECK(std::abs(same(x) - id(x)) < 1e-9);
    }

    BranchwiseEquivalence e = primary_equivalence(fx.m, fx.mh);
    const Branch& ph = fx.mh[c];
    EquivalencePtr inner = marked_at_critical_value(e, 1e-10);
    BranchwiseEquivalence r = critical_pullback(e, psi, ph, inner);
    CHECK(r(0.0) == 0.0);
    CHECK(increasing_on_grid(r));
    CHECK(pinned(r));
    // equivariance against the inner equivalence
    const UnimodalMap& f = *fx.f;
    const UnimodalMap& g = *fx.g;
    double worst = 0;
    for (int i = 1; i < 100; ++i) {
        double x = psi.domain.lo() + psi.domain.length() * i / 100.0;
        worst = std::max(worst, std::abs(ph.apply(g, r(x)) - (*inner)(psi.apply(f, x))));
    }
    CHECK(worst < 1e-8);
    // locality
    for (int i = 0; i <= 2000; ++i) {
        double x = -1 + i / 1000.0;
        if (psi.domain.contains(x)) continue;
        CHECK(r(x) == e(x));
    }
    // new marked points inside the fold follow the oracle
    ConjugacyOracle H(fx.f, fx.g);
    int inside = 0;
    for (auto& p : r.marked_points()) {
        if (!psi.domain.contains(p.x)) continue;
        ++inside;
        CHECK(std::abs(H(p.x) - p.y) < 1e-6);
    }
    CHECK(inside > 2);
    CHECK_THROWS_AS(critical_pullback(e, psi, ph, std::make_shared<BranchwiseEquivalence>(e), 1e-12),
                    MarkingError);
    CHECK_THROWS_AS(critical_pullback(e, fx.m[0], fx.mh[0], inner), PreconditionError);
}

TEST_CASE("monotone pull-back")
{
    auto& fx = fixture();
    BranchwiseEquivalence id = primary_equivalence(fx.m, fx.m);
    auto inner_id = std::make_shared<BranchwiseEquivalence>(id);
    const Branch& xi = fx.m[0];
    BranchwiseEquivalence same = monotone_pullback(id, xi, xi, inner_id);
    for (int i = 0; i <= 100; ++i) {
        double x = xi.domain.lo() + xi.domain.length() * i / 100.0;
        CHECK(std::abs(same(x) - x) < 1e-9);
    }

    BranchwiseEquivalence e = primary_equivalence(fx.m, fx.mh);
    const Branch& xh = fx.mh[0];
    EquivalencePtr inner = marked_at_critical_value(e, 1e-10);
    BranchwiseEquivalence r = monotone_pullback(e, xi, xh, inner);
    CHECK(r(xi.domain.lo()) == e(xi.domain.lo()));
    CHECK(r(xi.domain.hi()) == e(xi.domain.hi()));
    const UnimodalMap& f = *fx.f;
    const UnimodalMap& g = *fx.g;
    for (int i = 1; i < 100; ++i) {
        double x = xi.domain.lo() + xi.domain.length() * i / 100.0;
        double direct = xh.invert(g, (*inner)(xi.apply(f, x)));
        CHECK(std::abs(r(x) - direct) < 1e-9);
    }
    for (int i = 0; i <= 2000; ++i) {
        double x = -1 + i / 1000.0;
        if (xi.domain.contains(x)) continue;
        CHECK(r(x) == e(x));
    }
    CHECK(increasing_on_grid(r));
    CHECK(pinned(r));
    std::size_t c = central(e);
    CHECK_THROWS_AS(monotone_pullback(e, fx.m[c], fx.mh[c], inner), PreconditionError);
}

TEST_CASE("filling-in")
{
    auto& fx = fixture();
    BranchwiseEquivalence e = primary_equivalence(fx.m, fx.mh);
    BranchwiseEquivalence zero = filling_in(e, 0);
    for (int i = 0; i <= 200; ++i) {
        double x = -1 + i / 100.0;
        CHECK(zero(x) == e(x));
    }
    double prev = folding_measure(e, 1e-6);
    std::size_t marked = e.marked_points().size();
    for (int k = 1; k <= 4; ++k) {
        BranchwiseEquivalence x = filling_in(e, k);
        double m = folding_measure(x, 1e-6);
        CHECK(m < prev);
        CHECK(x.marked_points().size() >= marked);
        CHECK(pinned(x));
        CHECK(increasing_on_grid(x));
        prev = m;
        marked = x.marked_points().size();
    }
}

TEST_CASE("final refinement")
{
    auto& fx = fixture();
    BranchwiseEquivalence e = primary_equivalence(fx.m, fx.mh);
    BranchwiseEquivalence same = final_refinement(e, 4.0);
    for (int i = 0; i <= 200; ++i) {
        double x = -1 + i / 100.0;
        CHECK(same(x) == e(x));
    }
    BranchwiseEquivalence r = final_refinement(e, 0.05);
    double longest = longest_monotone(r, 0.05 / 8);
    CHECK(longest < 0.05);
    MESSAGE("longest monotone domain after refinement: " << longest);
    for (auto& p : e.marked_points()) CHECK(r(p.x) == p.y);
    CHECK(pinned(r));
    CHECK(increasing_on_grid(r));
}

TEST_CASE("quasisymmetry estimate")
{
    CHECK(qs_norm_estimate([](double x) { return x; }, 32, 12) == 1);
    CHECK(qs_norm_estimate([](double x) { return 0.5 * x + 0.25; }, 32, 12) == 1);
    double cube = qs_norm_estimate([](double x) { return x * x * x; }, 4, 20);
    CHECK(cube >= 7);
    CHECK(qs_norm_estimate([](double x) { return std::tanh(3 * x); }, 16, 8) ==
          qs_norm_estimate([](double x) { return std::tanh(3 * x); }, 16, 8));
    CHECK_THROWS_AS(qs_norm_estimate([](double x) { return -x; }, 8, 4), ContractViolation);
    CHECK_THROWS_AS(qs_norm_estimate([](double x) { return x; }, 1, 4), PreconditionError);
}

TEST_CASE("self conjugacy")
{
    auto f = std::make_shared<QuadraticMap>(1.9);
    RefinementBudget b;
    b.stages = 2;
    b.mesh = 0.05;
    b.probe = 500;
    ConjugacyResult r = build_conjugacy(f, f, b);
    CHECK(r.final_sup_distance < 1e-9);
    CHECK_THROWS_AS(build_conjugacy(f, std::make_shared<QuadraticMap>(1.8), b), NotConjugateError);
    CHECK_THROWS_AS(build_conjugacy(std::make_shared<QuadraticMap>(1.0), std::make_shared<QuadraticMap>(1.0), b),
                    OutOfClassError);
}

TEST_CASE("conjugate pair converges")
{
    auto& fx = fixture();
    RefinementBudget b;
    b.mesh = 0.05;
    ConjugacyResult r = build_conjugacy(fx.f, fx.g, b);
    REQUIRE(r.stages.size() == std::size_t(b.stages + 1));
    for (std::size_t i = 1; i < r.stages.size(); ++i) {
        CHECK(r.stages[i].sup_oracle_distance < r.stages[i - 1].sup_oracle_distance);
        double q = r.stages[i].qs_norm / r.stages[i - 1].qs_norm;
        CHECK(q < 2);
        CHECK(q > 0.5);
        CHECK(r.stages[i].marked >= r.stages[i - 1].marked);
    }
    CHECK(r.stages.back().sup_oracle_distance < 1e-4);
    CHECK(r.final_sup_distance < 1e-4);
    CHECK(r.stages.back().qs_norm < 2 * r.oracle_qs_norm);
    CHECK(r.oracle_qs_norm < 2 * r.stages.back().qs_norm);
    CHECK(increasing_on_grid(r.map));
    CHECK(pinned(r.map));
    for (auto& s : r.stages)
        MESSAGE("stage " << s.stage << " sup " << s.sup_oracle_distance << " qs " << s.qs_norm);

    std::ostringstream os;
    ConjugacyOracle H(fx.f, fx.g);
    write_conjugacy_table(os, r, [&](double x) { return H(x); });
    CHECK(os.str().rfind("x,built,oracle,diff\n", 0) == 0);
    std::string j = diagnostics_json(r);
    CHECK(j.find("sup_oracle_distance") != std::string::npos);
    CHECK(j.find("folding_measure") != std::string::npos);
}
