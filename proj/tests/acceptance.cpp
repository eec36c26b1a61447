// One pass/fail line per acceptance criterion, with its measured values and runtime.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "sunimodal/cli.hpp"
#include "sunimodal/complexify.hpp"
#include "sunimodal/renorm.hpp"

using namespace sunimodal;

namespace {

// pinned tolerances
constexpr double kBeltramiTol = 1e-6;
constexpr double kAnchorTol = 1e-9;
constexpr double kDiscrepancyTol = 1e-12;
constexpr double kConjugacySup = 1e-4;
constexpr double kQsStageRatio = 2;
constexpr double kCeTolExact = 0.01;
constexpr double kCeTolConjugated = 0.05;
constexpr double kHeightC = 100;
constexpr double kSlopeLo = 1.7, kSlopeHi = 2.3;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

MapPtr quad(double a) { return std::make_shared<QuadraticMap>(a); }
MapPtr conj(double a) { return std::make_shared<ConjugatedMap>(a, 0.2); }

// monotone branches of the preferred first-return maps, long enough for unit coordinates
std::vector<std::pair<MapPtr, Branch>> fixture_branches()
{
    std::vector<std::pair<MapPtr, Branch>> r;
    for (MapPtr f : {quad(1.9), conj(1.9), quad(2.0)}) {
        InducedMap m = adjust_to_preferred(first_return_map(f));
        for (auto& b : m.branches())
            if (!b->folding() && b->domain.length() > 1e-3) r.push_back({f, *b});
    }
    return r;
}

Outcome beltrami()
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ux(0.05, 0.95), uy(0.01, 0.2);
    double worst = 0;
    int factors = 0;
    for (auto& [f, b] : fixture_branches()) {
        NormalizedBranch nb = branch_chain(*f, b);
        for (auto& p : nb.factors) {
            ++factors;
            PlaneMap F = [&](Complex z) { return tangent_extension(p.h, PlanePoint(z)).z(); };
            for (int i = 0; i < 100; ++i) {
                double x = ux(rng), y = uy(rng) * std::min(x, 1 - x);
                worst = std::max(worst, std::abs(beltrami_tangent(p.h, {x, y}) - beltrami_numeric(F, {x, y}, 1e-5)));
            }
        }
    }
    DiffeoFactor e{[](double x) { return Jet{std::exp(x), std::exp(x), std::exp(x), std::exp(x)}; }, Interval(-5, 5)};
    double anchor = std::abs(std::abs(beltrami_tangent(e, {0.0, 1.0})) - 1 / std::sqrt(5.0));
    return {worst < kBeltramiTol && anchor < kAnchorTol,
            fmt("%.0f factors, max |closed - numeric| %.2e, anchor error %.1e", factors, worst, anchor)};
}

Outcome discrepancy()
{
    auto q = QuadraticFactor::from_vertex(1, 2, 0);
    auto r = quadratic_discrepancy(q, Interval(0, 1), {0.5, 0.2});
    double e = std::abs(r.dx - 0.04);
    return {e < kDiscrepancyTol && r.dy < kDiscrepancyTol, fmt("dx = %.15g, |dy| = %.1e", r.dx, r.dy)};
}

Outcome return_times()
{
    bool ok = true;
    std::string d;
    for (double a : {1.9, 2.0}) {
        auto f = quad(a);
        InducedMap m = first_return_map(f);
        double q = m.domain().hi();
        int covered = 0, bad = 0, n = 10000;
        for (int k = 1; k < n; ++k) {
            double x = -q + 2 * q * k / n;
            auto i = m.locate(x);
            if (!i) continue;
            ++covered;
            int s = 0;
            double y = x;
            for (int j = 1; j <= 200 && !s; ++j) {
                y = (*f)(y);
                if (-q < y && y < q) s = j;
            }
            bad += s != m[*i].s;
        }
        ok = ok && bad == 0 && covered > n - 50;
        d += fmt("a=%.1f: %.0f/%.0f grid points in branches, %.0f mismatches; ", a, covered, n - 1, bad);
    }
    auto f = quad(2.0);
    InducedMap m = first_return_map(f);
    auto i4 = m.locate(0.4), i1 = m.locate(0.1);
    bool anchors = i4 && i1 && m[*i4].s == 2 && m[*i1].s == 4;
    d += anchors ? "s(0.4)=2, s(0.1)=4" : "anchor mismatch";
    return {ok && anchors, d};
}

Outcome conjugacy()
{
    RefinementBudget b;
    b.mesh = 0.05;
    ConjugacyResult r = build_conjugacy(quad(1.9), conj(1.9), b);
    std::size_t n = r.stages.size();
    bool decreasing = n >= 4;
    for (std::size_t i = n - 3; decreasing && i < n; ++i)
        decreasing = r.stages[i].sup_oracle_distance < r.stages[i - 1].sup_oracle_distance;
    double worst_ratio = 1;
    for (std::size_t i = 1; i < n; ++i) {
        double q = r.stages[i].qs_norm / r.stages[i - 1].qs_norm;
        worst_ratio = std::max(worst_ratio, std::max(q, 1 / q));
    }
    double last = r.stages.back().sup_oracle_distance;
    std::string d = "sup by stage:";
    for (auto& s : r.stages) d += fmt(" %.2e", s.sup_oracle_distance);
    d += fmt("; max consecutive qs ratio %.3f", worst_ratio);
    return {decreasing && last < kConjugacySup && worst_ratio < kQsStageRatio, d};
}

Outcome collet_eckmann()
{
    auto a = collet_eckmann_check(*quad(2.0), 30);
    auto c = collet_eckmann_check(*conj(2.0), 30);
    double ea = std::abs(a.b_fit - 4) / 4, ec = std::abs(c.b_fit - 4) / 4;
    return {ea < kCeTolExact && ec < kCeTolConjugated,
            fmt("b_fit %.6f (quadratic), %.6f (conjugated)", a.b_fit, c.b_fit)};
}

Outcome heights()
{
    double C = 1;
    bool inside = true;
    int branches = 0;
    for (auto& [f, b] : fixture_branches()) {
        ++branches;
        NormalizedBranch nb = branch_chain(*f, b);
        for (int i = 0; i < 100; ++i) {
            double x = (i + 0.5) / 100;
            LocalImage r = local_extension(nb, {x, 0.1 * std::min(x, 1 - x)});
            for (auto& p : r.trace.points) inside = inside && p.x > 0 && p.x < 1;
            double q = r.trace.heights.back() / r.trace.heights.front();
            C = std::max(C, std::max(q, 1 / q));
        }
    }
    return {inside && C < kHeightC, fmt("%.0f branches, height ratio constant C = %.4f", branches, C) +
                                        (inside ? ", orbits stay in (0,1)" : ", an orbit left (0,1)")};
}

Outcome delta_sum()
{
    std::vector<double> lx, ly;
    for (auto& [f, b] : fixture_branches()) {
        NormalizedBranch nb = branch_chain(*f, b);
        for (double x : {0.3, 0.5, 0.7})
            for (double k = 1; k <= 16; k *= 2) {
                auto t = orbit_bounds_check(local_extension(nb, {x, 0.2 * std::min(x, 1 - x) / k}).trace);
                lx.push_back(std::log(t.Y));
                ly.push_back(std::log(t.delta_sum));
            }
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
    mx /= lx.size();
    my /= ly.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
    double slope = sxy / sxx;
    return {slope >= kSlopeLo && slope <= kSlopeHi, fmt("slope %.4f over %.0f traces", slope, lx.size())};
}

int step_count(const Staircase& s, double x)
{
    for (const auto& st : s.steps)
        if (st.right.lo() < std::abs(x) && std::abs(x) < st.right.hi()) return st.count;
    return -1;
}

double iterate(const UnimodalMap& f, int p, double x)
{
    for (int j = 0; j < p; ++j) x = f(x);
    return x;
}

Outcome renormalization()
{
    auto s12 = matching_sequence(quad(1.2), 8);
    bool one = s12.levels.size() == 1 && s12.levels[0].interval.period == 2;
    bool valid = one && validate_class_C(*renormalize(quad(1.2), s12.levels[0].interval)).pass;
    bool zero = matching_sequence(quad(2.0), 8).levels.empty();

    int checked = 0, bad = 0;
    // inner arrival counts at a=1.2, outer escape counts in the period-three window
    {
        auto f = quad(1.2);
        auto r = *detect_restrictive(first_return_map(f), 200);
        auto st = build_staircases(f, r, 40);
        double rad = r.interval.hi();
        for (int i = 0; i < 1000; ++i) {
            double x = -rad + 2 * rad * (i + 0.5) / 1000;
            if (std::abs(x) < st.inner_radius) continue;
            int k = 0;
            for (double y = x; std::abs(y) >= st.inner_radius && k <= 200; ++k) y = iterate(*f, 2, y);
            ++checked;
            bad += k != step_count(st.inner, x);
        }
    }
    {
        auto f = quad(1.77);
        auto r = *detect_restrictive(first_return_map(f), 200);
        auto st = build_staircases(f, r, 40);
        const Interval& dom = r.fold.domain;
        for (int i = 0; i < 1000; ++i) {
            double x = dom.lo() + dom.length() * (i + 0.5) / 1000;
            if (r.interval.contains(x)) continue;
            int k = 0;
            for (double y = x; dom.contains(y) && k <= 200; ++k) y = iterate(*f, r.period, y);
            ++checked;
            bad += k != step_count(st.outer, x);
        }
    }
    std::string d = std::string("a=1.2: ") + std::to_string(s12.levels.size()) + " level(s), period " +
                    (s12.levels.empty() ? "-" : std::to_string(s12.levels[0].interval.period)) +
                    ", class C " + (valid ? "yes" : "no") + "; a=2: " + (zero ? "0 levels" : "levels found") +
                    "; staircase counts " + std::to_string(checked - bad) + "/" + std::to_string(checked) +
                    " match direct iteration";
    return {one && valid && zero && bad == 0 && checked > 0, d};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism()
{
    namespace fs = std::filesystem;
    const std::string q19 = R"({"family":"quadratic","params":[1.9]})";
    const std::string g19 = R"({"family":"conjugated","params":[1.9,0.2]})";
    const std::string q12 = R"({"family":"quadratic","params":[1.2]})";
    fs::path root = fs::temp_directory_path() / "sunimodal_acceptance_determinism";
    fs::remove_all(root);
    int files = 0, differ = 0, failed = 0;
    for (const std::string& cmd : commands()) {
        RunConfig c;
        c.command = cmd;
        c.map = cmd == "renorm" || cmd == "staircase" ? q12 : q19;
        c.seed = 42;
        if (cmd == "conjugacy" || cmd == "qsnorm") c.map2 = g19;
        if (cmd == "conjugacy") {
            c.depth = 2;
            c.mesh = 0.1;
            c.grid = 200;
        }
        if (cmd == "qsnorm") c.grid = 32;
        if (cmd == "qc-field") c.grid = 21;
        std::vector<RunResult> rs;
        for (const char* run_dir : {"a", "b"}) {
            c.out = (root / cmd / run_dir).string();
            rs.push_back(run(c));
        }
        if (rs[0].status != 0 || rs[1].status != 0 || rs[0].files != rs[1].files) {
            ++failed;
            continue;
        }
        for (auto& f : rs[0].files) {
            ++files;
            differ += slurp(root / cmd / "a" / f) != slurp(root / cmd / "b" / f);
        }
    }
    fs::remove_all(root);
    return {failed == 0 && differ == 0 && files >= 8,
            std::to_string(commands().size()) + " commands, " + std::to_string(files) + " data files, " +
                std::to_string(differ) + " differ, " + std::to_string(failed) + " runs failed"};
}

}  // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        double limit;   // seconds
        std::function<Outcome()> check;
    };
    const Criterion all[] = {
        {1, "Beltrami closed form", 1, beltrami},
        {2, "quadratic discrepancy anchor", 1, discrepancy},
        {3, "return-time oracle", 10, return_times},
        {4, "conjugacy convergence", 60, conjugacy},
        {5, "Collet-Eckmann anchor", 5, collet_eckmann},
        {6, "height preservation", 30, heights},
        {7, "delta-sum scaling", 10, delta_sum},
        {8, "renormalization", 30, renormalization},
        {9, "determinism", 60, determinism},
    };
    int failures = 0;
    for (const auto& c : all) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool pass = o.pass && sec < c.limit;
        failures += !pass;
        std::printf("criterion %d %-30s %s  %.2fs (limit %.0fs)  %s\n", c.id, c.name, pass ? "PASS" : "FAIL", sec,
                    c.limit, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria pass\n", int(std::size(all)) - failures, std::size(all));
    return failures == 0 ? 0 : 1;
}
