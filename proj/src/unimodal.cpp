#include "sunimodal/unimodal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sunimodal {

Jet UnimodalMap::jet(double x) const
{
    Jet hj = h_jet(x * x);
    Jet r;
    r.v = hj.v;
    r.d1 = 2 * x * hj.d1;
    r.d2 = 2 * hj.d1 + 4 * x * x * hj.d2;
    r.d3 = 12 * x * hj.d2 + 8 * x * x * x * hj.d3;
    return r;
}

double UnimodalMap::inverse_branch(double y, int side) const
{
    double u = h_inverse(y);
    return side < 0 ? -std::sqrt(u) : std::sqrt(u);
}

double UnimodalMap::schwarzian(double x) const
{
    Jet j = jet(x);
    if (j.d1 == 0)
        throw SingularityError("schwarzian: derivative vanishes");
    double r = j.d2 / j.d1;
    return j.d3 / j.d1 - 1.5 * r * r;
}

double UnimodalMap::iterate(double x, int n) const
{
    for (int i = 0; i < n; ++i) x = (*this)(x);
    return x;
}

QuadraticMap::QuadraticMap(double a, double c0) : a_(a), c0_(c0)
{
    if (!(a > 0))
        throw DomainError("quadratic family needs a > 0");
}

std::string QuadraticMap::family_id() const
{
    return c0_ == 1.0 ? "quadratic" : "affine_h";
}

std::vector<double> QuadraticMap::params() const
{
    if (c0_ == 1.0) return {a_};
    return {a_, c0_};
}

Jet QuadraticMap::h_jet(double u) const
{
    return {c0_ - a_ * u, -a_, 0, 0};
}

double QuadraticMap::h_inverse(double y) const
{
    return std::clamp((c0_ - y) / a_, 0.0, 1.0);
}

ConjugatedMap::ConjugatedMap(double a, double b) : a_(a), b_(b)
{
    if (!(a > 0 && a <= 2))
        throw DomainError("conjugated family needs 0 < a <= 2");
    if (!(b >= 0))
        throw DomainError("conjugated family needs b >= 0");
}

double ConjugatedMap::phi_inverse(double y) const
{
    if (b_ == 0) return y;
    // odd and increasing; Newton from y converges monotonically on |y|
    double t = std::abs(y), v = t;
    for (int i = 0; i < 100; ++i) {
        double g = v + b_ * v * v * v - (1 + b_) * t;
        double step = g / (1 + 3 * b_ * v * v);
        v -= step;
        if (std::abs(step) <= 1e-17 * (1 + v)) break;
    }
    return std::copysign(v, y);
}

double ConjugatedMap::u_of_w(double w) const
{
    double s = (1 + b_ * w) / (1 + b_);
    return w * s * s;
}

double ConjugatedMap::w_of_u(double u) const
{
    if (b_ == 0 || u <= 0) return u;
    double w = u;
    for (int i = 0; i < 100; ++i) {
        double k = 1 / ((1 + b_) * (1 + b_));
        double du = k * (1 + 4 * b_ * w + 3 * b_ * b_ * w * w);
        double step = (u_of_w(w) - u) / du;
        w -= step;
        if (std::abs(step) <= 1e-17 * (1 + w)) break;
    }
    return w;
}

double ConjugatedMap::h(double u) const
{
    return phi(1 - a_ * w_of_u(u));
}

Jet ConjugatedMap::h_jet(double u) const
{
    double w = w_of_u(u);
    double k = 1 / ((1 + b_) * (1 + b_));
    double U1 = k * (1 + 4 * b_ * w + 3 * b_ * b_ * w * w);
    double U2 = k * (4 * b_ + 6 * b_ * b_ * w);
    double U3 = k * 6 * b_ * b_;
    Jet W{w, 1 / U1, -U2 / (U1 * U1 * U1),
          (3 * U2 * U2 - U1 * U3) / (U1 * U1 * U1 * U1 * U1)};
    double y = 1 - a_ * w;
    Jet inner = compose(Jet{y, -a_, 0, 0}, W);
    Jet P{phi(y), (1 + 3 * b_ * y * y) / (1 + b_), 6 * b_ * y / (1 + b_), 6 * b_ / (1 + b_)};
    return compose(P, inner);
}

double ConjugatedMap::h_inverse(double y) const
{
    double w = std::clamp((1 - phi_inverse(y)) / a_, 0.0, 1.0);
    return std::clamp(u_of_w(w), 0.0, 1.0);
}

ValidationReport validate_class_C(const UnimodalMap& f, int grid, double schwarzian_tol)
{
    if (grid < 2)
        throw PreconditionError("validate_class_C: grid must be at least 2");
    ValidationReport rep;
    auto fail = [&](int cond, double x, const std::string& what) {
        rep.pass = false;
        rep.condition = cond;
        rep.location = x;
        rep.detail = what;
        return rep;
    };
    // 1: [-1,1] into itself
    for (int i = 0; i < grid; ++i) {
        double x = -1 + 2.0 * i / (grid - 1);
        double y = f(x);
        if (!(y >= -1 - 1e-12 && y <= 1 + 1e-12))
            return fail(1, x, "image leaves [-1,1]");
        if (std::abs(y - f(-x)) > 1e-12)
            return fail(3, x, "not even");
    }
    // 2: non-positive Schwarzian off the critical point
    for (int i = 1; i < grid; ++i) {
        double x = double(i) / grid;
        double d = f.derivative(x);
        if (d == 0) continue;
        double s = f.schwarzian(x);
        if (s > schwarzian_tol)
            return fail(2, x, "positive Schwarzian");
    }
    // 3: h a diffeomorphism, i.e. h' of one sign on [0,1]
    double sgn = 0;
    for (int i = 0; i < grid; ++i) {
        double u = double(i) / (grid - 1);
        double d = f.h_jet(u).d1;
        if (d == 0 || !std::isfinite(d))
            return fail(3, u, "h' vanishes");
        if (sgn == 0) sgn = d;
        else if ((d > 0) != (sgn > 0))
            return fail(3, u, "h not monotone");
    }
    // 4: positive critical value
    if (!(f.critical_value() > 0))
        return fail(4, 0.0, "critical value not positive");
    return rep;
}

double fixed_point_q(const UnimodalMap& f)
{
    if (!(f.critical_value() > 0) || f(1.0) > 1.0)
        throw StructureError("fixed_point_q: no positive fixed point");
    double q = find_preimage([&](double x) { return f(x) - x; }, Interval(0.0, 1.0), 0.0, 1e-16);
    // polish with Newton
    for (int i = 0; i < 3; ++i) {
        double step = (f(q) - q) / (f.derivative(q) - 1);
        if (!std::isfinite(step)) break;
        double nq = q - step;
        if (std::abs(f(nq) - nq) <= std::abs(f(q) - q)) q = nq;
    }
    if (std::abs(f(q) - q) >= 1e-12)
        throw StructureError("fixed_point_q: did not converge");
    return q;
}

static char symbol_of(double x, double tol)
{
    if (std::abs(x) < tol) return 'C';
    return x < 0 ? 'L' : 'R';
}

std::string KneadingSequence::str() const
{
    std::string s;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i) s += ' ';
        s += symbols[i];
    }
    return s;
}

KneadingSequence kneading_sequence(const UnimodalMap& f, int n, double tol)
{
    if (n < 1)
        throw PreconditionError("kneading_sequence: n must be positive");
    KneadingSequence k;
    double x = f.critical_value();
    for (int i = 0; i < n; ++i) {
        k.symbols.push_back(symbol_of(x, tol));
        x = f(x);
    }
    return k;
}

int kneading_mismatch(const UnimodalMap& f, const UnimodalMap& g, int n, double tol)
{
    auto a = kneading_sequence(f, n, tol), b = kneading_sequence(g, n, tol);
    for (int i = 0; i < n; ++i)
        if (a.symbols[i] != b.symbols[i]) return i;
    return -1;
}

ConjugacyOracle::ConjugacyOracle(MapPtr f, MapPtr g, int depth, double tol)
    : f_(std::move(f)), g_(std::move(g)), depth_(depth), tol_(tol)
{
    int k = kneading_mismatch(*f_, *g_, depth_, tol_);
    if (k >= 0)
        throw NotConjugateError("not conjugate at depth " + std::to_string(k + 1));
}

double ConjugacyOracle::operator()(double x) const
{
    if (x <= -1 || x >= 1 || x == 0) return x;
    // Walk `lead` steps forward, match the landing point by itinerary
    // bisection, then pull back along the itinerary of x through g.  The pull
    // back contracts, which beats the lap width of plain bisection.
    int lead = depth_ / 2;
    std::vector<int> sym(lead + depth_);
    double y = x;
    int stop = -1;
    for (int j = 0; j < lead + depth_; ++j) {
        if (std::abs(y) < tol_) {
            // a preimage of the critical point: its partner is pinned by 0
            stop = j;
            break;
        }
        sym[j] = y < 0 ? -1 : 1;
        y = (*f_)(y);
    }
    double yh;
    int back;
    if (stop >= 0 && stop <= lead) {
        yh = 0;
        back = stop;
    } else {
        int n = stop < 0 ? depth_ : stop - lead;
        auto cmp = [&](double p) {
            int flips = 0;
            for (int j = 0; j < n; ++j) {
                int s = p < 0 ? -1 : (p > 0 ? 1 : 0);
                int t = sym[lead + j];
                if (s != t) {
                    int c = s < t ? -1 : 1;
                    return (flips & 1) ? -c : c;
                }
                if (s > 0) ++flips;
                p = (*g_)(p);
            }
            // past the tracked symbols the target sits at the critical point
            if (stop >= 0) {
                int c = p < 0 ? -1 : (p > 0 ? 1 : 0);
                return (flips & 1) ? -c : c;
            }
            return 0;
        };
        double lo = -1, hi = 1;
        yh = 0;
        for (;;) {
            double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi || hi - lo <= tol_) {
                yh = mid;
                break;
            }
            int c = cmp(mid);
            if (c == 0) {
                yh = mid;
                break;
            }
            if (c < 0) lo = mid;
            else hi = mid;
        }
        back = lead;
    }
    for (int j = back - 1; j >= 0; --j)
        yh = g_->inverse_branch(yh, sym[j]);
    if (!std::isfinite(yh))
        throw PrecisionError("conjugacy_oracle: pull back lost precision");
    return yh;
}

double conjugacy_oracle(const UnimodalMap& f, const UnimodalMap& g, double x, int depth, double tol)
{
    // non-owning handles; the oracle does not outlive this call
    MapPtr fp(&f, [](const UnimodalMap*) {}), gp(&g, [](const UnimodalMap*) {});
    return ConjugacyOracle(fp, gp, depth, tol)(x);
}

CEFit collet_eckmann_check(const UnimodalMap& f, int N, double tol)
{
    if (N < 10)
        throw PreconditionError("collet_eckmann_check: N must be at least 10");
    CEFit fit;
    std::vector<double> logs;
    double x = f.critical_value(), acc = 0;
    for (int n = 1; n <= N; ++n) {
        if (std::abs(x) < tol) {
            fit.degenerate = true;
            break;
        }
        acc += std::log(std::abs(f.derivative(x)));
        logs.push_back(acc);
        x = f(x);
    }
    int m = static_cast<int>(logs.size());
    fit.n_used = m;
    if (m < 2) {
        fit.degenerate = true;
        return fit;
    }
    double sn = 0, sy = 0, snn = 0, sny = 0;
    for (int i = 0; i < m; ++i) {
        double n = i + 1;
        sn += n;
        sy += logs[i];
        snn += n * n;
        sny += n * logs[i];
    }
    double slope = (m * sny - sn * sy) / (m * snn - sn * sn);
    double icept = (sy - slope * sn) / m;
    double rss = 0;
    for (int i = 0; i < m; ++i) {
        double r = logs[i] - icept - slope * (i + 1);
        rss += r * r;
    }
    fit.a_fit = std::exp(icept);
    fit.b_fit = std::exp(slope);
    fit.residual = std::sqrt(rss / m);
    return fit;
}

std::string MapSpec::to_json() const
{
    nlohmann::json j;
    j["family"] = family;
    j["params"] = params;
    j["label"] = label;
    return j.dump(2);
}

MapSpec MapSpec::from_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw PreconditionError(std::string("map spec: ") + e.what());
    }
    MapSpec s;
    if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
        throw PreconditionError("map spec: missing string field 'family'");
    s.family = j["family"].get<std::string>();
    if (!j.contains("params") || !j["params"].is_array())
        throw PreconditionError("map spec: missing array field 'params'");
    for (std::size_t i = 0; i < j["params"].size(); ++i) {
        if (!j["params"][i].is_number())
            throw PreconditionError("map spec: params[" + std::to_string(i) + "] is not a number");
        s.params.push_back(j["params"][i].get<double>());
    }
    if (j.contains("label")) {
        if (!j["label"].is_string())
            throw PreconditionError("map spec: 'label' is not a string");
        s.label = j["label"].get<std::string>();
    }
    return s;
}

MapSpec MapSpec::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw PreconditionError("map spec: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return from_json(ss.str());
    } catch (const PreconditionError& e) {
        throw PreconditionError(path + ": " + e.what());
    }
}

MapPtr make_map(const MapSpec& spec)
{
    auto need = [&](std::size_t n) {
        if (spec.params.size() != n)
            throw PreconditionError("map spec: family '" + spec.family + "' takes " +
                                    std::to_string(n) + " parameter(s)");
    };
    if (spec.family == "quadratic") {
        need(1);
        return std::make_shared<QuadraticMap>(spec.params[0]);
    }
    if (spec.family == "affine_h") {
        need(2);
        return std::make_shared<QuadraticMap>(spec.params[0], spec.params[1]);
    }
    if (spec.family == "conjugated") {
        need(2);
        return std::make_shared<ConjugatedMap>(spec.params[0], spec.params[1]);
    }
    throw PreconditionError("map spec: unknown family '" + spec.family + "'");
}

MapSpec spec_of(const UnimodalMap& f, const std::string& label)
{
    return {f.family_id(), f.params(), label};
}

}  // namespace sunimodal
