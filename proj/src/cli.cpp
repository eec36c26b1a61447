#include "sunimodal/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sunimodal/complexify.hpp"
#include "sunimodal/renorm.hpp"

namespace sunimodal {

namespace {

using nlohmann::json;

const char* kVersion = "0.1.0";

bool is_inline(const std::string& s)
{
    auto p = s.find_first_not_of(" \t\r\n");
    return p != std::string::npos && s[p] == '{';
}

MapSpec resolve(const std::string& s, const char* flag)
{
    if (s.empty()) throw PreconditionError(std::string(flag) + " is required for this command");
    try {
        return is_inline(s) ? MapSpec::from_json(s) : MapSpec::load(s);
    } catch (const Error& e) {
        throw PreconditionError(std::string(flag) + ": " + e.what());
    }
}

json spec_json(const std::string& s)
{
    if (s.empty()) return nullptr;
    try {
        return json::parse(resolve(s, "map").to_json());
    } catch (const std::exception&) {
        return s;
    }
}

template <class T>
T or_default(const std::optional<T>& v, T d)
{
    return v ? *v : d;
}

std::string num(double x)
{
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

std::string utc_now()
{
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

class Runner {
public:
    explicit Runner(const RunConfig& c) : c_(c), hash_(config_hash(c)) {}

    RunResult go()
    {
        json results = json::object();
        try {
            check_budgets();
            std::filesystem::create_directories(c_.out);
            results = dispatch();
        } catch (const NotConjugateError& e) {
            res_.status = 2;
            res_.finding = e.what();
        } catch (const OutOfClassError& e) {
            res_.status = 2;
            res_.finding = e.what();
        } catch (const std::exception& e) {
            res_.status = 1;
            res_.finding = e.what();
        }
        write_manifest(results);
        return res_;
    }

private:
    void check_budgets() const
    {
        auto pos = [](auto& v, const char* name) {
            if (v && !(*v > 0)) throw PreconditionError(std::string("--") + name + " must be positive");
        };
        pos(c_.depth, "depth");
        pos(c_.grid, "grid");
        pos(c_.budget, "budget");
        pos(c_.mesh, "mesh");
        pos(c_.tol, "tol");
    }

    std::ofstream open(const std::string& name)
    {
        std::filesystem::path p = std::filesystem::path(c_.out) / name;
        std::ofstream os(p);
        if (!os) throw PreconditionError("cannot write " + p.string());
        os << "# sunimodal " << c_.command << " config " << hash_ << '\n';
        res_.files.push_back(name);
        return os;
    }

    MapPtr map1() const { return make_map(resolve(c_.map, "--map")); }
    MapPtr map2() const { return make_map(resolve(c_.map2, "--map2")); }

    json dispatch()
    {
        const std::string& cmd = c_.command;
        if (cmd == "kneading") return kneading();
        if (cmd == "induce") return induce();
        if (cmd == "conjugacy") return conjugacy();
        if (cmd == "qsnorm") return qsnorm();
        if (cmd == "ce-check") return ce_check();
        if (cmd == "renorm") return renorm();
        if (cmd == "staircase") return staircase();
        if (cmd == "qc-field") return qc_field();
        throw PreconditionError("unknown command '" + cmd + "'");
    }

    json kneading()
    {
        int n = or_default(c_.depth, 16);
        auto k = kneading_sequence(*map1(), n, or_default(c_.tol, 1e-12));
        open("kneading.txt") << k.str() << '\n';
        res_.finding = k.str();
        return {{"length", n}, {"sequence", k.str()}};
    }

    json induce()
    {
        auto f = map1();
        InducedMap m = first_return_map(f, or_default(c_.depth, 64), or_default(c_.mesh, 1e-7));
        InducedMap p = adjust_to_preferred(m, or_default(c_.budget, 200));
        auto os = open("branches.csv");
        write_branch_table(os, p);
        auto rep = is_preferred(p);
        res_.finding = std::to_string(p.branches().size()) + " branches, preferred: " + (rep.ok() ? "yes" : "no");
        return {{"branches", p.branches().size()}, {"folding", p.folding().size()},
                {"domain", {p.domain().lo(), p.domain().hi()}}, {"preferred", rep.ok()}};
    }

    RefinementBudget conjugacy_budget() const
    {
        RefinementBudget b;
        b.stages = or_default(c_.depth, b.stages);
        b.mesh = or_default(c_.mesh, b.mesh);
        b.probe = or_default(c_.grid, b.probe);
        b.depth = or_default(c_.budget, b.depth);
        return b;
    }

    json conjugacy()
    {
        MapPtr f = map1(), g = map2();
        RefinementBudget b = conjugacy_budget();
        ConjugacyResult r = build_conjugacy(f, g, b);
        ConjugacyOracle H(f, g, b.oracle_depth);
        {
            auto os = open("conjugacy.csv");
            write_conjugacy_table(os, r, [&](double x) { return H(x); });
        }
        open("diagnostics.json") << diagnostics_json(r) << '\n';
        res_.finding = "sup distance to oracle " + num(r.final_sup_distance);
        json stages = json::array();
        for (auto& s : r.stages)
            stages.push_back({{"stage", s.stage}, {"qs_norm", s.qs_norm}, {"sup_oracle_distance", s.sup_oracle_distance}});
        return {{"sup_distance", r.final_sup_distance}, {"oracle_qs_norm", r.oracle_qs_norm}, {"stages", stages}};
    }

    json qsnorm()
    {
        MapPtr f = map1(), g = c_.map2.empty() ? f : map2();
        int xs = or_default(c_.grid, 64), hs = or_default(c_.depth, 24);
        ConjugacyOracle H(f, g, or_default(c_.budget, 48));
        double q = fixed_point_q(*f), qh = fixed_point_q(*g);
        double v = qs_norm_estimate([&](double t) { return H(q * t) / qh; }, xs, hs);
        open("qsnorm.csv") << "xs,hs,qs_norm\n" << xs << ',' << hs << ',' << num(v) << '\n';
        res_.finding = "qs norm " + num(v);
        return {{"qs_norm", v}, {"xs", xs}, {"hs", hs}};
    }

    json ce_check()
    {
        int n = or_default(c_.depth, 200);
        CEFit fit = collet_eckmann_check(*map1(), n, or_default(c_.tol, 1e-12));
        json j = {{"a_fit", fit.a_fit}, {"b_fit", fit.b_fit},       {"n_used", fit.n_used},
                  {"residual", fit.residual}, {"degenerate", fit.degenerate}, {"holds", fit.holds()}};
        open("ce.json") << j.dump(2) << '\n';
        res_.finding = fit.degenerate ? "degenerate (critical orbit returns to 0)"
                                      : std::string("Collet-Eckmann ") + (fit.holds() ? "holds" : "fails") +
                                            ", growth rate " + num(fit.b_fit);
        return j;
    }

    json renorm()
    {
        MatchingSequence s = matching_sequence(map1(), or_default(c_.depth, 8), or_default(c_.budget, 200));
        auto os = open("levels.csv");
        write_level_table(os, s);
        res_.finding = std::to_string(s.levels.size()) + " renormalization levels";
        json periods = json::array();
        for (auto& l : s.levels) periods.push_back(l.interval.period);
        return {{"levels", s.levels.size()}, {"periods", periods}};
    }

    json staircase()
    {
        MapPtr f = map1();
        int budget = or_default(c_.budget, 200), steps = or_default(c_.depth, 40);
        auto r = detect_restrictive(first_return_map(f), budget);
        if (!r) {
            res_.status = 2;
            res_.finding = "no restrictive interval at budget " + std::to_string(budget);
            return {{"restrictive", false}};
        }
        Staircases s = build_staircases(f, *r, steps);
        {
            auto os = open("staircases.csv");
            write_staircases(os, s);
        }
        json j = {{"restrictive", true},
                  {"period", r->period},
                  {"interval", {r->interval.lo(), r->interval.hi()}},
                  {"inner_steps", s.inner.steps.size()},
                  {"inner_gap", s.inner.gap},
                  {"inner_decay", s.inner.decay},
                  {"outer_steps", s.outer.steps.size()},
                  {"outer_gap", s.outer.gap},
                  {"outer_decay", s.outer.decay}};
        if (!s.inner.geometric || (!s.outer.steps.empty() && !s.outer.geometric))
            j["warning"] = "step lengths do not decay geometrically";
        if (!c_.map2.empty()) {
            StaircaseEquivalence e = staircase_equivalence(f, map2(), steps, budget);
            auto os = open("staircase_equivalence.csv");
            os.precision(17);
            os << "x,image\n";
            for (auto [x, y] : e.nodes) os << x << ',' << y << '\n';
            j["equivariance_defect"] = e.equivariance_defect;
            j["qs_norm"] = e.qs_norm;
        }
        res_.finding = "period " + std::to_string(r->period) + ", " + std::to_string(s.inner.steps.size()) +
                       " inner and " + std::to_string(s.outer.steps.size()) + " outer steps";
        return j;
    }

    json qc_field()
    {
        MapPtr f = map1();
        InducedMap m = adjust_to_preferred(first_return_map(f), or_default(c_.budget, 200));
        ExtensionConfig cfg;
        std::optional<NormalizedBranch> best;
        double best_len = 0;
        std::size_t index = 0;
        for (std::size_t i = 0; i < m.branches().size(); ++i) {
            const Branch& b = m[i];
            if (b.folding() || b.domain.length() <= best_len) continue;
            try {
                best = normalized_branch(*f, b, cfg.epsilon);
                best_len = b.domain.length();
                index = i;
            } catch (const ExtendabilityError&) {
            }
        }
        if (!best) throw ExtendabilityError("qc-field: no monotone branch is extendable");
        int n = or_default(c_.grid, 41);
        DistortionProfile p = distortion_profile(*best, n, n, or_default(c_.mesh, 0.2), cfg);
        {
            auto os = open("distortion.csv");
            write_distortion_field(os, p);
        }
        open("distortion_summary.json") << distortion_summary_json(p) << '\n';
        res_.finding = "max |mu| " + num(p.max_mu) + " on branch " + std::to_string(index);
        return {{"branch", index}, {"max_mu", p.max_mu}, {"mean_mu", p.mean_mu},
                {"fitted_constant", p.fitted_constant}};
    }

    void write_manifest(const json& results)
    {
        json j;
        j["tool"] = "sunimodal";
        j["version"] = kVersion;
        j["compiler"] = __VERSION__;
        j["command"] = c_.command;
        j["config"] = json::parse(config_json(c_));
        j["config_hash"] = hash_;
        j["seed"] = c_.seed;
        j["status"] = res_.status;
        j["finding"] = res_.finding;
        j["files"] = res_.files;
        j["results"] = results;
        j["timestamp"] = utc_now();
        std::error_code ec;
        std::filesystem::create_directories(c_.out, ec);
        std::ofstream os(std::filesystem::path(c_.out) / "manifest.json");
        if (os) os << j.dump(2) << '\n';
    }

    const RunConfig& c_;
    std::string hash_;
    RunResult res_;
};

}  // namespace

const std::vector<std::string>& commands()
{
    static const std::vector<std::string> c{"kneading", "induce",   "conjugacy", "qsnorm",
                                            "ce-check", "renorm",   "staircase", "qc-field"};
    return c;
}

std::string config_json(const RunConfig& c)
{
    json j;
    j["command"] = c.command;
    j["map"] = spec_json(c.map);
    j["map2"] = spec_json(c.map2);
    auto opt = [&](const char* k, const auto& v) { j[k] = v ? json(*v) : json(nullptr); };
    opt("depth", c.depth);
    opt("grid", c.grid);
    opt("budget", c.budget);
    opt("mesh", c.mesh);
    opt("tol", c.tol);
    j["seed"] = c.seed;
    return j.dump();
}

std::string config_hash(const RunConfig& c)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : config_json(c)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunResult run(const RunConfig& c)
{
    return Runner(c).go();
}

std::optional<RunConfig> parse_args(int argc, const char* const* argv, int& exit_code)
{
    CLI::App app{"Numerical constructions for S-unimodal interval maps", "sunimodal"};
    RunConfig c;
    int depth = 0, grid = 0, budget = 0;
    double mesh = 0, tol = 0;
    app.add_option("command", c.command, "pipeline to run")->required()->check(CLI::IsMember(commands()));
    app.add_option("--map", c.map, "map spec: a JSON file or an inline JSON object");
    app.add_option("--map2", c.map2, "second map spec, for two-map commands");
    app.add_option("--out", c.out, "output directory")->capture_default_str();
    auto* od = app.add_option("--depth", depth, "depth, stages or steps, by command");
    auto* og = app.add_option("--grid", grid, "grid or probe size");
    auto* ob = app.add_option("--budget", budget, "iterate budget");
    auto* om = app.add_option("--mesh", mesh, "mesh, minimum length or diamond size, by command");
    auto* ot = app.add_option("--tol", tol, "numeric tolerance");
    app.add_option("--seed", c.seed, "seed recorded in every output")->capture_default_str();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        exit_code = code == 0 ? 0 : 1;
        return std::nullopt;
    }
    if (od->count()) c.depth = depth;
    if (og->count()) c.grid = grid;
    if (ob->count()) c.budget = budget;
    if (om->count()) c.mesh = mesh;
    if (ot->count()) c.tol = tol;
    exit_code = 0;
    return c;
}

}  // namespace sunimodal
