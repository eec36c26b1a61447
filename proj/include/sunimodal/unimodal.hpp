#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sunimodal/core.hpp"

namespace sunimodal {

// f(x) = h(x^2) on [-1,1].  Families implement the h-level methods; the
// f-level ones are derived from them unless a subclass knows better.
class UnimodalMap {
public:
    virtual ~UnimodalMap() = default;

    virtual std::string family_id() const = 0;
    virtual std::vector<double> params() const = 0;

    virtual double h(double u) const = 0;
    virtual Jet h_jet(double u) const = 0;
    // u in [0,1] with h(u) = y, clamped to the ends
    virtual double h_inverse(double y) const = 0;

    virtual double operator()(double x) const { return h(x * x); }
    virtual Jet jet(double x) const;
    // the preimage of y on the side of 0 given by side (+1 or -1)
    virtual double inverse_branch(double y, int side) const;

    double derivative(double x) const { return jet(x).d1; }
    double schwarzian(double x) const;
    double critical_value() const { return (*this)(0.0); }
    double iterate(double x, int n) const;
};

using MapPtr = std::shared_ptr<const UnimodalMap>;

// h(u) = c0 - a u.  c0 = 1 is the normalized quadratic family.
class QuadraticMap : public UnimodalMap {
public:
    explicit QuadraticMap(double a, double c0 = 1.0);
    std::string family_id() const override;
    std::vector<double> params() const override;
    double h(double u) const override { return c0_ - a_ * u; }
    Jet h_jet(double u) const override;
    double h_inverse(double y) const override;
    double operator()(double x) const override { return c0_ - a_ * (x * x); }

private:
    double a_, c0_;
};

// phi∘f∘phi^-1 with f = 1 - a x^2 and phi(x) = (x + b x^3)/(1 + b).
// Written in h(x^2) form: with u = phi(v)^2 and w = v^2 one has
// u = w (1 + b w)^2 / (1 + b)^2, a polynomial, so h stays smooth at 0.
class ConjugatedMap : public UnimodalMap {
public:
    ConjugatedMap(double a, double b);
    std::string family_id() const override { return "conjugated"; }
    std::vector<double> params() const override { return {a_, b_}; }
    double h(double u) const override;
    Jet h_jet(double u) const override;
    double h_inverse(double y) const override;

    double phi(double v) const { return (v + b_ * v * v * v) / (1 + b_); }
    double phi_inverse(double y) const;
    double a() const { return a_; }
    double b() const { return b_; }

private:
    double w_of_u(double u) const;
    double u_of_w(double w) const;

    double a_, b_;
};

struct ValidationReport {
    bool pass = true;
    int condition = 0;        // first violated condition, 0 when passing
    double location = 0;      // sample point of the violation
    std::string detail;
};

ValidationReport validate_class_C(const UnimodalMap& f, int grid = 2001,
                                  double schwarzian_tol = 1e-9);

double fixed_point_q(const UnimodalMap& f);

struct KneadingSequence {
    std::vector<char> symbols;  // 'L', 'C', 'R'
    std::size_t length() const { return symbols.size(); }
    std::string str() const;    // "R L L L L"
    bool operator==(const KneadingSequence&) const = default;
};

KneadingSequence kneading_sequence(const UnimodalMap& f, int n, double tol = 1e-12);

// index of the first disagreement, or -1 when the first n symbols agree
int kneading_mismatch(const UnimodalMap& f, const UnimodalMap& g, int n, double tol = 1e-12);

// Itinerary matching: the point of g whose depth-step itinerary equals that of x under f.
double conjugacy_oracle(const UnimodalMap& f, const UnimodalMap& g, double x,
                        int depth = 48, double tol = 1e-12);

// Same, without re-checking kneading each call.
class ConjugacyOracle {
public:
    ConjugacyOracle(MapPtr f, MapPtr g, int depth = 48, double tol = 1e-12);
    double operator()(double x) const;

private:
    MapPtr f_, g_;
    int depth_;
    double tol_;
};

struct CEFit {
    double a_fit = 0, b_fit = 0;
    int n_used = 0;
    double residual = 0;
    bool degenerate = false;   // critical orbit came within tolerance of 0
    bool holds() const { return !degenerate && b_fit > 1; }
};

CEFit collet_eckmann_check(const UnimodalMap& f, int N, double tol = 1e-12);

struct MapSpec {
    std::string family;
    std::vector<double> params;
    std::string label;

    std::string to_json() const;
    static MapSpec from_json(const std::string& text);
    static MapSpec load(const std::string& path);
};

MapPtr make_map(const MapSpec& spec);
MapSpec spec_of(const UnimodalMap& f, const std::string& label = "");

}  // namespace sunimodal
