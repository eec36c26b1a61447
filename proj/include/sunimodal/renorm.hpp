#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sunimodal/branchwise.hpp"

namespace sunimodal {

// A symmetric interval mapped into itself by the central folding branch.
struct RestrictiveInterval {
    Interval interval{-1, 1};
    Branch fold;
    int period = 0;
    int verified_iterates = 0;   // the critical orbit stayed in the fold for this many returns
    bool budget_limited = true;  // trapping is evidence to the budget, not a proof
};

// The induced map has a central folding branch whose critical orbit stays in
// its domain for budget returns, and a repelling symmetric boundary r with
// |fold(r)| = r and |critical value| <= r.
std::optional<RestrictiveInterval> detect_restrictive(const InducedMap& m, int budget);

// x -> sign * f^p(r x) / r on [-1,1], sign chosen so that 0 is a maximum.
class RenormalizedMap : public UnimodalMap {
public:
    RenormalizedMap(MapPtr f, int period, double radius, int sign);
    std::string family_id() const override { return "renormalized"; }
    std::vector<double> params() const override;
    double h(double u) const override;
    Jet h_jet(double u) const override;
    double h_inverse(double y) const override;

    const UnimodalMap& parent() const { return *f_; }
    int period() const { return p_; }
    double radius() const { return r_; }
    int sign() const { return sign_; }
    // parent coordinates of a point of [-1,1], and back
    double to_parent(double x) const { return sign_ * r_ * x; }
    double from_parent(double x) const { return x / (sign_ * r_); }

private:
    MapPtr f_;
    int p_;
    double r_;
    int sign_;
};

MapPtr renormalize(MapPtr f, const RestrictiveInterval& r);

struct MatchingLevel {
    MapPtr map;                  // f_i
    RestrictiveInterval interval;
    double rescale_slope = 0;    // sign / radius
};

struct MatchingSequence {
    std::vector<MatchingLevel> levels;
    MapPtr terminal;             // the first map found non-renormalizable at budget
};

MatchingSequence matching_sequence(MapPtr f, int max_levels, int budget = 200);

struct StaircaseStep {
    Interval right{0, 1};        // the step on the right arm; the left one is its mirror image
    int count = 0;
};

struct Staircase {
    enum class Side { inner, outer } side = Side::inner;
    std::vector<StaircaseStep> steps;
    double decay = 0;            // mean ratio of consecutive step lengths
    bool geometric = true;       // false when decay > 0.99
    double gap = 0;              // length of the arm not covered by the steps, both arms
};

struct Staircases {
    Staircase outer, inner;
    double inner_radius = 0;     // half-length of the inner fundamental domain
};

// Outer steps: points of the fold's domain outside the restrictive interval,
// by the number of fold iterates needed to leave the domain.  Inner steps:
// points of the restrictive interval outside the renormalized map's
// fundamental domain, by the number of fold iterates needed to enter it.
Staircases build_staircases(MapPtr f, const RestrictiveInterval& r, int max_steps, double max_ratio = 1e3);

// iterates of the fold until |x| < target (inner) or x leaves the fold's domain (outer); -1 past the cap
int arrival_count(const UnimodalMap& f, const RestrictiveInterval& r, double target, double x, int cap);
int escape_count(const UnimodalMap& f, const RestrictiveInterval& r, double x, int cap);

struct StaircaseEquivalence {
    std::vector<std::pair<double, double>> nodes;   // step endpoints of f and g, both arms
    double equivariance_defect = 0;
    double qs_norm = 0;
    std::function<double(double)> map;              // on the restrictive interval of f
};

// Step k of f goes to step k of g: affinely on the first step and the inner
// domain, and by the equivariant pull-back through the folds on later steps.
StaircaseEquivalence staircase_equivalence(MapPtr f, MapPtr g, int max_steps, int budget = 200);

// level, interval_lo, interval_hi, period, rescale_slope
void write_level_table(std::ostream& os, const MatchingSequence& s);
// side, step_index, lo, hi, count
void write_staircases(std::ostream& os, const Staircases& s);

}  // namespace sunimodal
