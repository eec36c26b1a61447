#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sunimodal/core.hpp"
#include "sunimodal/unimodal.hpp"

namespace sunimodal {

enum class BranchKind { monotone, folding, indifferent };

const char* to_string(BranchKind k);

enum class Side { left, right };

// One branch x -> f^s(x) of an induced map.  The branch carries the sign
// pattern of its orbit so it can be inverted without root finding; for a
// folding branch the entry at the settled step is 0 and the lap decides it.
struct Branch {
    Interval domain{-1, 1};
    int s = 0;
    BranchKind kind = BranchKind::monotone;
    int settled = -1;            // folding: step at which the orbit of fold_point hits 0
    double fold_point = 0;
    double critical_value = 0;   // folding: image of fold_point
    Interval image{-1, 1};
    std::vector<signed char> itinerary;

    bool folding() const { return kind == BranchKind::folding; }
    // +1 if f^s increases on the domain (monotone) or on the right lap (folding)
    int orientation() const;
    int lap_of(double x) const { return x < fold_point ? -1 : 1; }

    double apply(const UnimodalMap& f, double x) const;
    // preimage of y on the given lap (ignored for monotone branches)
    double invert(const UnimodalMap& f, double y, int lap = 1) const;

    // the monotone branch f^n on (a,b) with the sign pattern of its midpoint orbit
    static Branch monotone_from(const UnimodalMap& f, Interval domain, int n);
};

using BranchPtr = std::shared_ptr<const Branch>;

class InducedMap {
public:
    InducedMap(MapPtr f, Interval domain, std::vector<BranchPtr> branches);

    const UnimodalMap& base() const { return *f_; }
    const MapPtr& base_ptr() const { return f_; }
    const Interval& domain() const { return domain_; }
    const std::vector<BranchPtr>& branches() const { return branches_; }
    std::size_t size() const { return branches_.size(); }
    const Branch& operator[](std::size_t i) const { return *branches_[i]; }

    std::optional<std::size_t> locate(double x) const;
    double apply(double x) const;
    std::vector<std::size_t> folding() const;
    // common critical value of the folding branches; nullopt without folds
    std::optional<double> critical_value() const;
    double gap_measure() const;
    bool regular(double tol) const { return gap_measure() < tol; }
    // the branches adjacent to the ends of the domain
    std::size_t extreme(Side side) const;
    bool is_external(std::size_t i) const;

private:
    MapPtr f_;
    Interval domain_;
    std::vector<BranchPtr> branches_;
};

// Truncation parameters for every "to infinity" construction.
struct RefinementBudget {
    int max_time = 64;            // first-return search cap
    double min_len = 1e-7;        // shortest first-return branch kept
    double keep_len = 1e-10;      // shortest branch kept by later refinements
    int depth = 200;              // cap on boundary refinement / escape loops
    double epsilon = 0.05;        // extendability threshold
    double comparability = 8;     // adjacent-folding length ratio
    double near_endpoint = 0.1;   // preamble trigger as a fraction of the domain
    double short_central = 0.02;  // fallback flag threshold, central vs neighbors
    int stages = 6;
    int fill = 3;
    double mesh = 2e-3;
    int final_rounds = 12;
    std::size_t max_branches = 400000;
    int probe = 2000;
    int qs_xs = 64, qs_hs = 24;
    int oracle_depth = 48;
    double mark_weight = 1e-3;    // smallest pulled-back scale whose endpoints are stored
};

InducedMap first_return_map(MapPtr f, int max_time = 64, double min_len = 1e-7);

double extendability_margin(const UnimodalMap& f, const Branch& b);
// the maximal monotone extension used by the margin
Interval monotone_extension(const UnimodalMap& f, const Interval& domain,
                            const std::vector<signed char>& itinerary, int n);

// Replace branch i by its compositions with the branches of inner.  A folding
// branch whose critical value sits in a domain covering its whole image is
// composed with that domain until escape.  Sub-branches shorter than keep_len
// are left out (the region becomes a gap).
std::vector<BranchPtr> compose_branch(const UnimodalMap& f, const Branch& outer,
                                      const InducedMap& inner, double keep_len, int escape_budget);
InducedMap replace_branches(const InducedMap& m, const std::vector<std::size_t>& which,
                            const std::vector<std::vector<BranchPtr>>& parts);

InducedMap boundary_refine(const InducedMap& m, Side side, int depth, double keep_len = 1e-12);
InducedMap boundary_refine_to(const InducedMap& m, Side side, double x, int budget = 200,
                              double keep_len = 1e-12);
// refine the monotone branch i toward its folding neighbor
InducedMap refine_to_adjacent_folding_depth(const InducedMap& m, std::size_t i,
                                            const RefinementBudget& cfg = {});

struct PreferredReport {
    bool monotone_or_folding = true;
    bool extendable = true;
    bool common_critical_value = true;
    bool image_not_external = true;
    bool external_monotone = true;
    double min_margin = 0;
    bool ok() const
    {
        return monotone_or_folding && extendable && common_critical_value && image_not_external &&
               external_monotone;
    }
};

PreferredReport is_preferred(const InducedMap& m, double epsilon = 0.05);
InducedMap adjust_to_preferred(const InducedMap& m, int budget = 200);

// The stopping-rule half of one construction step: every folding branch with
// the current critical value is composed with `inner`.
InducedMap critical_step(const InducedMap& m, const InducedMap& inner, double keep_len);

struct BasicDynamicsReport {
    std::vector<bool> stages;     // per stage: critical value in a monotone domain
    bool indeterminate = false;
    std::string note;
    bool pass() const;
};

BasicDynamicsReport basic_dynamics_check(MapPtr f, int stages, const RefinementBudget& budget = {});

// lo, hi, s, kind, settled, image_lo, image_hi, margin
void write_branch_table(std::ostream& os, const InducedMap& m);

// largest ratio of lengths of neighboring domains
double max_adjacent_ratio(const InducedMap& m);

}  // namespace sunimodal
