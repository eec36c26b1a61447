#pragma once

#include <cmath>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "sunimodal/induced.hpp"

namespace sunimodal {

struct MarkingCondition {
    double start = 0;             // point of a monotone source domain
    Side direction = Side::right; // the ray covers the folding branch's image
};

struct MarkedPoint {
    double x = 0, y = 0;
    double weight = 0;            // scale of the domains this point bounds
};

// One domain of the refined partition: source and target intervals.
struct Leaf {
    Interval src{-1, 1}, tgt{-1, 1};
    BranchKind kind = BranchKind::monotone;   // indifferent marks a gap
    bool original = false;                    // a copy of an unrefined source folding branch
};

class BranchwiseEquivalence;
using EquivalencePtr = std::shared_ptr<const BranchwiseEquivalence>;

// An increasing homeomorphism of [-1,1] carrying the branches of one induced
// map onto the corresponding branches of another.  Values are immutable;
// pull-backs reference older equivalences instead of copying them.
class BranchwiseEquivalence {
public:
    enum class Rule { affine, mobius, monotone_pull, critical_lift };

    struct Piece {
        Interval src{-1, 1}, tgt{-1, 1};
        Rule rule = Rule::affine;
        double pin_x = 0, pin_y = 0;          // mobius
        BranchPtr xi, xi_hat;                 // pull-backs
        EquivalencePtr inner;
        BranchKind kind = BranchKind::monotone;
    };

    const InducedMap& source() const { return *src_; }
    const InducedMap& target() const { return *tgt_; }
    const std::vector<Piece>& pieces() const { return pieces_; }
    const std::vector<MarkedPoint>& marked_points() const { return marked_; }
    double mark_weight() const { return weight_; }

    double operator()(double x) const;
    // the deepest partition domain containing x, not descending below min_len
    Leaf leaf_at(double x, double min_len) const;
    // the refined partition of window, not descending below min_len
    std::vector<Leaf> leaves(double min_len) const;
    std::vector<Leaf> leaves(const Interval& window, double min_len) const;

private:
    struct Patch {
        Interval src{-1, 1}, tgt{-1, 1};
        double pin_x = 0, pin_y = 0;
        bool correct = false;   // post-compose the underlying map instead of replacing it
        double pin_base = 0;    // underlying value at pin_x
    };

    std::shared_ptr<const InducedMap> src_, tgt_;
    std::vector<Piece> pieces_;      // one per source branch, in order
    std::vector<Patch> patches_;     // local marks, checked before pieces
    std::vector<MarkedPoint> marked_;
    double weight_ = 1e-4;

    const Piece* piece_at(double x) const;
    double eval_piece(const Piece& p, double x) const;
    double eval_gap(double x) const;
    double eval_base(double x) const;
    void add_marked(std::vector<MarkedPoint> pts);

    friend BranchwiseEquivalence primary_equivalence(const InducedMap&, const InducedMap&, double);
    friend BranchwiseEquivalence mark(const BranchwiseEquivalence&, const MarkingCondition&, double,
                                      double);
    friend BranchwiseEquivalence pull_back(const BranchwiseEquivalence&, std::size_t, EquivalencePtr);
};

// Increasing linear-fractional map of d onto dt sending pin_x to pin_y.
double mobius_fit(const Interval& d, const Interval& dt, double pin_x, double pin_y, double x);

BranchwiseEquivalence primary_equivalence(const InducedMap& src, const InducedMap& tgt,
                                          double mark_weight = 1e-3);

// Replace the equivalence on the partition domain of cond.start (the source
// branch itself when min_len is infinite, the deepest refined domain
// otherwise) by the linear-fractional map through (start, image).  A folding
// deepest domain keeps its map, followed by the linear-fractional self-map of
// its target that moves the current value of start to image.
BranchwiseEquivalence mark(const BranchwiseEquivalence& e, const MarkingCondition& cond, double image,
                           double min_len = HUGE_VAL);

// Pull inner back through source branch i and its target partner.
BranchwiseEquivalence pull_back(const BranchwiseEquivalence& outer, std::size_t i, EquivalencePtr inner);
BranchwiseEquivalence monotone_pullback(const BranchwiseEquivalence& outer, const Branch& xi,
                                        const Branch& xi_hat, EquivalencePtr inner);
BranchwiseEquivalence critical_pullback(const BranchwiseEquivalence& outer, const Branch& psi,
                                        const Branch& psi_hat, EquivalencePtr inner, double tol = 1e-9);

// inner marked at the common critical value, at the deepest domain above keep_len
EquivalencePtr marked_at_critical_value(const BranchwiseEquivalence& e, double keep_len);

BranchwiseEquivalence filling_in(const BranchwiseEquivalence& e, int stages,
                                 const RefinementBudget& budget = {});
BranchwiseEquivalence final_refinement(const BranchwiseEquivalence& e, double mesh,
                                       const RefinementBudget& budget = {});

// total length of the original folding domains surviving in the refined partition
double folding_measure(const BranchwiseEquivalence& e, double min_len);
// longest monotone domain outside the primary external branches
double longest_monotone(const BranchwiseEquivalence& e, double min_len);
double max_marked_gap(const BranchwiseEquivalence& e, const Interval& window);

double qs_norm_estimate(const std::function<double(double)>& g, int xs, int hs);

struct StageRecord {
    int stage = 0;
    double qs_norm = 0;
    double max_gap = 0;
    double sup_oracle_distance = 0;
    double folding_measure = 0;
    std::size_t marked = 0;
};

struct ConjugacyResult {
    BranchwiseEquivalence map;
    std::vector<StageRecord> stages;
    double oracle_qs_norm = 0;
    double final_sup_distance = 0;
    std::vector<double> probe;
};

ConjugacyResult build_conjugacy(MapPtr f, MapPtr g, const RefinementBudget& budget = {});

// x, built(x), oracle(x), |diff|
void write_conjugacy_table(std::ostream& os, const ConjugacyResult& r, const std::function<double(double)>& oracle);
std::string diagnostics_json(const ConjugacyResult& r);

}  // namespace sunimodal
