#pragma once

#include <complex>
#include <functional>
#include <stdexcept>
#include <string>

namespace sunimodal {

// Error kinds.  Everything derives from Error so callers can catch once.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DomainError : Error { using Error::Error; };
struct NoSolutionError : Error { using Error::Error; };
struct ContractViolation : Error { using Error::Error; };
struct PreconditionError : Error { using Error::Error; };
struct BudgetError : Error { using Error::Error; };
struct PrecisionError : Error { using Error::Error; };
struct StructureError : Error { using Error::Error; };
struct NotConjugateError : Error { using Error::Error; };
struct OutOfClassError : Error { using Error::Error; };
struct CorrespondenceError : Error { using Error::Error; };
struct MarkingError : Error { using Error::Error; };
struct CoverageError : Error { using Error::Error; };
struct ExtendabilityError : Error { using Error::Error; };
struct RenormalizationError : Error { using Error::Error; };
struct SingularityError : Error { using Error::Error; };

struct EscapeError : Error {
    EscapeError(int index, const std::string& what)
        : Error(what), index(index) {}
    int index;
};

class Interval {
public:
    Interval(double lo, double hi);

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double length() const { return hi_ - lo_; }
    double mid() const { return 0.5 * (lo_ + hi_); }

    bool contains(double x) const { return lo_ < x && x < hi_; }
    bool contains_closed(double x) const { return lo_ <= x && x <= hi_; }
    bool contains(const Interval& o) const { return lo_ <= o.lo_ && o.hi_ <= hi_; }

    // t in [0,1] <-> point of the interval, positive orientation
    double to_unit(double x) const { return (x - lo_) / (hi_ - lo_); }
    double from_unit(double t) const { return lo_ + t * (hi_ - lo_); }

    // sorted interval through two points in any order
    static Interval hull(double a, double b);

    bool operator==(const Interval&) const = default;

private:
    double lo_, hi_;
};

struct PlanePoint {
    double x = 0, y = 0;

    PlanePoint() = default;
    PlanePoint(double x, double y);
    explicit PlanePoint(std::complex<double> z) : PlanePoint(z.real(), z.imag()) {}
    std::complex<double> z() const { return {x, y}; }
};

struct Diamond {
    Diamond(Interval base, double size);
    Interval base;
    double size;
};

// orientation preserving homography fixing both ends of `fixed`
struct HomographyFix {
    HomographyFix(Interval fixed, double delta) : fixed(fixed), delta(delta) {}
    Interval fixed;
    double delta;

    double operator()(double x) const;
};

// value and first three derivatives
struct Jet {
    double v = 0, d1 = 0, d2 = 0, d3 = 0;
};

// jet of g∘f given the jet of f at x and the jet of g at f(x)
Jet compose(const Jet& g, const Jet& f);

double cross_ratio(double a, double b, double c, double d);
double poincare_length(const Interval& sub, const Interval& whole);
double height(const PlanePoint& z, const Interval& base);
bool diamond_contains(const Diamond& d, const PlanePoint& z);
double delta_of_homography(const std::function<double(double)>& g,
                           const Interval& fixed, double x);

// Bisection on a monotone function.  The result satisfies |F(x) - target| < tol
// or the bracket has collapsed to adjacent doubles.
double find_preimage(const std::function<double(double)>& F, const Interval& on,
                     double target, double tol = 1e-12);

}  // namespace sunimodal
