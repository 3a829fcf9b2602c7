#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "specnet/grid.hpp"

namespace specnet {

/// One-dimensional closed-form factor  f(x) = c0 + c1 x + c2 x^2 + amp sin(freq x + phase).
/// Derivatives of every order are analytic; sup norms are taken over [0,1].
struct Factor1D {
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
    double amp = 0.0, freq = 0.0, phase = 0.0;

    static Factor1D constant(double v) { return Factor1D{v, 0, 0, 0, 0, 0}; }
    static Factor1D one() { return constant(1.0); }
    static Factor1D affine(double a, double b) { return Factor1D{a, b, 0, 0, 0, 0}; }
    static Factor1D quadratic(double a, double b, double c) { return Factor1D{a, b, c, 0, 0, 0}; }
    static Factor1D sine(double offset, double amplitude, double frequency, double ph = 0.0) {
        return Factor1D{offset, 0, 0, amplitude, frequency, ph};
    }

    double deriv(int m, double x) const {
        double poly = 0.0;
        switch (m) {
            case 0: poly = c0 + x * (c1 + x * c2); break;
            case 1: poly = c1 + 2.0 * c2 * x; break;
            case 2: poly = 2.0 * c2; break;
            default: break;
        }
        double trig = 0.0;
        if (amp != 0.0) {
            // d^m/dx^m sin(wx+p) = w^m sin(wx + p + m pi/2)
            trig = amp * std::pow(freq, m) * std::sin(freq * x + phase + m * M_PI / 2.0);
        }
        return poly + trig;
    }

    // sup over [0,1] of |f^(m)|, by dense scan; exact for the preset shapes
    // used here (attained at a sample point) and within ~1e-8 relative else.
    double sup_deriv(int m) const {
        if (amp == 0.0) {
            if (m == 0) {
                double s = std::max(std::abs(deriv(0, 0.0)), std::abs(deriv(0, 1.0)));
                if (c2 != 0.0) {
                    const double xv = -c1 / (2.0 * c2);
                    if (xv > 0.0 && xv < 1.0) s = std::max(s, std::abs(deriv(0, xv)));
                }
                return s;
            }
            if (m == 1) return std::max(std::abs(c1), std::abs(c1 + 2.0 * c2));
            if (m == 2) return std::abs(2.0 * c2);
            return 0.0;
        }
        const int samples = 1 << 14;
        double s = 0.0;
        for (int i = 0; i <= samples; ++i)
            s = std::max(s, std::abs(deriv(m, static_cast<double>(i) / samples)));
        return s;
    }

    bool is_zero() const { return c0 == 0 && c1 == 0 && c2 == 0 && amp == 0; }
    bool is_one() const { return c0 == 1 && c1 == 0 && c2 == 0 && amp == 0; }
};

/// scale * prod_a f_a(x_a); separable, so partial derivatives split per axis
/// and the sup over the box is the product of per-axis sups.
struct SeparableTerm {
    double scale = 1.0;
    std::array<Factor1D, 3> f{Factor1D::one(), Factor1D::one(), Factor1D::one()};

    double deriv(int dim, const MultiIndex& alpha, const Point& x) const {
        double v = scale;
        for (int a = 0; a < dim; ++a) v *= f[a].deriv(alpha[a], x[a]);
        return v;
    }
    double sup_deriv(int dim, const MultiIndex& alpha) const {
        double v = std::abs(scale);
        for (int a = 0; a < dim; ++a) v *= f[a].sup_deriv(alpha[a]);
        return v;
    }
};

/// Sum of separable terms. Derivatives are exact; sup_deriv is the triangle
/// bound (sum of term sups), which is exact for single-term fields.
struct ScalarField {
    int dim = 1;
    std::vector<SeparableTerm> terms;

    static ScalarField zero(int dim) { return ScalarField{dim, {}}; }
    static ScalarField constant(int dim, double v) {
        if (v == 0.0) return zero(dim);
        SeparableTerm t;
        t.scale = v;
        return ScalarField{dim, {t}};
    }
    static ScalarField from_factor(int dim, int axis, const Factor1D& fac, double scale = 1.0) {
        SeparableTerm t;
        t.scale = scale;
        t.f[axis] = fac;
        return ScalarField{dim, {t}};
    }

    bool is_zero() const { return terms.empty(); }

    double deriv(const MultiIndex& alpha, const Point& x) const {
        double v = 0.0;
        for (const auto& t : terms) v += t.deriv(dim, alpha, x);
        return v;
    }
    double value(const Point& x) const { return deriv(MultiIndex(), x); }

    double sup_deriv(const MultiIndex& alpha) const {
        double v = 0.0;
        for (const auto& t : terms) v += t.sup_deriv(dim, alpha);
        return v;
    }

    ScalarField scaled(double s) const {
        ScalarField out = *this;
        if (s == 0.0) return zero(dim);
        for (auto& t : out.terms) t.scale *= s;
        return out;
    }
    friend ScalarField operator+(const ScalarField& a, const ScalarField& b) {
        ScalarField out = a;
        out.terms.insert(out.terms.end(), b.terms.begin(), b.terms.end());
        return out;
    }
};

}  // namespace specnet
