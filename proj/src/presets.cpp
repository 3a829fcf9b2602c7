#include "specnet/presets.hpp"

#include <cmath>

namespace specnet {

namespace {

double get(const std::map<std::string, double>& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

ExprGraph sine_of_axis(int axis, double freq, int dim) {
    return activation(ActKind::Sin, scale(input(axis, dim), freq));
}

ExprGraph sin_product(double weight, double freq, int dim) {
    ExprGraph g = scale(sine_of_axis(0, freq, dim), weight);
    for (int a = 1; a < dim; ++a) g = mul(g, sine_of_axis(a, freq, dim));
    return g;
}

CoefficientGraphs zero_graphs(int dim) {
    CoefficientGraphs g;
    g.dim = dim;
    for (auto& e : g.a) e = constant(0.0, dim);
    g.c = constant(0.0, dim);
    return g;
}

}  // namespace

CoefficientPreset make_coefficients(const std::string& name,
                                    const std::map<std::string, double>& params, int dim) {
    CoefficientPreset p;
    p.field.dim = dim;
    for (auto& e : p.field.a_entries) e = ScalarField::zero(dim);
    p.graphs = zero_graphs(dim);
    const double c_val = get(params, "c", name == "laplace" ? 0.0 : 1.0);
    if (c_val < 0.0) throw ConfigError("coefficient preset: c must be >= 0");

    if (name == "laplace" || name == "constant") {
        const double a_val = get(params, "a", 1.0);
        if (a_val <= 0.0) throw ConfigError("coefficient preset: a must be > 0");
        for (int i = 0; i < dim; ++i) {
            p.field.a(i, i) = ScalarField::constant(dim, a_val);
            p.graphs.entry(i, i) = constant(a_val, dim);
        }
        p.field.ellip_lower = p.field.ellip_upper = a_val;
    } else if (name == "affine") {
        const double slope = get(params, "slope", 0.5);
        if (slope < 0.0) throw ConfigError("coefficient preset: slope must be >= 0");
        for (int i = 0; i < dim; ++i) {
            p.field.a(i, i) = ScalarField::from_factor(dim, i, Factor1D::affine(1.0, slope));
            p.graphs.entry(i, i) = affine({slope}, {input(i, dim)}, 1.0);
        }
        p.field.ellip_lower = 1.0;
        p.field.ellip_upper = 1.0 + slope;
    } else if (name == "quadratic") {
        const double curv = get(params, "curv", 1.0);
        if (curv < 0.0) throw ConfigError("coefficient preset: curv must be >= 0");
        for (int i = 0; i < dim; ++i) {
            p.field.a(i, i) = ScalarField::from_factor(dim, i, Factor1D::quadratic(1.0, 0.0, curv));
            p.graphs.entry(i, i) =
                affine({curv}, {activation(ActKind::Square, input(i, dim))}, 1.0);
        }
        p.field.ellip_lower = 1.0;
        p.field.ellip_upper = 1.0 + curv;
    } else if (name == "trig") {
        const double amp = get(params, "amp", 0.25);
        if (amp < 0.0 || amp >= 1.0) throw ConfigError("coefficient preset: need 0 <= amp < 1");
        for (int i = 0; i < dim; ++i) {
            p.field.a(i, i) = ScalarField::from_factor(dim, i, Factor1D::sine(1.0, amp, M_PI));
            p.graphs.entry(i, i) = affine({amp}, {sine_of_axis(i, M_PI, dim)}, 1.0);
        }
        p.field.ellip_lower = 1.0 - amp;
        p.field.ellip_upper = 1.0 + amp;
    } else if (name == "cross") {
        if (dim != 2) throw ConfigError("coefficient preset 'cross' needs dimension 2");
        const double s = get(params, "offdiag", 0.25);
        if (std::abs(s) >= 1.0) throw ConfigError("coefficient preset: |offdiag| must be < 1");
        for (int i = 0; i < dim; ++i) {
            p.field.a(i, i) = ScalarField::constant(dim, 1.0);
            p.graphs.entry(i, i) = constant(1.0, dim);
        }
        p.field.a(0, 1) = ScalarField::constant(dim, s);
        p.graphs.entry(0, 1) = constant(s, dim);
        p.field.ellip_lower = 1.0 - std::abs(s);
        p.field.ellip_upper = 1.0 + std::abs(s);
    } else {
        throw ConfigError("unknown coefficient preset '" + name + "'");
    }

    p.field.c = ScalarField::constant(dim, c_val);
    p.graphs.c = constant(c_val, dim);
    p.field.zeta = c_val;
    return p;
}

CoefficientPreset perturb_preset(const CoefficientPreset& base, const PerturbationSpec& spec,
                                 const Grid& grid) {
    CoefficientPreset out = base;
    PerturbRealization real;
    out.field = perturb_field(base.field, spec, grid, &real);

    const int dim = base.field.dim;
    switch (spec.shape) {
        case PerturbShape::Shift:
            if (spec.eps_a > 0.0)
                for (int i = 0; i < dim; ++i)
                    out.graphs.entry(i, i) =
                        add(base.graphs.entry(i, i), constant(real.a_amount, dim));
            if (spec.eps_c > 0.0) out.graphs.c = add(base.graphs.c, constant(real.c_amount, dim));
            break;
        case PerturbShape::Scale:
            if (spec.eps_a > 0.0)
                for (int i = 0; i < dim; ++i)
                    for (int j = i; j < dim; ++j)
                        out.graphs.entry(i, j) = scale(base.graphs.entry(i, j), 1.0 + real.a_amount);
            if (spec.eps_c > 0.0) out.graphs.c = scale(base.graphs.c, 1.0 + real.c_amount);
            break;
        case PerturbShape::Bump: {
            ExprGraph bump = sine_of_axis(0, 2.0 * M_PI, dim);
            if (spec.eps_a > 0.0)
                for (int i = 0; i < dim; ++i)
                    out.graphs.entry(i, i) =
                        add(base.graphs.entry(i, i), scale(bump, real.a_amount));
            if (spec.eps_c > 0.0) out.graphs.c = add(base.graphs.c, scale(bump, real.c_amount));
            break;
        }
    }
    return out;
}

SourcePreset make_source(const std::string& name, const std::map<std::string, double>& params,
                         const Grid& grid) {
    SourcePreset p;
    const int dim = grid.dim;

    if (name == "eigen_mix") {
        const int modes = static_cast<int>(get(params, "modes", 3));
        if (modes < 1 || modes > 64) throw ConfigError("eigen_mix: modes out of range");
        ExprGraph g = constant(0.0, dim);
        for (int i = 1; i <= modes; ++i) g = add(g, sin_product(1.0 / i, i * M_PI, dim));
        p.graph = g;
        p.values = sample(
            [&](const Point& x) {
                double v = 0.0;
                for (int i = 1; i <= modes; ++i) {
                    double m = 1.0 / i;
                    for (int a = 0; a < dim; ++a) m *= std::sin(i * M_PI * x[a]);
                    v += m;
                }
                return v;
            },
            grid);
        p.deriv_norm_up_to = [modes, dim](int order) {
            double s = 0.0;
            for (int i = 1; i <= modes; ++i) {
                const double w = 1.0 / i;
                s += w * w * std::pow(i * M_PI, 2.0 * order);
            }
            return std::sqrt(s) * std::pow(0.5, 0.5 * dim);
        };
    } else if (name == "mode") {
        const int q = static_cast<int>(get(params, "mode", 1));
        const double amp = get(params, "amp", 1.0);
        if (q < 1 || q > 256) throw ConfigError("mode: index out of range");
        p.graph = sin_product(amp, q * M_PI, dim);
        p.values = sample(
            [&](const Point& x) {
                double v = amp;
                for (int a = 0; a < dim; ++a) v *= std::sin(q * M_PI * x[a]);
                return v;
            },
            grid);
        p.deriv_norm_up_to = [q, amp, dim](int order) {
            return std::abs(amp) * std::pow(q * M_PI, order) * std::pow(0.5, 0.5 * dim);
        };
    } else if (name == "generic") {
        ExprGraph g = affine({0.5}, {input(0, dim)}, 1.0);
        for (int a = 0; a < dim; ++a) g = mul(g, sine_of_axis(a, M_PI, dim));
        p.graph = g;
        p.values = sample(
            [&](const Point& x) {
                double v = 1.0 + 0.5 * x[0];
                for (int a = 0; a < dim; ++a) v *= std::sin(M_PI * x[a]);
                return v;
            },
            grid);
        p.deriv_norm_up_to = nullptr;  // no closed form carried for this one
    } else {
        throw ConfigError("unknown source preset '" + name + "'");
    }
    return p;
}

FnnPreset make_fnn(const std::string& name, const std::map<std::string, double>& params,
                   const SourcePreset& source, int dim) {
    FnnPreset p;
    if (name == "same") {
        p.graph = source.graph;
    } else if (name == "mode_offset") {
        p.offset_mode = static_cast<int>(get(params, "mode", 2));
        p.offset_amp = get(params, "amp", 1e-6);
        if (p.offset_mode < 1 || p.offset_mode > 256) throw ConfigError("mode_offset: index out of range");
        p.graph = add(source.graph, sin_product(p.offset_amp, p.offset_mode * M_PI, dim));
    } else {
        throw ConfigError("unknown f_nn preset '" + name + "'");
    }
    return p;
}

}  // namespace specnet
