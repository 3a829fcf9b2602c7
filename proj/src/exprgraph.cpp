#include "specnet/exprgraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <mutex>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "specnet/report_io.hpp"

namespace specnet {

std::string act_name(ActKind a) {
    switch (a) {
        case ActKind::Sin: return "sin";
        case ActKind::Cos: return "cos";
        case ActKind::Exp: return "exp";
        case ActKind::Square: return "square";
    }
    return "?";
}

namespace {

// Process-wide interning pool. Graphs are persistent; structurally equal
// nodes are shared, which is what keeps derivative and iterate graphs from
// blowing up (the repeated-subgraph cache the construction depends on).
class NodePool {
public:
    static NodePool& instance() {
        static NodePool pool;
        return pool;
    }

    NodePool() {
        map_.reserve(1 << 20);
        deriv_cache_.reserve(1 << 16);
    }

    const Node* intern(Node n) {
        std::lock_guard<std::mutex> lock(mutex_);
        const std::uint64_t h = hash_of(n);
        auto& bucket = map_[h];
        for (const Node* cand : bucket)
            if (equal(*cand, n)) return cand;
        n.id = next_id_++;
        storage_.push_back(std::move(n));
        const Node* ref = &storage_.back();
        bucket.push_back(ref);
        return ref;
    }

    const Node* cached_derivative(const Node* root, int axis) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = deriv_cache_.find(deriv_key(root, axis));
        return it == deriv_cache_.end() ? nullptr : it->second;
    }
    void cache_derivative(const Node* root, int axis, const Node* result) {
        std::lock_guard<std::mutex> lock(mutex_);
        deriv_cache_.emplace(deriv_key(root, axis), result);
    }

private:
    static std::uint64_t deriv_key(const Node* root, int axis) {
        return root->id * 4ull + static_cast<std::uint64_t>(axis);
    }
    static std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        return h;
    }
    static std::uint64_t bits(double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, sizeof(double));
        return u;
    }
    static std::uint64_t hash_of(const Node& n) {
        std::uint64_t h = static_cast<std::uint64_t>(n.kind) + 1;
        switch (n.kind) {
            case NodeKind::Input: h = mix(h, static_cast<std::uint64_t>(n.axis)); break;
            case NodeKind::Constant: h = mix(h, bits(n.value)); break;
            case NodeKind::Activation:
                h = mix(h, static_cast<std::uint64_t>(n.act));
                h = mix(h, n.inputs[0]->id);
                break;
            case NodeKind::Affine:
                for (std::size_t i = 0; i < n.inputs.size(); ++i) {
                    h = mix(h, n.inputs[i]->id);
                    h = mix(h, bits(n.weights[i]));
                }
                if (n.has_bias) h = mix(h, bits(n.bias));
                break;
        }
        return h;
    }
    static bool equal(const Node& a, const Node& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case NodeKind::Input: return a.axis == b.axis;
            case NodeKind::Constant: return a.value == b.value;
            case NodeKind::Activation: return a.act == b.act && a.inputs[0] == b.inputs[0];
            case NodeKind::Affine:
                return a.inputs == b.inputs && a.weights == b.weights &&
                       a.has_bias == b.has_bias && (!a.has_bias || a.bias == b.bias);
        }
        return false;
    }

    std::mutex mutex_;
    std::deque<Node> storage_;
    std::unordered_map<std::uint64_t, boost::container::small_vector<const Node*, 1>> map_;
    std::unordered_map<std::uint64_t, const Node*> deriv_cache_;
    std::uint64_t next_id_ = 1;

public:
    std::uint64_t new_epoch() {
        std::lock_guard<std::mutex> lock(mutex_);
        return next_epoch_++;
    }

private:
    std::uint64_t next_epoch_ = 1;
};

double act_eval(ActKind a, double y) {
    switch (a) {
        case ActKind::Sin: return std::sin(y);
        case ActKind::Cos: return std::cos(y);
        case ActKind::Exp: return std::exp(y);
        case ActKind::Square: return y * y;
    }
    return 0.0;
}

// Topological order (inputs before consumers) by iterative post-order DFS.
// Uses the per-node visit stamp, so it is for single-threaded use; each node's
// ord field becomes its position in the returned order.
std::vector<const Node*> reachable_topo(const Node* root) {
    const std::uint64_t epoch = NodePool::instance().new_epoch();
    std::vector<const Node*> order;
    std::vector<std::pair<const Node*, std::size_t>> stack{{root, 0}};
    root->stamp = epoch;
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->inputs.size()) {
            const Node* child = n->inputs[next++];
            if (child->stamp != epoch) {
                child->stamp = epoch;
                stack.emplace_back(child, 0);
            }
        } else {
            n->ord = static_cast<std::uint32_t>(order.size());
            order.push_back(n);
            stack.pop_back();
        }
    }
    return order;
}

std::vector<const Node*> reachable_sorted(const Node* root) {
    std::vector<const Node*> nodes = reachable_topo(root);
    std::sort(nodes.begin(), nodes.end(),
              [](const Node* a, const Node* b) { return a->id < b->id; });
    return nodes;
}

}  // namespace

ExprGraph input(int axis, int dim) {
    if (axis < 0 || axis >= dim) throw ConfigError("input axis out of range");
    Node n;
    n.kind = NodeKind::Input;
    n.axis = axis;
    return ExprGraph{NodePool::instance().intern(std::move(n)), dim};
}

ExprGraph constant(double v, int dim) {
    Node n;
    n.kind = NodeKind::Constant;
    n.value = v;
    return ExprGraph{NodePool::instance().intern(std::move(n)), dim};
}

namespace {

using TermList = boost::container::small_vector<std::pair<const Node*, double>, 8>;

// Shared folding core: constants into the bias, zero weights dropped,
// duplicate inputs merged, single-input affine chains composed.
ExprGraph affine_terms(TermList terms, double b, bool has_b, int dim) {
    TermList folded;
    for (const auto& [n, w] : terms) {
        if (w == 0.0) continue;
        if (n->kind == NodeKind::Constant) {
            b += w * n->value;
            has_b = true;
            continue;
        }
        bool merged = false;
        for (auto& t : folded)
            if (t.first == n) {
                t.second += w;
                merged = true;
                break;
            }
        if (!merged) folded.emplace_back(n, w);
    }
    folded.erase(std::remove_if(folded.begin(), folded.end(),
                                [](const auto& t) { return t.second == 0.0; }),
                 folded.end());
    // canonical input order; lists are tiny, insertion sort beats std::sort here
    for (std::size_t i = 1; i < folded.size(); ++i) {
        auto t = folded[i];
        std::size_t j = i;
        for (; j > 0 && folded[j - 1].first->id > t.first->id; --j) folded[j] = folded[j - 1];
        folded[j] = t;
    }
    if (b == 0.0) has_b = false;

    if (folded.empty()) return constant(b, dim);
    if (folded.size() == 1) {
        const auto& [n, w] = folded[0];
        if (w == 1.0 && !has_b) return ExprGraph{n, dim};
        if (n->kind == NodeKind::Affine) {  // compose single-input affine chains
            TermList inner;
            for (std::size_t i = 0; i < n->inputs.size(); ++i)
                inner.emplace_back(n->inputs[i], w * n->weights[i]);
            const double inner_b = n->has_bias ? n->bias : 0.0;
            return affine_terms(std::move(inner), w * inner_b + b, true, dim);
        }
    }

    Node out;
    out.kind = NodeKind::Affine;
    for (const auto& [n, w] : folded) {
        out.inputs.push_back(n);
        out.weights.push_back(w);
    }
    out.bias = has_b ? b : 0.0;
    out.has_bias = has_b;
    return ExprGraph{NodePool::instance().intern(std::move(out)), dim};
}

}  // namespace

ExprGraph affine(std::vector<double> weights, std::vector<ExprGraph> inputs,
                 std::optional<double> bias) {
    if (weights.size() != inputs.size())
        throw ConfigError("affine(): weight/input count mismatch");
    int dim = 0;
    TermList terms;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i].valid()) throw ConfigError("affine(): null input graph");
        dim = std::max(dim, inputs[i].dim);
        terms.emplace_back(inputs[i].root, weights[i]);
    }
    return affine_terms(std::move(terms), bias.value_or(0.0), bias.has_value(), dim);
}

ExprGraph activation(ActKind act, const ExprGraph& in) {
    if (!in.valid()) throw ConfigError("activation(): null input graph");
    if (in.root->kind == NodeKind::Constant)
        return constant(act_eval(act, in.root->value), in.dim);
    Node n;
    n.kind = NodeKind::Activation;
    n.act = act;
    n.inputs.push_back(in.root);
    return ExprGraph{NodePool::instance().intern(std::move(n)), in.dim};
}

namespace {
void require_compatible(const ExprGraph& a, const ExprGraph& b) {
    if (a.dim > 0 && b.dim > 0 && a.dim != b.dim)
        throw ConfigError("graph input dimensions differ");
}
}  // namespace

ExprGraph add(const ExprGraph& a, const ExprGraph& b) {
    require_compatible(a, b);
    return affine_terms({{a.root, 1.0}, {b.root, 1.0}}, 0.0, false, std::max(a.dim, b.dim));
}
ExprGraph sub(const ExprGraph& a, const ExprGraph& b) {
    require_compatible(a, b);
    return affine_terms({{a.root, 1.0}, {b.root, -1.0}}, 0.0, false, std::max(a.dim, b.dim));
}
ExprGraph scale(const ExprGraph& a, double s) {
    return affine_terms({{a.root, s}}, 0.0, false, a.dim);
}

ExprGraph mul(const ExprGraph& a, const ExprGraph& b) {
    require_compatible(a, b);
    if (a.root->kind == NodeKind::Constant) return scale(b, a.root->value);
    if (b.root->kind == NodeKind::Constant) return scale(a, b.root->value);
    const int dim = std::max(a.dim, b.dim);
    ExprGraph sum_sq = activation(ActKind::Square, add(a, b));
    ExprGraph a_sq = activation(ActKind::Square, a);
    ExprGraph b_sq = activation(ActKind::Square, b);
    return affine_terms({{sum_sq.root, 0.5}, {a_sq.root, -0.5}, {b_sq.root, -0.5}}, 0.0, false,
                        dim);
}

double evaluate(const ExprGraph& g, const Point& x) {
    if (!g.valid()) throw ConfigError("evaluate(): null graph");
    std::unordered_map<const Node*, double> memo;
    for (const Node* n : reachable_topo(g.root)) {
        double v = 0.0;
        switch (n->kind) {
            case NodeKind::Input: v = x[n->axis]; break;
            case NodeKind::Constant: v = n->value; break;
            case NodeKind::Activation: v = act_eval(n->act, memo[n->inputs[0]]); break;
            case NodeKind::Affine: {
                v = n->has_bias ? n->bias : 0.0;
                for (std::size_t i = 0; i < n->inputs.size(); ++i)
                    v += n->weights[i] * memo[n->inputs[i]];
                break;
            }
        }
        if (!std::isfinite(v))
            throw NumericalError("evaluate(): non-finite value at node " + std::to_string(n->id) +
                                 " (" + std::to_string(static_cast<int>(n->kind)) + ")");
        memo[n] = v;
    }
    return memo[g.root];
}

GridFunction evaluate_on_grid(const ExprGraph& g, const Grid& grid) {
    if (!g.valid()) throw ConfigError("evaluate_on_grid(): null graph");
    const std::int64_t total = grid.num_nodes();
    const std::vector<const Node*> nodes = reachable_topo(g.root);
    std::vector<Vector> memo(nodes.size());
    for (const Node* n : nodes) {
        Vector v(total);
        switch (n->kind) {
            case NodeKind::Input:
                for (std::int64_t i = 0; i < total; ++i) v[i] = grid.coords(i)[n->axis];
                break;
            case NodeKind::Constant:
                v.setConstant(n->value);
                break;
            case NodeKind::Activation: {
                const Vector& u = memo[n->inputs[0]->ord];
                switch (n->act) {
                    case ActKind::Sin: v = u.array().sin(); break;
                    case ActKind::Cos: v = u.array().cos(); break;
                    case ActKind::Exp: v = u.array().exp(); break;
                    case ActKind::Square: v = u.array().square(); break;
                }
                break;
            }
            case NodeKind::Affine: {
                v.setConstant(n->has_bias ? n->bias : 0.0);
                for (std::size_t i = 0; i < n->inputs.size(); ++i)
                    v += n->weights[i] * memo[n->inputs[i]->ord];
                break;
            }
        }
        if (!v.allFinite())
            throw NumericalError("evaluate_on_grid(): non-finite value at node " +
                                 std::to_string(n->id));
        memo[n->ord] = std::move(v);
    }
    return GridFunction(grid, memo[g.root->ord]);
}

long long param_count(const ExprGraph& g) {
    if (!g.valid()) return 0;
    long long total = 0;
    for (const Node* n : reachable_topo(g.root)) total += n->params();
    return total;
}

long long param_count_union(const std::vector<ExprGraph>& graphs) {
    std::unordered_map<const Node*, bool> seen;
    long long total = 0;
    for (const auto& g : graphs) {
        if (!g.valid()) continue;
        for (const Node* n : reachable_topo(g.root)) {
            if (seen[n]) continue;
            seen[n] = true;
            total += n->params();
        }
    }
    return total;
}

long long node_count(const ExprGraph& g) {
    if (!g.valid()) return 0;
    return static_cast<long long>(reachable_topo(g.root).size());
}

int graph_depth(const ExprGraph& g) {
    if (!g.valid()) return 0;
    std::unordered_map<const Node*, int> depth;
    int out = 0;
    for (const Node* n : reachable_topo(g.root)) {
        int d = 1;
        for (const Node* in : n->inputs) d = std::max(d, depth[in] + 1);
        depth[n] = d;
        out = std::max(out, d);
    }
    return out;
}

std::set<ActKind> activations_used(const ExprGraph& g) {
    std::set<ActKind> acts;
    if (!g.valid()) return acts;
    for (const Node* n : reachable_topo(g.root))
        if (n->kind == NodeKind::Activation) acts.insert(n->act);
    return acts;
}

std::string graph_json(const ExprGraph& g) {
    JsonWriter w;
    w.begin()
        .field("schema_version", 1)
        .field("dim", g.dim)
        .field("output", static_cast<long long>(g.valid() ? g.root->id : 0))
        .field("total_params", param_count(g))
        .field("node_count", node_count(g))
        .begin_array("nodes");
    if (g.valid()) {
        for (const Node* n : reachable_sorted(g.root)) {
            w.begin_object().field("id", static_cast<long long>(n->id));
            switch (n->kind) {
                case NodeKind::Input:
                    w.field("kind", "input").field("axis", n->axis);
                    break;
                case NodeKind::Constant:
                    w.field("kind", "constant").field("value", n->value);
                    break;
                case NodeKind::Activation:
                    w.field("kind", "activation").field("activation", act_name(n->act));
                    break;
                case NodeKind::Affine: {
                    w.field("kind", "affine");
                    w.begin_array("weights");
                    for (double x : n->weights) w.element(x);
                    w.end_array();
                    if (n->has_bias) w.field("bias", n->bias);
                    break;
                }
            }
            if (!n->inputs.empty()) {
                w.begin_array("inputs");
                for (const Node* in : n->inputs) w.element(static_cast<long long>(in->id));
                w.end_array();
            }
            w.field("params", n->params());
            w.end_object();
        }
    }
    w.end_array().end();
    return w.str();
}

ExprGraph differentiate(const ExprGraph& g, int axis) {
    if (!g.valid()) throw ConfigError("differentiate(): null graph");
    if (axis < 0 || (g.dim > 0 && axis >= g.dim)) throw ConfigError("differentiate(): axis out of range");
    NodePool& pool = NodePool::instance();
    if (const Node* hit = pool.cached_derivative(g.root, axis)) return ExprGraph{hit, g.dim};

    std::vector<const Node*> nodes = reachable_topo(g.root);
    std::vector<ExprGraph> adjoint(nodes.size());
    adjoint[g.root->ord] = constant(1.0, g.dim);

    auto accumulate = [&](const Node* n, const ExprGraph& contribution) {
        ExprGraph& slot = adjoint[n->ord];
        slot = slot.valid() ? add(slot, contribution) : contribution;
    };

    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        const Node* n = *it;
        if (!adjoint[n->ord].valid()) continue;
        const ExprGraph adj = adjoint[n->ord];
        switch (n->kind) {
            case NodeKind::Input:
            case NodeKind::Constant:
                break;
            case NodeKind::Affine:
                for (std::size_t i = 0; i < n->inputs.size(); ++i)
                    accumulate(n->inputs[i], scale(adj, n->weights[i]));
                break;
            case NodeKind::Activation: {
                const ExprGraph u{n->inputs[0], g.dim};
                ExprGraph local;
                switch (n->act) {
                    case ActKind::Sin: local = activation(ActKind::Cos, u); break;
                    case ActKind::Cos: local = scale(activation(ActKind::Sin, u), -1.0); break;
                    case ActKind::Exp: local = ExprGraph{n, g.dim}; break;  // reuse exp node
                    case ActKind::Square: local = scale(u, 2.0); break;
                    default: throw ConfigError("differentiate(): activation has no derivative rule");
                }
                accumulate(n->inputs[0], mul(local, adj));
                break;
            }
        }
    }

    ExprGraph result = constant(0.0, g.dim);
    for (const Node* n : nodes)
        if (n->kind == NodeKind::Input && n->axis == axis && adjoint[n->ord].valid())
            result = adjoint[n->ord];
    pool.cache_derivative(g.root, axis, result.root);
    return result;
}

const ExprGraph& CoefficientGraphs::entry(int i, int j) const {
    if (i > j) std::swap(i, j);
    if (i == j) return a[i];
    if (i == 0) return a[j == 1 ? 3 : 4];
    return a[5];
}
ExprGraph& CoefficientGraphs::entry(int i, int j) {
    if (i > j) std::swap(i, j);
    if (i == j) return a[i];
    if (i == 0) return a[j == 1 ? 3 : 4];
    return a[5];
}

ExprGraph build_iterate(const ExprGraph& u_hat, const CoefficientGraphs& coeff,
                        const ExprGraph& f_nn, double eta) {
    const int d = coeff.dim;
    std::vector<double> weights;
    std::vector<ExprGraph> terms;

    std::array<ExprGraph, 3> first;
    for (int j = 0; j < d; ++j) first[j] = differentiate(u_hat, j);

    // second-order block: -sum_ij a_ij d_ij u (symmetry folds i<j pairs)
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            const ExprGraph& aij = coeff.entry(i, j);
            ExprGraph du_ij = differentiate(first[i], j);
            terms.push_back(mul(aij, du_ij));
            weights.push_back(i == j ? -1.0 : -2.0);
        }

    // first-order block: -sum_j (sum_i d_i a_ij) d_j u
    for (int j = 0; j < d; ++j) {
        ExprGraph s = constant(0.0, d);
        for (int i = 0; i < d; ++i) s = add(s, differentiate(coeff.entry(i, j), i));
        terms.push_back(mul(s, first[j]));
        weights.push_back(-1.0);
    }

    terms.push_back(mul(coeff.c, u_hat));
    weights.push_back(1.0);

    ExprGraph lu = affine(std::move(weights), std::move(terms));
    return affine({1.0, -eta, eta}, {u_hat, lu, f_nn});
}

GrowthAudit audit_growth(const CoefficientGraphs& coeff, const ExprGraph& f_nn,
                         const ExprGraph& u0, double eta, int T) {
    GrowthAudit audit;
    audit.dim = coeff.dim;
    std::vector<ExprGraph> a_all(coeff.a.begin(), coeff.a.end());
    audit.n_a = param_count_union(a_all);
    audit.n_c = param_count(coeff.c);
    audit.n_f = param_count(f_nn);
    audit.n_0 = param_count(u0);

    // successive iterates share their predecessors as subgraphs, so the
    // reachable sets nest and the counts can be accumulated incrementally
    const std::uint64_t epoch = NodePool::instance().new_epoch();
    long long running = 0;
    std::vector<const Node*> stack;
    auto accumulate = [&](const ExprGraph& g) {
        if (!g.valid()) return running;
        stack.push_back(g.root);
        while (!stack.empty()) {
            const Node* n = stack.back();
            stack.pop_back();
            if (n->audit_stamp == epoch) continue;
            n->audit_stamp = epoch;
            running += n->params();
            for (const Node* in : n->inputs) stack.push_back(in);
        }
        return running;
    };

    ExprGraph u = u0;
    long long prev = accumulate(u);
    audit.rows.push_back(GrowthRow{0, prev, prev});
    for (int t = 1; t <= T; ++t) {
        u = build_iterate(u, coeff, f_nn, eta);
        const long long n_t = accumulate(u);
        const long long bound = static_cast<long long>(
            kRecursionSizeConstant * (static_cast<double>(audit.dim) * audit.dim * (audit.n_a + prev) +
                                      prev + audit.n_f + audit.n_c));
        audit.rows.push_back(GrowthRow{t, n_t, bound});
        if (n_t > bound) audit.recurrence_ok = false;
        if (n_t < prev) audit.recurrence_ok = false;  // N_t must be non-decreasing
        prev = n_t;
    }
    audit.final_iterate = u;
    return audit;
}

long long unrolled_size_bound(int d, int T, long long n0, long long na, long long nf,
                              long long nc) {
    const double dd = std::pow(static_cast<double>(d), 2.0 * T);
    return static_cast<long long>(kUnrolledSizeConstant * (dd * (n0 + na) + T * (nf + nc)));
}

std::string counts_csv(const GrowthAudit& audit) {
    std::ostringstream os;
    os << "t,N_t,bound_t\n";
    for (const auto& row : audit.rows)
        os << row.t << ',' << row.n_params << ',' << row.recurrence_bound << '\n';
    return os.str();
}

ResidualTrace residual_trace(const DiscreteOperator& lt, const EigenDecomposition& eig_t, int k,
                             const GridFunction& f_spn_t, const ExprGraph& f_nn_graph,
                             const CoefficientGraphs& coeff_graphs, const ExprGraph& u0_graph,
                             int T, const ResidualConstants& consts) {
    if (k < 1 || k > eig_t.count()) throw ConfigError("residual_trace: k out of range");
    const Grid& grid = lt.grid;
    const double lambda1 = eig_t.eigenvalues[0];
    const double lambdak = eig_t.eigenvalues[k - 1];
    const double eta = 2.0 / (lambda1 + lambdak);

    ResidualTrace trace;
    trace.eta = eta;
    const bool gap_ok = consts.gamma > consts.delta;
    const bool cap_ok = consts.delta == 0.0 ||
                        T <= 1.0 / (20.0 * std::min(consts.lambda_k, 1.0) * consts.delta);
    trace.hypotheses_ok = gap_ok && cap_ok;

    GridFunction f_nn_grid = evaluate_on_grid(f_nn_graph, grid);
    GridFunction r = f_spn_t - f_nn_grid;
    const SpectralProjector span(eig_t, k);

    // The recurrence r_{t+1} = (I - eta L~) r_t - r amplifies top grid modes by
    // |1 - eta lambda_max| per step, and the top-mode content of the sampled r
    // is pure round-off. Evolve it per mode in the discrete eigenbasis with the
    // noise floor dropped; above the dense limit fall back to the cross
    // measurement ||u_t - u^_t|| / eta, which equals ||r_t|| in exact arithmetic.
    const bool modal = grid.num_nodes() <= kDenseEigensolveLimit;
    Vector r_coeffs, lambdas;
    if (modal) {
        const EigenDecomposition full = eigensolve(lt, static_cast<int>(grid.num_nodes()));
        const double w = grid.quad_weight();
        r_coeffs = w * (full.eigenvectors.transpose() * r.values);
        lambdas = Eigen::Map<const Vector>(full.eigenvalues.data(), full.count());
        const double floor = 1e-12 * norm_l2(r);
        for (Eigen::Index i = 0; i < r_coeffs.size(); ++i)
            if (std::abs(r_coeffs[i]) <= floor) r_coeffs[i] = 0.0;
    }
    Vector modal_state = Vector::Zero(r_coeffs.size());

    GridFunction u = GridFunction::zero(grid);       // grid iterate driven by f~_spn
    ExprGraph u_hat = u0_graph;

    for (int t = 0; t <= T; ++t) {
        ResidualStep step;
        step.t = t;
        GridFunction u_hat_grid = evaluate_on_grid(u_hat, grid);
        step.grid_gap = norm_l2(u - u_hat_grid);
        step.recurrence_norm = modal ? modal_state.norm() : step.grid_gap / eta;
        const double amp = t == 0 ? 0.0
                                  : static_cast<double>(t) * t *
                                        std::max(1.0, std::pow(static_cast<double>(t) * t *
                                                                   M_E * eta * consts.growth_c,
                                                               t));
        const double align = gap_ok ? 4.0 * (1.0 + consts.delta / (consts.gamma - consts.delta))
                                    : 0.0;
        const double eps_pair = t < static_cast<int>(consts.eps_pair_by_t.size())
                                    ? consts.eps_pair_by_t[t]
                                    : (consts.eps_pair_by_t.empty() ? 0.0
                                                                    : consts.eps_pair_by_t.back());
        step.cap = amp * (eps_pair + align * std::pow(consts.lambda_k, t) * consts.f_spn_norm);
        step.within_cap = std::max(step.recurrence_norm, step.grid_gap) <= step.cap + 1e-12;
        trace.max_grid_gap = std::max(trace.max_grid_gap, step.grid_gap);
        trace.steps.push_back(step);
        if (t == T) break;

        GridFunction raw(grid, u.values - eta * (lt.matrix * u.values - f_spn_t.values));
        u = project(span, raw);
        if (modal)
            for (Eigen::Index i = 0; i < modal_state.size(); ++i)
                modal_state[i] = (1.0 - eta * lambdas[i]) * modal_state[i] - r_coeffs[i];
        u_hat = build_iterate(u_hat, coeff_graphs, f_nn_graph, eta);
    }
    return trace;
}

}  // namespace specnet
