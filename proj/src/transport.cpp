#include "adb/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "adb/errors.hpp"

namespace adb::transport {

namespace {

double kahan_sum(const Eigen::VectorXd& v) {
    double sum = 0.0, comp = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double y = v[i] - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

}  // namespace

// ============================================================================
// PointCloud
// ============================================================================

PointCloud::PointCloud(Eigen::MatrixXd points, Eigen::VectorXd weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.rows() < 1 || points_.cols() < 1)
        throw InputError("PointCloud: need at least one point of dimension >= 1");
    if (weights_.size() != points_.rows())
        throw InputError("PointCloud: weight count does not match point count");
    if (!points_.allFinite())
        throw InputError("PointCloud: non-finite coordinate");
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
        if (!std::isfinite(weights_[i]) || weights_[i] < 0.0)
            throw InputError("PointCloud: weights must be finite and nonnegative");
    }
    if (std::fabs(kahan_sum(weights_) - 1.0) > 1e-12)
        throw InputError("PointCloud: weights must sum to 1 within 1e-12");
}

PointCloud PointCloud::uniform(Eigen::MatrixXd points) {
    const Eigen::Index n = points.rows();
    if (n < 1) throw InputError("PointCloud::uniform: need at least one point");
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    // Rescale by the accumulated sum so the sum-to-one invariant holds for any n.
    w /= kahan_sum(w);
    return PointCloud(std::move(points), std::move(w));
}

// ============================================================================
// Cost matrix
// ============================================================================

Eigen::MatrixXd cost_matrix(const PointCloud& a, const PointCloud& b) {
    if (a.dim() != b.dim())
        throw InputError("cost_matrix: dimension mismatch between clouds");
    const Eigen::Index n = a.size();
    const Eigen::Index m = b.size();
    Eigen::MatrixXd cost(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            cost(i, j) = (a.points().row(i) - b.points().row(j)).cwiseAbs().sum();
        }
    }
    return cost;
}

// ============================================================================
// Sinkhorn solver
// ============================================================================

namespace {

// Total order on clouds used to canonicalize the solve orientation, so that
// sinkhorn(a, b) and sinkhorn(b, a) yield bit-identical costs.
bool cloud_less(const PointCloud& x, const PointCloud& y) {
    if (x.size() != y.size()) return x.size() < y.size();
    if (x.dim() != y.dim()) return x.dim() < y.dim();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        for (Eigen::Index j = 0; j < x.dim(); ++j) {
            const double xv = x.points()(i, j);
            const double yv = y.points()(i, j);
            if (xv != yv) return xv < yv;
        }
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x.weights()[i] != y.weights()[i]) return x.weights()[i] < y.weights()[i];
    }
    return false;
}

void validate_config(const SinkhornConfig& cfg) {
    if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon))
        throw InputError("sinkhorn: epsilon must be positive and finite");
    if (cfg.max_iterations < 1)
        throw InputError("sinkhorn: max_iterations must be >= 1");
    if (!(cfg.feasibility_tolerance > 0.0))
        throw InputError("sinkhorn: feasibility_tolerance must be positive");
}

Eigen::VectorXd safe_log(const Eigen::VectorXd& w) {
    Eigen::VectorXd out(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        out[i] = w[i] > 0.0 ? std::log(w[i])
                            : -std::numeric_limits<double>::infinity();
    }
    return out;
}

struct CoreResult {
    Eigen::VectorXd phi;    // f / eps
    Eigen::VectorXd gamma;  // g / eps
    int iterations = 0;
    double violation = 0.0;
};

// Stabilized scaling iterations at fixed epsilon: the kernel is built from
// the absorbed potentials f, g (cost units), so its entries stay bounded and
// the per-iteration work is two matrix-vector products. Whenever a scaling
// vector drifts too far from 1 it is absorbed into the potentials and the
// kernel is rebuilt. Returns iterations consumed; f and g come back absorbed.
int stabilized_stage(const Eigen::MatrixXd& cost, const Eigen::VectorXd& wa,
                     const Eigen::VectorXd& wb, double eps, double tolerance,
                     int max_iter, Eigen::VectorXd& f, Eigen::VectorXd& g,
                     double& violation, Eigen::MatrixXd& kernel) {
    constexpr double kTiny = std::numeric_limits<double>::min();
    constexpr double kAbsorbLog = 40.0;

    auto rebuild = [&] {
        for (Eigen::Index j = 0; j < cost.cols(); ++j) {
            kernel.col(j) =
                ((f.array() + g[j] - cost.col(j).array()) / eps).exp().matrix();
        }
    };
    auto absorb = [&](Eigen::VectorXd& u, Eigen::VectorXd& v) {
        f += eps * u.array().log().matrix();
        g += eps * v.array().log().matrix();
        u.setOnes();
        v.setOnes();
        rebuild();
    };

    rebuild();
    Eigen::VectorXd u = Eigen::VectorXd::Ones(cost.rows());
    Eigen::VectorXd v = Eigen::VectorXd::Ones(cost.cols());
    Eigen::VectorXd kv = kernel * v;

    int iter = 0;
    for (iter = 1; iter <= max_iter; ++iter) {
        u = wa.array() / kv.array().max(kTiny);
        v = wb.array() / (kernel.transpose() * u).array().max(kTiny);
        kv = kernel * v;

        double viol = 0.0;
        for (Eigen::Index i = 0; i < cost.rows(); ++i)
            viol = std::max(viol, std::fabs(u[i] * kv[i] - wa[i]));
        violation = viol;
        // Stop marginally inside the tolerance so the plan rebuilt from the
        // absorbed potentials stays within it after rounding.
        if (viol <= 0.999 * tolerance) break;

        double drift = 0.0;
        for (Eigen::Index i = 0; i < u.size(); ++i)
            if (wa[i] > 0.0) drift = std::max(drift, std::fabs(std::log(u[i])));
        for (Eigen::Index j = 0; j < v.size(); ++j)
            if (wb[j] > 0.0) drift = std::max(drift, std::fabs(std::log(v[j])));
        if (drift > kAbsorbLog) {
            absorb(u, v);
            kv = kernel * v;
        }
    }
    // Absorb the final scaling so callers read converged potentials.
    f += eps * safe_log(u);
    g += eps * safe_log(v);
    return std::min(iter, max_iter);
}

// Solve with a decreasing-epsilon warm-start schedule. Plain iterations at
// small epsilon show an O(1/t) marginal-violation tail; warm starting from
// epsilon * 2^k stages shrinks the tail constant by orders of magnitude. The
// final stage runs the contractual stopping rule at the target epsilon, and
// all stages share cfg.max_iterations.
CoreResult solve_log_domain(const Eigen::MatrixXd& cost, const Eigen::VectorXd& wa,
                            const Eigen::VectorXd& wb, const SinkhornConfig& cfg) {
    const double max_cost = cost.maxCoeff();

    int stages = 0;
    while (cfg.epsilon * std::pow(2.0, stages) < max_cost / 2.0 && stages < 80) ++stages;

    CoreResult res;
    Eigen::MatrixXd kernel(cost.rows(), cost.cols());
    Eigen::VectorXd f = Eigen::VectorXd::Zero(cost.rows());  // potentials in cost units
    Eigen::VectorXd g = Eigen::VectorXd::Zero(cost.cols());

    int budget = cfg.max_iterations;
    const double warm_tolerance = std::max(cfg.feasibility_tolerance * 10.0, 1e-5);

    for (int k = stages; k >= 1 && budget > 1; --k) {
        const double eps_k = cfg.epsilon * std::pow(2.0, k);
        const int cap = std::min(budget - 1, std::max(50, cfg.max_iterations / 16));
        const int used = stabilized_stage(cost, wa, wb, eps_k, warm_tolerance, cap, f, g,
                                          res.violation, kernel);
        budget -= used;
        res.iterations += used;
    }

    const int used = stabilized_stage(cost, wa, wb, cfg.epsilon,
                                      cfg.feasibility_tolerance, std::max(budget, 1), f,
                                      g, res.violation, kernel);
    res.iterations += used;
    res.phi = f / cfg.epsilon;
    res.gamma = g / cfg.epsilon;
    if (res.violation > cfg.feasibility_tolerance) {
        throw ConvergenceError("sinkhorn: marginal violation " +
                                   std::to_string(res.violation) + " after " +
                                   std::to_string(res.iterations) + " iterations",
                               res.violation);
    }
    return res;
}

// Classic scaling iterations; kept for diagnostics and cross-checking. Breaks
// down when cost/epsilon is large, which is why log_domain is the default.
CoreResult solve_scaling(const Eigen::MatrixXd& cost, const Eigen::VectorXd& wa,
                         const Eigen::VectorXd& wb, const SinkhornConfig& cfg) {
    constexpr double kFloor = 1e-300;
    const Eigen::MatrixXd kernel =
        (-cost / cfg.epsilon).array().exp().cwiseMax(kFloor).matrix();

    Eigen::VectorXd u = Eigen::VectorXd::Ones(cost.rows());
    Eigen::VectorXd v = Eigen::VectorXd::Ones(cost.cols());

    CoreResult res;
    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        u = wa.array() / (kernel * v).array().max(kFloor);
        v = wb.array() / (kernel.transpose() * u).array().max(kFloor);

        const Eigen::VectorXd row_sums = u.array() * (kernel * v).array();
        double viol = 0.0;
        for (Eigen::Index i = 0; i < cost.rows(); ++i)
            viol = std::max(viol, std::fabs(row_sums[i] - wa[i]));
        res.iterations = iter;
        res.violation = viol;
        if (viol <= cfg.feasibility_tolerance) {
            res.phi = safe_log(u);
            res.gamma = safe_log(v);
            return res;
        }
    }
    throw ConvergenceError("sinkhorn: marginal violation " +
                               std::to_string(res.violation) + " after " +
                               std::to_string(cfg.max_iterations) + " iterations",
                           res.violation);
}

struct SolveOutput {
    Eigen::MatrixXd cost;
    CoreResult core;
    bool swapped = false;
    bool closed_form = false;
    Eigen::MatrixXd closed_plan;
    double closed_cost = 0.0;
};

// Shared driver: handles validation, canonical orientation, and the
// single-point closed forms; iterates otherwise.
SolveOutput solve(const PointCloud& a, const PointCloud& b,
                  const SinkhornConfig& cfg) {
    validate_config(cfg);
    SolveOutput out;

    // Single-point instances have a unique feasible plan.
    if (a.size() == 1 || b.size() == 1) {
        out.closed_form = true;
        out.cost = cost_matrix(a, b);
        out.closed_plan = a.weights() * b.weights().transpose();
        double c = 0.0;
        if (a.size() == 1) {
            for (Eigen::Index j = 0; j < b.size(); ++j)
                c += out.cost(0, j) * b.weights()[j];
        } else {
            for (Eigen::Index i = 0; i < a.size(); ++i)
                c += out.cost(i, 0) * a.weights()[i];
        }
        out.closed_cost = c;
        return out;
    }

    out.swapped = cloud_less(b, a);
    const PointCloud& first = out.swapped ? b : a;
    const PointCloud& second = out.swapped ? a : b;
    out.cost = cost_matrix(first, second);
    out.core = cfg.log_domain
                   ? solve_log_domain(out.cost, first.weights(), second.weights(), cfg)
                   : solve_scaling(out.cost, first.weights(), second.weights(), cfg);
    return out;
}

double cost_from_potentials(const Eigen::MatrixXd& cost, const Eigen::MatrixXd& scaled,
                            const CoreResult& core) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < cost.rows(); ++i) {
        const double phi = core.phi[i];
        if (!std::isfinite(phi)) continue;
        double row = 0.0;
        for (Eigen::Index j = 0; j < cost.cols(); ++j) {
            row += cost(i, j) * std::exp(phi + core.gamma[j] + scaled(i, j));
        }
        total += row;
    }
    return total;
}

}  // namespace

SinkhornResult sinkhorn(const PointCloud& a, const PointCloud& b,
                        const SinkhornConfig& cfg) {
    SolveOutput s = solve(a, b, cfg);
    SinkhornResult result;
    result.plan.regularization = cfg.epsilon;

    if (s.closed_form) {
        result.plan.matrix = s.closed_plan;
        result.cost = s.closed_cost;
        result.iterations = 0;
        result.marginal_violation = 0.0;
        return result;
    }

    const Eigen::MatrixXd scaled = -s.cost / cfg.epsilon;
    Eigen::MatrixXd plan(s.cost.rows(), s.cost.cols());
    for (Eigen::Index i = 0; i < s.cost.rows(); ++i)
        for (Eigen::Index j = 0; j < s.cost.cols(); ++j)
            plan(i, j) = std::exp(s.core.phi[i] + s.core.gamma[j] + scaled(i, j));

    result.cost = cost_from_potentials(s.cost, scaled, s.core);
    result.iterations = s.core.iterations;
    result.plan.matrix = s.swapped ? plan.transpose() : std::move(plan);

    const Eigen::VectorXd row_sums = result.plan.matrix.rowwise().sum();
    const Eigen::VectorXd col_sums = result.plan.matrix.colwise().sum();
    double viol = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        viol = std::max(viol, std::fabs(row_sums[i] - a.weights()[i]));
    for (Eigen::Index j = 0; j < b.size(); ++j)
        viol = std::max(viol, std::fabs(col_sums[j] - b.weights()[j]));
    result.marginal_violation = viol;
    return result;
}

double sinkhorn_cost(const PointCloud& a, const PointCloud& b,
                     const SinkhornConfig& cfg) {
    SolveOutput s = solve(a, b, cfg);
    if (s.closed_form) return s.closed_cost;
    const Eigen::MatrixXd scaled = -s.cost / cfg.epsilon;
    return cost_from_potentials(s.cost, scaled, s.core);
}

double debiased_distance(const PointCloud& a, const PointCloud& b,
                         const SinkhornConfig& cfg) {
    const double w_ab = sinkhorn_cost(a, b, cfg);
    const double w_aa = sinkhorn_cost(a, a, cfg);
    const double w_bb = sinkhorn_cost(b, b, cfg);
    return 2.0 * w_ab - w_aa - w_bb;
}

// ============================================================================
// Exact small-instance solver
// ============================================================================

namespace {

struct Arc {
    int to;
    int rev;        // index of the reverse arc in graph[to]
    double cap;     // residual capacity
    double cost;
};

class MinCostFlow {
public:
    explicit MinCostFlow(int nodes) : graph_(nodes) {}

    void add_arc(int from, int to, double cap, double cost) {
        graph_[from].push_back({to, static_cast<int>(graph_[to].size()), cap, cost});
        graph_[to].push_back({from, static_cast<int>(graph_[from].size()) - 1, 0.0, -cost});
    }

    // Successive shortest paths; augments until `supply` units flow from
    // source to sink. Exact for the transportation LP: every augmentation
    // saturates a source or sink arc.
    double run(int source, int sink, double supply) {
        double total_cost = 0.0;
        double remaining = supply;
        const int n = static_cast<int>(graph_.size());
        // Each augmentation saturates one of the <= n terminal arcs; the 4x
        // margin absorbs floating-point crumbs in residual capacities.
        const int max_rounds = 4 * n + 8;

        for (int round = 0; round < max_rounds && remaining > 1e-12; ++round) {
            // Bellman-Ford on the residual network.
            constexpr double kInf = std::numeric_limits<double>::infinity();
            std::vector<double> dist(n, kInf);
            std::vector<int> prev_node(n, -1);
            std::vector<int> prev_arc(n, -1);
            dist[source] = 0.0;
            for (int relax = 0; relax < n; ++relax) {
                bool changed = false;
                for (int u = 0; u < n; ++u) {
                    if (dist[u] == kInf) continue;
                    for (int k = 0; k < static_cast<int>(graph_[u].size()); ++k) {
                        const Arc& arc = graph_[u][k];
                        if (arc.cap <= 1e-15) continue;
                        if (dist[u] + arc.cost < dist[arc.to] - 1e-15) {
                            dist[arc.to] = dist[u] + arc.cost;
                            prev_node[arc.to] = u;
                            prev_arc[arc.to] = k;
                            changed = true;
                        }
                    }
                }
                if (!changed) break;
            }
            if (dist[sink] == kInf) break;

            double bottleneck = remaining;
            for (int v = sink; v != source; v = prev_node[v])
                bottleneck = std::min(bottleneck, graph_[prev_node[v]][prev_arc[v]].cap);
            for (int v = sink; v != source; v = prev_node[v]) {
                Arc& arc = graph_[prev_node[v]][prev_arc[v]];
                arc.cap -= bottleneck;
                graph_[v][arc.rev].cap += bottleneck;
            }
            total_cost += bottleneck * dist[sink];
            remaining -= bottleneck;
        }
        return total_cost;
    }

private:
    std::vector<std::vector<Arc>> graph_;
};

}  // namespace

double exact_ot_oracle(const PointCloud& a, const PointCloud& b) {
    const Eigen::Index n = a.size();
    const Eigen::Index m = b.size();
    if (n * m > 64)
        throw SizeError("exact_ot_oracle: instance " + std::to_string(n) + "x" +
                        std::to_string(m) + " exceeds the n*m <= 64 limit");
    const Eigen::MatrixXd cost = cost_matrix(a, b);

    const int source = 0;
    const int sink = static_cast<int>(n + m) + 1;
    MinCostFlow flow(sink + 1);
    for (Eigen::Index i = 0; i < n; ++i)
        flow.add_arc(source, static_cast<int>(i) + 1, a.weights()[i], 0.0);
    for (Eigen::Index j = 0; j < m; ++j)
        flow.add_arc(static_cast<int>(n + j) + 1, sink, b.weights()[j], 0.0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            flow.add_arc(static_cast<int>(i) + 1, static_cast<int>(n + j) + 1,
                         std::numeric_limits<double>::infinity(), cost(i, j));

    return flow.run(source, sink, 1.0);
}

}  // namespace adb::transport
