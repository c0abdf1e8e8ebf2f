#include "imstab/network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace imstab {

namespace {
constexpr double pivot_eps = 1e-13;
constexpr double feas_eps = 1e-9;
}

int TransportSimplex::arc_src(long a) const {
    if (a < n_real_arcs_) return static_cast<int>(a / m_);
    int u = static_cast<int>(a - n_real_arcs_);
    return u < n_ ? u : root_;  // source-side artificials point u->root
}

int TransportSimplex::arc_tgt(long a) const {
    if (a < n_real_arcs_) return n_ + static_cast<int>(a % m_);
    int u = static_cast<int>(a - n_real_arcs_);
    return u < n_ ? root_ : u;  // sink-side artificials point root->u
}

void TransportSimplex::rebuild_tree_arrays() {
    std::fill(first_child_.begin(), first_child_.end(), -1);
    for (int u = 0; u < nodes_; ++u) {
        if (u == root_) continue;
        int p = parent_[u];
        next_sibling_[u] = first_child_[p];
        first_child_[p] = u;
    }
    // iterative DFS from the root: depth and potentials
    static thread_local std::vector<int> stack;
    stack.clear();
    stack.push_back(root_);
    depth_[root_] = 0;
    pi_[root_] = 0.0;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int c = first_child_[u]; c != -1; c = next_sibling_[c]) {
            depth_[c] = depth_[u] + 1;
            long a = pred_arc_[c];
            double ca = a < n_real_arcs_ ? cost_[a] : art_cost_[a - n_real_arcs_];
            // zero reduced cost on tree arcs: c + pi[src] - pi[tgt] = 0
            pi_[c] = pred_forward_[c] ? pi_[u] - ca : pi_[u] + ca;
            stack.push_back(c);
        }
    }
}

bool TransportSimplex::find_entering() {
    double best = 0.0;
    long best_arc = -1;
    long e = next_arc_;
    long cnt = block_size_;
    for (long scanned = 0; scanned < n_real_arcs_; ++scanned, ++e) {
        if (e >= n_real_arcs_) e -= n_real_arcs_;
        if (state_[e]) {
            int s = static_cast<int>(e / m_);
            int t = n_ + static_cast<int>(e % m_);
            double r = cost_[e] + pi_[s] - pi_[t];
            if (r < best) {
                best = r;
                best_arc = e;
            }
        }
        if (--cnt == 0) {
            if (best_arc >= 0) {
                int s = static_cast<int>(best_arc / m_);
                int t = n_ + static_cast<int>(best_arc % m_);
                double scale = std::max({1.0, std::abs(pi_[s]), std::abs(pi_[t]),
                                         std::abs(cost_[best_arc])});
                if (best < -pivot_eps * scale) {
                    next_arc_ = e + 1;
                    in_arc_ = best_arc;
                    return true;
                }
            }
            cnt = block_size_;
        }
    }
    if (best_arc >= 0) {
        int s = static_cast<int>(best_arc / m_);
        int t = n_ + static_cast<int>(best_arc % m_);
        double scale =
            std::max({1.0, std::abs(pi_[s]), std::abs(pi_[t]), std::abs(cost_[best_arc])});
        if (best < -pivot_eps * scale) {
            next_arc_ = e;
            in_arc_ = best_arc;
            return true;
        }
    }
    return false;
}

void TransportSimplex::pivot() {
    const int s = arc_src(in_arc_);
    const int t = arc_tgt(in_arc_);

    // join = lowest common ancestor
    int u = s, v = t;
    while (u != v) {
        if (depth_[u] > depth_[v])
            u = parent_[u];
        else
            v = parent_[v];
    }
    const int join = u;

    // ratio test; ties keep the tree strongly feasible: first (source-side)
    // path keeps the earliest minimizer, second path the latest
    double delta = std::numeric_limits<double>::infinity();
    int u_out = -1;
    int side = 0;
    for (int w = s; w != join; w = parent_[w]) {
        double d = pred_forward_[w] ? flow_[pred_arc_[w]]
                                    : std::numeric_limits<double>::infinity();
        if (d < delta) {
            delta = d;
            u_out = w;
            side = 1;
        }
    }
    for (int w = t; w != join; w = parent_[w]) {
        double d = pred_forward_[w] ? std::numeric_limits<double>::infinity()
                                    : flow_[pred_arc_[w]];
        if (d <= delta) {
            delta = d;
            u_out = w;
            side = 2;
        }
    }
    if (!std::isfinite(delta)) throw std::runtime_error("transport simplex: unbounded cycle");

    // push delta around the cycle
    if (delta > 0.0) {
        flow_[in_arc_] += delta;
        for (int w = s; w != join; w = parent_[w])
            flow_[pred_arc_[w]] += pred_forward_[w] ? -delta : delta;
        for (int w = t; w != join; w = parent_[w])
            flow_[pred_arc_[w]] += pred_forward_[w] ? delta : -delta;
    }

    if (u_out < 0) throw std::runtime_error("transport simplex: no leaving arc");

    long out_arc = pred_arc_[u_out];
    state_[in_arc_] = 0;
    if (out_arc == in_arc_) return;  // degenerate self-replacement cannot happen with state flip
    state_[out_arc] = 1;
    flow_[out_arc] = 0.0;

    // re-hang the detached subtree: reverse parents along u_in .. u_out
    int u_in = side == 1 ? s : t;
    int v_in = side == 1 ? t : s;
    static thread_local std::vector<int> path;
    path.clear();
    for (int w = u_in;; w = parent_[w]) {
        path.push_back(w);
        if (w == u_out) break;
    }
    // old pred data along the path before overwriting
    static thread_local std::vector<long> old_arc;
    static thread_local std::vector<signed char> old_fwd;
    old_arc.clear();
    old_fwd.clear();
    for (int w : path) {
        old_arc.push_back(pred_arc_[w]);
        old_fwd.push_back(pred_forward_[w]);
    }
    parent_[path[0]] = v_in;
    pred_arc_[path[0]] = in_arc_;
    pred_forward_[path[0]] = (path[0] == arc_src(in_arc_)) ? 1 : 0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        parent_[path[i]] = path[i - 1];
        pred_arc_[path[i]] = old_arc[i - 1];
        pred_forward_[path[i]] = old_fwd[i - 1] ? 0 : 1;
    }
    rebuild_tree_arrays();
}

TransportSimplex::Status TransportSimplex::solve(const Eigen::VectorXd& supply,
                                                 const Eigen::VectorXd& demand,
                                                 const Eigen::MatrixXd& cost) {
    n_ = static_cast<int>(supply.size());
    m_ = static_cast<int>(demand.size());
    if (cost.rows() != n_ || cost.cols() != m_)
        throw std::invalid_argument("transport simplex: cost shape mismatch");
    if (n_ == 0 || m_ == 0) throw std::invalid_argument("transport simplex: empty marginal");
    double sa = supply.sum(), sb = demand.sum();
    if (std::abs(sa - sb) > feas_eps)
        throw std::invalid_argument("transport simplex: marginal masses differ");

    nodes_ = n_ + m_ + 1;
    root_ = n_ + m_;
    n_real_arcs_ = long(n_) * m_;

    // row-major view of the cost matrix
    static thread_local std::vector<double> cbuf;
    cbuf.resize(std::size_t(n_real_arcs_));
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < m_; ++j) cbuf[std::size_t(i) * m_ + j] = cost(i, j);
    cost_ = cbuf.data();

    double max_abs_cost = 0.0;
    for (long a = 0; a < n_real_arcs_; ++a) max_abs_cost = std::max(max_abs_cost, std::abs(cost_[a]));
    big_cost_ = (max_abs_cost + 1.0) * nodes_;

    flow_.assign(std::size_t(n_real_arcs_) + nodes_ - 1, 0.0);
    state_.assign(std::size_t(n_real_arcs_) + nodes_ - 1, 1);
    pi_.assign(nodes_, 0.0);
    parent_.assign(nodes_, -1);
    pred_arc_.assign(nodes_, -1);
    pred_forward_.assign(nodes_, 0);
    depth_.assign(nodes_, 0);
    first_child_.assign(nodes_, -1);
    next_sibling_.assign(nodes_, -1);
    art_cost_.assign(nodes_ - 1, big_cost_);

    // initial basis: every node hangs on the root through its artificial arc.
    // Source-side artificials are free; only root->sink flow carries the big
    // penalty, which keeps potentials small on the source side.
    double scale_fix = sa / sb;
    for (int u = 0; u < n_ + m_; ++u) {
        parent_[u] = root_;
        long a = n_real_arcs_ + u;
        pred_arc_[u] = a;
        state_[a] = 0;
        if (u < n_) {
            pred_forward_[u] = 1;  // u -> root
            flow_[a] = supply[u];
            art_cost_[u] = 0.0;
        } else {
            pred_forward_[u] = 0;  // root -> u
            flow_[a] = demand[u - n_] * scale_fix;
        }
    }
    rebuild_tree_arrays();

    block_size_ = std::max<long>(16, static_cast<long>(std::sqrt(double(n_real_arcs_))));
    next_arc_ = 0;
    pivots_ = 0;

    // warm-up pivots: cheapest incoming arc of every sink
    for (int j = 0; j < m_; ++j) {
        long best = -1;
        double bc = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n_; ++i) {
            long a = long(i) * m_ + j;
            if (cost_[a] < bc) {
                bc = cost_[a];
                best = a;
            }
        }
        int sN = arc_src(best), tN = arc_tgt(best);
        if (state_[best] && cost_[best] + pi_[sN] - pi_[tN] < 0.0) {
            in_arc_ = best;
            pivot();
            ++pivots_;
        }
    }

    const long pivot_limit = 2000000 + 200L * nodes_;
    while (find_entering()) {
        if (++pivots_ > pivot_limit) return Status::pivot_limit;
        pivot();
    }

    // artificial arcs must be empty (tiny residue comes from mass roundoff)
    for (long a = n_real_arcs_; a < static_cast<long>(flow_.size()); ++a) {
        if (flow_[a] != 0.0) {
            if (std::abs(flow_[a]) > feas_eps) return Status::infeasible;
            flow_[a] = 0.0;
        }
    }
    total_cost_ = 0.0;
    for (long a = 0; a < n_real_arcs_; ++a)
        if (flow_[a] != 0.0) total_cost_ += flow_[a] * cost_[a];
    return Status::optimal;
}

}  // namespace imstab
