#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace imstab {

// Primal network simplex for the dense transportation problem
//   min sum_ij c_ij x_ij   s.t.  sum_j x_ij = a_i,  sum_i x_ij = b_j,  x >= 0.
//
// Spanning-tree basis with block pricing; the leaving-arc tie rule keeps the
// tree strongly feasible so degenerate pivots cannot cycle. Supplies are
// real-valued; the relative pivot tolerance bounds the cost suboptimality by
// ~1e-13 * max|c| at unit total mass.
class TransportSimplex {
public:
    enum class Status { optimal, infeasible, pivot_limit };

    Status solve(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand,
                 const Eigen::MatrixXd& cost);

    // flow on arc (i,j) after a successful solve
    double flow(int i, int j) const { return flow_[std::size_t(i) * m_ + j]; }
    double total_cost() const { return total_cost_; }
    long pivots() const { return pivots_; }

private:
    int arc_src(long a) const;
    int arc_tgt(long a) const;
    void rebuild_tree_arrays();
    bool find_entering();
    void pivot();

    int n_ = 0, m_ = 0, nodes_ = 0, root_ = 0;
    long n_real_arcs_ = 0;
    const double* cost_ = nullptr;

    std::vector<double> flow_;     // real arcs then artificial arcs
    std::vector<signed char> state_;  // 1 = nonbasic at lower bound, 0 = in tree
    std::vector<double> pi_;
    std::vector<int> parent_;
    std::vector<long> pred_arc_;
    std::vector<signed char> pred_forward_;  // pred arc directed node->parent
    std::vector<int> depth_;
    std::vector<int> first_child_, next_sibling_;
    std::vector<double> art_cost_;
    long in_arc_ = -1;
    long next_arc_ = 0;
    long block_size_ = 0;
    long pivots_ = 0;
    double total_cost_ = 0.0;
    double big_cost_ = 0.0;
};

}  // namespace imstab
