#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "cdn/dag.hpp"
#include "cdn/matrix.hpp"
#include "cdn/stats.hpp"

namespace cdn {

// Endpoint marks of a partial ancestral graph. mark(i,j) is the mark at j's end
// of the edge between i and j; None at both ends means no edge.
enum class Mark : uint8_t { None = 0, Circle = 1, Arrow = 2, Tail = 3 };

class PagMatrix {
public:
    PagMatrix() = default;
    explicit PagMatrix(int k) : k_(k), marks_(k * k, Mark::None) {}

    int size() const { return k_; }
    Mark mark(int i, int j) const { return marks_[i * k_ + j]; }
    void set_mark(int i, int j, Mark m) { marks_[i * k_ + j] = m; }
    bool adjacent(int i, int j) const { return i != j && mark(i, j) != Mark::None; }

    void add_edge(int i, int j, Mark at_i, Mark at_j) {
        set_mark(j, i, at_i);
        set_mark(i, j, at_j);
    }
    void remove_edge(int i, int j) {
        set_mark(i, j, Mark::None);
        set_mark(j, i, Mark::None);
    }

private:
    int k_ = 0;
    std::vector<Mark> marks_;
};

// Conditional-independence oracle used by FCI. Implementations: Fisher-z on data,
// d-separation on a known DAG (tests).
class CiTest {
public:
    virtual ~CiTest() = default;
    virtual int variable_count() const = 0;
    virtual bool independent(int i, int j, const std::vector<int>& s) = 0;
};

class FisherZCiTest final : public CiTest {
public:
    FisherZCiTest(const Matrix& data, double alpha);
    // from a precomputed correlation matrix over m samples
    FisherZCiTest(Matrix rho, size_t m, double alpha);
    int variable_count() const override { return static_cast<int>(rho_.rows); }
    bool independent(int i, int j, const std::vector<int>& s) override;
    bool is_degenerate_column(int j) const { return degenerate_[j]; }

private:
    Matrix rho_;
    size_t m_;
    double alpha_;
    std::vector<char> degenerate_;  // zero-variance columns, treated as isolated
};

class DSepCiTest final : public CiTest {
public:
    explicit DSepCiTest(const Dag& g) : g_(g) {}
    int variable_count() const override { return g_.n; }
    bool independent(int i, int j, const std::vector<int>& s) override {
        return d_separated(g_, i, j, s);
    }

private:
    Dag g_;
};

struct FciOptions {
    int max_cond_size = -1;  // default k - 2
    bool complete_rules = false;  // R5-R7 off; selection bias absent by construction
};

// Classic FCI: skeleton, Possible-D-SEP pruning, collider orientation, Zhang R1-R4.
PagMatrix fci(CiTest& test, const FciOptions& opts = {});
// Convenience wrapper over a data matrix with the Fisher-z test.
PagMatrix fci(const Matrix& d_subset, double alpha, const FciOptions& opts = {});

struct LocalEstimates {
    int n = 0;  // full variable count
    int k = 0;
    std::vector<std::vector<int>> subsets;  // T entries of k distinct indices
    std::vector<PagMatrix> pags;            // parallel to subsets
    // ordered pair (i,j) -> list of subset slots covering both i and j
    std::map<std::pair<int, int>, std::vector<int>> pair_index;

    void build_pair_index();
};

// Correlation-guided subset sampler: seed node uniform, then grow by sampling
// proportional to max |corr| against the current subset (floored at 1e-3).
std::vector<std::vector<int>> sample_subsets(const Matrix& rho, int k, int t,
                                             uint64_t seed);

// T FCI runs over sampled subsets of the columns of d. The runs are independent
// and execute in a parallel map; results are stored in deterministic slot order.
LocalEstimates local_estimates(const Matrix& d, int k, int t, double alpha,
                               uint64_t seed);
// Same, reusing precomputed summary statistics of d.
LocalEstimates local_estimates(const Matrix& d, const SummaryStats& st, int k, int t,
                               double alpha, uint64_t seed);

}  // namespace cdn
