#pragma once

#include "pathlasso/common.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pathlasso {

/// Bounded non-negative factorization problem: find factors with
/// target ~ factors[0] * factors[1] * ... * factors.back(), each entry kept
/// in [0, seed entry]. `seeds` therefore runs output side first (W_L before
/// W_1). The optional element-wise l1/l2 penalties default to off; the path
/// penalty already lives in the target.
struct FactorizationProblem {
    Matrix target;
    std::vector<Matrix> seeds;
    double l1 = 0.0;
    double l2 = 0.0;
    int max_sweeps = 200;
    double tolerance = 1e-6;

    void validate() const
    {
        check_shape(!seeds.empty(), "factorization: no seeds");
        Index rows = seeds.front().rows();
        Index cols = seeds.front().cols();
        for (std::size_t k = 1; k < seeds.size(); ++k) {
            check_shape(seeds[k].rows() == cols,
                        "factorization: seeds not conformable at position " + std::to_string(k));
            cols = seeds[k].cols();
        }
        check_shape(target.rows() == rows && target.cols() == cols,
                    "factorization: target shape does not match seed chain");
        for (const Matrix& s : seeds) {
            if (!s.allFinite() || s.minCoeff() < 0.0)
                throw NumericError("factorization: seeds must be finite and non-negative");
        }
        if (l1 < 0.0 || l2 < 0.0 || max_sweeps < 1 || tolerance <= 0.0)
            throw ConfigError("factorization: bad penalty/stopping settings");
    }
};

struct FactorizationResult {
    std::vector<Matrix> factors;
    std::vector<double> objective_trace;  // initial value, then one entry per sweep
    bool converged = false;
};

inline Matrix product_chain(const std::vector<Matrix>& factors)
{
    Matrix prod = factors.front();
    for (std::size_t k = 1; k < factors.size(); ++k)
        prod = prod * factors[k];
    return prod;
}

/// 1/2 ||V - prod||_F^2 + l1 * sum(entries) + l2/2 * sum(entries^2).
inline double factorization_objective(const Matrix& target, const std::vector<Matrix>& factors,
                                      double l1, double l2)
{
    double obj = 0.5 * (target - product_chain(factors)).squaredNorm();
    if (l1 > 0.0 || l2 > 0.0) {
        for (const Matrix& f : factors)
            obj += l1 * f.sum() + 0.5 * l2 * f.squaredNorm();
    }
    return obj;
}

/// Penalized path matrix P = (prod |W_l|) o max(1 - threshold/conn, 0).
/// `weights` is in network order (W_1 first); conn and thresholds are
/// d_L x d_0. A +infinity threshold or a zero connection gives a zero entry.
inline Matrix penalized_path_matrix(const std::vector<Matrix>& weights, const Matrix& conn,
                                    const Matrix& thresholds)
{
    check_shape(!weights.empty(), "penalized_path_matrix: empty weight list");
    Matrix abs_chain = weights.front().cwiseAbs();
    for (std::size_t l = 1; l < weights.size(); ++l) {
        check_shape(weights[l].cols() == abs_chain.rows(), "penalized_path_matrix: non-conformable");
        abs_chain = weights[l].cwiseAbs() * abs_chain;
    }
    check_shape(conn.rows() == abs_chain.rows() && conn.cols() == abs_chain.cols(),
                "penalized_path_matrix: connection matrix shape mismatch");
    check_shape(thresholds.rows() == conn.rows() && thresholds.cols() == conn.cols(),
                "penalized_path_matrix: threshold shape mismatch");

    Matrix out(conn.rows(), conn.cols());
    for (Index i = 0; i < conn.rows(); ++i)
        for (Index j = 0; j < conn.cols(); ++j) {
            const double c = conn(i, j);
            const double t = thresholds(i, j);
            if (t < 0.0)
                throw ConfigError("penalized_path_matrix: negative threshold");
            const double factor = (c > 0.0 && std::isfinite(t)) ? std::max(1.0 - t / c, 0.0) : 0.0;
            out(i, j) = abs_chain(i, j) * factor;
        }
    return out;
}

/// One coordinate-descent pass over all entries of the middle factor of
/// V ~ left * factor * right. Each entry moves by the closed-form Newton step
///   s* = ((L^T V R^T - L^T L M R R^T)_pr - l1 - l2 M_pr)
///        / ((L^T L)_pp (R R^T)_rr + l2)
/// and is clamped to [0, seed]. Entries whose curvature is zero (l2 = 0 and a
/// dead row/column) are skipped. The objective never increases.
inline void update_middle(Matrix& factor, const Matrix& left, const Matrix& right,
                          const Matrix& target, double l1, double l2, const Matrix& seed)
{
    check_shape(left.cols() == factor.rows() && right.rows() == factor.cols(),
                "update_middle: left/right do not match factor");
    check_shape(target.rows() == left.rows() && target.cols() == right.cols(),
                "update_middle: target shape mismatch");
    check_shape(seed.rows() == factor.rows() && seed.cols() == factor.cols(),
                "update_middle: seed shape mismatch");

    const Matrix ltl = left.transpose() * left;
    const Matrix rrt = right * right.transpose();
    const Matrix g1 = left.transpose() * target * right.transpose();
    Matrix cur = ltl * factor * rrt;  // L^T L M R R^T, kept in sync below

    for (Index p = 0; p < factor.rows(); ++p) {
        for (Index r = 0; r < factor.cols(); ++r) {
            const double denom = ltl(p, p) * rrt(r, r) + l2;
            if (denom == 0.0)
                continue;
            const double numer = g1(p, r) - cur(p, r) - l1 - l2 * factor(p, r);
            const double s = numer / denom;
            if (!std::isfinite(s))
                throw NumericError("update_middle: non-finite step");
            const double bound = seed(p, r);
            const double next = std::clamp(factor(p, r) + s, 0.0, bound);
            const double applied = next - factor(p, r);
            if (applied != 0.0) {
                factor(p, r) = next;
                cur += applied * (ltl.col(p) * rrt.row(r));
            }
        }
    }
}

/// Same pass for an outermost factor: V ~ factor * right (the rightmost
/// factor is handled by transposing the call). Identical to update_middle
/// with an identity left product.
inline void update_outer(Matrix& factor, const Matrix& right, const Matrix& target, double l1,
                         double l2, const Matrix& seed)
{
    update_middle(factor, Matrix::Identity(factor.rows(), factor.rows()), right, target, l1, l2,
                  seed);
}

/// Coordinate descent over the whole chain. Factors start at their seeds and
/// are swept output side first, entries in row-major order, with the
/// collapsed left/right products recomputed per factor per sweep. Stops when
/// the relative objective decrease over one sweep drops below `tolerance` or
/// max_sweeps is reached.
inline FactorizationResult solve(const FactorizationProblem& problem)
{
    problem.validate();
    if (!problem.target.allFinite())
        throw NumericError("factorization: non-finite target");

    const std::size_t chain = problem.seeds.size();
    FactorizationResult res;
    res.factors = problem.seeds;
    res.objective_trace.push_back(
        factorization_objective(problem.target, res.factors, problem.l1, problem.l2));

    for (int sweep = 0; sweep < problem.max_sweeps; ++sweep) {
        for (std::size_t k = 0; k < chain; ++k) {
            Matrix left = Matrix::Identity(problem.target.rows(), problem.target.rows());
            for (std::size_t i = 0; i < k; ++i)
                left = left * res.factors[i];
            Matrix right = Matrix::Identity(problem.target.cols(), problem.target.cols());
            for (std::size_t i = chain; i-- > k + 1;)
                right = res.factors[i] * right;
            update_middle(res.factors[k], left, right, problem.target, problem.l1, problem.l2,
                          problem.seeds[k]);
        }
        const double prev = res.objective_trace.back();
        const double obj =
            factorization_objective(problem.target, res.factors, problem.l1, problem.l2);
        res.objective_trace.push_back(obj);
        if (prev <= 0.0 || (prev - obj) / prev < problem.tolerance) {
            res.converged = true;
            break;
        }
    }
    return res;
}

/// One sub-factorization of a block split: the block of each factor selected
/// by `combo` (one part index per layer dimension, input side first), plus
/// the path-sum component of the target that flows through those blocks.
/// A sub-problem whose seed-block product is identically zero cannot
/// constrain anything (factors stay within [0, seed] and the product is
/// pinned at zero); it is marked degenerate and skipped by block_solve.
struct BlockSubProblem {
    std::vector<Index> combo;  // part index per layer dim, combo[0] for d_0
    FactorizationProblem problem;
    bool degenerate = false;
};

namespace detail {

inline std::vector<Index> split_offsets(const std::vector<Index>& sizes)
{
    std::vector<Index> off(sizes.size() + 1, 0);
    for (std::size_t i = 0; i < sizes.size(); ++i)
        off[i + 1] = off[i] + sizes[i];
    return off;
}

}  // namespace detail

/// Decomposes a factorization problem along per-layer-dimension splits.
/// `part_sizes[d]` lists the block sizes of layer dimension d (d = 0 is the
/// input side, i.e. the columns of the last seed) and must sum to that
/// dimension. The sub-problem targets of all combinations sum to the full
/// target wherever the seed product is positive.
inline std::vector<BlockSubProblem> split_problem(const FactorizationProblem& problem,
                                                  const std::vector<std::vector<Index>>& part_sizes)
{
    problem.validate();
    const std::size_t chain = problem.seeds.size();
    const std::size_t dims = chain + 1;
    if (part_sizes.size() != dims)
        throw ConfigError("block split: need one part-size list per layer dimension");

    // dim d corresponds to: cols of seeds[chain-1-d] (d < chain), rows of seeds[0] (d = chain)
    auto dim_of = [&](std::size_t d) -> Index {
        return d == chain ? problem.seeds.front().rows()
                          : problem.seeds[chain - 1 - d].cols();
    };
    std::vector<std::vector<Index>> offsets(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        Index total = 0;
        for (Index s : part_sizes[d]) {
            if (s <= 0)
                throw ConfigError("block split: part sizes must be positive");
            total += s;
        }
        if (total != dim_of(d))
            throw ConfigError("block split: part sizes do not sum to layer dimension "
                              + std::to_string(d));
        offsets[d] = detail::split_offsets(part_sizes[d]);
    }

    // shrink ratio of the target relative to the full seed product; the
    // per-block targets are (block seed product) o (ratio block)
    const Matrix full = product_chain(problem.seeds);
    Matrix ratio = Matrix::Zero(full.rows(), full.cols());
    for (Index i = 0; i < full.rows(); ++i)
        for (Index j = 0; j < full.cols(); ++j)
            if (full(i, j) > 0.0)
                ratio(i, j) = problem.target(i, j) / full(i, j);

    std::vector<BlockSubProblem> subs;
    std::vector<Index> combo(dims, 0);
    while (true) {
        BlockSubProblem sub;
        sub.combo = combo;
        sub.problem.l1 = problem.l1;
        sub.problem.l2 = problem.l2;
        sub.problem.max_sweeps = problem.max_sweeps;
        sub.problem.tolerance = problem.tolerance;
        sub.problem.seeds.reserve(chain);
        for (std::size_t k = 0; k < chain; ++k) {
            const std::size_t row_dim = chain - k;      // dim index of factor k's rows
            const std::size_t col_dim = chain - k - 1;  // dim index of factor k's cols
            const Index r0 = offsets[row_dim][static_cast<std::size_t>(combo[row_dim])];
            const Index c0 = offsets[col_dim][static_cast<std::size_t>(combo[col_dim])];
            sub.problem.seeds.push_back(
                problem.seeds[k].block(r0, c0, part_sizes[row_dim][static_cast<std::size_t>(combo[row_dim])],
                                       part_sizes[col_dim][static_cast<std::size_t>(combo[col_dim])]));
        }
        const Matrix sub_full = product_chain(sub.problem.seeds);
        sub.degenerate = sub_full.isZero(0.0);
        const Index r0 = offsets[dims - 1][static_cast<std::size_t>(combo[dims - 1])];
        const Index c0 = offsets[0][static_cast<std::size_t>(combo[0])];
        sub.problem.target = sub_full.cwiseProduct(
            ratio.block(r0, c0, sub_full.rows(), sub_full.cols()));
        subs.push_back(std::move(sub));

        std::size_t d = 0;
        for (; d < dims; ++d) {
            if (static_cast<std::size_t>(++combo[d]) < part_sizes[d].size())
                break;
            combo[d] = 0;
        }
        if (d == dims)
            break;
    }
    return subs;
}

/// Solves the block decomposition and aggregates per factor entry by the
/// element-wise maximum over the sub-solutions that constrain it, so a link
/// only ends at zero when every sub-solution zeroed it. Factor blocks touched
/// by no non-degenerate sub-problem keep their seed values, matching what the
/// unsplit sweep does for dead rows/columns. Sub-problems are independent and
/// could run concurrently; they are solved in sequence here and the max
/// aggregation makes the result order-independent.
inline FactorizationResult block_solve(const FactorizationProblem& problem,
                                       const std::vector<std::vector<Index>>& part_sizes)
{
    const std::vector<BlockSubProblem> subs = split_problem(problem, part_sizes);
    const std::size_t chain = problem.seeds.size();
    const std::size_t dims = chain + 1;

    std::vector<std::vector<Index>> offsets(dims);
    for (std::size_t d = 0; d < dims; ++d)
        offsets[d] = detail::split_offsets(part_sizes[d]);

    FactorizationResult res;
    res.factors = problem.seeds;
    res.converged = true;
    std::vector<Matrix> touched(chain);
    for (std::size_t k = 0; k < chain; ++k)
        touched[k] = Matrix::Zero(problem.seeds[k].rows(), problem.seeds[k].cols());

    for (const BlockSubProblem& sub : subs) {
        if (sub.degenerate)
            continue;
        const FactorizationResult sub_res = solve(sub.problem);
        res.converged = res.converged && sub_res.converged;
        for (std::size_t k = 0; k < chain; ++k) {
            const std::size_t row_dim = chain - k;
            const std::size_t col_dim = chain - k - 1;
            const Index r0 = offsets[row_dim][static_cast<std::size_t>(sub.combo[row_dim])];
            const Index c0 = offsets[col_dim][static_cast<std::size_t>(sub.combo[col_dim])];
            auto block = res.factors[k].block(r0, c0, sub_res.factors[k].rows(),
                                              sub_res.factors[k].cols());
            auto seen = touched[k].block(r0, c0, sub_res.factors[k].rows(),
                                         sub_res.factors[k].cols());
            for (Index i = 0; i < block.rows(); ++i)
                for (Index j = 0; j < block.cols(); ++j) {
                    if (seen(i, j) == 0.0) {
                        block(i, j) = sub_res.factors[k](i, j);
                        seen(i, j) = 1.0;
                    } else {
                        block(i, j) = std::max(block(i, j), sub_res.factors[k](i, j));
                    }
                }
        }
    }
    res.objective_trace.push_back(
        factorization_objective(problem.target, res.factors, problem.l1, problem.l2));
    return res;
}

struct BooleanThresholdResult {
    std::vector<Matrix> factors;
    double tau = 0.0;
    long mismatch = 0;
};

namespace detail {

using IntMatrix = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>;

inline IntMatrix boolean_chain(const std::vector<Matrix>& factors, double tau)
{
    IntMatrix prod = (factors.front().array() > tau).cast<long>().matrix();
    for (std::size_t k = 1; k < factors.size(); ++k) {
        const IntMatrix next = (factors[k].array() > tau).cast<long>().matrix();
        prod = ((prod * next).array() > 0).cast<long>().matrix();
    }
    return prod;
}

}  // namespace detail

/// Picks the threshold that best reconciles the zero pattern of the factors
/// with the target pattern under boolean matrix multiplication. Evaluates 20
/// logarithmically spaced tau in [1e-10, 1], counts mismatched entries, and
/// zeroes every factor entry <= the winning tau (ties go to the smallest tau).
inline BooleanThresholdResult boolean_threshold(const FactorizationResult& result,
                                                const Matrix& target_pattern)
{
    const detail::IntMatrix want = (target_pattern.array() != 0.0).cast<long>().matrix();
    check_shape(want.rows() == result.factors.front().rows()
                    && want.cols() == result.factors.back().cols(),
                "boolean_threshold: pattern shape mismatch");

    double best_tau = 0.0;
    long best_mismatch = -1;
    for (int k = 0; k < 20; ++k) {
        const double tau = std::pow(10.0, -10.0 + 10.0 * static_cast<double>(k) / 19.0);
        const detail::IntMatrix got = detail::boolean_chain(result.factors, tau);
        const long mismatch = (want - got).cwiseAbs().sum();
        if (best_mismatch < 0 || mismatch < best_mismatch) {
            best_mismatch = mismatch;
            best_tau = tau;
        }
    }

    BooleanThresholdResult out;
    out.tau = best_tau;
    out.mismatch = best_mismatch;
    out.factors = result.factors;
    for (Matrix& f : out.factors)
        f = (f.array() > best_tau).select(f, Matrix::Zero(f.rows(), f.cols()));
    return out;
}

}  // namespace pathlasso
