#pragma once

#include "pathlasso/common.hpp"
#include "pathlasso/rng.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pathlasso {

/// Per-column affine transform fitted on training rows: standardized value is
/// (x - mean) / scale. Columns with zero variance keep scale 1.
struct Standardization {
    Vector mean;
    Vector scale;

    Matrix apply(const Matrix& x) const
    {
        check_shape(x.cols() == mean.size(), "standardize: column count mismatch");
        Matrix out = x.rowwise() - mean.transpose();
        out.array().rowwise() /= scale.transpose().array();
        return out;
    }

    Matrix invert(const Matrix& x) const
    {
        check_shape(x.cols() == mean.size(), "standardize: column count mismatch");
        Matrix out = x;
        out.array().rowwise() *= scale.transpose().array();
        out.rowwise() += mean.transpose();
        return out;
    }
};

inline Standardization fit_standardization(const Matrix& rows)
{
    check_shape(rows.rows() >= 1, "standardize: need at least one row");
    Standardization s;
    s.mean = rows.colwise().mean();
    s.scale = Vector::Ones(rows.cols());
    const Matrix centered = rows.rowwise() - s.mean.transpose();
    const double n = static_cast<double>(rows.rows());
    for (Index j = 0; j < rows.cols(); ++j) {
        const double var = centered.col(j).squaredNorm() / n;
        if (var > 0.0)
            s.scale(j) = std::sqrt(var);
    }
    return s;
}

/// Row-major observation matrix with optional integer labels and disjoint
/// train/val/test index covers.
struct Dataset {
    Matrix x;
    std::vector<int> labels;  // empty when absent
    std::vector<Index> train_idx, val_idx, test_idx;
    std::optional<Standardization> standardization;

    Index rows() const { return x.rows(); }
    Index cols() const { return x.cols(); }
    bool has_labels() const { return !labels.empty(); }

    Matrix rows_at(const std::vector<Index>& idx) const
    {
        Matrix out(static_cast<Index>(idx.size()), x.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
            out.row(static_cast<Index>(i)) = x.row(idx[i]);
        return out;
    }

    std::vector<int> labels_at(const std::vector<Index>& idx) const
    {
        std::vector<int> out;
        out.reserve(idx.size());
        for (Index i : idx)
            out.push_back(labels[static_cast<std::size_t>(i)]);
        return out;
    }

    Matrix train_x() const { return rows_at(train_idx); }
    Matrix val_x() const { return rows_at(val_idx); }
    Matrix test_x() const { return rows_at(test_idx); }
};

/// Gaussian clusters centered at the 2^m vertices of the unit hypercube
/// {0,1}^m. Each point is vertex + N(0, cluster_std^2 I), plus independent
/// N(0, noise_std^2) noise per coordinate when noise_std > 0. Labels are the
/// vertex index (bit j of the label is coordinate j of the vertex).
inline Dataset generate_hypercube(int dims, int points_per_cluster, double cluster_std,
                                  double noise_std, std::uint64_t seed)
{
    if (dims < 1 || points_per_cluster < 1)
        throw ConfigError("generate_hypercube: dims and points per cluster must be positive");
    const int clusters = 1 << dims;
    const Index n = static_cast<Index>(clusters) * points_per_cluster;

    Dataset ds;
    ds.x.resize(n, dims);
    ds.labels.reserve(static_cast<std::size_t>(n));
    Rng rng(seed);
    Index row = 0;
    for (int c = 0; c < clusters; ++c) {
        for (int p = 0; p < points_per_cluster; ++p, ++row) {
            for (int j = 0; j < dims; ++j) {
                const double vertex = (c >> j) & 1 ? 1.0 : 0.0;
                double value = vertex + cluster_std * rng.gaussian();
                if (noise_std > 0.0)
                    value += noise_std * rng.gaussian();
                ds.x(row, j) = value;
            }
            ds.labels.push_back(c);
        }
    }
    return ds;
}

/// Deterministic shuffled split: test_frac of all rows go to test, then
/// val_frac of the remainder to validation, the rest to training.
inline void split_dataset(Dataset& ds, double test_frac, double val_frac, std::uint64_t seed)
{
    if (!(test_frac > 0.0 && test_frac < 1.0) || !(val_frac > 0.0 && val_frac < 1.0))
        throw ConfigError("split: fractions must lie in (0, 1)");
    const Index n = ds.rows();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(seed);
    rng.shuffle(order);

    const Index n_test = static_cast<Index>(std::llround(static_cast<double>(n) * test_frac));
    const Index n_val = static_cast<Index>(std::llround(static_cast<double>(n - n_test) * val_frac));
    const Index n_train = n - n_test - n_val;
    if (n_test < 1 || n_val < 1 || n_train < 1)
        throw ConfigError("split: a split would be empty");

    ds.test_idx.assign(order.begin(), order.begin() + n_test);
    ds.val_idx.assign(order.begin() + n_test, order.begin() + n_test + n_val);
    ds.train_idx.assign(order.begin() + n_test + n_val, order.end());
}

/// Fits per-column standardization on the train split and rewrites all rows.
inline void standardize_dataset(Dataset& ds)
{
    if (ds.train_idx.empty())
        throw ConfigError("standardize: dataset has no train split");
    ds.standardization = fit_standardization(ds.train_x());
    ds.x = ds.standardization->apply(ds.x);
}

namespace detail {

inline std::string format_double(double v)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& cell, Index row, Index col)
{
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    // tolerate surrounding spaces
    while (first < last && (*first == ' ' || *first == '\t'))
        ++first;
    while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r'))
        --last;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw ParseError("csv: non-numeric cell at row " + std::to_string(row + 1) + ", column "
                         + std::to_string(col + 1));
    return v;
}

}  // namespace detail

/// Comma-separated numeric matrix, '.' decimal, no header by default; when
/// has_labels is set the last column is read as integer labels.
inline Dataset load_csv(const std::string& path, bool has_labels, bool skip_header = false)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("csv: cannot open " + path);

    std::vector<std::vector<double>> values;
    std::vector<int> labels;
    std::string line;
    Index row = 0;
    bool first = true;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        if (first && skip_header) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty() || line == "\r")
            continue;
        std::vector<double> cells;
        std::stringstream ss(line);
        std::string cell;
        Index col = 0;
        while (std::getline(ss, cell, ','))
            cells.push_back(detail::parse_double(cell, row, col++));
        if (width == 0)
            width = cells.size();
        else if (cells.size() != width)
            throw ParseError("csv: ragged row " + std::to_string(row + 1) + " in " + path);
        if (has_labels) {
            const double lab = cells.back();
            cells.pop_back();
            labels.push_back(static_cast<int>(std::llround(lab)));
        }
        values.push_back(std::move(cells));
        ++row;
    }
    if (values.empty())
        throw ParseError("csv: empty file " + path);
    if (has_labels && values.front().empty())
        throw ParseError("csv: label column leaves no data columns in " + path);

    Dataset ds;
    ds.x.resize(static_cast<Index>(values.size()), static_cast<Index>(values.front().size()));
    for (std::size_t i = 0; i < values.size(); ++i)
        for (std::size_t j = 0; j < values[i].size(); ++j)
            ds.x(static_cast<Index>(i), static_cast<Index>(j)) = values[i][j];
    ds.labels = std::move(labels);
    return ds;
}

/// Writes a matrix (plus optional trailing integer label column) as CSV.
/// Doubles are printed in shortest round-trip form.
inline void save_csv(const std::string& path, const Matrix& x, const std::vector<int>* labels = nullptr)
{
    if (labels != nullptr && static_cast<Index>(labels->size()) != x.rows())
        throw ShapeError("csv: label count must match row count");
    std::ofstream out(path);
    if (!out)
        throw ParseError("csv: cannot write " + path);
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) {
            if (j > 0)
                out << ',';
            out << detail::format_double(x(i, j));
        }
        if (labels != nullptr)
            out << ',' << (*labels)[static_cast<std::size_t>(i)];
        out << '\n';
    }
    if (!out)
        throw ParseError("csv: write failure on " + path);
}

}  // namespace pathlasso
