#include "pathlasso/evaluation.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/QR>

using namespace pathlasso;
using testutil::random_matrix;

TEST_CASE("r squared is one for exact reconstruction and zero for the column means",
          "[evaluation]")
{
    Rng rng(80);
    const Matrix x = random_matrix(20, 3, rng);
    REQUIRE(r_squared(x, x) == 1.0);

    Matrix means(20, 3);
    means.rowwise() = x.colwise().mean();
    REQUIRE(r_squared(x, means) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("r squared can be negative and rejects zero-variance originals", "[evaluation]")
{
    Rng rng(81);
    const Matrix x = random_matrix(10, 2, rng);
    Matrix awful = x;
    awful.array() += 100.0;
    REQUIRE(r_squared(x, awful) < -1.0);

    const Matrix constant = Matrix::Ones(5, 2);
    REQUIRE_THROWS_AS(r_squared(constant, constant), MetricError);
}

TEST_CASE("r squared is invariant to a shared row shift", "[evaluation]")
{
    Rng rng(82);
    const Matrix x = random_matrix(15, 3, rng);
    const Matrix recon = random_matrix(15, 3, rng);
    Vector shift(3);
    shift << 2.0, -1.0, 0.5;
    const Matrix xs = x.rowwise() + shift.transpose();
    const Matrix rs = recon.rowwise() + shift.transpose();
    REQUIRE(r_squared(x, recon) == Catch::Approx(r_squared(xs, rs)).epsilon(1e-12));
}

TEST_CASE("observation match scores exact and degenerate reconstructions", "[evaluation]")
{
    Rng rng(83);
    const Matrix x = random_matrix(12, 3, rng);  // rows distinct almost surely
    REQUIRE(observation_match(x, x) == 1.0);

    Matrix collapsed(12, 3);
    collapsed.rowwise() = x.row(0);
    REQUIRE(observation_match(x, collapsed) <= 1.0 / 12.0);
}

TEST_CASE("observation match counts only strict winners", "[evaluation]")
{
    Matrix x(3, 2);
    x << 0.0, 0.0, 10.0, 0.0, 0.0, 10.0;
    Matrix recon(3, 2);
    recon << 0.1, 0.0,  // nearest original is row 0
        10.0, 0.0,      // exact hit on row 1
        0.2, 0.1;       // nearest original is row 0, not row 2 -> miss
    REQUIRE(observation_match(x, recon) == Catch::Approx(2.0 / 3.0));

    // an exact tie between own and another original counts as failure
    Matrix tied(2, 1);
    tied << 0.0, 2.0;
    Matrix mid(2, 1);
    mid << 1.0, 1.0;
    REQUIRE(observation_match(tied, mid) == 0.0);
}

TEST_CASE("label match follows the nearest original's label", "[evaluation]")
{
    Rng rng(84);
    const Matrix x = random_matrix(10, 2, rng);
    std::vector<int> labels(10);
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = static_cast<int>(i % 3);
    REQUIRE(label_match(x, x, labels) == 1.0);

    const std::vector<int> same(10, 7);
    const Matrix scrambled = random_matrix(10, 2, rng);
    REQUIRE(label_match(x, scrambled, same) == 1.0);
}

TEST_CASE("label match is zero when reconstructions swap well-separated clusters", "[evaluation]")
{
    Rng rng(85);
    Matrix x(10, 2);
    Matrix recon(10, 2);
    std::vector<int> labels(10);
    for (Index i = 0; i < 10; ++i) {
        const bool first = i < 5;
        const double cx = first ? 0.0 : 100.0;
        x(i, 0) = cx + rng.uniform(-0.5, 0.5);
        x(i, 1) = cx + rng.uniform(-0.5, 0.5);
        // reconstruction lands in the opposite cluster
        recon(i, 0) = (first ? 100.0 : 0.0) + rng.uniform(-0.5, 0.5);
        recon(i, 1) = (first ? 100.0 : 0.0) + rng.uniform(-0.5, 0.5);
        labels[static_cast<std::size_t>(i)] = first ? 0 : 1;
    }
    REQUIRE(label_match(x, recon, labels) == 0.0);
}

TEST_CASE("knn match edge cases and brute-force agreement", "[evaluation]")
{
    Rng rng(86);
    const Matrix x = random_matrix(9, 3, rng);
    const Matrix recon = random_matrix(9, 3, rng);

    // k = n-1 admits everything except the single farthest original, so any
    // reconstruction whose own original is never the farthest scores 1.0
    const Matrix near_recon = x + 0.01 * random_matrix(9, 3, rng);
    REQUIRE(knn_match(x, near_recon, 8) == 1.0);
    {
        // a row reconstructed past the far end leaves its own original last
        Matrix line(3, 1), bad(3, 1);
        line << 0.0, 1.0, 2.0;
        bad << 2.6, 1.0, 2.0;
        REQUIRE(knn_match(line, bad, 2) == Catch::Approx(2.0 / 3.0));
    }
    REQUIRE(knn_match(x, recon, 1) == Catch::Approx(observation_match(x, recon)));

    double previous = 0.0;
    for (int k = 1; k < 9; ++k) {
        const double value = knn_match(x, recon, k);
        REQUIRE(value >= previous);
        previous = value;
    }

    // brute force for k = 3
    long hits = 0;
    for (Index i = 0; i < 9; ++i) {
        std::vector<std::pair<double, Index>> dist;
        for (Index j = 0; j < 9; ++j)
            dist.push_back({(x.row(j) - recon.row(i)).norm(), j});
        std::sort(dist.begin(), dist.end());
        for (int r = 0; r < 3; ++r)
            if (dist[static_cast<std::size_t>(r)].second == i)
                ++hits;
    }
    REQUIRE(knn_match(x, recon, 3) == Catch::Approx(static_cast<double>(hits) / 9.0));

    REQUIRE_THROWS_AS(knn_match(x, recon, 9), ConfigError);
    REQUIRE_THROWS_AS(knn_match(x, recon, 0), ConfigError);
}

TEST_CASE("match metrics are invariant under a global rotation", "[evaluation]")
{
    Rng rng(87);
    const Matrix x = random_matrix(14, 3, rng);
    const Matrix recon = random_matrix(14, 3, rng);

    const Matrix gauss = random_matrix(3, 3, rng);
    const Eigen::HouseholderQR<Matrix> qr(gauss);
    const Matrix rot = qr.householderQ();

    const Matrix xr = x * rot;
    const Matrix rr = recon * rot;
    REQUIRE(observation_match(x, recon) == Catch::Approx(observation_match(xr, rr)));
    REQUIRE(knn_match(x, recon, 4) == Catch::Approx(knn_match(xr, rr, 4)));
}

TEST_CASE("connection counting respects the tolerance", "[evaluation]")
{
    REQUIRE(count_connections(Matrix::Zero(3, 3)) == 0);
    REQUIRE(count_connections(Matrix::Identity(2, 2)) == 2);

    Matrix conn(2, 2);
    conn << 1.0, 1e-13, 0.5, 0.0;
    REQUIRE(count_connections(conn) == 2);
    REQUIRE(count_connections(conn, 1e-14) == 3);
}
