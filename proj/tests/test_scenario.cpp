#include "imdpsyn/scenario.hpp"
#include "imdpsyn/random.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

using namespace imdpsyn;

namespace {

// Regularized incomplete beta function I_x(a, b) by continued fraction
// (independent oracle for the binomial tail identities).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b)
                               + a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

Eigen::VectorXd vec1(double a) {
    Eigen::VectorXd v(1);
    v << a;
    return v;
}

}  // namespace

TEST_CASE("binomial bound boundary identities") {
    CHECK(binomial_lower(20, 0, 0.01) == 0.0);
    CHECK(binomial_upper(20, 20, 0.01) == 1.0);
    // all samples inside: the lower equation reduces to p^N = beta_side
    CHECK(std::abs(binomial_lower(25, 25, 0.002) - std::pow(0.002, 1.0 / 25.0)) < 1e-6);
    CHECK(std::abs(binomial_lower(25, 25, 0.002) - 0.77989) < 1e-4);
    // the symmetric upper case
    CHECK(std::abs(binomial_upper(25, 0, 0.002) - (1.0 - std::pow(0.002, 1.0 / 25.0))) < 1e-6);
}

TEST_CASE("binomial bounds match the incomplete-beta oracle") {
    // P[X >= c] = I_p(c, N - c + 1); the solved root must satisfy the equation
    const double lo = binomial_lower(10, 5, 0.025);
    CHECK(std::abs(lo - 0.1871) < 2e-4);
    CHECK(std::abs(reg_inc_beta(5, 6, lo) - 0.025) < 1e-7);

    const double hi = binomial_upper(10, 5, 0.025);
    CHECK(std::abs(hi - 0.8129) < 2e-4);
    // P[X <= c] = I_{1-p}(N - c, c + 1)
    CHECK(std::abs(reg_inc_beta(5, 6, 1.0 - hi) - 0.025) < 1e-7);

    for (std::int64_t N : {25, 200}) {
        for (std::int64_t c = 0; c <= N; c += N / 5) {
            for (double bs : {0.025, 1e-6}) {
                const double l = binomial_lower(N, c, bs);
                const double u = binomial_upper(N, c, bs);
                if (c > 0)
                    CHECK(std::abs(reg_inc_beta(c, N - c + 1, l) - bs) < 1e-6);
                if (c < N)
                    CHECK(std::abs(reg_inc_beta(N - c, c + 1, 1.0 - u) - bs) < 1e-6);
            }
        }
    }
}

TEST_CASE("binomial bound monotonicity and bracketing") {
    const std::int64_t N = 50;
    const double bs = 0.01;
    double prev_lo = -1.0, prev_hi = -1.0;
    for (std::int64_t c = 0; c <= N; ++c) {
        const double lo = binomial_lower(N, c, bs);
        const double hi = binomial_upper(N, c, bs);
        CHECK(lo >= prev_lo - 1e-12);
        CHECK(hi >= prev_hi - 1e-12);
        CHECK(lo <= static_cast<double>(c) / N + 1e-9);
        CHECK(hi >= static_cast<double>(c) / N - 1e-9);
        prev_lo = lo;
        prev_hi = hi;
    }
    // shrinking beta_side widens the interval
    CHECK(binomial_lower(N, 20, 1e-6) < binomial_lower(N, 20, 0.01));
    CHECK(binomial_upper(N, 20, 1e-6) > binomial_upper(N, 20, 0.01));

    CHECK_THROWS_AS(binomial_lower(10, 11, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(binomial_upper(10, -1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(binomial_lower(10, 5, 0.0), std::invalid_argument);
}

TEST_CASE("coverage of the two-sided interval (light run)") {
    // frequentist check at p = 0.5, N = 25: violations should stay below the
    // two-sided budget of 0.05 plus Monte Carlo slack
    const std::int64_t N = 25;
    const double beta_side = 0.025;
    const RandomStream st(2024, 0);
    std::map<std::int64_t, std::pair<double, double>> cache;
    int violations = 0;
    const int runs = 2000;
    for (int r = 0; r < runs; ++r) {
        std::int64_t c = 0;
        for (std::int64_t i = 0; i < N; ++i)
            if (st.uniform(static_cast<std::uint64_t>(r) * N + i) < 0.5) ++c;
        auto it = cache.find(c);
        if (it == cache.end())
            it = cache.emplace(c, std::make_pair(binomial_lower(N, c, beta_side),
                                                 binomial_upper(N, c, beta_side)))
                     .first;
        if (0.5 < it->second.first || 0.5 > it->second.second) ++violations;
    }
    CHECK(static_cast<double>(violations) / runs <= 0.0625);
}

TEST_CASE("confidence_budget arithmetic") {
    CHECK(std::abs(confidence_budget(0.99, 1682, 1682) - 3.534e-9) < 2e-12);
    CHECK(confidence_budget(0.99, 1, 1) == Catch::Approx(0.01));
    CHECK(confidence_budget(0.5, 10, 10) == Catch::Approx(0.005));
    CHECK_THROWS_AS(confidence_budget(1.0, 2, 2), std::invalid_argument);
}

TEST_CASE("count_successors on the 1-D example") {
    const Partition part(HyperRectangle(vec1(-1), vec1(1)), {2});
    SampleSet s;
    s.samples = {vec1(-0.5), vec1(0.3), vec1(0.7), vec1(1.5)};
    const auto counts = count_successors(vec1(0), s, part);
    CHECK(counts[0] == 1);
    CHECK(counts[1] == 2);
    CHECK(counts[part.sink_id()] == 1);

    // all-zero samples land in the target's own region
    SampleSet zeros;
    zeros.samples = {vec1(0), vec1(0), vec1(0)};
    const auto c2 = count_successors(vec1(0.5), zeros, part);
    CHECK(c2[1] == 3);
}

TEST_CASE("count_successors agrees with an independent recount") {
    const Partition part(HyperRectangle(vec1(-4), vec1(4)), {8});
    const NoiseSource noise =
        NoiseSource::gaussian(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
    const SampleSet samples = SampleSet::draw(noise, 1600, 99);
    const Eigen::VectorXd d = vec1(0.25);
    const auto counts = count_successors(d, samples, part);

    // recount by direct half-open interval membership: region k owns
    // [-4 + k, -4 + k + 1), the last region additionally owns x = 4
    std::vector<std::int64_t> expect(part.location_count(), 0);
    for (const auto& delta : samples.samples) {
        const double x = d(0) + delta(0);
        if (x < -4.0 || x > 4.0) {
            ++expect[part.sink_id()];
            continue;
        }
        int idx = 7;
        for (int k = 0; k < 8; ++k) {
            if (x >= -4.0 + k && x < -4.0 + k + 1) {
                idx = k;
                break;
            }
        }
        ++expect[idx];
    }
    std::int64_t total = 0;
    for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(counts[i] == expect[i]);
        total += counts[i];
    }
    CHECK(total == 1600);
}

TEST_CASE("build_interval_table on the 1-D example") {
    const Partition part(HyperRectangle(vec1(-1), vec1(1)), {2});
    SampleSet s;
    s.samples = {vec1(-0.5), vec1(0.3), vec1(0.7), vec1(1.5)};
    s.seed = 0;
    const auto table = build_interval_table({vec1(0)}, s, part, 0.01);
    REQUIRE(table.rows.size() == 1);
    const auto& row = table.rows[0];
    REQUIRE(row.size() == 3);  // region 0, region 1, sink
    const double freq[] = {0.25, 0.5, 0.25};
    for (std::size_t i = 0; i < row.size(); ++i) {
        CHECK(row[i].lower < freq[i]);
        CHECK(row[i].upper > freq[i]);
        CHECK(row[i].lower >= 0.0);
        CHECK(row[i].upper <= 1.0);
    }
    CHECK(row[0].successor == 0);
    CHECK(row[1].successor == 1);
    CHECK(row[2].successor == part.sink_id());
    CHECK(table.interval_count == 3);
}

TEST_CASE("interval table boundary behaviour") {
    const Partition part(HyperRectangle(vec1(-1), vec1(1)), {2});
    SampleSet s;
    s.samples = {vec1(0.1), vec1(0.2), vec1(0.05)};
    const auto table = build_interval_table({vec1(0.5)}, s, part, 0.05);
    const auto& row = table.rows[0];
    REQUIRE(row.size() == 2);  // the hit region and the sink row
    CHECK(row[0].successor == 1);
    CHECK(row[0].upper == 1.0);  // all samples inside
    CHECK(row[1].successor == part.sink_id());
    CHECK(row[1].lower == 0.0);
    CHECK(row[1].upper > 0.0);  // the sink may still carry hidden mass

    // feasibility of the row
    double sum_lo = 0, sum_hi = 0;
    for (const auto& e : row) {
        sum_lo += e.lower;
        sum_hi += e.upper;
    }
    CHECK(sum_lo <= 1.0 + 1e-12);
    CHECK(sum_hi >= 1.0 - 1e-12);
}

TEST_CASE("rows depend only on the action") {
    // the table stores one row per action; every location sharing the action
    // sees the identical interval row by construction
    const Partition part(HyperRectangle(vec1(-2), vec1(2)), {4});
    const NoiseSource noise =
        NoiseSource::gaussian(Eigen::VectorXd::Zero(1), 0.25 * Eigen::MatrixXd::Identity(1, 1));
    const SampleSet samples = SampleSet::draw(noise, 200, 7);
    const auto t1 = build_interval_table({vec1(-0.5), vec1(-0.5)}, samples, part, 0.01);
    REQUIRE(t1.rows.size() == 2);
    REQUIRE(t1.rows[0].size() == t1.rows[1].size());
    for (std::size_t i = 0; i < t1.rows[0].size(); ++i) {
        CHECK(t1.rows[0][i].successor == t1.rows[1][i].successor);
        CHECK(t1.rows[0][i].lower == t1.rows[1][i].lower);
        CHECK(t1.rows[0][i].upper == t1.rows[1][i].upper);
    }
}

TEST_CASE("sample files parse and reject malformed input") {
    const auto dir = std::filesystem::temp_directory_path() / "imdpsyn_scenario_test";
    std::filesystem::create_directories(dir);
    const auto good = dir / "good.txt";
    {
        std::ofstream out(good);
        out << "# comment line\n";
        out << "0.5 -0.25\n";
        out << "\n";
        out << "1.5 2.5 # trailing comment\n";
    }
    const NoiseSource src = NoiseSource::from_file(good.string(), 2);
    CHECK(src.max_iid_draws() == 2);
    const SampleSet s = SampleSet::draw(src, 2, 0);
    CHECK(s.samples[0](0) == 0.5);
    CHECK(s.samples[1](1) == 2.5);
    CHECK_THROWS_AS(SampleSet::draw(src, 3, 0), std::invalid_argument);

    const auto bad = dir / "bad.txt";
    {
        std::ofstream out(bad);
        out << "0.5\n";  // wrong arity
    }
    CHECK_THROWS_AS(NoiseSource::from_file(bad.string(), 2), std::invalid_argument);
    std::filesystem::remove_all(dir);
}
