#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "segstereo/metrics.hpp"
#include "segstereo/tensor.hpp"

using namespace segstereo;

TEST_CASE("epe is zero on identical maps") {
    Tensor p = create({1, 1, 2, 3}, Fill::uniform(0, 50, 1));
    Tensor v = create({1, 1, 2, 3}, Fill::constant(1.0));
    CHECK(epe(p, p, v) == 0.0);
    CHECK(d1(p, p, v) == 0.0);
}

TEST_CASE("epe is the arithmetic mean of residuals") {
    Tensor p = create({1, 1, 1, 3}, Fill::from_values({1, 2, 3}));
    Tensor g = create({1, 1, 1, 3}, Fill::zeros());
    Tensor v = create({1, 1, 1, 3}, Fill::constant(1.0));
    CHECK(epe(p, g, v) == doctest::Approx(2.0));
}

TEST_CASE("epe skips invalid pixels and respects a region mask") {
    Tensor p = create({1, 1, 1, 4}, Fill::from_values({10, 1, 2, 3}));
    Tensor g = create({1, 1, 1, 4}, Fill::zeros());
    Tensor v = create({1, 1, 1, 4}, Fill::from_values({0, 1, 1, 1}));
    CHECK(epe(p, g, v) == doctest::Approx(2.0));  // the 10 is invalid
    Tensor noc = create({1, 1, 1, 4}, Fill::from_values({1, 1, 0, 1}));
    CHECK(epe(p, g, v, &noc) == doctest::Approx(2.0));  // (1+3)/2
    CHECK(region_count(v, &noc) == 2);
}

TEST_CASE("epe detects a constant offset") {
    Tensor g = create({1, 1, 3, 4}, Fill::uniform(0, 30, 2));
    Tensor p = add_scalar(g, 1.75);
    Tensor v = create({1, 1, 3, 4}, Fill::constant(1.0));
    CHECK(epe(p, g, v) == doctest::Approx(1.75));
}

TEST_CASE("epe on an empty region throws") {
    Tensor p = create({1, 1, 1, 2}, Fill::zeros());
    Tensor v = create({1, 1, 1, 2}, Fill::zeros());
    CHECK_THROWS(epe(p, p, v));
    CHECK_THROWS(d1(p, p, v));
}

TEST_CASE("d1 needs both the absolute and the relative threshold exceeded") {
    Tensor g = create({1, 1, 1, 2}, Fill::from_values({100, 10}));
    Tensor p = create({1, 1, 1, 2}, Fill::from_values({104, 14}));
    Tensor v = create({1, 1, 1, 2}, Fill::constant(1.0));
    // error 4 at gt 100: 4 > 3 but 4 < 5 = 5% of 100 -> not bad
    // error 4 at gt 10: 4 > 3 and 4 > 0.5 -> bad
    CHECK(d1(p, g, v) == doctest::Approx(50.0));
}

TEST_CASE("d1 is monotone in the absolute threshold") {
    Tensor g = create({1, 1, 4, 8}, Fill::uniform(0, 20, 5));
    Tensor noise = create({1, 1, 4, 8}, Fill::uniform(-8, 8, 6));
    Tensor p = add(g, noise);
    Tensor v = create({1, 1, 4, 8}, Fill::constant(1.0));
    double prev = 100.0;
    for (double t : {0.5, 1.0, 2.0, 3.0, 5.0, 8.0}) {
        const double rate = d1(p, g, v, nullptr, t, 0.05);
        CHECK(rate <= prev);
        prev = rate;
    }
}

TEST_CASE("evaluate fills both regions with counts") {
    Tensor g = create({1, 1, 2, 2}, Fill::from_values({1, 2, 3, 4}));
    Tensor p = create({1, 1, 2, 2}, Fill::from_values({1, 2, 3, 14}));
    Tensor v = create({1, 1, 2, 2}, Fill::constant(1.0));
    Tensor noc = create({1, 1, 2, 2}, Fill::from_values({1, 1, 1, 0}));
    EvalResult r = evaluate(p, g, v, &noc);
    CHECK(r.count_all == 4);
    CHECK(r.count_noc == 3);
    CHECK(r.epe_all == doctest::Approx(10.0 / 4.0));
    CHECK(r.epe_noc == doctest::Approx(0.0));
    CHECK(r.d1_all == doctest::Approx(25.0));
    CHECK(r.d1_noc == doctest::Approx(0.0));
    CHECK(r.d1_all >= 0.0);
    CHECK(r.d1_all <= 100.0);
}

TEST_CASE("report formats mention every metric") {
    EvalResult r;
    r.epe_noc = 1.5;
    r.epe_all = 2.5;
    r.d1_noc = 10.0;
    r.d1_all = 20.0;
    r.count_noc = 7;
    r.count_all = 9;
    const std::string kv = format_kv(r);
    CHECK(kv.find("epe_noc=1.5") != std::string::npos);
    CHECK(kv.find("epe_all=2.5") != std::string::npos);
    CHECK(kv.find("d1_noc=10") != std::string::npos);
    CHECK(kv.find("d1_all=20") != std::string::npos);
    CHECK(kv.find("count_all=9") != std::string::npos);
    const std::string tab = format_table(r);
    CHECK(tab.find("Noc") != std::string::npos);
    CHECK(tab.find("All") != std::string::npos);
}
