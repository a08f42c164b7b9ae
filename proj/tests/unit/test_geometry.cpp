#include <cmath>

#include "doctest.h"
#include "triplenc/error.hpp"
#include "triplenc/geometry.hpp"
#include "triplenc/rng.hpp"

using namespace triplenc;

namespace {

Vector random_vec(Rng& rng, std::size_t d) {
    Vector v(d);
    for (auto& x : v) {
        x = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    return v;
}

double loop_cos(const Vector& u, const Vector& v) {
    double uv = 0;
    double uu = 0;
    double vv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += double(u[i]) * v[i];
        uu += double(u[i]) * u[i];
        vv += double(v[i]) * v[i];
    }
    return uv / std::sqrt(uu * vv);
}

}  // namespace

TEST_CASE("cosine examples") {
    CHECK(cosine(Vector{1, 2}, Vector{1, 2}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine(Vector{1, 0}, Vector{0, 1}) == 0.0);
    CHECK(cosine(Vector{1, 2}, Vector{2, 1}) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("cosine errors") {
    CHECK_THROWS_AS(cosine(Vector{1, 2}, Vector{1, 2, 3}), DimMismatch);
    CHECK_THROWS_AS(cosine(Vector{0, 0}, Vector{1, 2}), ZeroNorm);
    CHECK_THROWS_AS(cosine(Vector{1, 2}, Vector{0, 0}), ZeroNorm);
}

TEST_CASE("cosine properties on random vectors") {
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        const auto u = random_vec(rng, 1 + rng.index(20));
        const auto v = random_vec(rng, u.size());
        CHECK(cosine(u, v) == cosine(v, u));
        CHECK(std::abs(cosine(u, v)) <= 1.0 + 1e-6);
        Vector scaled(u);
        const float alpha = static_cast<float>(rng.uniform(0.1, 10.0));
        for (auto& x : scaled) {
            x *= alpha;
        }
        CHECK(cosine(u, scaled) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("mean_pool examples and properties") {
    CHECK(mean_pool(Vector{3, 3}, Vector{3, 3}) == Vector{3, 3});
    CHECK(mean_pool(Vector{1, 0}, Vector{0, 1}) == Vector{0.5f, 0.5f});
    CHECK(mean_pool(Vector{2, 4}, Vector{0, -2}) == Vector{1, 1});
    CHECK_THROWS_AS(mean_pool(Vector{1}, Vector{1, 2}), DimMismatch);
    Rng rng(12);
    for (int t = 0; t < 100; ++t) {
        const auto u = random_vec(rng, 8);
        const auto v = random_vec(rng, 8);
        CHECK(mean_pool(u, v) == mean_pool(v, u));
        CHECK(mean_pool(u, u) == u);
    }
}

TEST_CASE("batch scores examples") {
    const auto one = batch_pair_candidate_scores(Matrix::from_rows(std::vector<Vector>{{1, 0}}),
                                                 Matrix::from_rows(std::vector<Vector>{{1, 0}}));
    CHECK(one(0, 0) == doctest::Approx(1.0));
    const auto two = batch_pair_candidate_scores(
        Matrix::from_rows(std::vector<Vector>{{1, 0}}),
        Matrix::from_rows(std::vector<Vector>{{0, 1}, {1, 0}}));
    CHECK(two(0, 0) == doctest::Approx(0.0));
    CHECK(two(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("batch scores match the scalar loop") {
    Rng rng(13);
    for (std::size_t d : {2u, 16u, 64u}) {
        for (int t = 0; t < 100; ++t) {
            std::vector<Vector> pairs(1 + rng.index(4));
            std::vector<Vector> cands(1 + rng.index(6));
            for (auto& p : pairs) {
                p = random_vec(rng, d);
            }
            for (auto& c : cands) {
                c = random_vec(rng, d);
            }
            const auto s = batch_pair_candidate_scores(Matrix::from_rows(pairs), Matrix::from_rows(cands));
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                for (std::size_t c = 0; c < cands.size(); ++c) {
                    CHECK(std::abs(s(p, c) - loop_cos(pairs[p], cands[c])) <= 1e-6);
                }
            }
        }
    }
}

TEST_CASE("batch scores name the zero row") {
    const auto pairs = Matrix::from_rows(std::vector<Vector>{{1, 0}, {0, 0}});
    const auto cands = Matrix::from_rows(std::vector<Vector>{{1, 1}});
    try {
        (void)batch_pair_candidate_scores(pairs, cands);
        FAIL("expected ZeroNorm");
    } catch (const ZeroNorm& e) {
        REQUIRE(e.row().has_value());
        CHECK(*e.row() == 1);
    }
    const auto bad_cands = Matrix::from_rows(std::vector<Vector>{{1, 1}, {0, 0}, {2, 2}});
    try {
        (void)batch_pair_candidate_scores(Matrix::from_rows(std::vector<Vector>{{1, 0}}), bad_cands);
        FAIL("expected ZeroNorm");
    } catch (const ZeroNorm& e) {
        CHECK(e.row() == std::optional<std::size_t>(1));
    }
}

TEST_CASE("non-finite values are rejected") {
    const Vector v{1.0f, NAN};
    CHECK_THROWS_AS(require_finite(v, "v"), NonFinite);
    const Vector w{1.0f, INFINITY};
    CHECK_THROWS_AS(require_finite(w, "w"), NonFinite);
}
