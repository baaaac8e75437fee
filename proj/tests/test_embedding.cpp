#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "deepcare/embedding.hpp"
#include "deepcare/network.hpp"

using namespace deepcare;

namespace {

Mat columns(std::initializer_list<Vec> cols) {
    const std::size_t m = cols.begin()->size();
    Mat e(m, cols.size());
    std::size_t j = 0;
    for (const Vec& c : cols) {
        for (std::size_t i = 0; i < m; ++i) e(i, j) = c[i];
        ++j;
    }
    return e;
}

}  // namespace

TEST_CASE("pooling hand cases") {
    const Mat e = columns({{1.0, 3.0}, {3.0, 1.0}});
    const std::vector<std::size_t> both{0, 1};

    const Vec mean = pool_columns(e, both, PoolingMode::MeanAdm);
    CHECK(mean == Vec{2.0, 2.0});

    const Vec mx = pool_columns(e, both, PoolingMode::MaxAdm);
    CHECK(mx == Vec{3.0, 3.0});

    // sum-norm: s = [4,4] -> 4/sqrt(4) = 2
    const Vec sn = pool_columns(e, both, PoolingMode::SumAdm);
    CHECK(sn[0] == Catch::Approx(2.0).margin(1e-15));
    CHECK(sn[1] == Catch::Approx(2.0).margin(1e-15));
}

TEST_CASE("singleton admission returns that column under every mode") {
    const Mat e = columns({{0.5, -2.0, 0.09}});
    const std::vector<std::size_t> one{0};
    CHECK(pool_columns(e, one, PoolingMode::MeanAdm) == Vec{0.5, -2.0, 0.09});
    CHECK(pool_columns(e, one, PoolingMode::MaxAdm) == Vec{0.5, -2.0, 0.09});
    const Vec sn = pool_columns(e, one, PoolingMode::SumAdm);
    for (std::size_t i = 0; i < 3; ++i) {
        const double v = e(i, 0);
        CHECK(sn[i] == Catch::Approx(v / std::sqrt(std::fabs(v))).margin(1e-15));
    }
}

TEST_CASE("pooling is permutation invariant") {
    Rng rng(21);
    Mat e(6, 12);
    fill_uniform(e, rng, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::size_t> codes;
        const std::size_t n = 1 + rng.below(5);
        for (std::size_t i = 0; i < n; ++i) codes.push_back(rng.below(12));
        std::sort(codes.begin(), codes.end());
        codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
        auto shuffled = codes;
        rng.shuffle(shuffled);
        for (PoolingMode mode : {PoolingMode::MaxAdm, PoolingMode::SumAdm, PoolingMode::MeanAdm}) {
            CHECK(pool_columns(e, codes, mode) == pool_columns(e, shuffled, mode));
        }
    }
}

TEST_CASE("max pooling is monotone in the code set") {
    Rng rng(22);
    Mat e(5, 10);
    fill_uniform(e, rng, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::size_t> codes{rng.below(10)};
        Vec prev = pool_columns(e, codes, PoolingMode::MaxAdm);
        for (int add = 0; add < 4; ++add) {
            codes.push_back(rng.below(10));
            Vec next = pool_columns(e, codes, PoolingMode::MaxAdm);
            for (std::size_t i = 0; i < prev.size(); ++i) CHECK(next[i] >= prev[i]);
            prev = next;
        }
    }
}

TEST_CASE("sum pooling at s = 0 returns exactly zero with zero gradient") {
    // two columns that cancel exactly
    const Mat e = columns({{1.0, -2.5}, {-1.0, 2.5}});
    PoolTrace trace;
    const Vec out = pool_columns(e, {0, 1}, PoolingMode::SumAdm, &trace);
    CHECK(out == Vec{0.0, 0.0});
    CHECK(trace.sum == Vec{0.0, 0.0});

    Mat grad(2, 2, 0.0);
    pool_backward(grad, {0, 1}, PoolingMode::SumAdm, trace, {1.0, 1.0});
    for (double g : grad.a) CHECK(g == 0.0);
}

TEST_CASE("empty intervention set pools to the zero vector") {
    Mat a = columns({{1.0, 2.0}});
    Mat b = columns({{9.0, 9.0}});
    EmbeddingParams p{a, b};
    for (PoolingMode mode : {PoolingMode::MaxAdm, PoolingMode::SumAdm, PoolingMode::MeanAdm}) {
        auto emb = embed_admission({0}, {}, p, mode);
        CHECK(emb.p == Vec{0.0, 0.0});
    }
    CHECK_THROWS_AS(embed_admission({}, {}, p, PoolingMode::MeanAdm), config_error);
}

TEST_CASE("out-of-range code index is rejected") {
    Mat e(3, 4);
    CHECK_THROWS_AS(pool_columns(e, {4}, PoolingMode::MeanAdm), shape_error);
}

TEST_CASE("init_embeddings shapes and determinism") {
    Vocabulary vocab;
    for (int i = 0; i < 243; ++i) vocab.diagnosis_codes.push_back("d" + std::to_string(i));
    for (int i = 0; i < 50; ++i) vocab.intervention_codes.push_back("s" + std::to_string(i));
    std::sort(vocab.diagnosis_codes.begin(), vocab.diagnosis_codes.end());
    std::sort(vocab.intervention_codes.begin(), vocab.intervention_codes.end());

    Rng r1(5), r2(5);
    EmbeddingParams a = init_embeddings(10, vocab, r1);
    CHECK(a.A.rows == 10);
    CHECK(a.A.cols == 243);
    CHECK(a.B.rows == 10);
    CHECK(a.B.cols == 50);
    for (double v : a.A.a) {
        CHECK(v >= -0.05);
        CHECK(v <= 0.05);
    }

    EmbeddingParams b = init_embeddings(10, vocab, r2);
    CHECK(a.A.a == b.A.a);
    CHECK(a.B.a == b.B.a);

    Rng r3(5);
    EmbeddingParams z = init_embeddings(10, vocab, r3, 0.0);
    for (double v : z.A.a) CHECK(v == 0.0);
}

TEST_CASE("code dropout never empties the diagnosis set") {
    Rng rng(31);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<std::size_t> codes;
        const std::size_t n = 1 + rng.below(5);
        for (std::size_t i = 0; i < n; ++i) codes.push_back(i);
        const double keep = rng.uniform(0.05, 1.0);
        auto kept = drop_codes(codes, keep, true, rng);
        CHECK(!kept.empty());
        // interventions may drop to empty
        auto interv = drop_codes(codes, keep, false, rng);
        CHECK(interv.size() <= codes.size());
    }
}
