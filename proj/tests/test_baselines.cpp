#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "deepcare/baselines.hpp"

using namespace deepcare;

namespace {

PatientRecord pair_record(const std::string& id, std::vector<std::size_t> first,
                          std::vector<std::size_t> second) {
    PatientRecord r;
    r.patient_id = id;
    CodedAdmission a, b;
    a.time_days = 0.0;
    a.method = AdmissionMethod::Unplanned;
    a.diagnoses = std::move(first);
    b.time_days = 10.0;
    b.method = AdmissionMethod::Unplanned;
    b.diagnoses = std::move(second);
    r.admissions = {a, b};
    return r;
}

}  // namespace

TEST_CASE("fit_markov hand count") {
    // transitions from code 0 observed as [1, 1, 2]
    std::vector<PatientRecord> train{
        pair_record("a", {0}, {1}),
        pair_record("b", {0}, {1}),
        pair_record("c", {0}, {2}),
    };
    MarkovModel m = fit_markov(train, 3, 0.0);
    CHECK(m.transition_prob(0, 1) == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(m.transition_prob(0, 2) == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(m.transition_prob(0, 0) == 0.0);

    CHECK_THROWS_AS(fit_markov({}, 3, 0.0), config_error);
    CHECK_THROWS_AS(fit_markov(train, 3, -1.0), config_error);
}

TEST_CASE("smoothing limits") {
    std::vector<PatientRecord> train{pair_record("a", {0}, {1})};
    // alpha -> infinity tends to uniform
    MarkovModel heavy = fit_markov(train, 4, 1e9);
    for (std::size_t to = 0; to < 4; ++to)
        CHECK(heavy.transition_prob(0, to) == Catch::Approx(0.25).epsilon(1e-6));

    // unseen source with alpha > 0 is exactly uniform
    MarkovModel m = fit_markov(train, 4, 0.1);
    for (std::size_t to = 0; to < 4; ++to)
        CHECK(m.transition_prob(3, to) == Catch::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("scores are distributions and singletons read one row") {
    std::vector<PatientRecord> train{
        pair_record("a", {0, 1}, {2}),
        pair_record("b", {1}, {0, 2}),
        pair_record("c", {2}, {1}),
    };
    MarkovModel m = fit_markov(train, 3, 0.2);

    const Vec row = markov_scores(m, {1});
    for (std::size_t to = 0; to < 3; ++to)
        CHECK(row[to] == Catch::Approx(m.transition_prob(1, to)).epsilon(1e-15));

    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::size_t> cur;
        const std::size_t n = 1 + rng.below(3);
        for (std::size_t i = 0; i < n; ++i) cur.push_back(rng.below(3));
        std::sort(cur.begin(), cur.end());
        cur.erase(std::unique(cur.begin(), cur.end()), cur.end());
        const Vec q = markov_scores(m, cur);
        double sum = 0.0;
        for (double v : q) sum += v;
        CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    }
    CHECK_THROWS_AS(markov_scores(m, {}), config_error);
}

TEST_CASE("top-1 matches a brute-force oracle on a 3-code toy corpus") {
    // five patients, enumerable by hand
    std::vector<PatientRecord> train{
        pair_record("p1", {0}, {1}),     pair_record("p2", {0, 2}, {1, 2}),
        pair_record("p3", {1}, {2}),     pair_record("p4", {2}, {2}),
        pair_record("p5", {1, 2}, {0}),
    };
    MarkovModel m = fit_markov(train, 3, 0.0);

    // independent oracle: recount transitions with a plain map
    std::map<std::pair<std::size_t, std::size_t>, double> counts;
    std::map<std::size_t, double> totals;
    for (const auto& r : train)
        for (std::size_t from : r.admissions[0].diagnoses)
            for (std::size_t to : r.admissions[1].diagnoses) {
                counts[{from, to}] += 1.0;
                totals[from] += 1.0;
            }
    for (std::vector<std::size_t> query :
         {std::vector<std::size_t>{0}, {1}, {2}, {0, 1}, {1, 2}, {0, 1, 2}}) {
        Vec expect(3, 0.0);
        for (std::size_t from : query)
            for (std::size_t to = 0; to < 3; ++to)
                expect[to] += counts[{from, to}] / totals[from] / query.size();
        std::size_t oracle_top = 0;
        for (std::size_t to = 1; to < 3; ++to)
            if (expect[to] > expect[oracle_top]) oracle_top = to;
        const auto top = predict_next(m, query, 1);
        REQUIRE(top.size() == 1);
        CHECK(top[0] == oracle_top);
    }
}

TEST_CASE("fit is order insensitive across patients") {
    std::vector<PatientRecord> train{
        pair_record("a", {0, 1}, {2}),
        pair_record("b", {1}, {0}),
        pair_record("c", {2}, {1}),
        pair_record("d", {0}, {0, 1, 2}),
    };
    MarkovModel m1 = fit_markov(train, 3, 0.1);
    std::reverse(train.begin(), train.end());
    MarkovModel m2 = fit_markov(train, 3, 0.1);
    CHECK(m1.counts == m2.counts);
    CHECK(m1.row_totals == m2.row_totals);
}

TEST_CASE("ties break by ascending vocabulary index") {
    const Vec scores{0.25, 0.5, 0.5, 0.25};
    const auto top = top_k_indices(scores, 4);
    CHECK(top == std::vector<std::size_t>{1, 2, 0, 3});
}
