// Loss semantics: hand values, algebraic identities, independent oracles,
// gradient checks.

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "shad/losses.hpp"
#include "shad/rng.hpp"
#include "testutil.hpp"

using namespace shad;
using testutil::gradcheck;

namespace {

// Independent reference: plain softmax cross-entropy computed row by row.
double reference_ce(const Matrix& logits, const std::vector<int>& labels, const Matrix* shift) {
    double total = 0.0;
    for (int i = 0; i < logits.rows(); ++i) {
        double mx = -1e300;
        for (int j = 0; j < logits.cols(); ++j) {
            const double v = logits(i, j) + (shift ? shift->at_flat(j) : 0.0);
            mx = std::max(mx, v);
        }
        double z = 0.0;
        for (int j = 0; j < logits.cols(); ++j)
            z += std::exp(logits(i, j) + (shift ? shift->at_flat(j) : 0.0) - mx);
        const int y = labels[static_cast<size_t>(i)];
        total -= logits(i, y) + (shift ? shift->at_flat(y) : 0.0) - mx - std::log(z);
    }
    return total / logits.rows();
}

LabelDistribution random_distribution(Rng& rng, int c) {
    Matrix p = rng.uniform_matrix(1, c, 0.01, 1.0);
    double s = 0.0;
    for (int i = 0; i < c; ++i) s += p.at_flat(i);
    for (int i = 0; i < c; ++i) p.at_flat(i) /= s;
    return LabelDistribution::from_probs(std::move(p));
}

} // namespace

TEST_CASE("cross_entropy hand values") {
    Graph g;
    Node uniform = cross_entropy(g, g.constant(Matrix(3, 4)), {0, 1, 2});
    CHECK(uniform.scalar() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Node confident = cross_entropy(g, g.constant(Matrix(1, 2, {10.0, -10.0})), {0});
    CHECK(confident.scalar() < 1e-8);
    CHECK(confident.scalar() >= 0.0);
}

TEST_CASE("cross_entropy rejects out-of-range labels") {
    Graph g;
    Node logits = g.constant(Matrix(2, 3));
    CHECK_THROWS_AS(cross_entropy(g, logits, {0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(cross_entropy(g, logits, {-1, 0}), std::invalid_argument);
}

TEST_CASE("cross_entropy gradient matches finite differences") {
    Rng rng(11);
    Param logits(rng.uniform_matrix(5, 4, -2.0, 2.0));
    auto res = gradcheck({&logits},
                         [&](Graph& g) { return cross_entropy(g, g.param(logits), {0, 3, 1, 2, 0}); });
    CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("generalized logit adjustment identities") {
    Rng rng(12);
    const int c = 6;

    SUBCASE("tau = 0 is cross-entropy, tau = 1 is balanced softmax") {
        double worst0 = 0.0, worst1 = 0.0;
        for (int rep = 0; rep < 100; ++rep) {
            const int n = 1 + rng.uniform_int(8);
            Matrix logits = rng.uniform_matrix(n, c, -3.0, 3.0);
            std::vector<int> labels(static_cast<size_t>(n));
            for (auto& y : labels) y = rng.uniform_int(c);
            LabelDistribution pi = random_distribution(rng, c);

            Graph g;
            Node l0 = generalized_logit_adjusted(g, g.constant(logits), labels, pi, 0.0);
            Node lce = cross_entropy(g, g.constant(logits), labels);
            worst0 = std::max(worst0, std::fabs(l0.scalar() - lce.scalar()));

            Node l1 = generalized_logit_adjusted(g, g.constant(logits), labels, pi, 1.0);
            const Matrix shift = pi.log_floored();
            worst1 = std::max(worst1, std::fabs(l1.scalar() - reference_ce(logits, labels, &shift)));
        }
        CHECK(worst0 <= 1e-12);
        CHECK(worst1 <= 1e-12);
    }

    SUBCASE("uniform pi shifts all logits equally, leaving the loss unchanged") {
        const LabelDistribution u = LabelDistribution::uniform(c);
        for (double tau : {0.5, 1.0, 2.0, -1.5}) {
            Matrix logits = rng.uniform_matrix(4, c, -3.0, 3.0);
            std::vector<int> labels = {0, 2, 4, 5};
            Graph g;
            Node adj = generalized_logit_adjusted(g, g.constant(logits), labels, u, tau);
            Node ce = cross_entropy(g, g.constant(logits), labels);
            CHECK(adj.scalar() == doctest::Approx(ce.scalar()).epsilon(1e-12));
        }
    }

    SUBCASE("gradient check") {
        Param logits(rng.uniform_matrix(4, c, -2.0, 2.0));
        LabelDistribution pi = random_distribution(rng, c);
        auto res = gradcheck({&logits}, [&](Graph& g) {
            return generalized_logit_adjusted(g, g.param(logits), {1, 0, 5, 3}, pi, 2.0);
        });
        CHECK(res.max_rel_err <= 1e-6);
    }
}

TEST_CASE("entropy_loss hand values and range") {
    Graph g;
    Node uniform = entropy_loss(g, g.constant(Matrix(2, 10)));
    CHECK(uniform.scalar() == doctest::Approx(std::log(10.0)).epsilon(1e-12));

    Node sharp = entropy_loss(g, g.constant(Matrix(1, 2, {50.0, -50.0})));
    CHECK(sharp.scalar() >= 0.0);
    CHECK(sharp.scalar() < 1e-8);

    Rng rng(13);
    for (int rep = 0; rep < 50; ++rep) {
        const int c = 2 + rng.uniform_int(9);
        Node ent = entropy_loss(g, g.constant(rng.uniform_matrix(3, c, -6.0, 6.0)));
        CHECK(ent.scalar() >= 0.0);
        CHECK(ent.scalar() <= std::log(static_cast<double>(c)) + 1e-12);
    }
}

TEST_CASE("entropy_loss gradient matches finite differences") {
    Rng rng(14);
    Param logits(rng.uniform_matrix(5, 6, -2.0, 2.0));
    auto res = gradcheck({&logits}, [&](Graph& g) { return entropy_loss(g, g.param(logits)); });
    CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("info_max_loss hand values") {
    Graph g;
    SUBCASE("identical rows cancel exactly") {
        Matrix logits(3, 4);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j) logits(i, j) = 0.7 * j - 0.4;
        Node loss = info_max_loss(g, g.constant(logits));
        CHECK(loss.scalar() == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("two one-hot rows on different classes") {
        Matrix logits(2, 2, {60.0, -60.0, -60.0, 60.0});
        Node loss = info_max_loss(g, g.constant(logits));
        CHECK(loss.scalar() == doctest::Approx(-std::log(2.0)).epsilon(1e-9));
    }
    SUBCASE("rejects a single-row batch") {
        CHECK_THROWS_AS(info_max_loss(g, g.constant(Matrix(1, 4))), std::invalid_argument);
    }
}

TEST_CASE("info_max_loss gradient matches finite differences") {
    Rng rng(15);
    Param logits(rng.uniform_matrix(6, 5, -2.0, 2.0));
    auto res = gradcheck({&logits}, [&](Graph& g) { return info_max_loss(g, g.param(logits)); });
    CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("posthoc_logit_adjust") {
    Rng rng(16);
    const int c = 5;

    SUBCASE("identity when the priors match") {
        LabelDistribution pi = random_distribution(rng, c);
        Matrix logits = rng.uniform_matrix(3, c, -2.0, 2.0);
        Matrix out = posthoc_logit_adjust(logits, pi, pi);
        CHECK(out.max_abs_diff(logits) == 0.0);
    }

    SUBCASE("flips the argmax when the prior ratio crosses") {
        Matrix logits(1, 2);
        LabelDistribution pi_s = LabelDistribution::from_probs(Matrix(1, 2, {0.9, 0.1}));
        LabelDistribution target = LabelDistribution::from_probs(Matrix(1, 2, {0.1, 0.9}));
        Matrix out = posthoc_logit_adjust(logits, target, pi_s);
        CHECK(argmax_rows(out)[0] == 1);
    }

    SUBCASE("argmax agrees with brute-force Bayes reweighting on 1000 rows") {
        LabelDistribution pi_s = random_distribution(rng, c);
        LabelDistribution target = random_distribution(rng, c);
        int mismatches = 0;
        for (int rep = 0; rep < 1000; ++rep) {
            Matrix logits = rng.uniform_matrix(1, c, -3.0, 3.0);
            Matrix adjusted = posthoc_logit_adjust(logits, target, pi_s);
            // Oracle: softmax(logits) * target / pi_s, renormalized.
            Matrix probs = softmax_rows(logits);
            Matrix rew(1, c);
            double z = 0.0;
            for (int j = 0; j < c; ++j) {
                rew.at_flat(j) = probs.at_flat(j) * target[j] / pi_s[j];
                z += rew.at_flat(j);
            }
            for (int j = 0; j < c; ++j) rew.at_flat(j) /= z;
            if (argmax_rows(adjusted)[0] != argmax_rows(rew)[0]) ++mismatches;
        }
        CHECK(mismatches == 0);
    }
}

TEST_CASE("pseudo_label_loss") {
    Graph g;
    SUBCASE("confident logits are self-consistent") {
        Node loss = pseudo_label_loss(g, g.constant(Matrix(2, 3, {30, -30, -30, -30, 30, -30})));
        CHECK(loss.scalar() < 1e-8);
    }
    SUBCASE("uniform logits with lowest-index tie-break") {
        Node loss = pseudo_label_loss(g, g.constant(Matrix(2, 4)));
        CHECK(loss.scalar() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    }
    SUBCASE("gradient check holding the labels fixed") {
        Rng rng(17);
        Param logits(rng.uniform_matrix(4, 5, -2.0, 2.0));
        const std::vector<int> fixed = argmax_rows(logits.value);
        auto res = gradcheck(
            {&logits}, [&](Graph& g2) { return cross_entropy(g2, g2.param(logits), fixed); });
        CHECK(res.max_rel_err <= 1e-6);

        // And the loss itself equals that cross-entropy at the base point.
        Graph g3;
        Node a = pseudo_label_loss(g3, g3.constant(logits.value));
        Node b = cross_entropy(g3, g3.constant(logits.value), fixed);
        CHECK(a.scalar() == doctest::Approx(b.scalar()).epsilon(1e-15));
    }
}

TEST_CASE("argmax tie-break is the lowest class index") {
    Matrix m(1, 4, {1.0, 3.0, 3.0, 2.0});
    CHECK(argmax_rows(m)[0] == 1);
}
