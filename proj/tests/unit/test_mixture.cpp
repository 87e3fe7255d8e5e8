#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "mdnkit/mixture.hpp"
#include "mdnkit/random.hpp"

using namespace mdnkit;

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

double normal_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
}

MixtureParams direct_params(const std::vector<double>& logits, const std::vector<double>& mu,
                            const std::vector<double>& sigma, int k, int d) {
    MixtureParams p;
    p.logits = Tensor(Shape{1, k}, logits);
    p.means = Tensor(Shape{1, k, d}, mu);
    p.scales = Tensor(Shape{1, k, d}, sigma);
    return p;
}

}  // namespace

TEST_CASE("transform_head") {
    SUBCASE("equal logits give uniform weights") {
        const int k = 4, d = 2;
        Tensor raw(Shape{1, k * (1 + 2 * d)}, 0.7);
        MixtureParams p = transform_head(raw, k, d);
        const std::vector<double> alpha = mixture_weights(p);
        for (double a : alpha) CHECK(a == doctest::Approx(0.25).epsilon(1e-14));
    }

    SUBCASE("softplus(0) + eps") {
        Tensor raw(Shape{1, 3}, {0.0, 0.0, 0.0});  // K=1, d=1
        MixtureParams p = transform_head(raw, 1, 1, 1e-6);
        CHECK(p.scales(0, 0, 0) == doctest::Approx(std::log(2.0) + 1e-6).epsilon(1e-14));
        CHECK(std::abs(p.scales(0, 0, 0) - 0.693147) < 1e-5);
    }

    SUBCASE("softmax of (1,2,3)") {
        Tensor raw(Shape{1, 9}, {1, 2, 3, 0, 0, 0, 0, 0, 0});  // K=3, d=1
        MixtureParams p = transform_head(raw, 3, 1);
        const std::vector<double> alpha = mixture_weights(p);
        CHECK(alpha[0] == doctest::Approx(0.09003057317038046).epsilon(1e-12));
        CHECK(alpha[1] == doctest::Approx(0.24472847105479767).epsilon(1e-12));
        CHECK(alpha[2] == doctest::Approx(0.66524095577482190).epsilon(1e-12));
    }

    SUBCASE("softmax is shift invariant") {
        const int k = 3, d = 1;
        std::vector<double> base = {0.3, -1.2, 2.0, 1, 2, 3, 0.1, 0.2, 0.3};
        Tensor raw(Shape{1, 9}, base);
        std::vector<double> shifted = base;
        for (int c = 0; c < k; ++c) shifted[static_cast<size_t>(c)] += 123.456;
        Tensor raw2(Shape{1, 9}, shifted);
        const auto a1 = mixture_weights(transform_head(raw, k, d));
        const auto a2 = mixture_weights(transform_head(raw2, k, d));
        for (size_t i = 0; i < a1.size(); ++i) CHECK(a1[i] == doctest::Approx(a2[i]).epsilon(1e-12));
    }

    SUBCASE("elu1 alternative keeps scales positive") {
        Tensor raw(Shape{1, 3}, {0.0, 0.0, -30.0});
        MixtureParams p = transform_head(raw, 1, 1, 1e-6, ScaleTransform::Elu1);
        CHECK(p.scales(0, 0, 0) > 0.0);
        Tensor raw2(Shape{1, 3}, {0.0, 0.0, 2.0});
        CHECK(transform_head(raw2, 1, 1, 1e-6, ScaleTransform::Elu1).scales(0, 0, 0) ==
              doctest::Approx(3.0 + 1e-6));
    }

    CHECK_THROWS_AS(transform_head(Tensor(Shape{1, 5}, 0.0), 2, 1), ShapeError);
}

TEST_CASE("mdn_nll analytic values") {
    SUBCASE("standard normal at its mode: 0.5 ln(2 pi)") {
        MixtureParams p = direct_params({0.0}, {0.0}, {1.0}, 1, 1);
        Tensor y(Shape{1, 1}, {0.0});
        const double nll = mdn_nll(p, y).item();
        CHECK(std::abs(nll - 0.5 * std::log(2.0 * M_PI)) < 1e-12);
        CHECK(std::abs(nll - 0.918939) < 1e-6);
    }

    SUBCASE("two-component value against a direct density sum") {
        MixtureParams p = direct_params({std::log(0.3), std::log(0.7)}, {-1.0, 1.0}, {0.5, 0.5},
                                        2, 1);
        Tensor y(Shape{1, 1}, {0.2});
        const double expect =
            -std::log(0.3 * normal_pdf(0.2, -1.0, 0.5) + 0.7 * normal_pdf(0.2, 1.0, 0.5));
        CHECK(mdn_nll(p, y).item() == doctest::Approx(expect).epsilon(1e-12));
    }

    SUBCASE("duplicate components collapse to the single-component value") {
        MixtureParams single = direct_params({0.0}, {0.4}, {0.8}, 1, 1);
        // Same (mu, sigma) twice, weights split 0.25 / 0.75.
        MixtureParams dup = direct_params({std::log(0.25), std::log(0.75)}, {0.4, 0.4},
                                          {0.8, 0.8}, 2, 1);
        Tensor y(Shape{1, 1}, {-0.3});
        CHECK(mdn_nll(dup, y).item() ==
              doctest::Approx(mdn_nll(single, y).item()).epsilon(1e-12));
    }
}

TEST_CASE("mdn_density") {
    SUBCASE("integrates to one on a wide grid") {
        MixtureParams p = direct_params({0.2, -0.4}, {-0.8, 1.1}, {0.3, 0.6}, 2, 1);
        const int n = 20001;
        const double lo = -12.0, hi = 12.0, h = (hi - lo) / (n - 1);
        double integral = 0.0;
        for (int i = 0; i < n; ++i) {
            Tensor y(Shape{1, 1}, {lo + h * i});
            const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
            integral += w * mdn_density(p, y)[0];
        }
        integral *= h;
        CHECK(std::abs(integral - 1.0) < 1e-3);
    }

    SUBCASE("symmetric mixture is even about the midpoint") {
        MixtureParams p = direct_params({0.0, 0.0}, {-1.0, 1.0}, {0.4, 0.4}, 2, 1);
        for (double offset : {0.1, 0.5, 1.3, 2.0}) {
            Tensor left(Shape{1, 1}, {-offset});
            Tensor right(Shape{1, 1}, {offset});
            CHECK(mdn_density(p, left)[0] ==
                  doctest::Approx(mdn_density(p, right)[0]).epsilon(1e-12));
        }
    }

    SUBCASE("well-separated mixture peaks at alpha / (sigma sqrt(2 pi))") {
        MixtureParams p = direct_params({std::log(0.6), std::log(0.4)}, {-30.0, 30.0},
                                        {0.5, 0.5}, 2, 1);
        Tensor y(Shape{1, 1}, {-30.0});
        const double expect = 0.6 / (0.5 * std::sqrt(2.0 * M_PI));
        CHECK(mdn_density(p, y)[0] == doctest::Approx(expect).epsilon(1e-9));
    }

    SUBCASE("naive-formula agreement with the log-space NLL") {
        RandomStream rng(13);
        const int b = 16, k = 5, d = 3;
        Tensor raw(Shape{b, k * (1 + 2 * d)});
        for (auto& v : raw.values()) v = rng.normal();
        MixtureParams p = transform_head(raw, k, d);
        Tensor y(Shape{b, d});
        for (auto& v : y.values()) v = rng.normal();
        const std::vector<double> density = mdn_density(p, y);
        Tensor nll = per_sample_nll(p, y);
        for (int i = 0; i < b; ++i) {
            CHECK(rel_err(-std::log(density[static_cast<size_t>(i)]), nll(i)) < 1e-8);
        }
    }
}

TEST_CASE("mdn gradients match finite differences") {
    RandomStream rng(21);
    const int b = 4, k = 3, d = 2;
    Tensor raw(Shape{b, k * (1 + 2 * d)}, 0.0, true);
    for (auto& v : raw.values()) v = rng.normal();
    Tensor y(Shape{b, d});
    for (auto& v : y.values()) v = rng.normal();

    auto eval = [&] { return mdn_nll(transform_head(raw, k, d), y).item(); };
    {
        Tape tape;
        Tensor loss = mdn_nll(transform_head(raw, k, d), y);
        raw.zero_grad();
        tape.backward(loss);
    }
    const double h = 1e-5;
    for (std::int64_t i = 0; i < raw.size(); ++i) {
        const double saved = raw.data()[i];
        raw.data()[i] = saved + h;
        const double up = eval();
        raw.data()[i] = saved - h;
        const double down = eval();
        raw.data()[i] = saved;
        CHECK(rel_err(raw.grad()[static_cast<size_t>(i)], (up - down) / (2.0 * h)) < 1e-4);
    }
}

TEST_CASE("stability stress envelope: finite values and gradients") {
    // z_sigma in [-40, 40], z_alpha in [-500, 500], |y - mu| up to 1e3.
    const int k = 3, d = 2;
    const std::vector<double> z_alpha = {-500.0, 0.0, 500.0};
    const std::vector<double> z_sigma = {-40.0, 0.0, 40.0};
    for (double za : z_alpha) {
        for (double zs : z_sigma) {
            Tensor raw(Shape{1, k * (1 + 2 * d)}, 0.0, true);
            for (int c = 0; c < k; ++c) {
                raw.at(0, c) = (c == 0) ? za : -za / 2.0;
                for (int j = 0; j < d; ++j) {
                    raw.at(0, k + c * d + j) = (c % 2 == 0) ? 1000.0 : -1000.0;
                    raw.at(0, k + k * d + c * d + j) = zs;
                }
            }
            Tensor y(Shape{1, d}, 0.0);
            double value;
            {
                Tape tape;
                Tensor loss = mdn_nll(transform_head(raw, k, d), y);
                value = loss.item();
                raw.zero_grad();
                tape.backward(loss);
            }
            CHECK(std::isfinite(value));
            for (double g : raw.grad()) CHECK(std::isfinite(g));
        }
    }
}

TEST_CASE("prune_weights") {
    SUBCASE("threshold zero is a no-op") {
        const std::vector<double> alpha = {0.2, 0.5, 0.3};
        const auto out = prune_weights(alpha, 0.0);
        for (size_t i = 0; i < alpha.size(); ++i) CHECK(out[i] == doctest::Approx(alpha[i]));
    }
    SUBCASE("renormalization arithmetic") {
        const auto out = prune_weights({0.5, 0.49, 0.01}, 0.02);
        CHECK(out[0] == doctest::Approx(0.5 / 0.99).epsilon(1e-12));
        CHECK(out[1] == doctest::Approx(0.49 / 0.99).epsilon(1e-12));
        CHECK(out[2] == 0.0);
    }
    SUBCASE("one-hot unchanged for any threshold below one") {
        const auto out = prune_weights({0.0, 1.0, 0.0}, 0.9);
        CHECK(out[0] == 0.0);
        CHECK(out[1] == 1.0);
        CHECK(out[2] == 0.0);
    }
    CHECK_THROWS_AS(prune_weights({0.6, 0.4}, 0.7), NumericError);
}

TEST_CASE("mixture_entropy") {
    CHECK(mixture_entropy({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(std::log(4.0)));
    CHECK(mixture_entropy({0.0, 1.0, 0.0}) == 0.0);
    CHECK(mixture_entropy({0.5, 0.25, 0.25}) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
    CHECK(std::abs(mixture_entropy({0.5, 0.25, 0.25}) - 1.03972) < 1e-5);
}

TEST_CASE("mdn_sample") {
    SUBCASE("one-hot weights draw from that component only") {
        MixtureParams p = direct_params({100.0, 0.0}, {5.0, -5.0}, {0.01, 0.01}, 2, 1);
        RandomStream rng(3);
        Tensor s = mdn_sample(p, 0, rng, 200);
        for (int i = 0; i < 200; ++i) CHECK(std::abs(s(i, 0) - 5.0) < 1.0);
    }

    SUBCASE("component frequencies within 3-sigma binomial bounds at n=10000") {
        const double a0 = 0.35;
        MixtureParams p = direct_params({std::log(a0), std::log(1.0 - a0)}, {-50.0, 50.0},
                                        {0.1, 0.1}, 2, 1);
        RandomStream rng(17);
        Tensor s = mdn_sample(p, 0, rng, 10000);
        int count0 = 0;
        for (int i = 0; i < 10000; ++i) {
            if (s(i, 0) < 0.0) ++count0;
        }
        const double expect = a0 * 10000;
        const double sigma = std::sqrt(10000 * a0 * (1.0 - a0));
        CHECK(std::abs(count0 - expect) < 3.0 * sigma);
    }

    SUBCASE("prune threshold removes rare components entirely") {
        MixtureParams p = direct_params({std::log(0.995), std::log(0.005)}, {3.0, -300.0},
                                        {0.05, 0.05}, 2, 1);
        RandomStream rng(5);
        Tensor s = mdn_sample(p, 0, rng, 500, 0.01);
        for (int i = 0; i < 500; ++i) CHECK(s(i, 0) > 0.0);
    }

    SUBCASE("empirical mean approaches the mixture mean") {
        MixtureParams p = direct_params({std::log(0.3), std::log(0.7)}, {-2.0, 1.0}, {0.5, 0.5},
                                        2, 1);
        RandomStream rng(29);
        Tensor s = mdn_sample(p, 0, rng, 20000);
        double mean = 0.0;
        for (int i = 0; i < 20000; ++i) mean += s(i, 0);
        mean /= 20000.0;
        const double expect = 0.3 * -2.0 + 0.7 * 1.0;
        // Mixture std is ~1.45, so the standard error at n=20000 is ~0.0103.
        CHECK(std::abs(mean - expect) < 4.0 * 0.0103);
    }
}

TEST_CASE("component_report") {
    SUBCASE("symmetric logits give near-uniform marginals that sum to one") {
        const int n = 50, k = 4;
        std::vector<double> alphas(static_cast<size_t>(n) * k, 1.0 / k);
        ComponentReport report = component_report(alphas, n, k);
        double total = 0.0;
        for (const auto& row : report.rows) {
            CHECK(row.marginal == doctest::Approx(0.25));
            total += row.marginal;
        }
        CHECK(total == doctest::Approx(1.0));
    }

    SUBCASE("ranking is by marginal, descending") {
        const int n = 2, k = 3;
        std::vector<double> alphas = {0.1, 0.6, 0.3, 0.2, 0.5, 0.3};
        ComponentReport report = component_report(alphas, n, k);
        CHECK(report.rows[0].component == 1);
        CHECK(report.rows[0].marginal == doctest::Approx(0.55));
        CHECK(report.rows[1].component == 2);
        CHECK(report.rows[2].component == 0);
        double total = 0.0;
        for (const auto& row : report.rows) total += row.marginal;
        CHECK(total == doctest::Approx(1.0));
    }
}
