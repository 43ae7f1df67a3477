#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "wavelit/sampling.hpp"

using namespace wavelit;

namespace {

// Reference values for the eight-dataset corpus at printed precision:
// probabilities to 4 decimals, KL to 3, oversampling to 1.
const double kPropPure[8] = {0.0106, 0.1813, 0.2105, 0.2694, 0.0041, 0.0196, 0.2430, 0.0616};
const double kTemp02[8] = {0.0617, 0.1448, 0.1676, 0.2250, 0.0597, 0.0645, 0.1971, 0.0796};
const double kSqrtN[8] = {0.0420, 0.1737, 0.1871, 0.2117, 0.0261, 0.0571, 0.2011, 0.1012};

}  // namespace

TEST(Corpus, ReferenceTokenCounts) {
    CorpusStats c = reference_corpus();
    ASSERT_EQ(c.datasets.size(), 8u);
    EXPECT_EQ(c.datasets[0].total_tokens(), 229376000LL);
    EXPECT_EQ(c.datasets[1].total_tokens(), 3932160000LL);
    EXPECT_EQ(c.datasets[2].total_tokens(), 4564582400LL);
    EXPECT_EQ(c.datasets[3].total_tokens(), 5842665472LL);
    EXPECT_EQ(c.datasets[4].total_tokens(), 88473600LL);
    EXPECT_EQ(c.datasets[5].total_tokens(), 425132032LL);
    EXPECT_EQ(c.datasets[6].total_tokens(), 5269094400LL);
    EXPECT_EQ(c.datasets[7].total_tokens(), 1335885824LL);
    std::int64_t total = 0;
    for (const auto& d : c.datasets) total += d.total_tokens();
    EXPECT_EQ(total, 21687369728LL);
}

TEST(Proportional, MatchesTableToPrintedPrecision) {
    auto p = proportional_share(reference_corpus());
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(p[i], kPropPure[i], 5e-5) << i;
    EXPECT_NEAR(p[3], 0.2694, 5e-5);  // shear_flow = 5842665472/21687369728
    EXPECT_NEAR(p[4], 0.0041, 5e-5);  // TRL2D
}

TEST(Proportional, UniformForEqualSizes) {
    CorpusStats c;
    c.datasets = {{"a", 10, 64}, {"b", 10, 64}, {"c", 10, 64}, {"d", 10, 64}};
    auto p = proportional_share(c);
    for (double v : p) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Weights, UniformScheme) {
    auto w = sampling_weights("uniform", reference_corpus());
    for (double v : w.w) EXPECT_DOUBLE_EQ(v, 0.125);
}

TEST(Weights, SqrtMatchesTable) {
    auto w = sampling_weights("sqrt", reference_corpus());
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(w.w[i], kSqrtN[i], 5e-5) << i;
}

TEST(Weights, TemperatureMatchesTable) {
    auto w = sampling_weights("temperature", reference_corpus(), 0.2);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(w.w[i], kTemp02[i], 5e-5) << i;
}

TEST(Weights, SumToOneAndPositive) {
    for (const char* scheme : {"uniform", "temperature", "sqrt"}) {
        auto w = sampling_weights(scheme, reference_corpus(), 0.2);
        double sum = 0.0;
        for (double v : w.w) {
            EXPECT_GT(v, 0.0);
            sum += v;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Weights, MissingTemperatureRejected) {
    EXPECT_THROW(sampling_weights("temperature", reference_corpus()), ConfigError);
    EXPECT_THROW(sampling_weights("nearest", reference_corpus()), ConfigError);
}

TEST(Weights, TemperatureLimits) {
    auto c = reference_corpus();
    auto hot = sampling_weights("temperature", c, 100.0);
    for (double v : hot.w) EXPECT_NEAR(v, 0.125, 1e-3);
    auto cold = sampling_weights("temperature", c, 1e-4);
    // argmax of p is shear_flow (index 3)
    EXPECT_NEAR(cold.w[3], 1.0, 1e-9);
    for (std::size_t i = 0; i < 8; ++i)
        if (i != 3) EXPECT_LE(cold.w[i], 1e-9);
}

TEST(Kl, TableFooter) {
    auto c = reference_corpus();
    auto p = proportional_share(c);
    EXPECT_NEAR(kl_to_proportional(p, p), 0.0, 1e-12);
    EXPECT_NEAR(kl_to_proportional(sampling_weights("uniform", c).w, p), 0.766, 5e-4);
    EXPECT_NEAR(kl_to_proportional(sampling_weights("temperature", c, 0.2).w, p), 0.214, 5e-4);
    EXPECT_NEAR(kl_to_proportional(sampling_weights("sqrt", c).w, p), 0.099, 5e-4);
}

TEST(Kl, SqrtSitsBetweenProportionalAndUniform) {
    auto c = reference_corpus();
    auto p = proportional_share(c);
    const double kl_sqrt = kl_to_proportional(sampling_weights("sqrt", c).w, p);
    const double kl_temp = kl_to_proportional(sampling_weights("temperature", c, 0.2).w, p);
    const double kl_uni = kl_to_proportional(sampling_weights("uniform", c).w, p);
    EXPECT_LT(kl_sqrt, kl_temp);
    EXPECT_LT(kl_temp, kl_uni);
}

TEST(Oversampling, TableValues) {
    auto c = reference_corpus();
    auto p = proportional_share(c);
    auto r_pure = oversampling_ratio(p, p);
    for (double v : r_pure) EXPECT_NEAR(v, 1.0, 1e-12);
    // TRL2D is index 4
    EXPECT_NEAR(oversampling_ratio(sampling_weights("uniform", c).w, p)[4], 30.6, 0.05);
    EXPECT_NEAR(oversampling_ratio(sampling_weights("temperature", c, 0.2).w, p)[4], 14.6, 0.05);
    EXPECT_NEAR(oversampling_ratio(sampling_weights("sqrt", c).w, p)[4], 6.4, 0.05);
}

TEST(NextDataset, DegenerateWeights) {
    SamplingWeights w;
    w.w = {1.0, 0.0, 0.0};
    Rng rng = Rng::stream(1, "draw");
    for (int i = 0; i < 100; ++i) EXPECT_EQ(next_dataset(w, rng), 0u);
}

TEST(NextDataset, EmpiricalConvergence) {
    auto w = sampling_weights("sqrt", reference_corpus());
    Rng rng = Rng::stream(2, "draw");
    std::vector<std::int64_t> counts(8, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) counts[next_dataset(w, rng)]++;
    for (std::size_t i = 0; i < 8; ++i)
        EXPECT_NEAR(static_cast<double>(counts[i]) / n, w.w[i], 5e-3) << i;
}

TEST(NextDataset, DeterministicSequence) {
    auto w = sampling_weights("sqrt", reference_corpus());
    auto draw = [&] {
        Rng rng = Rng::stream(3, "draw");
        std::vector<std::size_t> seq;
        for (int i = 0; i < 64; ++i) seq.push_back(next_dataset(w, rng));
        return seq;
    };
    EXPECT_EQ(draw(), draw());
}

TEST(StatsFile, RoundTripAndErrors) {
    const std::string path = ::testing::TempDir() + "corpus.stats";
    {
        std::ofstream os(path);
        os << "# name n h w levels\n";
        os << "alpha 100 64 64 1\n";
        os << "beta 50 128 64 2\n";
    }
    CorpusStats c = read_corpus_stats(path);
    ASSERT_EQ(c.datasets.size(), 2u);
    EXPECT_EQ(c.datasets[0].tokens_per_example, 32 * 32);
    EXPECT_EQ(c.datasets[1].tokens_per_example, 32 * 16);
    {
        std::ofstream os(path);
        os << "alpha 100 64\n";
    }
    try {
        read_corpus_stats(path);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    }
    std::remove(path.c_str());
}

TEST(Report, SingleAndEqualDatasets) {
    CorpusStats one;
    one.datasets = {{"solo", 10, 1024}};
    for (const char* scheme : {"uniform", "temperature", "sqrt"}) {
        auto w = sampling_weights(scheme, one, 1.0);
        ASSERT_EQ(w.w.size(), 1u);
        EXPECT_DOUBLE_EQ(w.w[0], 1.0);
    }
    CorpusStats two;
    two.datasets = {{"a", 10, 1024}, {"b", 10, 1024}};
    for (const char* scheme : {"uniform", "temperature", "sqrt"}) {
        auto w = sampling_weights(scheme, two, 1.0);
        EXPECT_DOUBLE_EQ(w.w[0], 0.5);
        EXPECT_DOUBLE_EQ(w.w[1], 0.5);
    }
}

TEST(Report, CsvContainsTableValues) {
    std::string csv = sampling_report_csv(reference_corpus());
    EXPECT_NE(csv.find("shear_flow,0.2694,0.1250,0.2250,0.2117"), std::string::npos);
    EXPECT_NE(csv.find("kl_nats,0.000,0.766,0.214,0.099"), std::string::npos);
    EXPECT_NE(csv.find("oversampling_turbulent_radiative_layer_2D,1.0,30.6,14.6,6.4"), std::string::npos);
}
