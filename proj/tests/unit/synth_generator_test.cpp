#include <gtest/gtest.h>

#include <flowlens/extraction.hpp>
#include <flowlens/flow_analytics.hpp>
#include <flowlens/synth_generator.hpp>

#include "support/fixtures.hpp"

using namespace flowlens;
using namespace flowlens::testing;

namespace
{

GeneratorConfig planted_config()
{
    GeneratorConfig c;
    c.seed          = 42;
    c.planted_flows = {{{"A", "B", "C"}, 6}, {{"A", "C"}, 4}};
    c.noise_trips   = 10;
    return c;
}

LoadResult load_generated(const GeneratedCorpus& g, const TempDir& dir)
{
    write_corpus(g, dir.path());
    return load_corpus_dir(dir.path(), dir / "concepts.json");
}

} // namespace

TEST(GenerateCorpus, PlantedSharesAreRecovered)
{
    TempDir    dir;
    const auto loaded = load_generated(generate_corpus(planted_config()), dir);
    EXPECT_TRUE(loaded.report.rejected_trips.empty());
    EXPECT_TRUE(loaded.report.record_errors.empty());
    EXPECT_EQ(loaded.corpus.trips.size(), 20u);

    const auto stats = flow_statistics(group_into_flows(extract_sequences(loaded.corpus, {"A", "C"}, {})));
    ASSERT_EQ(stats.size(), 2u);
    EXPECT_EQ(stats[0].path, (ElementPath{"A", "B", "C"}));
    EXPECT_DOUBLE_EQ(stats[0].share, 0.6);
    EXPECT_DOUBLE_EQ(stats[1].share, 0.4);
}

TEST(GenerateCorpus, NoPlantedFlowsMeansNoSequences)
{
    GeneratorConfig c;
    c.task        = TaskDefinition{"A", "C"};
    c.noise_trips = 5;
    TempDir    dir;
    const auto loaded = load_generated(generate_corpus(c), dir);
    EXPECT_EQ(loaded.corpus.trips.size(), 5u);
    EXPECT_TRUE(extract_sequences(loaded.corpus, {"A", "C"}, {}).sequences.empty());
}

TEST(GenerateCorpus, NearMissNoiseNeverCloses)
{
    auto c      = planted_config();
    c.near_miss = true;
    TempDir    dir;
    const auto loaded = load_generated(generate_corpus(c), dir);
    std::size_t with_start = 0;
    for (const auto& [id, trip] : loaded.corpus.trips)
        with_start += std::any_of(trip.interactions.begin(), trip.interactions.end(),
                                  [](const auto& e) { return e.element_id == "A"; });
    EXPECT_EQ(with_start, 20u);
    EXPECT_EQ(extract_sequences(loaded.corpus, {"A", "C"}, {}).sequences.size(), 10u);
}

TEST(GenerateCorpus, GroundTruthMatchesExtraction)
{
    auto c           = planted_config();
    c.planted_flows  = {{{"A", "B", "D", "C"}, 5}, {{"A", "C"}, 3}};
    TempDir    dir;
    const auto g      = generate_corpus(c);
    const auto loaded = load_generated(g, dir);
    auto       seqs   = extract_sequences(loaded.corpus, {"A", "C"}, {}).sequences;
    ASSERT_EQ(seqs.size(), g.planted.size());
    for (const auto& p : g.planted)
    {
        auto it = std::find_if(seqs.begin(), seqs.end(), [&](const Sequence& s) { return s.trip_id == p.trip_id; });
        ASSERT_NE(it, seqs.end());
        EXPECT_EQ(path_of(*it), p.path);
        EXPECT_EQ(it->t_last - it->t_first, p.timestamps.back() - p.timestamps.front());
    }
}

TEST(GenerateCorpus, RerunsAreByteIdentical)
{
    const auto a = generate_corpus(planted_config());
    const auto b = generate_corpus(planted_config());
    EXPECT_EQ(a.files, b.files);
    TempDir da, db;
    write_corpus(a, da.path());
    write_corpus(b, db.path());
    for (const auto& [name, text] : a.files)
    {
        std::ifstream     fa(da / name), fb(db / name);
        const std::string sa{std::istreambuf_iterator< char >(fa), {}}, sb{std::istreambuf_iterator< char >(fb), {}};
        EXPECT_EQ(sa, sb);
        EXPECT_EQ(sa, text);
    }
}

TEST(GenerateCorpus, DifferentSeedsDiffer)
{
    auto c = planted_config();
    const auto a = generate_corpus(c);
    c.seed       = 43;
    const auto b = generate_corpus(c);
    EXPECT_NE(a.files, b.files);
    std::vector< TimestampMs > ta, tb;
    for (const auto& p : a.planted)
        ta.insert(ta.end(), p.timestamps.begin(), p.timestamps.end());
    for (const auto& p : b.planted)
        tb.insert(tb.end(), p.timestamps.begin(), p.timestamps.end());
    EXPECT_NE(ta, tb);
}

TEST(GenerateCorpus, EveryTripIsValid)
{
    auto c           = planted_config();
    c.noise_trips    = 40;
    c.trips_per_file = 7;
    const auto g     = generate_corpus(c);
    EXPECT_EQ(g.files.size(), 8u);
    TempDir    dir;
    const auto loaded = load_generated(g, dir);
    EXPECT_TRUE(loaded.report.rejected_trips.empty());
    EXPECT_TRUE(loaded.report.record_errors.empty());
    EXPECT_EQ(loaded.corpus.trips.size(), 50u);
    for (const auto& [id, trip] : loaded.corpus.trips)
    {
        EXPECT_TRUE(validate_trip(trip).empty()) << id;
        EXPECT_FALSE(trip.glances.empty());
        EXPECT_FALSE(trip.driving.empty());
    }
}

TEST(GenerateCorpus, ConceptsCoverEveryElement)
{
    TempDir    dir;
    const auto loaded = load_generated(generate_corpus(planted_config()), dir);
    for (const auto& [id, trip] : loaded.corpus.trips)
        for (const auto& e : trip.interactions)
            EXPECT_TRUE(loaded.corpus.concepts.contains(e.element_id)) << e.element_id;
}

TEST(GeneratorConfig, RejectsInvalidConfigs)
{
    auto bad = [](auto mutate) {
        auto c = planted_config();
        mutate(c);
        return c;
    };
    EXPECT_THROW(generate_corpus(bad([](auto& c) { c.planted_flows[1].path = {"A", "D"}; })), ConfigError);
    EXPECT_THROW(generate_corpus(bad([](auto& c) { c.planted_flows[0].path = {"A", "A", "C"}; })), ConfigError);
    EXPECT_THROW(generate_corpus(bad([](auto& c) { c.inter_interaction_dt = {0, 5}; })), ConfigError);
    EXPECT_THROW(generate_corpus(bad([](auto& c) { c.trips_per_file = 0; })), ConfigError);
    EXPECT_THROW(generate_corpus(bad([](auto& c) { c.filler_elements = {"MEDIA", "C"}; })), ConfigError);
    EXPECT_THROW(generate_corpus(bad([](auto& c) { c.trip_meta_pool.dates = {"2023-02-30"}; })), ConfigError);
    EXPECT_THROW(generate_corpus(bad([](auto& c) { c.glance_model.other_fraction = 1.5; })), ConfigError);
}

TEST(GeneratorConfig, JsonRoundTripAndDefaults)
{
    const auto c = planted_config();
    EXPECT_EQ(Json(c).get< GeneratorConfig >(), c);
    const auto parsed = Json::parse(R"({"seed":42,"planted_flows":[{"path":["A","B","C"],"count":6}],"noise_trips":3})")
                            .get< GeneratorConfig >();
    EXPECT_EQ(parsed.seed, 42u);
    EXPECT_EQ(parsed.planted_flows.size(), 1u);
    EXPECT_EQ(parsed.trips_per_file, GeneratorConfig{}.trips_per_file);
    EXPECT_THROW(Json::parse(R"({"seed":"x"})").get< GeneratorConfig >(), ConfigError);
    EXPECT_THROW(Json::parse(R"({"planted_flows":[{"path":["A","C"]}]})").get< GeneratorConfig >(), ConfigError);
}
