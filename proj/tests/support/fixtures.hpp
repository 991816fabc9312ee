#ifndef FLOWLENS_TESTS_FIXTURES_HPP
#define FLOWLENS_TESTS_FIXTURES_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <flowlens/core_model.hpp>
#include <flowlens/ingest.hpp>

namespace flowlens::testing
{

class TempDir
{
public:
    TempDir()
    {
        static std::atomic< int > counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("flowlens-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::permissions(path_, std::filesystem::perms::owner_all, ec);
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&)            = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path        operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string lines(const std::vector< Json >& records)
{
    std::string out;
    for (const auto& r : records)
        out += r.dump() + "\n";
    return out;
}

inline TripMeta meta(const std::string& trip, const std::string& vehicle = "V1", const std::string& sw = "2.0",
                     const std::string& model = "Model A", const std::string& date = "2023-03-01")
{
    return {trip, vehicle, model, sw, "12.3", *parse_date(date)};
}

inline InteractionEvent tap(const std::string& trip, TimestampMs t, const std::string& element,
                            Gesture g = Gesture::tap)
{
    return {trip, t, element, g, "S_" + element};
}

inline GlanceEvent glance(const std::string& trip, TimestampMs start, DurationMs duration, Aoi aoi)
{
    return {trip, start, duration, aoi};
}

/// Interactions on named elements at the given times, for one trip.
inline std::vector< InteractionEvent > taps(const std::string& trip,
                                            const std::vector< std::pair< std::string, TimestampMs > >& xs)
{
    std::vector< InteractionEvent > out;
    for (const auto& [e, t] : xs)
        out.push_back(tap(trip, t, e));
    return out;
}

inline std::string concept_json(const std::vector< std::string >& ids)
{
    Json arr = Json::array();
    for (const auto& id : ids)
        arr.push_back(ConceptEntry{id, id + " label", "S_MAIN", "element " + id});
    return arr.dump();
}

/// A random trip over a small alphabet: element ids "A".."E" (size 5), sorted
/// timestamps with occasional ties and occasional long gaps.
inline std::vector< InteractionEvent > random_trip(std::mt19937_64& rng, std::size_t max_len = 20,
                                                   std::size_t alphabet = 5)
{
    std::uniform_int_distribution< std::size_t > len(0, max_len);
    std::uniform_int_distribution< std::size_t > letter(0, alphabet - 1);
    std::uniform_int_distribution< int >         step(0, 9);
    std::vector< InteractionEvent >              out;
    TimestampMs                                  t = 0;
    const auto                                   n = len(rng);
    for (std::size_t i = 0; i < n; ++i)
    {
        const int s = step(rng);
        t += s == 0 ? 0 : (s < 8 ? 100 * s : 5000 + 100 * s);
        out.push_back(tap("R", t, std::string(1, static_cast< char >('A' + letter(rng)))));
    }
    return out;
}

struct GlanceCase
{
    std::vector< GlanceEvent > glances;
    TimestampMs                lo = 0;
    TimestampMs                hi = 0;
};

/// Sorted, non-overlapping glances over roughly ten seconds and a window that
/// may cut through any of them. Durations are often whole seconds so that
/// clipped lengths land on the 2000 ms boundary.
inline GlanceCase random_glance_case(std::mt19937_64& rng)
{
    GlanceCase  c;
    TimestampMs t = static_cast< TimestampMs >(rng() % 500);
    for (std::size_t k = 0, n = rng() % 9; k < n; ++k)
    {
        t += rng() % 3 == 0 ? 0 : static_cast< TimestampMs >(rng() % 800);
        const DurationMs d = rng() % 2 ? 1000 * static_cast< DurationMs >(1 + rng() % 3)
                                       : 1 + static_cast< DurationMs >(rng() % 3000);
        c.glances.push_back(glance("R", t, d, all_aois[rng() % all_aois.size()]));
        t += d;
    }
    c.lo = static_cast< TimestampMs >(rng() % 6000);
    c.hi = c.lo + 1 + static_cast< TimestampMs >(rng() % 8000);
    if (!c.glances.empty() && rng() % 4 == 0)
    {
        // Pin the window to a glance edge.
        const auto& g = c.glances[rng() % c.glances.size()];
        c.lo          = g.t_start;
        c.hi          = std::max(c.hi, c.lo + 2000);
    }
    return c;
}

} // namespace flowlens::testing

#endif // FLOWLENS_TESTS_FIXTURES_HPP
