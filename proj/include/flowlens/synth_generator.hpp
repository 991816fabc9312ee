#ifndef FLOWLENS_SYNTH_GENERATOR_HPP
#define FLOWLENS_SYNTH_GENERATOR_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "core_model.hpp"

namespace flowlens
{

class ConfigError : public InvalidArgument
{
public:
    using InvalidArgument::InvalidArgument;
};

struct IntRange
{
    std::int64_t min = 0;
    std::int64_t max = 0;

    bool operator==(const IntRange&) const = default;
};

struct PlantedFlow
{
    ElementPath path;
    std::size_t count = 0;

    bool operator==(const PlantedFlow&) const = default;
};

/// Glances tile each trip: a road glance, then an off-road one, and so on.
struct GlanceModel
{
    IntRange road_duration{800, 3000};
    IntRange offroad_duration{400, 2600};
    double   other_fraction = 0.2; // off-road glances landing on "other" rather than the center stack

    bool operator==(const GlanceModel&) const = default;
};

struct DrivingModel
{
    double       start_speed          = 13.9; // m/s
    double       delta_min            = -0.8; // m/s per second
    double       delta_max            = 0.8;
    double       steering_amplitude   = 12.0; // degrees
    std::int64_t sample_interval_ms   = 1000;

    bool operator==(const DrivingModel&) const = default;
};

struct TripMetaPool
{
    std::vector< std::string > car_models{"Model A", "Model B"};
    std::vector< std::string > software_versions{"2.0", "2.1"};
    std::vector< std::string > screen_sizes{"10.25", "12.3"};
    std::vector< std::string > dates{"2023-03-01", "2023-03-02", "2023-03-03"};
    std::size_t                vehicle_count = 25;

    bool operator==(const TripMetaPool&) const = default;
};

struct GeneratorConfig
{
    std::uint64_t                   seed = 0;
    std::optional< TaskDefinition > task; // derived from the planted paths when absent
    std::vector< PlantedFlow >      planted_flows;
    std::size_t                     noise_trips = 0;
    bool                            near_miss   = false; // noise trips tap the start element but never the end
    std::vector< std::string >      filler_elements{"MEDIA_PLAY", "MEDIA_NEXT", "CLIMATE_UP", "PHONE_CALL",
                                                    "RADIO_TUNE"};
    IntRange                        filler_interactions{0, 3}; // before and after the planted sequence
    IntRange                        inter_interaction_dt{300, 1500};
    GlanceModel                     glance_model;
    DrivingModel                    driving_model;
    TripMetaPool                    trip_meta_pool;
    std::size_t                     trips_per_file = 1000;
    TimestampMs                     base_time      = 1'677'628'800'000; // 2023-03-01T00:00:00Z

    bool operator==(const GeneratorConfig&) const = default;
};

/// Ground truth for one planted task execution.
struct PlantedSequence
{
    std::string                trip_id;
    ElementPath                path;
    std::vector< TimestampMs > timestamps;
};

struct GeneratedCorpus
{
    std::vector< std::pair< std::string, std::string > > files; // file name, contents
    std::vector< ConceptEntry >                            concepts;
    std::vector< PlantedSequence >                         planted;
};

/// The task implied by a config: explicit, else first/last of the first planted path.
inline std::optional< TaskDefinition > generator_task(const GeneratorConfig& c)
{
    if (c.task)
        return c.task;
    if (!c.planted_flows.empty() && c.planted_flows.front().path.size() >= 2)
        return TaskDefinition{c.planted_flows.front().path.front(), c.planted_flows.front().path.back()};
    return std::nullopt;
}

inline void validate(const GeneratorConfig& c)
{
    auto range_ok = [](const IntRange& r, std::int64_t floor) { return r.min >= floor && r.min <= r.max; };
    if (!range_ok(c.inter_interaction_dt, 1))
        throw ConfigError("inter_interaction_dt must satisfy 1 <= min <= max");
    if (!range_ok(c.filler_interactions, 0))
        throw ConfigError("filler_interactions must satisfy 0 <= min <= max");
    if (!range_ok(c.glance_model.road_duration, 1) || !range_ok(c.glance_model.offroad_duration, 1))
        throw ConfigError("glance duration ranges must be positive with min <= max");
    if (!(c.glance_model.other_fraction >= 0.0 && c.glance_model.other_fraction <= 1.0))
        throw ConfigError("glance_model.other_fraction must lie in [0, 1]");
    if (c.driving_model.sample_interval_ms < 1)
        throw ConfigError("driving_model.sample_interval_ms must be positive");
    if (!(c.driving_model.delta_min <= c.driving_model.delta_max) || !(c.driving_model.start_speed >= 0.0))
        throw ConfigError("driving_model needs start_speed >= 0 and delta_min <= delta_max");
    const auto& pool = c.trip_meta_pool;
    if (pool.car_models.empty() || pool.software_versions.empty() || pool.screen_sizes.empty() ||
        pool.dates.empty() || pool.vehicle_count == 0)
        throw ConfigError("trip_meta_pool lists must be nonempty and vehicle_count positive");
    for (const auto& d : pool.dates)
        if (!parse_date(d))
            throw ConfigError("trip_meta_pool date '" + d + "' is not YYYY-MM-DD");
    if (c.trips_per_file == 0)
        throw ConfigError("trips_per_file must be positive");

    const auto task = generator_task(c);
    if (task)
    {
        if (task->start_element.empty() || task->end_element.empty() || task->start_element == task->end_element)
            throw ConfigError("task start and end elements must be nonempty and distinct");
    }
    else if (c.near_miss && c.noise_trips > 0)
        throw ConfigError("near_miss noise needs a task");

    for (const auto& f : c.planted_flows)
    {
        if (f.path.size() < 2)
            throw ConfigError("planted paths need at least two elements");
        if (f.path.front() != task->start_element || f.path.back() != task->end_element)
            throw ConfigError("planted paths must start and end with the task elements");
        for (std::size_t i = 1; i + 1 < f.path.size(); ++i)
            if (f.path[i] == task->start_element || f.path[i] == task->end_element || f.path[i].empty())
                throw ConfigError("planted path interiors must avoid the task start and end elements");
    }
    if (c.filler_elements.empty() && (c.noise_trips > 0 || c.filler_interactions.max > 0))
        throw ConfigError("filler_elements must be nonempty");
    for (const auto& e : c.filler_elements)
        if (e.empty() || (task && (e == task->start_element || e == task->end_element)))
            throw ConfigError("filler elements must be nonempty and differ from the task elements");
}

namespace detail
{
/// mt19937_64 output is fixed by the standard; the reductions below are ours so
/// output stays identical across standard library implementations.
class GeneratorRng
{
public:
    explicit GeneratorRng(std::uint64_t seed) : engine_(seed) {}

    std::int64_t between(IntRange r)
    {
        const auto span = static_cast< std::uint64_t >(r.max - r.min) + 1;
        return r.min + static_cast< std::int64_t >(engine_() % span);
    }
    std::size_t index(std::size_t n) { return static_cast< std::size_t >(engine_() % n); }
    double      unit() { return static_cast< double >(engine_() >> 11) * 0x1.0p-53; }
    double      between(double lo, double hi) { return lo + (hi - lo) * unit(); }

private:
    std::mt19937_64 engine_;
};

inline double round_to(double v, double step) { return std::round(v / step) * step; }

inline std::string element_label(const std::string& id)
{
    std::string out;
    bool        word_start = true;
    for (char ch : id)
    {
        if (ch == '_')
        {
            out.push_back(' ');
            word_start = true;
            continue;
        }
        out.push_back(word_start ? ch : static_cast< char >(std::tolower(static_cast< unsigned char >(ch))));
        word_start = false;
    }
    return out;
}
} // namespace detail

/// Builds the log files in memory. Emits one trip per planted sequence (the
/// sequence surrounded by filler interactions that never touch the task
/// elements) plus noise trips without any start-element interaction, or with
/// a start but no end in near-miss mode. Trips are shuffled deterministically.
inline GeneratedCorpus generate_corpus(const GeneratorConfig& config)
{
    validate(config);
    const auto          task = generator_task(config);
    detail::GeneratorRng rng(config.seed);

    // -1 marks a noise trip; otherwise the planted flow index.
    std::vector< std::ptrdiff_t > kinds;
    for (std::size_t f = 0; f < config.planted_flows.size(); ++f)
        kinds.insert(kinds.end(), config.planted_flows[f].count, static_cast< std::ptrdiff_t >(f));
    kinds.insert(kinds.end(), config.noise_trips, -1);
    for (std::size_t i = kinds.size(); i > 1; --i)
        std::swap(kinds[i - 1], kinds[rng.index(i)]);

    GeneratedCorpus out;
    const auto&     pool = config.trip_meta_pool;
    const std::size_t id_width = std::max< std::size_t >(6, std::to_string(kinds.size()).size());
    std::string     buffer;

    for (std::size_t trip_index = 0; trip_index < kinds.size(); ++trip_index)
    {
        const std::string digits  = std::to_string(trip_index + 1);
        const std::string trip_id = "T" + std::string(id_width - digits.size(), '0') + digits;

        TripMeta meta{trip_id,
                      "V" + std::to_string(trip_index % pool.vehicle_count + 1),
                      pool.car_models[trip_index % pool.car_models.size()],
                      pool.software_versions[trip_index % pool.software_versions.size()],
                      pool.screen_sizes[trip_index % pool.screen_sizes.size()],
                      *parse_date(pool.dates[trip_index % pool.dates.size()])};
        buffer += Json(meta).dump();
        buffer += '\n';

        const TimestampMs t0 = config.base_time + static_cast< TimestampMs >(trip_index) * 3'600'000;
        TimestampMs       t  = t0;
        std::vector< InteractionEvent > interactions;
        auto tap = [&](const std::string& element, const char* screen) {
            t += rng.between(config.inter_interaction_dt);
            interactions.push_back({trip_id, t, element, all_gestures[rng.index(all_gestures.size())], screen});
        };
        auto filler = [&](std::int64_t n) {
            for (std::int64_t k = 0; k < n; ++k)
                tap(config.filler_elements[rng.index(config.filler_elements.size())], "S_MISC");
        };

        const auto kind = kinds[trip_index];
        if (kind >= 0)
        {
            filler(rng.between(config.filler_interactions));
            PlantedSequence planted{trip_id, config.planted_flows[static_cast< std::size_t >(kind)].path, {}};
            for (const auto& element : planted.path)
            {
                tap(element, "S_TASK");
                planted.timestamps.push_back(t);
            }
            filler(rng.between(config.filler_interactions));
            out.planted.push_back(std::move(planted));
        }
        else
        {
            filler(std::max< std::int64_t >(1, rng.between(config.filler_interactions)));
            if (config.near_miss)
            {
                tap(task->start_element, "S_TASK");
                filler(rng.between(config.filler_interactions));
            }
        }
        const TimestampMs t_end = t + rng.between(config.inter_interaction_dt);

        for (const auto& e : interactions)
        {
            buffer += Json(e).dump();
            buffer += '\n';
        }

        bool offroad = false;
        for (TimestampMs g = t0; g < t_end; offroad = !offroad)
        {
            const auto& gm  = config.glance_model;
            auto        len = rng.between(offroad ? gm.offroad_duration : gm.road_duration);
            len             = std::min(len, t_end - g);
            Aoi aoi         = Aoi::road;
            if (offroad)
                aoi = rng.unit() < gm.other_fraction ? Aoi::other : Aoi::center_stack;
            buffer += Json(GlanceEvent{trip_id, g, len, aoi}).dump();
            buffer += '\n';
            g += len;
        }

        const auto& dm    = config.driving_model;
        double      speed = dm.start_speed;
        for (TimestampMs s = t0; s <= t_end; s += dm.sample_interval_ms)
        {
            const double steering = detail::round_to(rng.between(-dm.steering_amplitude, dm.steering_amplitude), 0.1);
            buffer += Json(DrivingSample{trip_id, s, detail::round_to(speed, 0.01), steering}).dump();
            buffer += '\n';
            speed = std::max(0.0, speed + rng.between(dm.delta_min, dm.delta_max) *
                                              static_cast< double >(dm.sample_interval_ms) / 1000.0);
        }

        if ((trip_index + 1) % config.trips_per_file == 0 || trip_index + 1 == kinds.size())
        {
            char name[32];
            std::snprintf(name, sizeof name, "events_%04zu.jsonl", trip_index / config.trips_per_file);
            out.files.emplace_back(name, std::move(buffer));
            buffer.clear();
        }
    }

    std::set< std::string > elements(config.filler_elements.begin(), config.filler_elements.end());
    if (task)
        elements.insert({task->start_element, task->end_element});
    for (const auto& f : config.planted_flows)
        elements.insert(f.path.begin(), f.path.end());
    for (const auto& id : elements)
        out.concepts.push_back({id, detail::element_label(id), "S_GEN", "Synthetic UI element " + id});
    return out;
}

/// Writes the log files plus concepts.json into out_dir (created if needed).
inline void write_corpus(const GeneratedCorpus& corpus, const std::filesystem::path& out_dir)
{
    std::filesystem::create_directories(out_dir);
    auto write = [](const std::filesystem::path& p, const std::string& data) {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        f << data;
        if (!f)
            throw Error("cannot write " + p.string());
    };
    for (const auto& [name, data] : corpus.files)
        write(out_dir / name, data);
    write(out_dir / "concepts.json", Json(corpus.concepts).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Config JSON mirrors the struct field names; every field is optional.

inline void to_json(Json& j, const IntRange& r) { j = Json::array({r.min, r.max}); }
inline void from_json(const Json& j, IntRange& r)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw ConfigError("ranges must be [min, max] integer pairs, got " + j.dump());
    r = {j[0].get< std::int64_t >(), j[1].get< std::int64_t >()};
}

inline void to_json(Json& j, const GeneratorConfig& c)
{
    Json flows = Json::array();
    for (const auto& f : c.planted_flows)
        flows.push_back({{"path", f.path}, {"count", f.count}});
    j = Json{{"seed", c.seed},
             {"task", c.task ? Json(*c.task) : Json(nullptr)},
             {"planted_flows", std::move(flows)},
             {"noise_trips", c.noise_trips},
             {"near_miss", c.near_miss},
             {"filler_elements", c.filler_elements},
             {"filler_interactions", c.filler_interactions},
             {"inter_interaction_dt", c.inter_interaction_dt},
             {"glance_model",
              {{"road_duration", c.glance_model.road_duration},
               {"offroad_duration", c.glance_model.offroad_duration},
               {"other_fraction", c.glance_model.other_fraction}}},
             {"driving_model",
              {{"start_speed", c.driving_model.start_speed},
               {"delta_min", c.driving_model.delta_min},
               {"delta_max", c.driving_model.delta_max},
               {"steering_amplitude", c.driving_model.steering_amplitude},
               {"sample_interval_ms", c.driving_model.sample_interval_ms}}},
             {"trip_meta_pool",
              {{"car_models", c.trip_meta_pool.car_models},
               {"software_versions", c.trip_meta_pool.software_versions},
               {"screen_sizes", c.trip_meta_pool.screen_sizes},
               {"dates", c.trip_meta_pool.dates},
               {"vehicle_count", c.trip_meta_pool.vehicle_count}}},
             {"trips_per_file", c.trips_per_file},
             {"base_time", c.base_time}};
}

inline void from_json(const Json& j, GeneratorConfig& c)
{
    if (!j.is_object())
        throw ConfigError("generator config must be a JSON object");
    c = GeneratorConfig{};
    try
    {
        auto opt = [&](const Json& obj, const char* key, auto& field) {
            if (auto it = obj.find(key); it != obj.end() && !it->is_null())
                field = it->get< std::decay_t< decltype(field) > >();
        };
        opt(j, "seed", c.seed);
        if (auto it = j.find("task"); it != j.end() && !it->is_null())
            c.task = it->get< TaskDefinition >();
        if (auto it = j.find("planted_flows"); it != j.end() && !it->is_null())
            for (const auto& f : *it)
                c.planted_flows.push_back(
                    {f.at("path").get< ElementPath >(), f.at("count").get< std::size_t >()});
        opt(j, "noise_trips", c.noise_trips);
        opt(j, "near_miss", c.near_miss);
        opt(j, "filler_elements", c.filler_elements);
        opt(j, "filler_interactions", c.filler_interactions);
        opt(j, "inter_interaction_dt", c.inter_interaction_dt);
        if (auto it = j.find("glance_model"); it != j.end() && it->is_object())
        {
            opt(*it, "road_duration", c.glance_model.road_duration);
            opt(*it, "offroad_duration", c.glance_model.offroad_duration);
            opt(*it, "other_fraction", c.glance_model.other_fraction);
        }
        if (auto it = j.find("driving_model"); it != j.end() && it->is_object())
        {
            opt(*it, "start_speed", c.driving_model.start_speed);
            opt(*it, "delta_min", c.driving_model.delta_min);
            opt(*it, "delta_max", c.driving_model.delta_max);
            opt(*it, "steering_amplitude", c.driving_model.steering_amplitude);
            opt(*it, "sample_interval_ms", c.driving_model.sample_interval_ms);
        }
        if (auto it = j.find("trip_meta_pool"); it != j.end() && it->is_object())
        {
            opt(*it, "car_models", c.trip_meta_pool.car_models);
            opt(*it, "software_versions", c.trip_meta_pool.software_versions);
            opt(*it, "screen_sizes", c.trip_meta_pool.screen_sizes);
            opt(*it, "dates", c.trip_meta_pool.dates);
            opt(*it, "vehicle_count", c.trip_meta_pool.vehicle_count);
        }
        opt(j, "trips_per_file", c.trips_per_file);
        opt(j, "base_time", c.base_time);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError(std::string("generator config: ") + e.what());
    }
    catch (const SchemaError& e)
    {
        throw ConfigError(std::string("generator config: ") + e.what());
    }
}

inline GeneratorConfig load_generator_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read generator config " + path.string());
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw ConfigError("generator config " + path.string() + " is not valid JSON");
    return j.get< GeneratorConfig >();
}

} // namespace flowlens

#endif // FLOWLENS_SYNTH_GENERATOR_HPP
