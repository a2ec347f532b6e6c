#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace aegn {

// One DVS event: pixel coordinates, timestamp in microseconds, polarity.
// Polarity is stored as -1 or +1; a CSV value of 0 is folded to -1 on read.
struct Event {
    uint16_t x = 0;
    uint16_t y = 0;
    uint64_t t = 0;
    int8_t p = 1;

    bool operator==(const Event&) const = default;
};

// A time-sorted event stream together with the sensor resolution the
// coordinates were validated against.
struct EventList {
    uint16_t width = 0;
    uint16_t height = 0;
    std::vector<Event> events;

    bool operator==(const EventList&) const = default;
    size_t size() const { return events.size(); }
};

enum class EventFormat { Csv, Binary };

// --- file I/O ------------------------------------------------------------

// CSV rows are "x,y,t,p". An optional header line is skipped when its first
// field does not parse as a number. CSV carries no resolution, so the caller
// supplies it; rows are validated against it and the result is sorted by
// timestamp (stable, so equal-time rows keep file order).
EventList parse_csv(std::istream& in, uint16_t width, uint16_t height);

// Binary layout: 16-byte header (magic "AEGN", u16 version = 1, u16 width,
// u16 height, u32 record count, 2 zero pad bytes), then packed 13-byte
// little-endian records (u16 x, u16 y, u64 t, i8 p).
EventList parse_bin(std::istream& in);

void write_csv(const EventList& list, std::ostream& out);
void write_bin(const EventList& list, std::ostream& out);

// Convenience wrappers working on paths. Format is inferred from the
// extension (".bin" is binary, everything else CSV) unless forced.
EventList load_events(const std::string& path, uint16_t width, uint16_t height);
void save_events(const EventList& list, const std::string& path);

// --- stream transforms ---------------------------------------------------

// Stable sort by timestamp.
void sort_by_time(EventList& list);

// Keeps events whose index is a multiple of k.
EventList subsample_uniform(const EventList& list, uint32_t k);

// Random thinning: each event survives independently with probability 1/k.
EventList subsample_random(const EventList& list, uint32_t k, uint64_t seed);

// Events with t in (t_end - delta_t, t_end].
EventList window(const EventList& list, uint64_t delta_t, uint64_t t_end);

// --- synthetic streams ---------------------------------------------------

enum class SynthPattern { MovingEdge, RandomNoise, Mixed };

struct SynthParams {
    uint16_t width = 64;
    uint16_t height = 64;
    uint64_t duration_us = 100000;
    // Expected events per microsecond. The moving edge emits exactly
    // round(rate * duration) events; noise draws a Poisson process.
    double rate = 0.01;
    // Extra noise rate, used by the mixed pattern only.
    double noise_rate = 0.0;
    uint64_t seed = 0;
};

// Deterministic for a fixed seed. The moving edge is a vertical line
// sweeping the sensor once at constant velocity; each brightening event on
// the leading column is paired with a darkening event on the trailing one,
// so polarity follows the sign of the induced contrast change.
EventList generate_synthetic(SynthPattern pattern, const SynthParams& params);

} // namespace aegn
