#pragma once

// The acceptance self-test: fourteen numbered criteria covering every engine
// (exact-identity checks, cross-law oracles, and trend properties), run as
// independent substream-seeded tasks and merged deterministically.

#include <cstdint>

#include "covertime/report.hpp"

namespace covertime::harness {

// Runs all criteria with per-criterion RNG substreams.  Emits, per criterion,
// a summary row (value 1 pass / 0 fail) followed by its detail rows; row
// order and content depend only on the seed, never on workers or scheduling.
Report run_selftest(std::uint64_t seed, int workers, bool& all_pass);

}  // namespace covertime::harness
