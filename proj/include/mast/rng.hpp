#pragma once

#include <cstdint>
#include <random>

namespace mast::rng {

using Engine = std::mt19937_64;

// Independent sub-streams derived from one master seed.
enum class Stream : std::uint64_t {
    path = 0x70617468,
    delay = 0x64656c61,
    false_alarm = 0x70666161,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Engine for one Monte Carlo trial. Depends only on (master, stream, trial),
// so results do not depend on which thread runs the trial.
inline Engine trial_engine(std::uint64_t master_seed, Stream stream, std::uint64_t trial)
{
    const std::uint64_t a = splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(stream)));
    return Engine(splitmix64(a ^ splitmix64(trial + 0x632be59bd9b4e019ULL)));
}

}  // namespace mast::rng
