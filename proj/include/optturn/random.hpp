/*
 * Copyright 2026 The optturn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <limits>

namespace optturn {

/// Counter-based bit generator: output n of stream (seed, id) is the
/// SplitMix64 finalizer applied to key + n·φ64. Streams need no shared state,
/// so any path can be generated on any thread with identical results.
class CounterStream {
public:
    using result_type = std::uint64_t;

    CounterStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_(mix(mix(seed) ^ (stream_id * kWeyl + 0x632be59bd9b4e019ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + (++counter_) * kWeyl); }

    std::uint64_t counter() const { return counter_; }

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    static constexpr std::uint64_t kWeyl = 0x9e3779b97f4a7c15ULL;

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace optturn
