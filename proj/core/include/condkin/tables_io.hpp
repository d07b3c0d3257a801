#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "condkin/collision.hpp"
#include "condkin/params.hpp"

namespace condkin {

// Content key over the fields that determine the tables (physics constants,
// momentum-grid resolution, gather-quadrature refinement). FNV-1a over their
// little-endian bytes.
std::uint64_t tables_cache_key(const ModelParams& params, int subdiv);

// Binary cache, format documented in docs/formats.md ("CKTB").
void save_tables(const std::string& path, const CollisionTables& tables,
                 std::uint64_t key);

// Empty result on: missing file, bad magic/version, key mismatch, short read.
std::optional<CollisionTables> load_tables(const std::string& path,
                                           std::uint64_t expected_key);

}  // namespace condkin
