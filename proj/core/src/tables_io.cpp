#include "condkin/tables_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace condkin {

namespace {

constexpr char kMagic[4] = {'C', 'K', 'T', 'B'};
constexpr std::uint32_t kVersion = 1;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 1099511628211ull;
  }
}

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return static_cast<bool>(in);
}

}  // namespace

std::uint64_t tables_cache_key(const ModelParams& p, int subdiv) {
  std::uint64_t h = 14695981039346656037ull;
  const double phys[] = {p.g,          p.n0,   p.gamma, p.c_zeta,
                         p.Lambda_cut, p.p_max, p.energy_shift()};
  fnv_bytes(h, phys, sizeof(phys));
  const std::int32_t dims[] = {p.n_axial, p.n_radial,
                               static_cast<std::int32_t>(subdiv)};
  fnv_bytes(h, dims, sizeof(dims));
  return h;
}

void save_tables(const std::string& path, const CollisionTables& t,
                 std::uint64_t key) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("tables cache: cannot open " + path);
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, key);
  put(out, static_cast<std::int64_t>(t.nu.size()));
  put(out, static_cast<std::int64_t>(t.pairs.size()));
  put(out, t.omega);
  out.write(reinterpret_cast<const char*>(t.nu.data()),
            static_cast<std::streamsize>(sizeof(double) * t.nu.size()));
  for (const PairEntry& e : t.pairs) {
    put(out, e.n2);
    put(out, e.n3);
    for (int d = 0; d < 4; ++d) put(out, e.s[d]);
    for (int d = 0; d < 4; ++d) put(out, e.c[d]);
    put(out, e.P1);
    put(out, e.one_plus_P1);
    put(out, e.F1);
    put(out, e.F2);
    put(out, e.F3);
  }
  if (!out) throw std::runtime_error("tables cache: short write to " + path);
}

std::optional<CollisionTables> load_tables(const std::string& path,
                                           std::uint64_t expected_key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) return std::nullopt;
  std::uint32_t version;
  std::uint64_t key;
  std::int64_t n_nodes, n_pairs;
  if (!get(in, version) || version != kVersion) return std::nullopt;
  if (!get(in, key) || key != expected_key) return std::nullopt;
  if (!get(in, n_nodes) || !get(in, n_pairs)) return std::nullopt;
  if (n_nodes < 0 || n_pairs < 0) return std::nullopt;
  CollisionTables t;
  if (!get(in, t.omega)) return std::nullopt;
  t.nu.resize(n_nodes);
  in.read(reinterpret_cast<char*>(t.nu.data()),
          static_cast<std::streamsize>(sizeof(double) * n_nodes));
  if (!in) return std::nullopt;
  t.pairs.resize(static_cast<std::size_t>(n_pairs));
  for (PairEntry& e : t.pairs) {
    bool ok = get(in, e.n2) && get(in, e.n3);
    for (int d = 0; ok && d < 4; ++d) ok = get(in, e.s[d]);
    for (int d = 0; ok && d < 4; ++d) ok = get(in, e.c[d]);
    ok = ok && get(in, e.P1) && get(in, e.one_plus_P1) && get(in, e.F1) &&
         get(in, e.F2) && get(in, e.F3);
    if (!ok) return std::nullopt;
  }
  return t;
}

}  // namespace condkin
