#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "topoband/common.hpp"

namespace topoband {

// Shortest round-trippable decimal form; keeps CSV output byte-reproducible.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Write header + rows + a provenance trailer, atomically (temp file, then
// rename) so readers never observe a half-written table.
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows,
                      std::uint64_t structure_hash) {
  std::string tmp = path + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (f == nullptr) throw ValidationError("write_csv: cannot open " + tmp);
  auto emit_row = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) std::fputc(',', f);
      std::fwrite(cells[i].data(), 1, cells[i].size(), f);
    }
    std::fputc('\n', f);
  };
  emit_row(header);
  for (const auto& r : rows) emit_row(r);
  std::fprintf(f, "# toolversion=%s structure-hash=0x%016llx\n", kToolVersion,
               static_cast<unsigned long long>(structure_hash));
  if (std::fclose(f) != 0) throw ValidationError("write_csv: close failed for " + tmp);
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ValidationError("write_csv: rename failed for " + path);
}

}  // namespace topoband
