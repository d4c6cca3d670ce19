// Tensor container: one JSON header line (format, version, layout tag, dims
// and any caller metadata such as axis labels) followed by the entries as
// little-endian 64-bit floats in the flat first-index-fastest layout.
// Long CSV export writes one (i,j,w,t,value) row per entry, indices 1-based.
#pragma once

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>

#include "mltr/tensor.hpp"

namespace mltr {

constexpr int kTensorFormatVersion = 1;

// Doubles are rendered with %.17g so container/CSV round trips are lossless
// and byte-stable across runs.
inline std::string format_double(double v, const char* fmt = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

struct LoadedTensor {
  Tensor4 data;
  nlohmann::json meta;
};

inline void save_tensor(const std::string& path, const Tensor4& x,
                        nlohmann::json meta = nlohmann::json::object()) {
  meta["format"] = "mltr.tensor4";
  meta["version"] = kTensorFormatVersion;
  meta["layout"] = "mode1-fastest";
  meta["endianness"] = "little";
  meta["dims"] = {x.dim(1), x.dim(2), x.dim(3), x.dim(4)};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_tensor: cannot open " + path);
  out << meta.dump() << '\n';
  out.write(reinterpret_cast<const char*>(x.data()),
            static_cast<std::streamsize>(x.size() * sizeof(double)));
  if (!out) throw std::runtime_error("save_tensor: write failed for " + path);
}

inline LoadedTensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_tensor: cannot open " + path);
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error("load_tensor: missing header in " + path);
  nlohmann::json meta = nlohmann::json::parse(header, nullptr, false);
  if (meta.is_discarded() || meta.value("format", "") != "mltr.tensor4")
    throw std::runtime_error("load_tensor: " + path + " is not a tensor container");
  if (meta.value("version", 0) != kTensorFormatVersion)
    throw std::runtime_error("load_tensor: unsupported container version in " + path);
  if (meta.value("layout", "") != "mode1-fastest")
    throw std::runtime_error("load_tensor: unknown layout tag in " + path);
  const auto dims = meta.at("dims");
  if (!dims.is_array() || dims.size() != 4)
    throw std::runtime_error("load_tensor: malformed dims in " + path);
  const Index d1 = dims[0], d2 = dims[1], d3 = dims[2], d4 = dims[3];
  std::vector<double> values(static_cast<std::size_t>(d1 * d2 * d3 * d4));
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(values.size() * sizeof(double)))
    throw std::runtime_error("load_tensor: truncated payload in " + path);
  return {Tensor4({d1, d2, d3, d4}, std::move(values)), std::move(meta)};
}

inline void write_long_csv(std::ostream& out, const Tensor4& x) {
  out << "i,j,w,t,value\n";
  for (Index t = 0; t < x.dim(4); ++t)
    for (Index w = 0; w < x.dim(3); ++w)
      for (Index j = 0; j < x.dim(2); ++j)
        for (Index i = 0; i < x.dim(1); ++i)
          out << (i + 1) << ',' << (j + 1) << ',' << (w + 1) << ',' << (t + 1)
              << ',' << format_double(x(i, j, w, t)) << '\n';
}

inline void write_long_csv(const std::string& path, const Tensor4& x) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_long_csv: cannot open " + path);
  write_long_csv(out, x);
}

}  // namespace mltr
