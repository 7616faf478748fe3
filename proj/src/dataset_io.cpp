#include "rvelle/dataset_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <zlib.h>

#include "rvelle/errors.hpp"

namespace rvelle::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T>
void put(std::string& out, T v) {
  v = to_little(v);
  const auto* p = reinterpret_cast<const char*>(&v);
  out.append(p, sizeof(T));
}

template <typename T>
T get(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return to_little(v);
}

std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot open " + file.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string encode_matrix(const RowMatrix& m) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put(out, m(i, j));
  return out;
}

json write_array(const fs::path& dir, const std::string& name, const RowMatrix& m) {
  const std::string file = name + ".f64";
  const std::string bytes = encode_matrix(m);
  write_atomic(dir / file, bytes);
  return {{"name", name},
          {"rows", m.rows()},
          {"cols", m.cols()},
          {"dtype", "f64"},
          {"byte_order", "little"},
          {"layout", "row-major"},
          {"file", file},
          {"bytes", bytes.size()},
          {"crc32", hex32(crc32(bytes.data(), bytes.size()))}};
}

const json& find_array(const json& manifest, const std::string& name) {
  for (const auto& a : manifest.at("arrays"))
    if (a.at("name").get<std::string>() == name) return a;
  throw FormatError("manifest lists no array named '" + name + "'");
}

std::string checked_bytes(const fs::path& dir, const json& desc, std::size_t expected) {
  const auto file = desc.at("file").get<std::string>();
  const fs::path path = dir / file;
  if (!fs::exists(path)) throw FormatError("missing file " + path.string());
  std::string bytes = read_file(path);
  if (bytes.size() != expected) {
    std::ostringstream msg;
    msg << "truncated or oversized file " << path.string() << ": " << bytes.size() << " bytes, manifest implies "
        << expected;
    throw TruncationError(msg.str());
  }
  const auto want = desc.at("crc32").get<std::string>();
  const auto have = hex32(crc32(bytes.data(), bytes.size()));
  if (want != have) throw ChecksumError("checksum mismatch in " + path.string() + ": manifest " + want + ", file " + have);
  return bytes;
}

RowMatrix read_array(const fs::path& dir, const json& manifest, const std::string& name) {
  const json& desc = find_array(manifest, name);
  if (desc.at("dtype").get<std::string>() != "f64" || desc.at("byte_order").get<std::string>() != "little" ||
      desc.at("layout").get<std::string>() != "row-major")
    throw FormatError("array '" + name + "' is not little-endian row-major f64");
  const auto rows = desc.at("rows").get<Eigen::Index>();
  const auto cols = desc.at("cols").get<Eigen::Index>();
  if (rows < 0 || cols < 0) throw FormatError("array '" + name + "' has a negative dimension");
  const std::string bytes = checked_bytes(dir, desc, static_cast<std::size_t>(rows * cols) * 8);
  RowMatrix m(rows, cols);
  const char* p = bytes.data();
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j, p += 8) m(i, j) = get<double>(p);
  return m;
}

json read_manifest(const fs::path& dir, const std::string& kind) {
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) throw FormatError("missing " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError("unparseable manifest " + path.string() + ": " + e.what());
  }
  const auto version = j.at("format_version").get<int>();
  if (version != kFormatVersion) {
    std::ostringstream msg;
    msg << "unsupported format_version " << version << " in " << path.string() << " (expected " << kFormatVersion << ")";
    throw VersionError(msg.str());
  }
  if (j.at("kind").get<std::string>() != kind) throw FormatError(path.string() + " does not describe a " + kind);
  return j;
}

json seed_json(const CrackSeed& s) { return json::array({s.nodes[0], s.nodes[1], s.nodes[2]}); }

CrackSeed seed_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("crack seed must be a list of three node ids");
  return CrackSeed{{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()}};
}

template <typename Fn>
auto translate_json_errors(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

}  // namespace

json save_matrix(const fs::path& dir, const std::string& name, const RowMatrix& m) {
  fs::create_directories(dir);
  return write_array(dir, name, m);
}

RowMatrix load_matrix(const fs::path& dir, const json& manifest, const std::string& name) {
  return translate_json_errors([&] { return read_array(dir, manifest, name); });
}

std::uint32_t crc32(const void* data, std::size_t size) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  const auto* p = static_cast<const Bytef*>(data);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    c = ::crc32(c, p, chunk);
    p += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

std::uint32_t file_crc32(const fs::path& file) {
  const std::string bytes = read_file(file);
  return crc32(bytes.data(), bytes.size());
}

void write_atomic(const fs::path& file, std::string_view bytes) {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  fs::rename(tmp, file);
}

json to_json(const GenerationConfig& cfg) {
  const auto& m = cfg.material;
  const auto& E = cfg.load.macro_strain;
  return {{"mesh", {{"half_width", cfg.mesh.half_width}, {"n", cfg.mesh.n}, {"fiber_radius", cfg.mesh.fiber_radius}}},
          {"material",
           {{"lambda_m", m.lambda_m},
            {"mu_m", m.mu_m},
            {"lambda_f", m.lambda_f},
            {"mu_f", m.mu_f},
            {"g_c", m.g_c},
            {"l", m.l},
            {"k_res", m.k_res}}},
          {"load", {{"eps11", E(0, 0)}, {"eps22", E(1, 1)}, {"eps12", E(0, 1)}}},
          {"solver", {{"tol", cfg.controls.tol}, {"max_iter", cfg.controls.max_iter}}}};
}

GenerationConfig generation_config_from_json(const json& j) {
  GenerationConfig cfg;
  const auto& mesh = j.at("mesh");
  cfg.mesh = {mesh.at("half_width").get<double>(), mesh.at("n").get<int>(), mesh.at("fiber_radius").get<double>()};
  const auto& m = j.at("material");
  cfg.material.lambda_m = m.at("lambda_m").get<double>();
  cfg.material.mu_m = m.at("mu_m").get<double>();
  cfg.material.lambda_f = m.at("lambda_f").get<double>();
  cfg.material.mu_f = m.at("mu_f").get<double>();
  cfg.material.g_c = m.at("g_c").get<double>();
  cfg.material.l = m.at("l").get<double>();
  cfg.material.k_res = m.at("k_res").get<double>();
  const auto& load = j.at("load");
  cfg.load.macro_strain(0, 0) = load.at("eps11").get<double>();
  cfg.load.macro_strain(1, 1) = load.at("eps22").get<double>();
  cfg.load.macro_strain(0, 1) = cfg.load.macro_strain(1, 0) = load.at("eps12").get<double>();
  const auto& s = j.at("solver");
  cfg.controls.tol = s.at("tol").get<double>();
  cfg.controls.max_iter = s.at("max_iter").get<int>();
  return cfg;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest = to_json(ds.config);
  manifest["format_version"] = kFormatVersion;
  manifest["kind"] = "dataset";
  manifest["rng_seed"] = ds.rng_seed;
  manifest["arrays"] = json::array({write_array(dir, "X", ds.X), write_array(dir, "Zpf", ds.Zpf),
                                    write_array(dir, "Zsig", ds.Zsig)});
  json seeds = json::array();
  for (const auto& s : ds.seeds) seeds.push_back(seed_json(s));
  manifest["seeds"] = seeds;
  json excluded = json::array();
  for (const auto& e : ds.excluded) excluded.push_back({{"seed", seed_json(e.seed)}, {"reason", e.reason}});
  manifest["excluded"] = excluded;
  write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  return translate_json_errors([&] {
    const json manifest = read_manifest(dir, "dataset");
    Dataset ds;
    ds.config = generation_config_from_json(manifest);
    ds.rng_seed = manifest.at("rng_seed").get<std::uint64_t>();
    ds.X = read_array(dir, manifest, "X");
    ds.Zpf = read_array(dir, manifest, "Zpf");
    ds.Zsig = read_array(dir, manifest, "Zsig");
    if (ds.Zpf.rows() != ds.X.rows() || ds.Zsig.rows() != ds.X.rows())
      throw InvariantError("dataset arrays are not row-aligned in " + dir.string());
    if (ds.Zsig.cols() != 4) throw InvariantError("Zsig must have 4 columns in " + dir.string());
    for (const auto& s : manifest.at("seeds")) ds.seeds.push_back(seed_from_json(s));
    for (const auto& e : manifest.at("excluded"))
      ds.excluded.push_back({seed_from_json(e.at("seed")), e.at("reason").get<std::string>()});
    return ds;
  });
}

void save_manifold(const Manifold& man, const fs::path& dir, const json& provenance) {
  fs::create_directories(dir);
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["kind"] = "manifold";
  manifest["hyperparameters"] = {{"k1", man.k1}, {"dim", man.dim}, {"reg", man.reg}};
  manifest["eigenvalues"] = std::vector<double>(man.eigenvalues.data(), man.eigenvalues.data() + man.eigenvalues.size());
  manifest["arrays"] = json::array({write_array(dir, "X", man.X), write_array(dir, "Y", man.Y)});

  // RowSparse iterates rows in order with ascending column indices.
  std::string bytes;
  RowSparse W = man.W;
  W.makeCompressed();
  for (int r = 0; r < W.outerSize(); ++r)
    for (RowSparse::InnerIterator it(W, r); it; ++it) {
      put<std::int64_t>(bytes, it.row());
      put<std::int64_t>(bytes, it.col());
      put<double>(bytes, it.value());
    }
  write_atomic(dir / "W.triplets", bytes);
  manifest["triplets"] = {{"name", "W"},
                          {"file", "W.triplets"},
                          {"rows", W.rows()},
                          {"cols", W.cols()},
                          {"count", W.nonZeros()},
                          {"record", "int64 row, int64 col, f64 value"},
                          {"byte_order", "little"},
                          {"crc32", hex32(crc32(bytes.data(), bytes.size()))}};
  manifest["provenance"] = provenance;
  write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Manifold load_manifold(const fs::path& dir) {
  return translate_json_errors([&] {
    const json manifest = read_manifest(dir, "manifold");
    Manifold man;
    const auto& hp = manifest.at("hyperparameters");
    man.k1 = hp.at("k1").get<int>();
    man.dim = hp.at("dim").get<int>();
    man.reg = hp.at("reg").get<double>();
    const auto ev = manifest.at("eigenvalues").get<std::vector<double>>();
    man.eigenvalues = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
    man.X = read_array(dir, manifest, "X");
    man.Y = read_array(dir, manifest, "Y");
    const auto n = man.X.rows();
    if (man.Y.rows() != n || man.Y.cols() != man.dim)
      throw InvariantError("embedding shape does not match N x dim in " + dir.string());

    const json& desc = manifest.at("triplets");
    const auto count = desc.at("count").get<std::size_t>();
    if (desc.at("rows").get<Eigen::Index>() != n || desc.at("cols").get<Eigen::Index>() != n)
      throw InvariantError("weight matrix is not N x N in " + dir.string());
    const std::string bytes = checked_bytes(dir, desc, count * 24);
    std::vector<Eigen::Triplet<double, int>> trip;
    trip.reserve(count);
    std::vector<int> per_row(static_cast<std::size_t>(n), 0);
    std::int64_t prev_r = -1, prev_c = -1;
    for (std::size_t t = 0; t < count; ++t) {
      const char* p = bytes.data() + 24 * t;
      const auto r = get<std::int64_t>(p);
      const auto c = get<std::int64_t>(p + 8);
      const auto v = get<double>(p + 16);
      if (r < 0 || c < 0 || r >= n || c >= n) throw FormatError("W.triplets: index out of range");
      if (r < prev_r || (r == prev_r && c <= prev_c))
        throw FormatError("W.triplets: records not sorted by (row, col) at record " + std::to_string(t));
      prev_r = r;
      prev_c = c;
      ++per_row[static_cast<std::size_t>(r)];
      trip.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
    }
    for (Eigen::Index r = 0; r < n; ++r)
      if (per_row[static_cast<std::size_t>(r)] != man.k1) {
        std::ostringstream msg;
        msg << "W row " << r << " has " << per_row[static_cast<std::size_t>(r)] << " nonzeros but k1 = " << man.k1;
        throw InvariantError(msg.str());
      }
    man.W.resize(n, n);
    man.W.setFromTriplets(trip.begin(), trip.end());
    man.W.makeCompressed();
    return man;
  });
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) { append(header); }

CsvWriter& CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) throw ConfigError("csv: row width does not match header");
  append(fields);
  return *this;
}

void CsvWriter::append(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ += ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      out_ += f;
      continue;
    }
    out_ += '"';
    for (char c : f) {
      if (c == '"') out_ += '"';
      out_ += c;
    }
    out_ += '"';
  }
  out_ += "\r\n";
}

std::string CsvWriter::num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace rvelle::io
