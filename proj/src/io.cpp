#include "roomest/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "roomest/error.hpp"

namespace roomest {

namespace {

template <std::size_t N>
std::array<double, N> read_array(const json& j, const char* key) {
  if (!j.contains(key)) throw InvalidArgument(std::string("missing key \"") + key + "\"");
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != N)
    throw InvalidArgument(std::string("key \"") + key + "\" must be an array of " + std::to_string(N));
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = v[i].get<double>();
  return out;
}

json entries_to_json(const std::vector<PathEntry>& entries) {
  json arr = json::array();
  for (const PathEntry& e : entries) arr.push_back(e);
  return arr;
}

json direction_to_json(const DirectionDiagnostics& d) {
  return json{{"L", d.solution.L},
              {"u", d.solution.u},
              {"v", d.solution.v},
              {"W", d.solution.W},
              {"near", d.near},
              {"far", d.far},
              {"second", d.second},
              {"sibling", d.sibling},
              {"sibling_predicted", d.solution.sibling_pred},
              {"sibling_residual", d.sibling_residual}};
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ostream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

std::uint16_t get_u16(const unsigned char* p) { return std::uint16_t(p[0] | p[1] << 8); }

}  // namespace

void to_json(json& j, const RoomConfig& config) {
  j = json{{"dims", config.dims},
           {"source", config.source},
           {"receiver", config.receiver},
           {"betas", config.betas},
           {"c", config.c}};
}

void from_json(const json& j, RoomConfig& config) {
  if (!j.is_object()) throw InvalidArgument("room config must be a JSON object");
  config.dims = read_array<3>(j, "dims");
  config.source = read_array<3>(j, "source");
  config.receiver = read_array<3>(j, "receiver");
  config.betas = j.contains("betas") ? read_array<6>(j, "betas") : std::array<double, 6>{1, 1, 1, 1, 1, 1};
  config.c = j.value("c", 343.0);
}

void to_json(json& j, const Pulse& pulse) {
  j = json{{"p", pulse.index.p},
           {"m", pulse.index.m},
           {"order", pulse.order},
           {"toa", pulse.toa},
           {"path_length", pulse.path_length},
           {"amplitude", pulse.amplitude}};
  if (pulse.spurious) j["spurious"] = true;
}

void from_json(const json& j, Pulse& pulse) {
  if (!j.is_object()) throw InvalidArgument("pulse must be a JSON object");
  pulse = Pulse{};
  if (j.contains("p")) pulse.index.p = j.at("p").get<std::array<int, 3>>();
  if (j.contains("m")) pulse.index.m = j.at("m").get<std::array<int, 3>>();
  pulse.order = j.value("order", 0);
  pulse.amplitude = j.value("amplitude", 0.0);
  pulse.spurious = j.value("spurious", false);
  if (j.contains("toa")) pulse.toa = j.at("toa").get<double>();
  if (j.contains("path_length")) pulse.path_length = j.at("path_length").get<double>();
  if (!j.contains("toa") && !j.contains("path_length"))
    throw InvalidArgument("pulse needs \"toa\" or \"path_length\"");
}

void to_json(json& j, const PathEntry& entry) { j = json{{"d", entry.d}, {"a", entry.a}}; }

void from_json(const json& j, PathEntry& entry) {
  entry.d = j.at("d").get<double>();
  entry.a = j.value("a", 0.0);
}

json path_set_to_json(const PathLengthSet& set) { return entries_to_json(set.entries); }

json classification_to_json(const ClassifiedReflections& cls) {
  return json{{"d0", cls.d0},
              {"sx1", entries_to_json(cls.sx1())},
              {"sy1", entries_to_json(cls.sy1())},
              {"sz1", entries_to_json(cls.sz1())},
              {"s2_single", entries_to_json(cls.s2_single)},
              {"s2_multi", entries_to_json(cls.s2_multi)},
              {"leftovers", entries_to_json(cls.leftovers)}};
}

json estimate_to_json(const RoomEstimate& estimate) {
  json j = estimate.estimate.config;
  json diag;
  json dirs = json::array();
  for (const DirectionDiagnostics& d : estimate.estimate.directions) dirs.push_back(direction_to_json(d));
  diag["directions"] = dirs;
  diag["betas_raw"] = estimate.coefficients.betas;
  diag["second_order_amplitude_residuals"] = estimate.coefficients.second_order_residuals;
  diag["betas_valid"] = estimate.coefficients.valid;
  diag["closure_residual"] = estimate.closure_residual;
  diag["closure_ok"] = estimate.closure_ok;
  diag["used_fallback"] = estimate.used_fallback;
  diag["rejected"] = entries_to_json(estimate.estimate.erroneous);
  diag["unexplained"] = entries_to_json(estimate.unexplained);
  if (estimate.classification) diag["classification"] = classification_to_json(*estimate.classification);
  j["diagnostics"] = diag;
  return j;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

RoomConfig read_room_config(const std::filesystem::path& path) {
  RoomConfig config;
  try {
    config = read_json_file(path).get<RoomConfig>();
  } catch (const json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
  config.validate();
  return config;
}

PulseList read_pulse_list(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  if (!j.is_array()) throw InvalidArgument(path.string() + ": expected a JSON array of pulses");
  try {
    return j.get<PulseList>();
  } catch (const json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void write_wav(const std::filesystem::path& path, const SampledRir& rir) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(rir.samples.size() * 4);
  const auto fs = static_cast<std::uint32_t>(std::lround(rir.fs));
  out.write("RIFF", 4);
  put_u32(out, 4 + 8 + 18 + 8 + 4 + 8 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 18);
  put_u16(out, 3);  // IEEE float
  put_u16(out, 1);
  put_u32(out, fs);
  put_u32(out, fs * 4);
  put_u16(out, 4);
  put_u16(out, 32);
  put_u16(out, 0);
  out.write("fact", 4);
  put_u32(out, 4);
  put_u32(out, static_cast<std::uint32_t>(rir.samples.size()));
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (float s : rir.samples) {
    std::uint32_t bits;
    std::memcpy(&bits, &s, 4);
    put_u32(out, bits);
  }
}

SampledRir read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw InvalidArgument(name + ": not a RIFF/WAVE file");

  SampledRir rir;
  std::uint16_t format = 0, channels = 0, bits = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    const std::uint32_t size = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > buf.size()) throw InvalidArgument(name + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw InvalidArgument(name + ": short fmt chunk");
      format = get_u16(buf.data() + body);
      channels = get_u16(buf.data() + body + 2);
      rir.fs = get_u32(buf.data() + body + 4);
      bits = get_u16(buf.data() + body + 14);
      if (format == 0xFFFE && size >= 40) format = get_u16(buf.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw InvalidArgument(name + ": data chunk before fmt");
      if (format != 3 || bits != 32 || channels != 1)
        throw InvalidArgument(name + ": expected mono 32-bit float samples");
      rir.samples.resize(size / 4);
      for (std::size_t i = 0; i < rir.samples.size(); ++i) {
        const std::uint32_t v = get_u32(buf.data() + body + 4 * i);
        std::memcpy(&rir.samples[i], &v, 4);
      }
      return rir;
    }
    pos = body + size + (size & 1);
  }
  throw InvalidArgument(name + ": no data chunk");
}

void write_csv(const std::filesystem::path& path, const SampledRir& rir) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out.precision(9);
  for (float s : rir.samples) out << s << '\n';
  write_json_file(path.string() + ".json", json{{"fs", rir.fs}});
}

SampledRir read_csv(const std::filesystem::path& path, double fs_override) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  SampledRir rir;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    try {
      rir.samples.push_back(std::stof(line));
    } catch (const std::exception&) {
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": not a number");
    }
  }
  if (fs_override > 0.0) {
    rir.fs = fs_override;
  } else {
    const std::filesystem::path sidecar = path.string() + ".json";
    if (!std::filesystem::exists(sidecar))
      throw InvalidArgument(path.string() + ": no sample rate given and no sidecar " + sidecar.string());
    rir.fs = read_json_file(sidecar).at("fs").get<double>();
  }
  return rir;
}

}  // namespace roomest
