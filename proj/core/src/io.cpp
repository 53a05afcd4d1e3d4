#include "mdeeg/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <type_traits>

#include "mdeeg/error.hpp"

namespace mdeeg::io {
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw DataError("cannot parse " + what + ": '" + text + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw DataError("non-finite " + what + ": '" + text + "'");
  }
  return value;
}

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

}  // namespace

void append_f32le(std::string& out, float value) {
  const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(value));
  char bytes[4];
  std::memcpy(bytes, &bits, 4);
  out.append(bytes, 4);
}

float read_f32le(const char* bytes) {
  std::uint32_t bits;
  std::memcpy(&bits, bytes, 4);
  return std::bit_cast<float>(to_le(bits));
}

void write_f32le_file(const fs::path& file, const std::vector<float>& values) {
  std::string buf;
  buf.reserve(values.size() * 4);
  for (float v : values) append_f32le(buf, v);
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary);
  if (!os) throw DataError("cannot open " + file.string() + " for writing");
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<float> read_f32le_file(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cannot open " + file.string());
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() % 4 != 0) throw DataError(file.string() + ": size is not a multiple of 4 bytes");
  std::vector<float> values(buf.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = read_f32le(buf.data() + 4 * i);
  return values;
}

std::vector<PaasScore> read_labels(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw DataError("cannot open " + file.string());
  std::vector<PaasScore> scores;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cols = split(t, '\t');
    if (cols.size() != 2) throw DataError(file.string() + ":" + std::to_string(lineno) + ": expected 2 columns");
    if (cols[0] == "window_index") continue;  // optional header
    PaasScore p{parse_number<std::size_t>(cols[0], "window_index"), parse_number<int>(cols[1], "paas_score")};
    if (p.score < 1 || p.score > 9) {
      throw DataError(file.string() + ":" + std::to_string(lineno) + ": Paas score out of [1, 9]");
    }
    scores.push_back(p);
  }
  return scores;
}

void write_labels(const fs::path& file, const std::vector<PaasScore>& scores) {
  std::ofstream os(file);
  if (!os) throw DataError("cannot open " + file.string() + " for writing");
  for (const auto& p : scores) os << p.window_index << '\t' << p.score << '\n';
}

void write_recording(const fs::path& subject_dir, const EegRecording& rec) {
  fs::create_directories(subject_dir);
  std::vector<float> flat;
  flat.reserve(kNumChannels * rec.num_samples());
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    for (double v : rec.channel(c)) flat.push_back(static_cast<float>(v));
  }
  write_f32le_file(subject_dir / "recording.f32le", flat);

  std::ofstream meta(subject_dir / "recording.meta");
  if (!meta) throw DataError("cannot write " + (subject_dir / "recording.meta").string());
  std::ostringstream rate;
  rate << rec.sample_rate();
  meta << "sample_rate=" << rate.str() << '\n';
  meta << "channels=";
  for (std::size_t c = 0; c < kNumChannels; ++c) meta << (c ? "," : "") << rec.channel_names()[c];
  meta << '\n';
  meta << "n_samples=" << rec.num_samples() << '\n';
  write_labels(subject_dir / "labels.tsv", rec.paas_scores());
}

EegRecording read_recording(const fs::path& subject_dir) {
  std::ifstream meta(subject_dir / "recording.meta");
  if (!meta) throw DataError("missing " + (subject_dir / "recording.meta").string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(meta, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw DataError("recording.meta: expected key=value, got '" + t + "'");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  for (const char* key : {"sample_rate", "channels", "n_samples"}) {
    if (!kv.contains(key)) throw DataError("recording.meta: missing key " + std::string(key));
  }
  const double sample_rate = parse_number<double>(kv["sample_rate"], "sample_rate");
  const auto n_samples = parse_number<std::size_t>(kv["n_samples"], "n_samples");
  const auto names = split(kv["channels"], ',');
  if (names.size() != kNumChannels) throw DataError("recording.meta: expected 4 channel names");
  std::array<std::string, kNumChannels> channel_names;
  std::copy(names.begin(), names.end(), channel_names.begin());

  const auto flat = read_f32le_file(subject_dir / "recording.f32le");
  if (flat.size() != kNumChannels * n_samples) {
    throw DataError("recording.f32le holds " + std::to_string(flat.size()) + " values, meta says 4 x " +
                    std::to_string(n_samples));
  }
  std::vector<std::vector<double>> channels(kNumChannels);
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    channels[c].assign(flat.begin() + static_cast<std::ptrdiff_t>(c * n_samples),
                       flat.begin() + static_cast<std::ptrdiff_t>((c + 1) * n_samples));
  }
  std::vector<PaasScore> scores;
  if (fs::exists(subject_dir / "labels.tsv")) scores = read_labels(subject_dir / "labels.tsv");
  try {
    return EegRecording(subject_dir.filename().string(), sample_rate, std::move(channels), std::move(scores),
                        channel_names);
  } catch (const std::invalid_argument& e) {
    throw DataError(subject_dir.string() + ": " + e.what());
  }
}

std::vector<EegRecording> read_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "recording.meta")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw DataError("no subject directories under " + root.string());
  std::vector<EegRecording> recs;
  recs.reserve(dirs.size());
  for (const auto& d : dirs) recs.push_back(read_recording(d));
  return recs;
}

void write_dataset(const fs::path& root, const std::vector<EegRecording>& recordings) {
  for (const auto& rec : recordings) write_recording(root / rec.subject_id(), rec);
}

EegRecording import_csv(const fs::path& csv, const std::string& subject_id, double sample_rate,
                        std::vector<PaasScore> scores) {
  std::ifstream is(csv);
  if (!is) throw DataError("cannot open " + csv.string());
  std::string line;
  if (!std::getline(is, line)) throw DataError(csv.string() + ": empty file");
  const auto header = split(trim(line), ',');
  const std::vector<std::string> expected = {"t", "ch1", "ch2", "ch3", "ch4"};
  if (header != expected) throw DataError(csv.string() + ": header must be t,ch1,ch2,ch3,ch4");

  std::vector<std::vector<double>> channels(kNumChannels);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cols = split(t, ',');
    if (cols.size() != 5) throw DataError(csv.string() + ":" + std::to_string(lineno) + ": expected 5 columns");
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      channels[c].push_back(parse_number<double>(cols[c + 1], "sample"));
    }
  }
  if (channels.front().empty()) throw DataError(csv.string() + ": no samples");
  try {
    return EegRecording(subject_id, sample_rate, std::move(channels), std::move(scores));
  } catch (const std::invalid_argument& e) {
    throw DataError(csv.string() + ": " + e.what());
  }
}

}  // namespace mdeeg::io
