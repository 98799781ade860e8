#include "fudnn/eegc.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fudnn/error.hpp"

namespace fudnn {

using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic{'E', 'E', 'G', 'C', '\0', '\0', 'v', '1'};

json montage_json(const Montage& m) {
  return {{"labels", m.labels}, {"reference_note", m.reference_note}};
}

Montage montage_from(const json& j) {
  Montage m;
  m.labels = j.at("labels").get<std::vector<std::string>>();
  m.reference_note = j.value("reference_note", "");
  return m;
}

void put_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_floats(std::ostream& os, const std::vector<float>& values) {
  std::vector<char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void write_file(const std::filesystem::path& path, const json& header,
                const std::vector<const SignalMatrix*>& blocks) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::kFormat, "cannot open " + path.string() + " for writing");
  const std::string text = header.dump();
  os.write(kMagic.data(), kMagic.size());
  put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* b : blocks) put_floats(os, b->data);
  require(static_cast<bool>(os), ErrorKind::kFormat, "write failed for " + path.string());
}

struct RawFile {
  json header;
  std::vector<float> payload;
};

RawFile read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::kFormat, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  require(bytes.size() >= 16, ErrorKind::kFormat, "file too short for EEGC preamble");
  require(std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) == 0, ErrorKind::kFormat,
          "bad magic (not an EEGC v1 file)");
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  require(header_len <= bytes.size() - 16, ErrorKind::kFormat, "truncated header");
  RawFile raw;
  try {
    raw.header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("header is not valid JSON: ") + e.what());
  }
  const std::size_t payload_bytes = bytes.size() - 16 - header_len;
  require(payload_bytes % 4 == 0, ErrorKind::kFormat, "payload is not a whole number of float32 values");
  raw.payload.resize(payload_bytes / 4);
  const unsigned char* p = bytes.data() + 16 + header_len;
  for (std::size_t i = 0; i < raw.payload.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) bits = (bits << 8) | p[i * 4 + b];
    raw.payload[i] = std::bit_cast<float>(bits);
  }
  try {
    require(raw.header.at("format_version").get<int>() == kEegcVersion, ErrorKind::kFormat,
            "unsupported format version");
    const auto claimed = raw.header.at("payload_floats").get<std::uint64_t>();
    require(claimed == raw.payload.size(), ErrorKind::kFormat,
            "header claims " + std::to_string(claimed) + " floats but payload holds " +
                std::to_string(raw.payload.size()));
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed header: ") + e.what());
  }
  return raw;
}

SignalMatrix take_block(const std::vector<float>& payload, std::size_t& offset, std::size_t k,
                        std::size_t t) {
  require(offset + k * t <= payload.size(), ErrorKind::kFormat, "entry sizes exceed payload");
  SignalMatrix m(k, t);
  std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(offset), k * t, m.data.begin());
  offset += k * t;
  return m;
}

json base_header(const char* kind, const Montage& montage, double rate_hz) {
  return {{"format_version", kEegcVersion},
          {"kind", kind},
          {"unit", "uV"},
          {"montage", montage_json(montage)},
          {"rate_hz", rate_hz}};
}

const char* kind_name(EegcKind k) {
  switch (k) {
    case EegcKind::kRecording: return "recording";
    case EegcKind::kDataset: return "dataset";
    case EegcKind::kWindows: return "windows";
  }
  return "";
}

EegcKind parse_kind(const json& header) {
  const auto k = header.at("kind").get<std::string>();
  if (k == "recording") return EegcKind::kRecording;
  if (k == "dataset") return EegcKind::kDataset;
  if (k == "windows") return EegcKind::kWindows;
  fail(ErrorKind::kFormat, "unknown container kind '" + k + "'");
}

void expect_kind(const json& header, EegcKind want) {
  require(parse_kind(header) == want, ErrorKind::kFormat,
          std::string("expected a '") + kind_name(want) + "' container");
}

} // namespace

void save_eegc(const Recording& recording, const std::filesystem::path& path) {
  recording.validate();
  json h = base_header("recording", recording.montage, recording.rate_hz);
  h["n_samples"] = recording.samples.samples;
  json markers = json::array();
  for (const auto& m : recording.markers) markers.push_back({m.sample, m.code});
  h["markers"] = markers;
  h["payload_floats"] = recording.samples.data.size();
  write_file(path, h, {&recording.samples});
}

void save_eegc(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  json h = base_header("dataset", dataset.montage, dataset.rate_hz());
  h["subject_id"] = dataset.subject_id;
  json entries = json::array();
  std::vector<const SignalMatrix*> blocks;
  std::size_t total = 0;
  for (const auto& t : dataset.trials) {
    entries.push_back({{"trial_id", t.trial_id},
                       {"label", std::string(to_string(t.label))},
                       {"subject_id", t.subject_id},
                       {"onset_s", t.onset_s},
                       {"n_samples", t.data.samples}});
    blocks.push_back(&t.data);
    total += t.data.data.size();
  }
  h["entries"] = entries;
  h["payload_floats"] = total;
  write_file(path, h, blocks);
}

void save_eegc(const WindowSet& windows, const std::filesystem::path& path) {
  windows.montage.validate();
  json h = base_header("windows", windows.montage, windows.rate_hz);
  h["subject_id"] = windows.subject_id;
  json entries = json::array();
  std::vector<const SignalMatrix*> blocks;
  std::size_t total = 0;
  for (const auto& w : windows.windows) {
    require(w.data.channels == windows.montage.size(), ErrorKind::kContract,
            "window channel count != montage");
    entries.push_back({{"trial_id", w.trial_id},
                       {"label", std::string(to_string(w.label))},
                       {"subject_id", w.subject_id},
                       {"start", w.start},
                       {"n_samples", w.data.samples}});
    blocks.push_back(&w.data);
    total += w.data.data.size();
  }
  h["entries"] = entries;
  h["payload_floats"] = total;
  write_file(path, h, blocks);
}

EegcKind peek_eegc_kind(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::kFormat, "cannot open " + path.string());
  std::array<unsigned char, 16> pre{};
  is.read(reinterpret_cast<char*>(pre.data()), 16);
  require(is.gcount() == 16, ErrorKind::kFormat, "file too short for EEGC preamble");
  require(std::memcmp(pre.data(), kMagic.data(), kMagic.size()) == 0, ErrorKind::kFormat,
          "bad magic (not an EEGC v1 file)");
  const auto len = get_u64(pre.data() + 8);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  require(static_cast<std::uint64_t>(is.gcount()) == len, ErrorKind::kFormat, "truncated header");
  try {
    return parse_kind(json::parse(text));
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed header: ") + e.what());
  }
}

Recording load_recording(const std::filesystem::path& path) {
  RawFile raw = read_file(path);
  try {
    expect_kind(raw.header, EegcKind::kRecording);
    Recording rec;
    rec.montage = montage_from(raw.header.at("montage"));
    rec.rate_hz = raw.header.at("rate_hz").get<double>();
    std::size_t offset = 0;
    rec.samples = take_block(raw.payload, offset, rec.montage.size(),
                             raw.header.at("n_samples").get<std::size_t>());
    require(offset == raw.payload.size(), ErrorKind::kFormat, "payload longer than header declares");
    for (const auto& m : raw.header.at("markers")) {
      rec.markers.push_back({m.at(0).get<std::size_t>(), m.at(1).get<int>()});
    }
    rec.validate();
    return rec;
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed header: ") + e.what());
  }
}

Dataset load_dataset(const std::filesystem::path& path) {
  RawFile raw = read_file(path);
  try {
    expect_kind(raw.header, EegcKind::kDataset);
    Dataset ds;
    ds.montage = montage_from(raw.header.at("montage"));
    ds.subject_id = raw.header.value("subject_id", "");
    const double rate = raw.header.at("rate_hz").get<double>();
    std::size_t offset = 0;
    for (const auto& e : raw.header.at("entries")) {
      Trial t;
      t.trial_id = e.at("trial_id").get<int>();
      t.label = parse_class_label(e.at("label").get<std::string>());
      t.subject_id = e.value("subject_id", ds.subject_id);
      t.onset_s = e.value("onset_s", 0.0);
      t.rate_hz = rate;
      t.data = take_block(raw.payload, offset, ds.montage.size(), e.at("n_samples").get<std::size_t>());
      ds.trials.push_back(std::move(t));
    }
    require(offset == raw.payload.size(), ErrorKind::kFormat, "payload longer than header declares");
    ds.validate();
    return ds;
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed header: ") + e.what());
  }
}

WindowSet load_windows(const std::filesystem::path& path) {
  RawFile raw = read_file(path);
  try {
    expect_kind(raw.header, EegcKind::kWindows);
    WindowSet ws;
    ws.montage = montage_from(raw.header.at("montage"));
    ws.subject_id = raw.header.value("subject_id", "");
    ws.rate_hz = raw.header.at("rate_hz").get<double>();
    std::size_t offset = 0;
    for (const auto& e : raw.header.at("entries")) {
      Window w;
      w.trial_id = e.at("trial_id").get<int>();
      w.label = parse_class_label(e.at("label").get<std::string>());
      w.subject_id = e.value("subject_id", ws.subject_id);
      w.start = e.at("start").get<std::size_t>();
      w.data = take_block(raw.payload, offset, ws.montage.size(), e.at("n_samples").get<std::size_t>());
      ws.windows.push_back(std::move(w));
    }
    require(offset == raw.payload.size(), ErrorKind::kFormat, "payload longer than header declares");
    return ws;
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed header: ") + e.what());
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

} // namespace

CsvImport import_csv(const std::filesystem::path& csv_path, const std::filesystem::path& sidecar_path) {
  std::ifstream side(sidecar_path);
  require(static_cast<bool>(side), ErrorKind::kFormat, "cannot open sidecar " + sidecar_path.string());
  json meta;
  try {
    meta = json::parse(side);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("sidecar is not valid JSON: ") + e.what());
  }

  std::ifstream is(csv_path);
  require(static_cast<bool>(is), ErrorKind::kFormat, "cannot open " + csv_path.string());
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorKind::kFormat, "CSV has no header row");
  CsvImport out;
  out.recording.montage.labels = split_csv_line(line);
  const std::size_t k = out.recording.montage.size();
  std::vector<std::vector<float>> columns(k);
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    require(cells.size() == k, ErrorKind::kFormat,
            "row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " cells, expected " +
                std::to_string(k));
    for (std::size_t c = 0; c < k; ++c) {
      try {
        std::size_t used = 0;
        columns[c].push_back(std::stof(cells[c], &used));
        require(used == cells[c].size(), ErrorKind::kFormat, "trailing characters");
      } catch (const std::logic_error&) {
        fail(ErrorKind::kFormat, "non-numeric cell at row " + std::to_string(row));
      }
    }
  }
  const std::size_t t = k ? columns[0].size() : 0;
  out.recording.samples = SignalMatrix(k, t);
  for (std::size_t c = 0; c < k; ++c) std::copy(columns[c].begin(), columns[c].end(), out.recording.samples.row(c).begin());

  try {
    out.recording.rate_hz = meta.at("rate_hz").get<double>();
    out.recording.montage.reference_note = meta.value("reference_note", "");
    if (meta.contains("markers")) {
      for (const auto& m : meta.at("markers")) {
        out.recording.markers.push_back({m.at(0).get<std::size_t>(), m.at(1).get<int>()});
      }
    }
    if (meta.contains("labels")) {
      for (const auto& [code, label] : meta.at("labels").items()) {
        out.label_map[std::stoi(code)] = parse_class_label(label.get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed sidecar: ") + e.what());
  } catch (const std::logic_error&) {
    fail(ErrorKind::kFormat, "sidecar label codes must be integers");
  }
  out.recording.validate();
  return out;
}

} // namespace fudnn
