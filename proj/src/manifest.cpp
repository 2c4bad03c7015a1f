#include "respscl/manifest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace respscl {

namespace fs = std::filesystem;

const std::vector<std::string> kIcbhiLabels = {"normal", "crackle", "wheeze", "both"};
const std::vector<std::string> kSprsoundLabels = {
    "normal", "rhonchi", "wheeze", "stridor", "coarse_crackle", "fine_crackle", "both"};

std::string to_string(Sex s) {
  switch (s) {
    case Sex::Male: return "M";
    case Sex::Female: return "F";
    default: return "unknown";
  }
}

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Sex sex_from_string(const std::string& s) {
  if (s == "M" || s == "m") return Sex::Male;
  if (s == "F" || s == "f") return Sex::Female;
  return Sex::Unknown;
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw std::runtime_error("bad split value: " + s);
}

int Manifest::label_index(const std::string& label) const {
  auto it = std::find(label_set.begin(), label_set.end(), label);
  return it == label_set.end() ? -1 : static_cast<int>(it - label_set.begin());
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    out.push_back(tok);
  }
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) {
    return "";
  }
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) {
      throw std::invalid_argument(s);
    }
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("cannot parse number '" + s + "' in " + where);
  }
}

// Sorted recursive listing of files with a given extension.
std::vector<fs::path> list_files(const fs::path& root, const std::string& ext) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) {
    return out;
  }
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && lower(e.path().extension().string()) == ext) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<fs::path> find_file(const fs::path& root, const std::string& name) {
  fs::path direct = root / name;
  if (fs::exists(direct)) {
    return direct;
  }
  if (!fs::exists(root)) {
    return std::nullopt;
  }
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() == name) {
      return e.path();
    }
  }
  return std::nullopt;
}

struct Demographics {
  Sex sex = Sex::Unknown;
  std::optional<double> age_years;
};

}  // namespace

Manifest ingest_icbhi(const fs::path& root) {
  Manifest m;
  m.dataset = "icbhi";
  m.label_set = kIcbhiLabels;

  auto wavs = list_files(root, ".wav");
  if (wavs.empty()) {
    std::cerr << "warning: no recordings found under " << root << "\n";
    return m;
  }

  // Official challenge split: "<stem>\t<train|test>".
  std::map<std::string, Split> split_of;
  if (auto sp = find_file(root, "ICBHI_challenge_train_test.txt")) {
    std::ifstream in(*sp);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = trim(line);
      if (line.empty()) {
        continue;
      }
      auto tok = split_ws(line);
      if (tok.size() != 2 || (tok[1] != "train" && tok[1] != "test")) {
        throw std::runtime_error("unparseable split line " + std::to_string(line_no) +
                                 " in " + sp->string());
      }
      split_of[tok[0]] = split_from_string(tok[1]);
    }
  }

  // Demographic table: patient_id age sex adult_bmi child_weight child_height,
  // NA for missing values.
  std::map<std::string, Demographics> demo_of;
  if (auto dp = find_file(root, "ICBHI_Challenge_demographic_information.txt")) {
    std::ifstream in(*dp);
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty()) {
        continue;
      }
      auto tok = split_ws(line);
      if (tok.empty()) {
        continue;
      }
      Demographics d;
      if (tok.size() > 1 && tok[1] != "NA") {
        d.age_years = parse_double(tok[1], dp->string());
      }
      if (tok.size() > 2) {
        d.sex = sex_from_string(tok[2]);
      }
      demo_of[tok[0]] = d;
    }
  }

  for (const auto& wav : wavs) {
    const std::string stem = wav.stem().string();
    fs::path ann = wav;
    ann.replace_extension(".txt");
    if (!fs::exists(ann)) {
      throw std::runtime_error("missing annotation file for recording: " + wav.string());
    }

    // Stem: {patient}_{recording}_{chest location}_{mode}_{device}.
    auto parts = split_fields(stem, '_');
    const std::string patient = parts.empty() ? stem : parts[0];
    const std::string location = parts.size() > 2 ? parts[2] : "";
    const std::string device = parts.size() > 4 ? parts[4] : "";

    Demographics demo;
    if (auto it = demo_of.find(patient); it != demo_of.end()) {
      demo = it->second;
    }
    Split split = Split::Train;
    if (auto it = split_of.find(stem); it != split_of.end()) {
      split = it->second;
    } else if (!split_of.empty()) {
      throw std::runtime_error("recording missing from split listing: " + stem);
    }

    std::ifstream in(ann);
    std::string line;
    int line_no = 0;
    int cycle_idx = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = trim(line);
      if (line.empty()) {
        continue;
      }
      auto tok = split_ws(line);
      if (tok.size() < 4) {
        throw std::runtime_error("unparseable annotation line " + std::to_string(line_no) +
                                 " in " + ann.string());
      }
      CycleRecord r;
      r.start_s = parse_double(tok[0], ann.string() + ":" + std::to_string(line_no));
      r.end_s = parse_double(tok[1], ann.string() + ":" + std::to_string(line_no));
      const std::string& crackle = tok[2];
      const std::string& wheeze = tok[3];
      if ((crackle != "0" && crackle != "1") || (wheeze != "0" && wheeze != "1")) {
        throw std::runtime_error("unparseable annotation line " + std::to_string(line_no) +
                                 " in " + ann.string());
      }
      const bool c = crackle == "1";
      const bool w = wheeze == "1";
      r.class_label = c && w ? "both" : c ? "crackle" : w ? "wheeze" : "normal";
      r.cycle_id = stem + "_" + std::to_string(cycle_idx++);
      r.audio_path = wav;
      r.patient_id = patient;
      r.sex = demo.sex;
      r.age_years = demo.age_years;
      r.device = device;
      r.location = location;
      r.split = split;
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

Manifest ingest_sprsound(const fs::path& root) {
  Manifest m;
  m.dataset = "sprsound";
  m.label_set = kSprsoundLabels;

  auto wavs = list_files(root / "wav", ".wav");
  if (wavs.empty()) {
    wavs = list_files(root, ".wav");
  }
  if (wavs.empty()) {
    std::cerr << "warning: no recordings found under " << root << "\n";
    return m;
  }

  std::set<std::string> test_stems;
  if (auto sp = find_file(root, "inter_patient_test.txt")) {
    std::ifstream in(*sp);
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (!line.empty()) {
        test_stems.insert(line);
      }
    }
  }

  std::map<std::string, Demographics> demo_of;
  if (auto dp = find_file(root, "participants.tsv")) {
    std::ifstream in(*dp);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = trim(line);
      if (line.empty() || line.rfind("patient_id", 0) == 0) {
        continue;
      }
      auto tok = split_ws(line);
      if (tok.size() < 3) {
        throw std::runtime_error("unparseable participants line " +
                                 std::to_string(line_no) + " in " + dp->string());
      }
      Demographics d;
      if (tok[1] != "NA") {
        d.age_years = parse_double(tok[1], dp->string());
      }
      d.sex = sex_from_string(tok[2]);
      demo_of[tok[0]] = d;
    }
  }

  auto map_type = [](std::string t) -> std::string {
    t = lower(trim(t));
    std::replace(t.begin(), t.end(), ' ', '_');
    if (t == "normal") return "normal";
    if (t == "rhonchi") return "rhonchi";
    if (t == "wheeze") return "wheeze";
    if (t == "stridor") return "stridor";
    if (t == "coarse_crackle") return "coarse_crackle";
    if (t == "fine_crackle") return "fine_crackle";
    if (t.find("wheeze") != std::string::npos && t.find("crackle") != std::string::npos) {
      return "both";
    }
    return "";
  };

  for (const auto& wav : wavs) {
    const std::string stem = wav.stem().string();
    fs::path ann = root / "json" / (stem + ".json");
    if (!fs::exists(ann)) {
      ann = wav;
      ann.replace_extension(".json");
    }
    if (!fs::exists(ann)) {
      throw std::runtime_error("missing annotation file for recording: " + wav.string());
    }

    nlohmann::json doc;
    {
      std::ifstream in(ann);
      try {
        in >> doc;
      } catch (const std::exception& e) {
        throw std::runtime_error("unparseable json " + ann.string() + ": " + e.what());
      }
    }
    if (!doc.contains("event_annotation") || !doc["event_annotation"].is_array()) {
      throw std::runtime_error("missing event_annotation array in " + ann.string());
    }

    auto parts = split_fields(stem, '_');
    const std::string patient = parts.empty() ? stem : parts[0];
    Demographics demo;
    if (auto it = demo_of.find(patient); it != demo_of.end()) {
      demo = it->second;
    }
    const Split split = test_stems.count(stem) ? Split::Test : Split::Train;

    int idx = 0;
    for (const auto& ev : doc["event_annotation"]) {
      CycleRecord r;
      const double start_ms = ev.contains("start") ? ev["start"].get<double>() : -1;
      const double end_ms = ev.contains("end") ? ev["end"].get<double>() : -1;
      const std::string type = ev.contains("type") ? ev["type"].get<std::string>() : "";
      r.class_label = map_type(type);
      if (start_ms < 0 || end_ms < 0 || r.class_label.empty()) {
        throw std::runtime_error("unparseable event " + std::to_string(idx) + " in " +
                                 ann.string());
      }
      r.start_s = start_ms / 1000.0;
      r.end_s = end_ms / 1000.0;
      r.cycle_id = stem + "_" + std::to_string(idx++);
      r.audio_path = wav;
      r.patient_id = patient;
      r.sex = demo.sex;
      r.age_years = demo.age_years;
      r.device = parts.size() > 3 ? parts[3] : "";
      r.location = parts.size() > 4 ? parts[4] : "";
      r.split = split;
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

AgeScheme icbhi_age_scheme() { return AgeScheme{18.0, "Young", "Old"}; }
AgeScheme sprsound_age_scheme() { return AgeScheme{2.0, "Baby", "Kid"}; }

std::vector<MetadataLabel> synth_metadata_labels(
    const std::vector<CycleRecord>& records, const AgeScheme& scheme) {
  std::vector<MetadataLabel> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    MetadataLabel l;
    if (r.sex == Sex::Unknown || !r.age_years.has_value()) {
      l.group_id = -1;
      l.description = "unknown";
    } else {
      const int sex_bit = r.sex == Sex::Female ? 1 : 0;
      const int age_bit = *r.age_years >= scheme.threshold_years ? 1 : 0;
      l.group_id = 2 * age_bit + sex_bit;
      l.description = to_string(r.sex) + "-" +
                      (age_bit ? scheme.old_name : scheme.young_name);
    }
    out.push_back(std::move(l));
  }
  return out;
}

ValidationReport validate_manifest(const Manifest& m) {
  ValidationReport rep;
  std::set<std::string> ids;
  double dur_sum = 0;
  bool first = true;
  for (const auto& r : m.records) {
    if (r.end_s <= r.start_s) {
      rep.violations.push_back("non-positive duration: " + r.cycle_id);
    }
    if (!ids.insert(r.cycle_id).second) {
      rep.violations.push_back("duplicate id: " + r.cycle_id);
    }
    if (!m.label_set.empty() && m.label_index(r.class_label) < 0) {
      rep.violations.push_back("undeclared class label '" + r.class_label +
                               "': " + r.cycle_id);
    }
    if (r.age_years.has_value() && (*r.age_years < 0 || !std::isfinite(*r.age_years))) {
      rep.violations.push_back("negative age: " + r.cycle_id);
    }
    rep.class_histogram[r.class_label]++;
    (r.split == Split::Train ? rep.train_count : rep.test_count)++;
    if (r.sex != Sex::Unknown && r.age_years.has_value()) {
      rep.known_metadata++;
    }
    const double d = r.duration_s();
    dur_sum += d;
    if (first) {
      rep.min_duration_s = rep.max_duration_s = d;
      first = false;
    } else {
      rep.min_duration_s = std::min(rep.min_duration_s, d);
      rep.max_duration_s = std::max(rep.max_duration_s, d);
    }
  }
  if (!m.records.empty()) {
    rep.mean_duration_s = dur_sum / static_cast<double>(m.records.size());
  }
  return rep;
}

namespace {

constexpr const char* kManifestMagic = "respscl.manifest.v1";

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) {
      out.push_back(sep);
    }
    out += v[i];
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_manifest(const fs::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write manifest: " + path.string());
  }
  out << kManifestMagic << "\tdataset=" << m.dataset
      << "\tlabels=" << join(m.label_set, ',') << "\n";
  for (const auto& r : m.records) {
    out << r.cycle_id << '\t' << r.audio_path.string() << '\t' << fmt_double(r.start_s)
        << '\t' << fmt_double(r.end_s) << '\t' << r.class_label << '\t' << r.patient_id
        << '\t' << to_string(r.sex) << '\t'
        << (r.age_years ? fmt_double(*r.age_years) : std::string("-")) << '\t'
        << (r.device.empty() ? "-" : r.device) << '\t'
        << (r.location.empty() ? "-" : r.location) << '\t' << to_string(r.split) << "\n";
  }
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open manifest: " + path.string());
  }
  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error("empty manifest: " + path.string());
  }
  auto head = split_fields(trim(header), '\t');
  if (head.empty() || head[0] != kManifestMagic) {
    throw std::runtime_error("bad manifest header in " + path.string());
  }
  Manifest m;
  for (size_t i = 1; i < head.size(); ++i) {
    auto eq = head[i].find('=');
    if (eq == std::string::npos) {
      continue;
    }
    const std::string k = head[i].substr(0, eq);
    const std::string v = head[i].substr(eq + 1);
    if (k == "dataset") {
      m.dataset = v;
    } else if (k == "labels" && !v.empty()) {
      m.label_set = split_fields(v, ',');
    }
  }

  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    auto f = split_fields(line, '\t');
    if (f.size() != 11) {
      throw std::runtime_error("bad manifest line " + std::to_string(line_no) + " in " +
                               path.string());
    }
    CycleRecord r;
    r.cycle_id = f[0];
    r.audio_path = f[1];
    r.start_s = parse_double(f[2], path.string() + ":" + std::to_string(line_no));
    r.end_s = parse_double(f[3], path.string() + ":" + std::to_string(line_no));
    r.class_label = f[4];
    r.patient_id = f[5];
    r.sex = sex_from_string(f[6]);
    if (f[7] != "-") {
      r.age_years = parse_double(f[7], path.string() + ":" + std::to_string(line_no));
    }
    r.device = f[8] == "-" ? "" : f[8];
    r.location = f[9] == "-" ? "" : f[9];
    r.split = split_from_string(f[10]);
    m.records.push_back(std::move(r));
  }
  return m;
}

}  // namespace respscl
