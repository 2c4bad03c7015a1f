#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace respscl {

enum class Sex { Male, Female, Unknown };
enum class Split { Train, Test };

std::string to_string(Sex s);
std::string to_string(Split s);
Sex sex_from_string(const std::string& s);
Split split_from_string(const std::string& s);

// One labeled breathing cycle of a recording, the unit of classification.
struct CycleRecord {
  std::string cycle_id;
  std::filesystem::path audio_path;
  double start_s = 0;
  double end_s = 0;
  std::string class_label;
  std::string patient_id;
  Sex sex = Sex::Unknown;
  std::optional<double> age_years;
  std::string device;
  std::string location;
  Split split = Split::Train;

  double duration_s() const { return end_s - start_s; }
  bool operator==(const CycleRecord&) const = default;
};

struct Manifest {
  std::string dataset;                 // icbhi | sprsound | synth
  std::vector<std::string> label_set;  // declared class labels, fixed order
  std::vector<CycleRecord> records;

  int label_index(const std::string& label) const;  // -1 if not declared
};

extern const std::vector<std::string> kIcbhiLabels;     // normal crackle wheeze both
extern const std::vector<std::string> kSprsoundLabels;  // 7-class event set

// ICBHI 2017 layout: per-recording <stem>.wav + <stem>.txt cycle annotations
// (start end crackles wheezes), the official split listing
// ICBHI_challenge_train_test.txt and the demographic table
// ICBHI_Challenge_demographic_information.txt, all under `root`.
Manifest ingest_icbhi(const std::filesystem::path& root);

// SPRSound layout: wav/<stem>.wav + json/<stem>.json event annotations
// ("event_annotation": [{start, end, type}], times in ms), participants.tsv
// (patient_id, age_years, sex) and inter_patient_test.txt naming test stems.
// Patient id is the stem's first underscore-separated token.
Manifest ingest_sprsound(const std::filesystem::path& root);

struct AgeScheme {
  double threshold_years = 18.0;
  std::string young_name = "Young";
  std::string old_name = "Old";
};
AgeScheme icbhi_age_scheme();     // Old/Young, cutoff 18 years
AgeScheme sprsound_age_scheme();  // Kid/Baby, cutoff 2 years

// Sex x age-group pretext label. group_id = 2*age_bit + sex_bit with
// sex_bit in {M=0, F=1} and age_bit in {young=0, old=1}; -1 when the
// record's metadata is unknown (such records stay out of metadata batches).
struct MetadataLabel {
  int group_id = -1;
  std::string description;  // e.g. "F-Young"
  bool operator==(const MetadataLabel&) const = default;
};
constexpr int kMetadataGroups = 4;

std::vector<MetadataLabel> synth_metadata_labels(
    const std::vector<CycleRecord>& records, const AgeScheme& scheme);

struct ValidationReport {
  std::vector<std::string> violations;
  std::map<std::string, int> class_histogram;
  int train_count = 0;
  int test_count = 0;
  int known_metadata = 0;
  double min_duration_s = 0;
  double max_duration_s = 0;
  double mean_duration_s = 0;

  bool ok() const { return violations.empty(); }
};

ValidationReport validate_manifest(const Manifest& m);

// Canonical manifest file: header line with schema version, dataset and label
// set, then one tab-separated record per line in CycleRecord field order.
void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace respscl
