#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "readmit/rng.hpp"
#include "readmit/tensor.hpp"

namespace readmit {

// --- static features -----------------------------------------------------------

inline constexpr int kNumStatic = 23;

// Canonical column order for stays.csv and for the final model layer.
// Indicator groups encode everything but the reference level (female, white,
// married/life partner, Medicare, emergency room admit).
const std::array<const char*, kNumStatic>& static_names();
const std::array<const char*, kNumStatic>& static_display_names();
int static_index(const std::string& name);  // -1 when unknown

// --- events and stays ----------------------------------------------------------

enum class Stream { dp, mv };

const char* stream_name(Stream s);

struct CodeEvent {
  int code_id = 0;
  // Time before ICU discharge; days for the dp stream, hours for mv.
  double elapsed = 0.0;
};

struct StayRecord {
  std::string stay_id;
  std::string patient_id;
  std::array<double, kNumStatic> statics{};
  // Sorted oldest first (decreasing elapsed), ties by ascending code id.
  std::vector<CodeEvent> dp_events;
  std::vector<CodeEvent> mv_events;
  int label = 0;
};

// --- vocabulary ------------------------------------------------------------------

struct Vocabulary {
  static constexpr const char* kOther = "other";
  static constexpr int kOtherId = 0;

  std::vector<std::string> id_to_code;  // id 0 is always "other"
  std::unordered_map<std::string, int> code_to_id;
  std::vector<int> stay_counts;  // distinct stays containing each id

  int size() const { return static_cast<int>(id_to_code.size()); }
  int id_of(const std::string& code) const {
    auto it = code_to_id.find(code);
    return it == code_to_id.end() ? -1 : it->second;
  }
  std::uint64_t hash() const;
};

// --- OASIS-style vital binning ---------------------------------------------------

enum class VitalKind {
  gcs,
  heart_rate,
  mean_arterial_pressure,
  respiratory_rate,
  temperature,
  urine_output,
  ventilation,
};

VitalKind vital_kind_from_name(const std::string& name);
const char* vital_kind_name(VitalKind k);

// Maps continuous vital-sign measurements to categorical codes using the
// OASIS severity-score breakpoints; 32 codes in total (31 range bins plus a
// single ventilation code emitted only when the patient was ventilated).
class VitalBinner {
 public:
  static const VitalBinner& standard();

  // Code string of the bin containing value. For ventilation, a code is
  // produced only when value >= 0.5 (no code marks "not ventilated").
  std::optional<std::string> code_for(VitalKind kind, double value) const;

  const std::vector<std::string>& all_codes() const { return codes_; }
  // Canonical index in [0, 32) or -1 when the string is not a vital code.
  int canon_index(const std::string& code) const;
  // Which vital kind a canonical index belongs to.
  VitalKind kind_of(int canon_index) const;
  static constexpr int kNumCodes = 32;
  static constexpr int kNumKinds = 7;

 private:
  VitalBinner();
  struct KindBins {
    VitalKind kind;
    std::vector<double> edges;        // boundaries between bins, ascending
    std::vector<std::string> labels;  // edges.size() + 1 labels
  };
  std::vector<KindBins> kinds_;
  std::vector<std::string> codes_;
  std::unordered_map<std::string, int> canon_;
  std::vector<VitalKind> kind_of_;
};

// --- cohort ----------------------------------------------------------------------

struct Cohort {
  std::vector<StayRecord> stays;
  Vocabulary vocab_dp;
  Vocabulary vocab_mv;
  // Per mv vocab id: canonical vital index in [0, 32), or -1 for medications.
  std::vector<int> mv_vital_canon;
  int rare_threshold = 100;

  const Vocabulary& vocab(Stream s) const { return s == Stream::dp ? vocab_dp : vocab_mv; }
};

// Raw (string-coded) rows as they appear in the CSV files.
struct RawStay {
  std::string stay_id;
  std::string patient_id;
  int label = 0;
  std::array<double, kNumStatic> statics{};
};

struct RawEvent {
  std::string stay_id;
  Stream stream = Stream::dp;
  std::string code;
  double elapsed = 0.0;
};

struct RawCohort {
  std::vector<RawStay> stays;
  std::vector<RawEvent> events;
};

struct LoadOptions {
  int rare_threshold = 100;  // codes in fewer stays fold into "other"
  int dp_cap = 0;            // 0 = unlimited; otherwise keep the most recent N
  int mv_cap = 0;
};

RawCohort read_raw(const std::string& stays_path, const std::string& events_path);
void write_raw(const RawCohort& raw, const std::string& stays_path,
               const std::string& events_path);

// Vocabulary construction, rare-code relabeling, vital dedup, canonical event
// ordering.
Cohort build_cohort(const RawCohort& raw, const LoadOptions& opts = {});

Cohort load_cohort(const std::string& stays_path, const std::string& events_path,
                   const LoadOptions& opts = {});

// Inverse of build_cohort (ids back to code strings) for round-trip dumps.
RawCohort dump_cohort(const Cohort& cohort);

// --- patient-level split ------------------------------------------------------------

struct Split {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

// All stays of one patient land in exactly one subset. Patient counts are
// rounded to the requested fractions; remaining patients train.
Split split_by_patient(const Cohort& cohort, double test_fraction, double val_fraction,
                       std::uint64_t seed);

std::uint64_t split_hash(const Split& split);

// --- synthetic cohorts ----------------------------------------------------------------

struct SynthConfig {
  int n_patients = 1000;
  int vocab_dp = 150;  // diagnosis/procedure code universe ("D###")
  int vocab_mv = 50;   // medication code universe ("M###"); vitals add up to 32 more
  int k_planted = 10;  // planted risk codes D000..D00(k-1)
  double delta = 3.0;  // logit bump when a planted code is present at elapsed 0
  double beta0 = -3.0;
  double tau_days = 10.0;  // planted effect decays as exp(-elapsed/tau)
  // Codes are drawn from per-stay topics so co-occurrence carries structure;
  // planted codes form one topic.
  double topic_mix = 0.7;
  int topic_size = 10;
  double mean_dp_events = 8.0;
  double mean_mv_events = 10.0;
  double mean_dp_elapsed_days = 7.0;
  double mean_icu_los_days = 2.5;
  double vital_fraction = 0.35;
  double extra_stay_prob = 0.18;
  std::array<double, kNumStatic> static_effects{};
};

struct PlantedTruth {
  std::vector<std::string> risk_codes;
  double delta = 0.0;
  double tau_days = 0.0;
  std::array<double, kNumStatic> static_effects{};
};

struct SynthResult {
  RawCohort raw;
  PlantedTruth truth;
};

SynthResult generate_synthetic(const SynthConfig& cfg, std::uint64_t seed);

void write_planted(const PlantedTruth& truth, const std::string& path);

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace readmit
