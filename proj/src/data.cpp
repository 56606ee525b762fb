#include "readmit/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace readmit {

namespace {

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& file, std::size_t lineno) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !std::isfinite(v))
    throw ConfigError(file + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

// --- static features -----------------------------------------------------------

const std::array<const char*, kNumStatic>& static_names() {
  static const std::array<const char*, kNumStatic> names = {
      "icu_los_days",
      "pre_icu_los_days",
      "age_years",
      "n_recent_admissions",
      "gender_male",
      "elective_surgery",
      "adm_loc_clinic_referral",
      "adm_loc_other_unknown",
      "adm_loc_phys_referral",
      "adm_loc_hospital_transfer",
      "adm_loc_snf_transfer",
      "ins_government",
      "ins_medicaid",
      "ins_private",
      "ins_self_pay",
      "marital_other_unknown",
      "marital_single",
      "marital_widowed_divorced_separated",
      "eth_asian",
      "eth_black_african_american",
      "eth_hispanic_latino",
      "eth_other_unknown",
      "eth_unable_to_obtain",
  };
  return names;
}

const std::array<const char*, kNumStatic>& static_display_names() {
  static const std::array<const char*, kNumStatic> names = {
      "ICU Length of Stay (days)",
      "Pre-ICU Length of Stay (days)",
      "Age (years)",
      "Number of Recent Admissions",
      "Gender: Male",
      "Elective Surgery",
      "Admission Location: Clinic Referral/Premature Delivery",
      "Admission Location: Other/Unknown",
      "Admission Location: Physician Referral/Normal Delivery",
      "Admission Location: Transfer from Hospital/Extramural",
      "Admission Location: Transfer from Skilled Nursing Facility",
      "Insurance: Government",
      "Insurance: Medicaid",
      "Insurance: Private",
      "Insurance: Self Pay",
      "Marital Status: Other/Unknown",
      "Marital Status: Single",
      "Marital Status: Widowed/Divorced/Separated",
      "Ethnicity: Asian",
      "Ethnicity: Black/African American",
      "Ethnicity: Hispanic/Latino",
      "Ethnicity: Other/Unknown",
      "Ethnicity: Unable to Obtain",
  };
  return names;
}

int static_index(const std::string& name) {
  const auto& names = static_names();
  for (int i = 0; i < kNumStatic; ++i)
    if (name == names[i]) return i;
  return -1;
}

const char* stream_name(Stream s) { return s == Stream::dp ? "dp" : "mv"; }

// --- vocabulary ------------------------------------------------------------------

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& code : id_to_code) {
    h = fnv1a64(code.data(), code.size(), h);
    h = fnv1a64("\n", 1, h);
  }
  return h;
}

// --- vital binner -----------------------------------------------------------------

VitalKind vital_kind_from_name(const std::string& name) {
  if (name == "gcs") return VitalKind::gcs;
  if (name == "heart_rate") return VitalKind::heart_rate;
  if (name == "mean_arterial_pressure") return VitalKind::mean_arterial_pressure;
  if (name == "respiratory_rate") return VitalKind::respiratory_rate;
  if (name == "temperature") return VitalKind::temperature;
  if (name == "urine_output") return VitalKind::urine_output;
  if (name == "ventilation") return VitalKind::ventilation;
  throw ConfigError("unknown vital kind '" + name + "'");
}

const char* vital_kind_name(VitalKind k) {
  switch (k) {
    case VitalKind::gcs: return "gcs";
    case VitalKind::heart_rate: return "heart_rate";
    case VitalKind::mean_arterial_pressure: return "mean_arterial_pressure";
    case VitalKind::respiratory_rate: return "respiratory_rate";
    case VitalKind::temperature: return "temperature";
    case VitalKind::urine_output: return "urine_output";
    case VitalKind::ventilation: return "ventilation";
  }
  return "?";
}

VitalBinner::VitalBinner() {
  // OASIS categorisation. Published range labels are kept in the code
  // strings; edges make the bins a half-open partition of the real line.
  kinds_ = {
      {VitalKind::gcs, {8, 14, 15}, {"3-7", "8-13", "14", "15"}},
      {VitalKind::heart_rate,
       {33, 89, 107, 126},
       {"lt33", "33-88", "89-106", "107-125", "gt125"}},
      {VitalKind::mean_arterial_pressure,
       {20.65, 51, 61.33, 143.45},
       {"lt20.65", "20.65-50.99", "51-61.32", "61.33-143.44", "gt143.44"}},
      {VitalKind::respiratory_rate,
       {6, 13, 23, 31, 45},
       {"lt6", "6-12", "13-22", "23-30", "31-44", "gt44"}},
      {VitalKind::temperature,
       {33.22, 35.94, 36.40, 36.89, 39.89},
       {"lt33.22", "33.22-35.93", "35.94-36.39", "36.40-36.88", "36.89-39.88", "gt39.88"}},
      {VitalKind::urine_output,
       {671, 1427, 2544, 6897},
       {"lt671", "671-1426.99", "1427-2543.99", "2544-6896", "gt6896"}},
  };
  const char* prefix[] = {"gcs", "hr", "map", "rr", "temp", "urine"};
  for (std::size_t ki = 0; ki < kinds_.size(); ++ki) {
    for (const auto& label : kinds_[ki].labels) {
      std::string code = std::string("vit:") + prefix[ki] + ":" + label;
      canon_[code] = static_cast<int>(codes_.size());
      codes_.push_back(std::move(code));
      kind_of_.push_back(kinds_[ki].kind);
    }
  }
  canon_["vit:vent"] = static_cast<int>(codes_.size());
  codes_.push_back("vit:vent");
  kind_of_.push_back(VitalKind::ventilation);
}

const VitalBinner& VitalBinner::standard() {
  static const VitalBinner binner;
  return binner;
}

std::optional<std::string> VitalBinner::code_for(VitalKind kind, double value) const {
  if (!std::isfinite(value)) throw ConfigError("bin_vital: value must be finite");
  if (kind == VitalKind::ventilation) {
    if (value >= 0.5) return codes_.back();
    return std::nullopt;
  }
  for (const auto& kb : kinds_) {
    if (kb.kind != kind) continue;
    const auto it = std::upper_bound(kb.edges.begin(), kb.edges.end(), value);
    std::size_t idx = static_cast<std::size_t>(it - kb.edges.begin());
    // values exactly on an edge belong to the upper bin
    if (it != kb.edges.begin() && *(it - 1) == value) {
      // upper_bound already placed it there; nothing to adjust
    }
    std::size_t base = 0;
    for (const auto& other : kinds_) {
      if (other.kind == kind) break;
      base += other.labels.size();
    }
    return codes_[base + idx];
  }
  throw ConfigError("bin_vital: unknown kind");
}

int VitalBinner::canon_index(const std::string& code) const {
  auto it = canon_.find(code);
  return it == canon_.end() ? -1 : it->second;
}

VitalKind VitalBinner::kind_of(int canon_index) const { return kind_of_.at(canon_index); }

// --- raw csv io -------------------------------------------------------------------

RawCohort read_raw(const std::string& stays_path, const std::string& events_path) {
  RawCohort raw;
  {
    std::ifstream in(stays_path);
    if (!in) throw ConfigError("cannot open " + stays_path);
    std::string line;
    std::size_t lineno = 0;
    std::string expect = "stay_id,patient_id,label";
    for (const char* n : static_names()) expect += std::string(",") + n;
    if (!std::getline(in, line)) throw ConfigError(stays_path + ": empty file");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expect)
      throw ConfigError(stays_path + ":1: unexpected header (want '" + expect + "')");
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto f = split_csv_line(line);
      if (f.size() != 3 + kNumStatic)
        throw ConfigError(stays_path + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(3 + kNumStatic) + " fields, got " +
                          std::to_string(f.size()));
      RawStay s;
      s.stay_id = f[0];
      s.patient_id = f[1];
      const double lbl = parse_double(f[2], stays_path, lineno);
      if (lbl != 0.0 && lbl != 1.0)
        throw ConfigError(stays_path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
      s.label = static_cast<int>(lbl);
      for (int i = 0; i < kNumStatic; ++i) s.statics[i] = parse_double(f[3 + i], stays_path, lineno);
      raw.stays.push_back(std::move(s));
    }
  }
  {
    std::ifstream in(events_path);
    if (!in) throw ConfigError("cannot open " + events_path);
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ConfigError(events_path + ": empty file");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "stay_id,stream,code,elapsed")
      throw ConfigError(events_path + ":1: unexpected header");
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto f = split_csv_line(line);
      if (f.size() != 4)
        throw ConfigError(events_path + ":" + std::to_string(lineno) + ": expected 4 fields");
      RawEvent e;
      e.stay_id = f[0];
      if (f[1] == "dp")
        e.stream = Stream::dp;
      else if (f[1] == "mv")
        e.stream = Stream::mv;
      else
        throw ConfigError(events_path + ":" + std::to_string(lineno) + ": unknown stream '" +
                          f[1] + "'");
      e.code = f[2];
      e.elapsed = parse_double(f[3], events_path, lineno);
      if (e.elapsed < 0.0)
        throw ConfigError(events_path + ":" + std::to_string(lineno) + ": negative elapsed");
      raw.events.push_back(std::move(e));
    }
  }
  return raw;
}

void write_raw(const RawCohort& raw, const std::string& stays_path,
               const std::string& events_path) {
  {
    std::ofstream out(stays_path);
    if (!out) throw ConfigError("cannot write " + stays_path);
    out << "stay_id,patient_id,label";
    for (const char* n : static_names()) out << ',' << n;
    out << '\n';
    for (const auto& s : raw.stays) {
      out << s.stay_id << ',' << s.patient_id << ',' << s.label;
      for (double v : s.statics) out << ',' << fmt_double(v);
      out << '\n';
    }
  }
  {
    std::ofstream out(events_path);
    if (!out) throw ConfigError("cannot write " + events_path);
    out << "stay_id,stream,code,elapsed\n";
    for (const auto& e : raw.events)
      out << e.stay_id << ',' << stream_name(e.stream) << ',' << e.code << ','
          << fmt_double(e.elapsed) << '\n';
  }
}

// --- cohort construction -------------------------------------------------------------

namespace {

Vocabulary build_vocab(const std::vector<const RawEvent*>& events, int rare_threshold,
                       const std::map<std::string, int>& stay_index) {
  // Pass 1: distinct stays per raw code.
  std::map<std::string, std::set<int>> raw_stays;
  for (const RawEvent* e : events) raw_stays[e->code].insert(stay_index.at(e->stay_id));

  // Pass 2: survivors keep their name; everything else folds into "other".
  Vocabulary v;
  v.id_to_code.push_back(Vocabulary::kOther);
  v.code_to_id[Vocabulary::kOther] = Vocabulary::kOtherId;
  std::set<int> other_stays;
  for (const auto& [code, stays] : raw_stays) {
    if (code != Vocabulary::kOther && static_cast<int>(stays.size()) >= rare_threshold) {
      v.code_to_id[code] = static_cast<int>(v.id_to_code.size());
      v.id_to_code.push_back(code);
    } else {
      other_stays.insert(stays.begin(), stays.end());
    }
  }
  v.stay_counts.assign(v.id_to_code.size(), 0);
  v.stay_counts[Vocabulary::kOtherId] = static_cast<int>(other_stays.size());
  for (const auto& [code, stays] : raw_stays) {
    auto it = v.code_to_id.find(code);
    if (it != v.code_to_id.end() && it->second != Vocabulary::kOtherId)
      v.stay_counts[it->second] = static_cast<int>(stays.size());
  }
  return v;
}

int map_code(const Vocabulary& v, const std::string& code) {
  const int id = v.id_of(code);
  return id < 0 ? Vocabulary::kOtherId : id;
}

void sort_events(std::vector<CodeEvent>& ev) {
  std::sort(ev.begin(), ev.end(), [](const CodeEvent& a, const CodeEvent& b) {
    if (a.elapsed != b.elapsed) return a.elapsed > b.elapsed;  // oldest first
    return a.code_id < b.code_id;
  });
}

}  // namespace

Cohort build_cohort(const RawCohort& raw, const LoadOptions& opts) {
  std::map<std::string, int> stay_index;
  for (std::size_t i = 0; i < raw.stays.size(); ++i) {
    if (!stay_index.emplace(raw.stays[i].stay_id, static_cast<int>(i)).second)
      throw ConfigError("duplicate stay_id '" + raw.stays[i].stay_id + "'");
  }

  std::vector<const RawEvent*> dp_raw, mv_raw;
  for (const auto& e : raw.events) {
    if (stay_index.find(e.stay_id) == stay_index.end())
      throw ConfigError("event references unknown stay_id '" + e.stay_id + "'");
    (e.stream == Stream::dp ? dp_raw : mv_raw).push_back(&e);
  }

  Cohort cohort;
  cohort.rare_threshold = opts.rare_threshold;
  cohort.vocab_dp = build_vocab(dp_raw, opts.rare_threshold, stay_index);
  cohort.vocab_mv = build_vocab(mv_raw, opts.rare_threshold, stay_index);

  const VitalBinner& binner = VitalBinner::standard();
  cohort.mv_vital_canon.assign(cohort.vocab_mv.size(), -1);
  for (int id = 0; id < cohort.vocab_mv.size(); ++id)
    cohort.mv_vital_canon[id] = binner.canon_index(cohort.vocab_mv.id_to_code[id]);

  cohort.stays.resize(raw.stays.size());
  for (std::size_t i = 0; i < raw.stays.size(); ++i) {
    StayRecord& s = cohort.stays[i];
    s.stay_id = raw.stays[i].stay_id;
    s.patient_id = raw.stays[i].patient_id;
    s.statics = raw.stays[i].statics;
    s.label = raw.stays[i].label;
  }
  for (const RawEvent* e : dp_raw)
    cohort.stays[stay_index[e->stay_id]].dp_events.push_back(
        {map_code(cohort.vocab_dp, e->code), e->elapsed});
  for (const RawEvent* e : mv_raw)
    cohort.stays[stay_index[e->stay_id]].mv_events.push_back(
        {map_code(cohort.vocab_mv, e->code), e->elapsed});

  for (auto& s : cohort.stays) {
    sort_events(s.dp_events);
    sort_events(s.mv_events);
    // Consecutive repeats of the same vital code keep only the latest
    // observation; medications are untouched.
    std::vector<CodeEvent> kept;
    kept.reserve(s.mv_events.size());
    for (std::size_t j = 0; j < s.mv_events.size(); ++j) {
      const CodeEvent& cur = s.mv_events[j];
      if (!kept.empty() && kept.back().code_id == cur.code_id &&
          cohort.mv_vital_canon[cur.code_id] >= 0) {
        kept.back() = cur;  // later (smaller elapsed) observation wins
      } else {
        kept.push_back(cur);
      }
    }
    s.mv_events = std::move(kept);
    if (opts.dp_cap > 0 && static_cast<int>(s.dp_events.size()) > opts.dp_cap)
      s.dp_events.erase(s.dp_events.begin(),
                        s.dp_events.end() - opts.dp_cap);  // drop oldest
    if (opts.mv_cap > 0 && static_cast<int>(s.mv_events.size()) > opts.mv_cap)
      s.mv_events.erase(s.mv_events.begin(), s.mv_events.end() - opts.mv_cap);
  }
  return cohort;
}

Cohort load_cohort(const std::string& stays_path, const std::string& events_path,
                   const LoadOptions& opts) {
  return build_cohort(read_raw(stays_path, events_path), opts);
}

RawCohort dump_cohort(const Cohort& cohort) {
  RawCohort raw;
  raw.stays.reserve(cohort.stays.size());
  for (const auto& s : cohort.stays) {
    RawStay rs;
    rs.stay_id = s.stay_id;
    rs.patient_id = s.patient_id;
    rs.label = s.label;
    rs.statics = s.statics;
    raw.stays.push_back(std::move(rs));
    for (const auto& e : s.dp_events)
      raw.events.push_back({s.stay_id, Stream::dp, cohort.vocab_dp.id_to_code[e.code_id], e.elapsed});
    for (const auto& e : s.mv_events)
      raw.events.push_back({s.stay_id, Stream::mv, cohort.vocab_mv.id_to_code[e.code_id], e.elapsed});
  }
  return raw;
}

// --- split ----------------------------------------------------------------------------

Split split_by_patient(const Cohort& cohort, double test_fraction, double val_fraction,
                       std::uint64_t seed) {
  if (cohort.stays.empty()) throw ConfigError("split_by_patient: empty cohort");
  if (test_fraction < 0 || val_fraction < 0 || test_fraction + val_fraction >= 1.0)
    throw ConfigError("split_by_patient: bad fractions");

  std::vector<std::string> patients;
  std::unordered_map<std::string, int> seen;
  for (const auto& s : cohort.stays) {
    if (seen.emplace(s.patient_id, 1).second) patients.push_back(s.patient_id);
  }
  RngStream rng(seed, /*stream=*/0x5714B);
  for (std::size_t i = patients.size(); i > 1; --i)
    std::swap(patients[i - 1], patients[rng.uniform_int(i)]);

  const auto n = static_cast<std::int64_t>(patients.size());
  const auto n_test = static_cast<std::int64_t>(std::llround(test_fraction * n));
  const auto n_val = static_cast<std::int64_t>(std::llround(val_fraction * n));
  std::unordered_map<std::string, int> bucket;  // 0 train, 1 val, 2 test
  for (std::int64_t i = 0; i < n; ++i)
    bucket[patients[i]] = i < n_test ? 2 : (i < n_test + n_val ? 1 : 0);

  Split split;
  for (std::size_t i = 0; i < cohort.stays.size(); ++i) {
    switch (bucket[cohort.stays[i].patient_id]) {
      case 0: split.train.push_back(static_cast<int>(i)); break;
      case 1: split.val.push_back(static_cast<int>(i)); break;
      default: split.test.push_back(static_cast<int>(i)); break;
    }
  }
  return split;
}

std::uint64_t split_hash(const Split& split) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_vec = [&h](const std::vector<int>& v, char tag) {
    h = fnv1a64(&tag, 1, h);
    for (int i : v) h = fnv1a64(&i, sizeof(i), h);
  };
  mix_vec(split.train, 't');
  mix_vec(split.val, 'v');
  mix_vec(split.test, 's');
  return h;
}

// --- synthetic cohorts -------------------------------------------------------------------

namespace {

int categorical(RngStream& rng, std::initializer_list<double> probs) {
  double u = rng.uniform01();
  int i = 0;
  for (double p : probs) {
    if (u < p) return i;
    u -= p;
    ++i;
  }
  return static_cast<int>(probs.size()) - 1;
}

std::string code_name(const char* prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%s%03d", prefix, i);
  return buf;
}

}  // namespace

SynthResult generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.n_patients < 0 || cfg.vocab_dp < 1 || cfg.vocab_mv < 1)
    throw ConfigError("generate_synthetic: bad sizes");
  if (cfg.k_planted < 0 || cfg.k_planted > cfg.vocab_dp)
    throw ConfigError("generate_synthetic: k_planted must be within the dp vocabulary");
  if (cfg.topic_size < 1) throw ConfigError("generate_synthetic: topic_size must be >= 1");

  SynthResult out;
  out.truth.delta = cfg.delta;
  out.truth.tau_days = cfg.tau_days;
  out.truth.static_effects = cfg.static_effects;
  for (int i = 0; i < cfg.k_planted; ++i) out.truth.risk_codes.push_back(code_name("D", i));

  const VitalBinner& binner = VitalBinner::standard();
  const int n_topics = std::max(1, cfg.vocab_dp / cfg.topic_size);

  RngStream rng(seed, /*stream=*/0xC0407);
  int stay_counter = 0;
  for (int p = 0; p < cfg.n_patients; ++p) {
    int n_stays = 1;
    while (n_stays < 4 && rng.bernoulli(cfg.extra_stay_prob)) ++n_stays;
    for (int s = 0; s < n_stays; ++s) {
      RawStay stay;
      char sid[16], pid[16];
      std::snprintf(sid, sizeof(sid), "s%06d", stay_counter++);
      std::snprintf(pid, sizeof(pid), "p%05d", p);
      stay.stay_id = sid;
      stay.patient_id = pid;

      auto& st = stay.statics;
      st.fill(0.0);
      st[0] = rng.exponential(cfg.mean_icu_los_days);             // icu_los_days
      st[1] = rng.exponential(2.0);                               // pre_icu_los_days
      st[2] = rng.uniform(18.0, 95.0);                            // age_years
      st[3] = rng.poisson(0.4);                                   // n_recent_admissions
      st[4] = rng.bernoulli(0.55) ? 1.0 : 0.0;                    // gender_male
      st[5] = rng.bernoulli(0.20) ? 1.0 : 0.0;                    // elective_surgery
      if (int loc = categorical(rng, {0.45, 0.20, 0.01, 0.17, 0.16, 0.01}); loc > 0)
        st[6 + (loc - 1)] = 1.0;
      if (int ins = categorical(rng, {0.50, 0.04, 0.12, 0.30, 0.04}); ins > 0)
        st[11 + (ins - 1)] = 1.0;
      if (int mar = categorical(rng, {0.48, 0.05, 0.26, 0.21}); mar > 0)
        st[15 + (mar - 1)] = 1.0;
      if (int eth = categorical(rng, {0.70, 0.03, 0.12, 0.05, 0.08, 0.02}); eth > 0)
        st[18 + (eth - 1)] = 1.0;

      const int stay_topic = static_cast<int>(rng.uniform_int(n_topics));
      const int n_dp = rng.poisson(cfg.mean_dp_events);
      double planted_signal = 0.0;
      for (int e = 0; e < n_dp; ++e) {
        int code;
        if (rng.bernoulli(cfg.topic_mix)) {
          code = stay_topic * cfg.topic_size +
                 static_cast<int>(rng.uniform_int(cfg.topic_size));
          if (code >= cfg.vocab_dp) code = static_cast<int>(rng.uniform_int(cfg.vocab_dp));
        } else {
          code = static_cast<int>(rng.uniform_int(cfg.vocab_dp));
        }
        const double elapsed = rng.exponential(cfg.mean_dp_elapsed_days);
        if (code < cfg.k_planted)
          planted_signal = std::max(planted_signal, std::exp(-elapsed / cfg.tau_days));
        out.raw.events.push_back({stay.stay_id, Stream::dp, code_name("D", code), elapsed});
      }

      const int n_mv = rng.poisson(cfg.mean_mv_events);
      const double los_hours = std::max(1.0, st[0] * 24.0);
      for (int e = 0; e < n_mv; ++e) {
        const double elapsed = rng.uniform(0.0, los_hours);
        if (rng.bernoulli(cfg.vital_fraction)) {
          const auto& codes = binner.all_codes();
          out.raw.events.push_back(
              {stay.stay_id, Stream::mv, codes[rng.uniform_int(codes.size())], elapsed});
        } else {
          out.raw.events.push_back(
              {stay.stay_id, Stream::mv,
               code_name("M", static_cast<int>(rng.uniform_int(cfg.vocab_mv))), elapsed});
        }
      }

      double logit = cfg.beta0 + cfg.delta * planted_signal;
      for (int i = 0; i < kNumStatic; ++i) logit += cfg.static_effects[i] * st[i];
      stay.label = rng.bernoulli(1.0 / (1.0 + std::exp(-logit))) ? 1 : 0;
      out.raw.stays.push_back(std::move(stay));
    }
  }
  return out;
}

void write_planted(const PlantedTruth& truth, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "code,effect\n";
  for (const auto& code : truth.risk_codes) out << code << ',' << fmt_double(truth.delta) << '\n';
}

}  // namespace readmit
