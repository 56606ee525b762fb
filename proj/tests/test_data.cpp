#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "readmit/data.hpp"

using namespace readmit;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RawCohort tiny_raw() {
  RawCohort raw;
  for (int i = 0; i < 4; ++i) {
    RawStay s;
    s.stay_id = "s" + std::to_string(i);
    s.patient_id = "p" + std::to_string(i / 2);  // two stays per patient
    s.label = i % 2;
    s.statics.fill(0.0);
    s.statics[2] = 50.0 + i;
    raw.stays.push_back(s);
  }
  return raw;
}

}  // namespace

TEST_CASE("static feature arity and canonical names") {
  CHECK(kNumStatic == 23);
  CHECK(static_names().size() == 23);
  CHECK(static_index("age_years") == 2);
  CHECK(static_index("elective_surgery") == 5);
  CHECK(static_index("nope") == -1);
}

TEST_CASE("oasis vital bins: paper-anchored ranges") {
  const auto& b = VitalBinner::standard();
  CHECK(b.all_codes().size() == 32);

  CHECK(*b.code_for(VitalKind::temperature, 34.0) == "vit:temp:33.22-35.93");
  CHECK(*b.code_for(VitalKind::mean_arterial_pressure, 55.0) == "vit:map:51-61.32");
  CHECK(*b.code_for(VitalKind::respiratory_rate, 35.0) == "vit:rr:31-44");

  CHECK(*b.code_for(VitalKind::heart_rate, 20.0) == "vit:hr:lt33");
  CHECK(*b.code_for(VitalKind::heart_rate, 33.0) == "vit:hr:33-88");
  CHECK(*b.code_for(VitalKind::heart_rate, 300.0) == "vit:hr:gt125");
  CHECK(*b.code_for(VitalKind::gcs, 15.0) == "vit:gcs:15");
  CHECK(*b.code_for(VitalKind::gcs, 3.0) == "vit:gcs:3-7");
  CHECK(*b.code_for(VitalKind::urine_output, 1000.0) == "vit:urine:671-1426.99");

  CHECK(*b.code_for(VitalKind::ventilation, 1.0) == "vit:vent");
  CHECK(!b.code_for(VitalKind::ventilation, 0.0).has_value());

  CHECK_THROWS_AS(b.code_for(VitalKind::temperature,
                             std::numeric_limits<double>::quiet_NaN()),
                  ConfigError);
  CHECK(b.canon_index("vit:vent") == 31);
  CHECK(b.canon_index("D001") == -1);
}

TEST_CASE("every finite value lands in exactly one bin") {
  const auto& b = VitalBinner::standard();
  for (double v = -10.0; v < 300.0; v += 0.37) {
    auto code = b.code_for(VitalKind::heart_rate, v);
    REQUIRE(code.has_value());
    CHECK(b.canon_index(*code) >= 0);
  }
}

TEST_CASE("vocabulary: rare codes fold into other, relabel is idempotent") {
  RawCohort raw = tiny_raw();
  // D1 in 3 stays, D2 in 1 stay
  for (int i = 0; i < 3; ++i)
    raw.events.push_back({"s" + std::to_string(i), Stream::dp, "D1", 2.0});
  raw.events.push_back({"s3", Stream::dp, "D2", 1.0});

  LoadOptions opts;
  opts.rare_threshold = 2;
  Cohort c1 = build_cohort(raw, opts);
  CHECK(c1.vocab_dp.id_of("D1") > 0);
  CHECK(c1.vocab_dp.id_of("D2") == -1);  // folded
  CHECK(c1.vocab_dp.id_to_code[Vocabulary::kOtherId] == "other");
  CHECK(c1.stays[3].dp_events[0].code_id == Vocabulary::kOtherId);

  // relabeling again (rebuilding from the dump) changes nothing
  Cohort c2 = build_cohort(dump_cohort(c1), opts);
  CHECK(c2.vocab_dp.id_to_code == c1.vocab_dp.id_to_code);
}

TEST_CASE("a medication in 99 stays folds under the default threshold") {
  RawCohort raw;
  for (int i = 0; i < 150; ++i) {
    RawStay s;
    s.stay_id = "s" + std::to_string(i);
    s.patient_id = "p" + std::to_string(i);
    s.statics.fill(0.0);
    raw.stays.push_back(s);
    if (i < 99) raw.events.push_back({s.stay_id, Stream::mv, "rare_med", 1.0});
    if (i < 100) raw.events.push_back({s.stay_id, Stream::mv, "common_med", 2.0});
  }
  Cohort c = build_cohort(raw, {});
  CHECK(c.vocab_mv.id_of("rare_med") == -1);
  CHECK(c.vocab_mv.id_of("common_med") > 0);
}

TEST_CASE("event ordering and consecutive vital dedup") {
  RawCohort raw = tiny_raw();
  // s0: vital repeated consecutively 3x, newest kept; medication repeats kept
  raw.events.push_back({"s0", Stream::mv, "vit:hr:33-88", 9.0});
  raw.events.push_back({"s0", Stream::mv, "vit:hr:33-88", 7.0});
  raw.events.push_back({"s0", Stream::mv, "vit:hr:33-88", 5.0});
  raw.events.push_back({"s0", Stream::mv, "vit:hr:gt125", 4.0});
  raw.events.push_back({"s0", Stream::mv, "M7", 3.5});
  raw.events.push_back({"s0", Stream::mv, "M7", 3.0});
  LoadOptions opts;
  opts.rare_threshold = 1;
  Cohort c = build_cohort(raw, opts);
  const auto& ev = c.stays[0].mv_events;
  REQUIRE(ev.size() == 4);
  // oldest first
  CHECK(ev[0].elapsed == 5.0);  // run of vit:hr:33-88 collapsed to latest
  CHECK(c.vocab_mv.id_to_code[ev[0].code_id] == "vit:hr:33-88");
  CHECK(ev[1].elapsed == 4.0);
  CHECK(ev[2].elapsed == 3.5);
  CHECK(ev[3].elapsed == 3.0);

  // properties: no adjacent equal vital codes anywhere
  for (const auto& s : c.stays)
    for (std::size_t i = 1; i < s.mv_events.size(); ++i) {
      const bool vital = c.mv_vital_canon[s.mv_events[i].code_id] >= 0;
      if (vital) CHECK(s.mv_events[i].code_id != s.mv_events[i - 1].code_id);
    }
}

TEST_CASE("tie order: same elapsed sorts by ascending code id") {
  RawCohort raw = tiny_raw();
  raw.events.push_back({"s0", Stream::dp, "Db", 2.0});
  raw.events.push_back({"s0", Stream::dp, "Da", 2.0});
  LoadOptions opts;
  opts.rare_threshold = 1;
  Cohort c = build_cohort(raw, opts);
  const auto& ev = c.stays[0].dp_events;
  REQUIRE(ev.size() == 2);
  CHECK(ev[0].code_id < ev[1].code_id);
}

TEST_CASE("csv round trip preserves the cohort byte for byte") {
  const std::string dir = (fs::temp_directory_path() / "readmit_data_test").string();
  fs::create_directories(dir);
  SynthConfig cfg;
  cfg.n_patients = 40;
  cfg.vocab_dp = 30;
  cfg.vocab_mv = 15;
  SynthResult sr = generate_synthetic(cfg, 9);
  write_raw(sr.raw, dir + "/stays.csv", dir + "/events.csv");

  LoadOptions opts;
  opts.rare_threshold = 1;
  Cohort c1 = load_cohort(dir + "/stays.csv", dir + "/events.csv", opts);
  write_raw(dump_cohort(c1), dir + "/stays2.csv", dir + "/events2.csv");
  Cohort c2 = load_cohort(dir + "/stays2.csv", dir + "/events2.csv", opts);
  write_raw(dump_cohort(c2), dir + "/stays3.csv", dir + "/events3.csv");

  CHECK(slurp(dir + "/stays2.csv") == slurp(dir + "/stays3.csv"));
  CHECK(slurp(dir + "/events2.csv") == slurp(dir + "/events3.csv"));
  CHECK(c1.vocab_dp.hash() == c2.vocab_dp.hash());
  REQUIRE(c1.stays.size() == c2.stays.size());
  for (std::size_t i = 0; i < c1.stays.size(); ++i) {
    CHECK(c1.stays[i].label == c2.stays[i].label);
    CHECK(c1.stays[i].dp_events.size() == c2.stays[i].dp_events.size());
  }
}

TEST_CASE("malformed input is rejected with a line number") {
  const std::string dir = (fs::temp_directory_path() / "readmit_data_bad").string();
  fs::create_directories(dir);
  {
    std::ofstream stays(dir + "/stays.csv");
    stays << "stay_id,patient_id,label";
    for (const char* n : static_names()) stays << ',' << n;
    stays << "\ns0,p0,1";
    for (int i = 0; i < kNumStatic; ++i) stays << ",0";
    stays << "\n";
    std::ofstream events(dir + "/events.csv");
    events << "stay_id,stream,code,elapsed\ns0,xx,D1,2\n";
  }
  try {
    load_cohort(dir + "/stays.csv", dir + "/events.csv", {});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
    CHECK(std::string(e.what()).find("stream") != std::string::npos);
  }
  {
    std::ofstream events(dir + "/events.csv");
    events << "stay_id,stream,code,elapsed\ns0,dp,D1,-3\n";
  }
  CHECK_THROWS_AS(load_cohort(dir + "/stays.csv", dir + "/events.csv", {}), ConfigError);
  {
    std::ofstream events(dir + "/events.csv");
    events << "stay_id,stream,code,elapsed\nmissing,dp,D1,3\n";
  }
  CHECK_THROWS_AS(load_cohort(dir + "/stays.csv", dir + "/events.csv", {}), ConfigError);
}

TEST_CASE("empty events file still yields stays with statics") {
  RawCohort raw = tiny_raw();
  Cohort c = build_cohort(raw, {});
  CHECK(c.stays.size() == 4);
  CHECK(c.stays[0].dp_events.empty());
  CHECK(c.stays[0].statics[2] == 50.0);
  CHECK(c.vocab_dp.size() == 1);  // just "other"
}

TEST_CASE("patient-level split keeps families together") {
  SynthConfig cfg;
  cfg.n_patients = 200;
  cfg.extra_stay_prob = 0.5;
  SynthResult sr = generate_synthetic(cfg, 3);
  Cohort c = build_cohort(sr.raw, {});
  Split split = split_by_patient(c, 0.1, 0.1, 17);

  std::set<std::string> train_p, val_p, test_p;
  for (int i : split.train) train_p.insert(c.stays[i].patient_id);
  for (int i : split.val) val_p.insert(c.stays[i].patient_id);
  for (int i : split.test) test_p.insert(c.stays[i].patient_id);
  for (const auto& p : test_p) {
    CHECK(train_p.count(p) == 0);
    CHECK(val_p.count(p) == 0);
  }
  for (const auto& p : val_p) CHECK(train_p.count(p) == 0);

  CHECK(split.train.size() + split.val.size() + split.test.size() == c.stays.size());

  // determinism
  Split again = split_by_patient(c, 0.1, 0.1, 17);
  CHECK(split_hash(again) == split_hash(split));
  Split other = split_by_patient(c, 0.1, 0.1, 18);
  CHECK(split_hash(other) != split_hash(split));
}

TEST_CASE("single-patient cohort lands in one subset") {
  RawCohort raw;
  for (int i = 0; i < 3; ++i) {
    RawStay s;
    s.stay_id = "s" + std::to_string(i);
    s.patient_id = "p0";
    s.statics.fill(0.0);
    raw.stays.push_back(s);
  }
  Cohort c = build_cohort(raw, {});
  Split split = split_by_patient(c, 0.3, 0.3, 5);
  const bool one_bucket = split.train.size() == 3 || split.val.size() == 3 ||
                          split.test.size() == 3;
  CHECK(one_bucket);
}

TEST_CASE("split fractions hit the patient counts") {
  SynthConfig cfg;
  cfg.n_patients = 1000;
  cfg.extra_stay_prob = 0.0;
  SynthResult sr = generate_synthetic(cfg, 8);
  Cohort c = build_cohort(sr.raw, {});
  Split split = split_by_patient(c, 0.1, 0.1, 4);
  std::set<std::string> test_p;
  for (int i : split.test) test_p.insert(c.stays[i].patient_id);
  const double frac = static_cast<double>(test_p.size()) / 1000.0;
  CHECK(std::abs(frac - 0.10) < 0.02);
}

TEST_CASE("empty cohort split is an error") {
  Cohort c;
  CHECK_THROWS_AS(split_by_patient(c, 0.1, 0.1, 1), ConfigError);
}

TEST_CASE("synthetic generator: prevalence tracks the link function") {
  SynthConfig cfg;
  cfg.n_patients = 10000;
  cfg.extra_stay_prob = 0.0;
  cfg.delta = 0.0;  // no planted effect
  cfg.beta0 = -2.0;
  cfg.static_effects.fill(0.0);
  SynthResult sr = generate_synthetic(cfg, 31);
  double prevalence = 0.0;
  for (const auto& s : sr.raw.stays) prevalence += s.label;
  prevalence /= sr.raw.stays.size();
  const double expect = 1.0 / (1.0 + std::exp(2.0));
  CHECK(std::abs(prevalence - expect) < 0.01);
}

TEST_CASE("synthetic generator: determinism and planted truth") {
  SynthConfig cfg;
  cfg.n_patients = 50;
  SynthResult a = generate_synthetic(cfg, 77);
  SynthResult b = generate_synthetic(cfg, 77);
  REQUIRE(a.raw.events.size() == b.raw.events.size());
  for (std::size_t i = 0; i < a.raw.events.size(); ++i) {
    CHECK(a.raw.events[i].code == b.raw.events[i].code);
    CHECK(a.raw.events[i].elapsed == b.raw.events[i].elapsed);
  }
  CHECK(a.truth.risk_codes.size() == 10);
  CHECK(a.truth.risk_codes[0] == "D000");

  const std::string dir = (fs::temp_directory_path() / "readmit_synth_det").string();
  fs::create_directories(dir);
  write_raw(a.raw, dir + "/s1.csv", dir + "/e1.csv");
  write_raw(b.raw, dir + "/s2.csv", dir + "/e2.csv");
  CHECK(slurp(dir + "/s1.csv") == slurp(dir + "/s2.csv"));
  CHECK(slurp(dir + "/e1.csv") == slurp(dir + "/e2.csv"));
}

TEST_CASE("synthetic generator: zero patients gives header-only files") {
  SynthConfig cfg;
  cfg.n_patients = 0;
  SynthResult sr = generate_synthetic(cfg, 1);
  CHECK(sr.raw.stays.empty());
  CHECK(sr.raw.events.empty());
  const std::string dir = (fs::temp_directory_path() / "readmit_synth_zero").string();
  fs::create_directories(dir);
  write_raw(sr.raw, dir + "/stays.csv", dir + "/events.csv");
  CHECK(slurp(dir + "/stays.csv").find("stay_id,patient_id,label,icu_los_days") == 0);
  std::string ev = slurp(dir + "/events.csv");
  CHECK(ev == "stay_id,stream,code,elapsed\n");
}

TEST_CASE("generator rejects bad sizes") {
  SynthConfig cfg;
  cfg.k_planted = 500;
  CHECK_THROWS_AS(generate_synthetic(cfg, 1), ConfigError);
}
