#include "relsynth/toy.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "relsynth/error.hpp"
#include "relsynth/random.hpp"
#include "relsynth/timefmt.hpp"

namespace relsynth {

namespace {

double normal(Rng& rng) {
  double u1 = rng.uniform();
  while (u1 <= 0.0) u1 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * rng.uniform());
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

template <std::size_t N>
std::size_t pick(Rng& rng, const std::array<double, N>& p) {
  return rng.categorical(p);
}

DatasetSchema toy_schema() {
  DatasetSchema s;
  s.main_table = "person";
  s.tables = {
      {"person",
       "person_id",
       {{"person_id", ColumnKind::kKey, false},
        {"sex", ColumnKind::kCategorical, false},
        {"age", ColumnKind::kInteger, false},
        {"insurance", ColumnKind::kCategorical, true}},
       "person.csv"},
      {"admission",
       "admission_id",
       {{"admission_id", ColumnKind::kKey, false},
        {"person_id", ColumnKind::kKey, false},
        {"admittime", ColumnKind::kDatetime, false},
        {"admission_type", ColumnKind::kCategorical, false},
        {"los_days", ColumnKind::kContinuous, false}},
       "admission.csv"},
      {"transfer",
       "transfer_id",
       {{"transfer_id", ColumnKind::kKey, false},
        {"admission_id", ColumnKind::kKey, false},
        {"intime", ColumnKind::kDatetime, false},
        {"careunit", ColumnKind::kCategorical, false},
        {"duration_h", ColumnKind::kContinuous, false}},
       "transfer.csv"},
  };
  s.relationships = {{"admission", "person", "person_id", RelationKind::kSequential, "admittime"},
                     {"transfer", "admission", "admission_id", RelationKind::kSequential, "intime"}};
  s.templates = {{"synthesis", "synthesis.txt"}, {"evaluation", "evaluation.txt"}};
  return s;
}

constexpr std::array<const char*, 3> kTypes = {"emergency", "elective", "urgent"};
constexpr std::array<const char*, 4> kUnits = {"ED", "MICU", "SICU", "Ward"};

}  // namespace

const char* toy_synthesis_template() {
  return "[persona]\n"
         "You are a doctor working at a hospital.\n"
         "\n"
         "[references]\n"
         "Reference the following <samples_n> example patients:\n"
         "<samples>\n"
         "\n"
         "[conditioning]\n"
         "And derive a JSON patient using:\n"
         "<seed>\n"
         "\n"
         "[instruction]\n"
         "Answer with the JSON patient only.\n"
         "\n"
         "[guidelines]\n"
         "Guidelines:\n"
         "- the provided values are for the first admission/transfer, generate the rest in a realistic manner\n"
         "- for provided ranges use a random value that is within the range\n"
         "- Reason about the key events in this patient's admission; they should make sense\n"
         "- If a value would cause an unrealistic patient, adjust it slightly for realism\n";
}

const char* toy_evaluation_template() {
  return "[persona]\n"
         "You are a medical doctor.\n"
         "\n"
         "[references]\n"
         "You are given the following <samples_n> real patients as a reference:\n"
         "<samples>\n"
         "\n"
         "[task]\n"
         "Then, you are asked to comment on how real the following patient is with a rating from 1 to 5 (5 being "
         "very real):\n"
         "[candidate]\n"
         "<eval>\n";
}

RelationalDataset generate_toy(const ToyOptions& options) {
  if (options.entities == 0) throw ConfigError("toy dataset needs at least one entity");
  Rng rng(derive_seed(options.seed, "toy"));
  const auto schema = toy_schema();
  std::vector<std::vector<csv::Cell>> person(4), admission(5), transfer(5);
  std::size_t adm_id = 0, tr_id = 0;
  const double first_day = static_cast<double>(timefmt::days_from_civil(2150, 1, 1));

  for (std::size_t i = 0; i < options.entities; ++i) {
    const std::string pid = std::to_string(i + 1);
    const bool female = rng.uniform() < 0.52;
    const std::size_t group = female ? pick<3>(rng, {0.30, 0.40, 0.30}) : pick<3>(rng, {0.25, 0.40, 0.35});
    static constexpr std::array<int, 3> lo = {18, 40, 65}, span = {22, 25, 26};
    const int age = lo[group] + static_cast<int>(rng.below(static_cast<std::uint64_t>(span[group])));
    std::optional<std::string> insurance;
    if (rng.uniform() >= 0.03) {
      static constexpr std::array<std::array<double, 3>, 3> ins = {
          {{0.0, 0.55, 0.45}, {0.15, 0.60, 0.25}, {0.80, 0.15, 0.05}}};
      static constexpr std::array<const char*, 3> names = {"medicare", "private", "medicaid"};
      insurance = names[pick<3>(rng, ins[group])];
    }
    person[0].emplace_back(pid);
    person[1].emplace_back(female ? "F" : "M");
    person[2].emplace_back(std::to_string(age));
    person[3].push_back(insurance);

    static constexpr std::array<std::array<double, 6>, 3> adm_counts = {
        {{0.15, 0.55, 0.20, 0.10, 0.0, 0.0}, {0.0, 0.50, 0.30, 0.15, 0.05, 0.0}, {0.0, 0.35, 0.30, 0.20, 0.10, 0.05}}};
    const std::size_t n_adm = pick<6>(rng, adm_counts[group]);
    double day = first_day + static_cast<double>(rng.below(5 * 365));
    std::size_t type = 0;
    for (std::size_t a = 0; a < n_adm; ++a) {
      if (a == 0) {
        type = pick<3>(rng, {0.5, 0.3, 0.2});
      } else {
        static constexpr std::array<std::array<double, 3>, 3> next = {
            {{0.65, 0.15, 0.20}, {0.30, 0.60, 0.10}, {0.40, 0.20, 0.40}}};
        type = pick<3>(rng, next[type]);
        day += 10.0 + static_cast<double>(rng.below(390));
      }
      double hour = 0;
      if (type == 0) hour = static_cast<double>(rng.below(24));
      if (type == 1) hour = 7.0 + static_cast<double>(rng.below(5));
      if (type == 2) hour = 8.0 + static_cast<double>(rng.below(12));
      const double admit = day * timefmt::kSecondsPerDay + hour * 3600.0 + static_cast<double>(rng.below(60)) * 60.0;
      static constexpr std::array<double, 3> mu = {1.6, 1.0, 1.3};
      const double los = std::max(0.1, round1(std::exp(mu[type] + (group == 2 ? 0.3 : 0.0) + 0.5 * normal(rng))));
      const std::string aid = std::to_string(++adm_id);
      admission[0].emplace_back(aid);
      admission[1].emplace_back(pid);
      admission[2].emplace_back(timefmt::format_datetime(admit));
      admission[3].emplace_back(kTypes[type]);
      admission[4].emplace_back(fixed1(los));

      static constexpr std::array<std::array<double, 5>, 3> tr_counts = {
          {{0.0, 0.0, 0.4, 0.4, 0.2}, {0.0, 0.4, 0.4, 0.2, 0.0}, {0.0, 0.3, 0.5, 0.2, 0.0}}};
      const std::size_t n_tr = pick<5>(rng, tr_counts[type]);
      double t = admit;
      std::size_t unit = 0;
      for (std::size_t k = 0; k < n_tr; ++k) {
        if (k == 0) {
          static constexpr std::array<std::array<double, 4>, 3> first = {
              {{1.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.3, 0.7}, {0.5, 0.5, 0.0, 0.0}}};
          unit = pick<4>(rng, first[type]);
        } else {
          static constexpr std::array<std::array<double, 4>, 4> move = {
              {{0.0, 0.4, 0.2, 0.4}, {0.0, 0.2, 0.1, 0.7}, {0.0, 0.2, 0.0, 0.8}, {0.0, 0.3, 0.2, 0.5}}};
          unit = pick<4>(rng, move[unit]);
        }
        double dur = 0.0;
        if (unit == 0) dur = 2.0 + 6.0 * rng.uniform();
        if (unit == 1 || unit == 2) dur = std::exp(3.5 + 0.6 * normal(rng));
        if (unit == 3) dur = std::exp(4.0 + 0.5 * normal(rng));
        dur = std::max(0.1, round1(dur));
        transfer[0].emplace_back(std::to_string(++tr_id));
        transfer[1].emplace_back(aid);
        transfer[2].emplace_back(timefmt::format_datetime(t));
        transfer[3].emplace_back(kUnits[unit]);
        transfer[4].emplace_back(fixed1(dur));
        t += std::ceil(dur * 60.0) * 60.0 + 60.0;
      }
    }
  }
  std::vector<Table> tables;
  tables.emplace_back(schema.tables[0], std::move(person));
  tables.emplace_back(schema.tables[1], std::move(admission));
  tables.emplace_back(schema.tables[2], std::move(transfer));
  return RelationalDataset(schema, std::move(tables));
}

void write_toy(const RelationalDataset& dataset, const std::filesystem::path& dir) {
  save_dataset(dataset, dir);
  // save_dataset drops template references; put them back next to the tables.
  DatasetSchema schema = dataset.schema();
  for (auto& t : schema.tables) t.csv_path = t.name + ".csv";
  schema.templates = {{"synthesis", "synthesis.txt"}, {"evaluation", "evaluation.txt"}};
  std::ofstream(dir / "config.json", std::ios::trunc) << schema_to_json(schema);
  std::ofstream(dir / "synthesis.txt", std::ios::trunc) << toy_synthesis_template();
  std::ofstream(dir / "evaluation.txt", std::ios::trunc) << toy_evaluation_template();
}

}  // namespace relsynth
