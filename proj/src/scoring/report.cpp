#include "tinyva/scoring/report.hpp"

#include <algorithm>
#include <charconv>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "tinyva/errors.hpp"

namespace tinyva::scoring {
namespace {

using json = nlohmann::ordered_json;

constexpr std::array<std::string_view, 16> kColumns = {
    "name",          "f_beta",        "precision",   "recall",       "avg_latency_ms",
    "latency_score", "flash_kib",     "memory_score", "final_score", "sensitivity",
    "specificity",   "tp",            "fn",          "fp",           "tn",
    "compliant"};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& cell, const std::string& source, const char* column) {
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw LoadError(source + ": column '" + column + "' is not a number: '" + cell + "'");
  }
  return v;
}

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

ScoreReport make_report(std::string model_name, std::span<const SubOutcome> results,
                        double avg_latency_ms, double flash_kib, double active_power_mw) {
  const ExtendedMetrics ext = extended_metrics(results);
  ScoreReport r;
  r.model_name = std::move(model_name);
  r.segments = results.size();
  r.confusion = ext.confusion;
  r.precision = precision(ext.confusion);
  r.recall = recall(ext.confusion);
  r.f_beta = f_beta(ext.confusion);
  r.avg_latency_ms = avg_latency_ms;
  r.latency_score = latency_score(avg_latency_ms);
  r.flash_kib = flash_kib;
  r.memory_score = memory_score(flash_kib);
  r.final_score = final_score(r.f_beta, r.latency_score, r.memory_score);
  r.sensitivity = ext.sensitivity;
  r.specificity = ext.specificity;
  r.per_subcategory = ext.per_subcategory;
  r.energy_uj_per_inference = active_power_mw * avg_latency_ms;
  r.latency_compliant = latency_compliant(avg_latency_ms);
  r.memory_compliant = memory_compliant(flash_kib);
  return r;
}

std::string to_json(const ScoreReport& r) {
  json j;
  j["model"] = r.model_name;
  j["seed"] = r.seed;
  j["segments"] = r.segments;
  j["confusion"] = {{"tp", r.confusion.tp}, {"fn", r.confusion.fn},
                    {"fp", r.confusion.fp}, {"tn", r.confusion.tn}};
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f_beta"] = r.f_beta;
  j["avg_latency_ms"] = r.avg_latency_ms;
  j["latency_score"] = r.latency_score;
  j["flash_kib"] = r.flash_kib;
  j["memory_score"] = r.memory_score;
  j["final_score"] = r.final_score;
  j["sensitivity"] = optional_number(r.sensitivity);
  j["specificity"] = optional_number(r.specificity);
  json per = json::object();
  for (iegm::SubCategory s : iegm::kAllSubCategories) {
    const auto& g = r.per_subcategory[iegm::index_of(s)];
    if (!g) continue;
    per[std::string(iegm::to_string(s))] = {{"count", g->count},
                                            {"correct", g->correct},
                                            {"accuracy", g->accuracy},
                                            {"insufficient", g->insufficient}};
  }
  j["per_subcategory_accuracy"] = per;
  j["energy_uj_per_inference"] = r.energy_uj_per_inference;
  j["latency_compliant"] = r.latency_compliant;
  j["memory_compliant"] = r.memory_compliant;
  j["compliant"] = r.compliant();
  return j.dump(2) + "\n";
}

std::string csv_header() {
  std::string out;
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (i) out += ',';
    out += kColumns[i];
  }
  return out;
}

std::string to_csv_row(const ScoreReport& r) {
  if (r.model_name.find_first_of(",\r\n") != std::string::npos) {
    throw ScoringError("model name '" + r.model_name + "' cannot be written to a CSV row");
  }
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  std::ostringstream out;
  out << r.model_name << ',' << format_number(r.f_beta) << ',' << format_number(r.precision) << ','
      << format_number(r.recall) << ',' << format_number(r.avg_latency_ms) << ','
      << format_number(r.latency_score) << ',' << format_number(r.flash_kib) << ','
      << format_number(r.memory_score) << ',' << format_number(r.final_score) << ','
      << opt(r.sensitivity) << ',' << opt(r.specificity) << ',' << r.confusion.tp << ','
      << r.confusion.fn << ',' << r.confusion.fp << ',' << r.confusion.tn << ','
      << (r.compliant() ? 1 : 0);
  return out.str();
}

LeaderboardRow parse_leaderboard_file(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string header, row;
  if (!std::getline(in, header) || header != csv_header()) {
    throw LoadError(source + ": missing or unexpected CSV header");
  }
  if (!std::getline(in, row) || row.empty()) throw LoadError(source + ": no data row");
  const auto cells = split_csv(row);
  if (cells.size() != kColumns.size()) {
    throw LoadError(source + ": expected " + std::to_string(kColumns.size()) + " columns, found " +
                    std::to_string(cells.size()));
  }
  LeaderboardRow r;
  r.source = source;
  r.name = cells[0];
  if (r.name.empty()) throw LoadError(source + ": empty model name");
  r.f_beta = parse_double(cells[1], source, "f_beta");
  r.avg_latency_ms = parse_double(cells[4], source, "avg_latency_ms");
  r.flash_kib = parse_double(cells[6], source, "flash_kib");
  r.final_score = parse_double(cells[8], source, "final_score");
  if (cells[15] != "0" && cells[15] != "1") throw LoadError(source + ": compliant must be 0 or 1");
  r.compliant = cells[15] == "1";
  return r;
}

void rank_leaderboard(std::vector<LeaderboardRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
    if (a.final_score != b.final_score) return a.final_score > b.final_score;
    return a.name < b.name;
  });
}

std::string leaderboard_table(std::span<const LeaderboardRow> rows) {
  std::ostringstream out;
  out << std::left << std::setw(6) << "rank" << std::setw(24) << "model" << std::right
      << std::setw(10) << "FS" << std::setw(10) << "F_beta" << std::setw(12) << "latency_ms"
      << std::setw(12) << "flash_kib" << std::setw(11) << "compliant" << '\n';
  out << std::fixed;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << std::left << std::setw(6) << (i + 1) << std::setw(24) << r.name << std::right
        << std::setprecision(2) << std::setw(10) << r.final_score << std::setprecision(4)
        << std::setw(10) << r.f_beta << std::setprecision(4) << std::setw(12) << r.avg_latency_ms
        << std::setprecision(2) << std::setw(12) << r.flash_kib << std::setw(11)
        << (r.compliant ? "yes" : "no") << '\n';
  }
  return out.str();
}

std::string leaderboard_csv(std::span<const LeaderboardRow> rows) {
  std::string out = "rank,name,final_score,f_beta,avg_latency_ms,flash_kib,compliant\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out += std::to_string(i + 1) + ',' + r.name + ',' + format_number(r.final_score) + ',' +
           format_number(r.f_beta) + ',' + format_number(r.avg_latency_ms) + ',' +
           format_number(r.flash_kib) + ',' + (r.compliant ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace tinyva::scoring
